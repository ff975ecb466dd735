#include "mmkg/kg/graph.h"

#include <algorithm>
#include <deque>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>

namespace mmkg::kg {

namespace {

using TermId = std::uint32_t;
using Key = std::array<TermId, 3>;

struct Dictionary {
  std::deque<Term> terms;
  std::unordered_map<std::string, TermId> ids;

  TermId Intern(const Term& t) {
    auto [it, added] = ids.try_emplace(t.key(), static_cast<TermId>(terms.size()));
    if (added) terms.push_back(t);
    return it->second;
  }

  std::optional<TermId> Find(const Term& t) const {
    auto it = ids.find(t.key());
    if (it == ids.end()) return std::nullopt;
    return it->second;
  }

  const std::string& KeyOf(TermId id) const { return terms[id].key(); }
};

// Leading components of an index key; compared against full keys on the
// first `length` positions only.
struct Prefix {
  Key ids{};
  size_t length = 0;
};

// Orders keys by the canonical serialization of their terms.
struct KeyLess {
  using is_transparent = void;
  const Dictionary* dict;

  int CompareIds(TermId a, TermId b) const {
    if (a == b) return 0;
    return dict->KeyOf(a).compare(dict->KeyOf(b)) < 0 ? -1 : 1;
  }
  bool operator()(const Key& a, const Key& b) const {
    for (size_t i = 0; i < 3; ++i) {
      int c = CompareIds(a[i], b[i]);
      if (c != 0) return c < 0;
    }
    return false;
  }
  bool operator()(const Key& a, const Prefix& b) const {
    for (size_t i = 0; i < b.length; ++i) {
      int c = CompareIds(a[i], b.ids[i]);
      if (c != 0) return c < 0;
    }
    return false;
  }
  bool operator()(const Prefix& a, const Key& b) const {
    for (size_t i = 0; i < a.length; ++i) {
      int c = CompareIds(a.ids[i], b[i]);
      if (c != 0) return c < 0;
    }
    return false;
  }
};

using Index = std::set<Key, KeyLess>;

// Position of subject/predicate/object within each index's key.
constexpr std::array<size_t, 3> kSpoLayout{0, 1, 2};
constexpr std::array<size_t, 3> kPosLayout{2, 0, 1};
constexpr std::array<size_t, 3> kOspLayout{1, 2, 0};

Key ToIndexKey(const Key& spo, const std::array<size_t, 3>& layout) {
  Key k{};
  for (size_t i = 0; i < 3; ++i) k[layout[i]] = spo[i];
  return k;
}

Key FromIndexKey(const Key& k, const std::array<size_t, 3>& layout) {
  return Key{k[layout[0]], k[layout[1]], k[layout[2]]};
}

}  // namespace

struct Graph::State {
  std::unique_ptr<Dictionary> dict = std::make_unique<Dictionary>();
  Index spo{KeyLess{dict.get()}};
  Index pos{KeyLess{dict.get()}};
  Index osp{KeyLess{dict.get()}};

  Triple ToTriple(const Key& spo_key) const {
    return Triple{dict->terms[spo_key[0]], dict->terms[spo_key[1]], dict->terms[spo_key[2]]};
  }

  bool Insert(const Triple& t) {
    Key key{dict->Intern(t.subject), dict->Intern(t.predicate), dict->Intern(t.object)};
    if (!spo.insert(key).second) return false;
    pos.insert(ToIndexKey(key, kPosLayout));
    osp.insert(ToIndexKey(key, kOspLayout));
    return true;
  }

  // Resolves the concrete positions of `p`. Returns false if some concrete
  // term is unknown, in which case nothing can match.
  bool Resolve(const TriplePattern& p, std::array<std::optional<TermId>, 3>& bound) const {
    const std::array<const PatternSlot*, 3> slots{&p.subject, &p.predicate, &p.object};
    for (size_t i = 0; i < 3; ++i) {
      if (const Term* t = AsTerm(*slots[i])) {
        bound[i] = dict->Find(*t);
        if (!bound[i]) return false;
      }
    }
    return true;
  }

  // Picks the index whose key order starts with the concrete positions, and
  // returns it with the matching prefix.
  std::pair<const Index*, const std::array<size_t, 3>*> Choose(
      const std::array<std::optional<TermId>, 3>& b, Prefix& prefix) const {
    const bool s = b[0].has_value(), p = b[1].has_value(), o = b[2].has_value();
    if (s && !p && o) {
      prefix = Prefix{{*b[2], *b[0], 0}, 2};
      return {&osp, &kOspLayout};
    }
    if (s) {
      prefix.ids = {*b[0], p ? *b[1] : 0, o ? *b[2] : 0};
      prefix.length = p ? (o ? 3 : 2) : 1;
      return {&spo, &kSpoLayout};
    }
    if (p) {
      prefix.ids = {*b[1], o ? *b[2] : 0, 0};
      prefix.length = o ? 2 : 1;
      return {&pos, &kPosLayout};
    }
    if (o) {
      prefix = Prefix{{*b[2], 0, 0}, 1};
      return {&osp, &kOspLayout};
    }
    prefix.length = 0;
    return {&spo, &kSpoLayout};
  }
};

Graph::Graph() : state_(std::make_unique<State>()) {}
Graph::~Graph() = default;

Graph::Graph(const Graph& other) : state_(std::make_unique<State>()) {
  std::shared_lock lock(other.mu_);
  for (const Key& k : other.state_->spo) state_->Insert(other.state_->ToTriple(k));
}

Graph& Graph::operator=(const Graph& other) {
  if (this == &other) return *this;
  Graph copy(other);
  std::unique_lock lock(mu_);
  state_ = std::move(copy.state_);
  return *this;
}

Graph::Graph(Graph&& other) noexcept : state_(std::make_unique<State>()) {
  std::unique_lock lock(other.mu_);
  std::swap(state_, other.state_);
}

Graph& Graph::operator=(Graph&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  std::swap(state_, other.state_);
  return *this;
}

bool Graph::Insert(const Triple& t) {
  // Validate before taking the lock so no partial state is ever observable.
  if (!t.subject.is_iri()) throw ValidationError("subject", "subject must be an IRI");
  if (!t.predicate.is_iri()) throw ValidationError("predicate", "predicate must be an IRI");
  std::unique_lock lock(mu_);
  return state_->Insert(t);
}

size_t Graph::InsertAll(std::span<const Triple> triples) {
  size_t added = 0;
  for (const Triple& t : triples) added += Insert(t) ? 1 : 0;
  return added;
}

std::vector<Triple> Graph::Match(const TriplePattern& p) const {
  std::shared_lock lock(mu_);
  std::array<std::optional<TermId>, 3> bound;
  if (!state_->Resolve(p, bound)) return {};
  Prefix prefix;
  auto [index, layout] = state_->Choose(bound, prefix);

  std::vector<Triple> out;
  auto emit = [&](const Key& k) {
    Triple t = state_->ToTriple(FromIndexKey(k, *layout));
    if (Unifies(p, t)) out.push_back(std::move(t));
  };
  if (prefix.length == 0) {
    for (const Key& k : *index) emit(k);
  } else {
    auto [lo, hi] = index->equal_range(prefix);
    for (auto it = lo; it != hi; ++it) emit(*it);
  }
  if (index != &state_->spo) std::sort(out.begin(), out.end());
  return out;
}

size_t Graph::Count(const TriplePattern& p) const {
  std::shared_lock lock(mu_);
  std::array<std::optional<TermId>, 3> bound;
  if (!state_->Resolve(p, bound)) return 0;
  Prefix prefix;
  auto [index, layout] = state_->Choose(bound, prefix);
  if (prefix.length == 0) return index->size();
  auto [lo, hi] = index->equal_range(prefix);
  return static_cast<size_t>(std::distance(lo, hi));
}

bool Graph::Contains(const Triple& t) const {
  return Count(TriplePattern{t.subject, t.predicate, t.object}) == 1;
}

bool Graph::Mentions(const Term& term) const {
  const Variable s{"s"}, p{"p"}, o{"o"};
  if (term.is_iri() && (Count({term, p, o}) > 0 || Count({s, term, o}) > 0)) return true;
  return Count({s, p, term}) > 0;
}

size_t Graph::size() const {
  std::shared_lock lock(mu_);
  return state_->spo.size();
}

std::vector<Triple> Graph::Triples() const { return EnumerateIndex(IndexOrder::kSpo); }

std::vector<Triple> Graph::EnumerateIndex(IndexOrder order) const {
  std::shared_lock lock(mu_);
  const Index* index = &state_->spo;
  const std::array<size_t, 3>* layout = &kSpoLayout;
  if (order == IndexOrder::kPos) index = &state_->pos, layout = &kPosLayout;
  if (order == IndexOrder::kOsp) index = &state_->osp, layout = &kOspLayout;
  std::vector<Triple> out;
  out.reserve(index->size());
  for (const Key& k : *index) out.push_back(state_->ToTriple(FromIndexKey(k, *layout)));
  return out;
}

bool operator==(const Graph& a, const Graph& b) {
  if (&a == &b) return true;
  return a.Triples() == b.Triples();
}

}  // namespace mmkg::kg
