#include "mmkg/sparql/evaluator.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <set>
#include <unordered_set>

namespace mmkg::sparql {

namespace {

std::string Lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

class FilterEvaluator {
 public:
  bool Eval(const Expr& e, const Lookup& lookup) {
    switch (e.kind) {
      case ExprKind::kOr:
        for (const Expr& c : e.children) {
          if (Eval(c, lookup)) return true;
        }
        return false;
      case ExprKind::kAnd:
        for (const Expr& c : e.children) {
          if (!Eval(c, lookup)) return false;
        }
        return true;
      case ExprKind::kNot:
        return !Eval(e.children.at(0), lookup);
      case ExprKind::kContains: {
        const std::string* s = StringArg(e, lookup);
        return s && s->find(e.text) != std::string::npos;
      }
      case ExprKind::kRegex: {
        const std::string* s = StringArg(e, lookup);
        return s && std::regex_search(*s, Compiled(e));
      }
      case ExprKind::kEquals: {
        const kg::Term* a = lookup(e.var);
        if (!a) return false;
        if (e.term) return *a == *e.term;
        const kg::Term* b = lookup(e.other_var);
        return b && *a == *b;
      }
      case ExprKind::kLangEquals: {
        const kg::Term* a = lookup(e.var);
        return a && a->is_literal() && Lower(a->language()) == Lower(e.text);
      }
    }
    return false;
  }

 private:
  // STR(?v) accepts IRIs and literals; a bare ?v only literals.
  static const std::string* StringArg(const Expr& e, const Lookup& lookup) {
    const kg::Term* t = lookup(e.var);
    if (!t) return nullptr;
    if (!e.str && !t->is_literal()) return nullptr;
    return &t->value();
  }

  const std::regex& Compiled(const Expr& e) {
    const std::string key = e.flags + '\x1f' + e.text;
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      auto flags = std::regex::ECMAScript;
      if (e.flags.find('i') != std::string::npos) flags |= std::regex::icase;
      it = cache_.emplace(key, std::regex(e.text, flags)).first;
    }
    return it->second;
  }

  std::map<std::string, std::regex> cache_;
};

bool Connected(const kg::TriplePattern& p, const std::set<std::string>& bound) {
  for (const kg::PatternSlot* s : {&p.subject, &p.predicate, &p.object}) {
    if (const kg::Variable* v = kg::AsVariable(*s); v && bound.count(v->name)) return true;
  }
  return false;
}

void AddVars(const kg::TriplePattern& p, std::set<std::string>& bound) {
  for (const kg::PatternSlot* s : {&p.subject, &p.predicate, &p.object}) {
    if (const kg::Variable* v = kg::AsVariable(*s)) bound.insert(v->name);
  }
}

}  // namespace

bool EvalFilter(const Expr& e, const Lookup& lookup) {
  FilterEvaluator ev;
  return ev.Eval(e, lookup);
}

std::vector<size_t> PlanJoinOrder(const Query& q, const kg::Graph& graph) {
  const size_t n = q.where.size();
  std::vector<size_t> estimate(n);
  for (size_t i = 0; i < n; ++i) estimate[i] = graph.Count(q.where[i]);

  std::vector<size_t> order;
  std::vector<bool> used(n, false);
  std::set<std::string> bound;
  while (order.size() < n) {
    bool any_connected = false;
    if (!bound.empty()) {
      for (size_t i = 0; i < n; ++i) any_connected |= !used[i] && Connected(q.where[i], bound);
    }
    size_t best = n;
    for (size_t i = 0; i < n; ++i) {
      if (used[i] || (any_connected && !Connected(q.where[i], bound))) continue;
      if (best == n || estimate[i] < estimate[best]) best = i;  // ties keep the earlier index
    }
    used[best] = true;
    order.push_back(best);
    AddVars(q.where[best], bound);
  }
  return order;
}

BindingSet Evaluate(const Query& q, const kg::Graph& graph, const EvalOptions& options) {
  const std::vector<std::string> all_vars = q.PatternVariables();
  std::map<std::string, size_t> slot_of;
  for (size_t i = 0; i < all_vars.size(); ++i) slot_of[all_vars[i]] = i;

  const std::vector<size_t> order = PlanJoinOrder(q, graph);

  // Filters run at the first level where all of their variables are bound.
  std::vector<std::vector<size_t>> filters_at(order.size() + 1);
  {
    std::set<std::string> bound;
    std::vector<bool> placed(q.filters.size(), false);
    for (size_t level = 0; level < order.size(); ++level) {
      AddVars(q.where[order[level]], bound);
      for (size_t f = 0; f < q.filters.size(); ++f) {
        if (placed[f]) continue;
        std::set<std::string> used;
        q.filters[f].CollectVariables(used);
        if (std::includes(bound.begin(), bound.end(), used.begin(), used.end())) {
          filters_at[level].push_back(f);
          placed[f] = true;
        }
      }
    }
    for (size_t f = 0; f < q.filters.size(); ++f) {
      if (!placed[f]) filters_at[order.size()].push_back(f);
    }
  }

  // Rows can stop early only when nothing reorders or deduplicates them.
  std::optional<size_t> need;
  if (!q.distinct && q.order_by.empty()) {
    std::optional<size_t> take;
    if (q.limit) take = static_cast<size_t>(*q.limit);
    if (options.max_rows) take = std::min(take.value_or(SIZE_MAX), *options.max_rows + 1);
    if (take) need = static_cast<size_t>(q.offset.value_or(0)) + *take;
  }

  FilterEvaluator filters;
  std::vector<std::optional<kg::Term>> binding(all_vars.size());
  std::vector<std::vector<kg::Term>> rows;
  size_t steps = 0;
  const Lookup lookup = [&](const std::string& name) -> const kg::Term* {
    auto it = slot_of.find(name);
    if (it == slot_of.end() || !binding[it->second]) return nullptr;
    return &*binding[it->second];
  };
  auto filters_pass = [&](size_t level) {
    for (size_t f : filters_at[level]) {
      if (!filters.Eval(q.filters[f], lookup)) return false;
    }
    return true;
  };

  std::function<bool(size_t)> solve = [&](size_t level) -> bool {
    if (level == order.size()) {
      if (order.empty() && !filters_pass(0)) return true;
      std::vector<kg::Term> row;
      row.reserve(all_vars.size());
      for (const auto& b : binding) row.push_back(*b);
      rows.push_back(std::move(row));
      return !(need && rows.size() >= *need);
    }
    const kg::TriplePattern& p = q.where[order[level]];
    kg::TriplePattern concrete = p;
    std::vector<size_t> fresh;  // slots this level binds
    for (kg::PatternSlot* s : {&concrete.subject, &concrete.predicate, &concrete.object}) {
      if (const kg::Variable* v = kg::AsVariable(*s)) {
        const size_t slot = slot_of.at(v->name);
        if (binding[slot]) {
          *s = *binding[slot];
        } else if (std::find(fresh.begin(), fresh.end(), slot) == fresh.end()) {
          fresh.push_back(slot);
        }
      }
    }
    for (const kg::Triple& t : graph.Match(concrete)) {
      if (options.deadline && (++steps & 1023) == 0 &&
          std::chrono::steady_clock::now() > *options.deadline) {
        throw QueryTimeout();
      }
      if (!kg::Unifies(concrete, t)) continue;
      const std::array<const kg::PatternSlot*, 3> slots{&concrete.subject, &concrete.predicate,
                                                        &concrete.object};
      const std::array<const kg::Term*, 3> values{&t.subject, &t.predicate, &t.object};
      for (size_t k = 0; k < 3; ++k) {
        if (const kg::Variable* v = kg::AsVariable(*slots[k])) binding[slot_of.at(v->name)] = *values[k];
      }
      const bool keep_going = !filters_pass(level) || solve(level + 1);
      for (size_t slot : fresh) binding[slot].reset();
      if (!keep_going) return false;
    }
    return true;
  };
  solve(0);

  BindingSet out;
  out.vars = q.Projection();
  std::vector<size_t> proj;
  for (const std::string& v : out.vars) proj.push_back(slot_of.at(v));

  if (q.distinct) {
    std::unordered_set<std::string> seen;
    std::vector<std::vector<kg::Term>> unique;
    for (auto& row : rows) {
      std::string key;
      for (size_t s : proj) key += row[s].key() + '\x1f';
      if (seen.insert(std::move(key)).second) unique.push_back(std::move(row));
    }
    rows = std::move(unique);
  }
  if (!q.order_by.empty()) {
    std::vector<std::pair<size_t, bool>> keys;
    for (const OrderKey& k : q.order_by) keys.emplace_back(slot_of.at(k.var), k.descending);
    std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
      for (const auto& [slot, desc] : keys) {
        const int c = a[slot].key().compare(b[slot].key());
        if (c != 0) return desc ? c > 0 : c < 0;
      }
      return false;
    });
  }
  const size_t begin = std::min(rows.size(), static_cast<size_t>(q.offset.value_or(0)));
  size_t end = rows.size();
  if (q.limit) end = std::min(end, begin + static_cast<size_t>(std::min<std::uint64_t>(*q.limit, SIZE_MAX - begin)));
  if (options.max_rows && end - begin > *options.max_rows) {
    end = begin + *options.max_rows;
    out.truncated = true;
  }
  for (size_t i = begin; i < end; ++i) {
    std::vector<kg::Term> row;
    row.reserve(proj.size());
    for (size_t s : proj) row.push_back(rows[i][s]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace mmkg::sparql
