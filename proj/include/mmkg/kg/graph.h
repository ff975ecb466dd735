#ifndef MMKG_KG_GRAPH_H_
#define MMKG_KG_GRAPH_H_

#include <array>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <span>
#include <vector>

#include "mmkg/kg/triple.h"

namespace mmkg::kg {

enum class IndexOrder { kSpo, kPos, kOsp };

// In-memory triple store with subject-, predicate- and object-first indexes.
//
// Set semantics: a triple is stored at most once. All enumerations are in
// lexicographic order of the (subject, predicate, object) canonical
// serializations. The store follows a many-readers / one-writer discipline
// internally; results of Match() are materialized snapshots that later writes
// do not affect.
class Graph {
 public:
  Graph();
  ~Graph();
  Graph(const Graph& other);
  Graph& operator=(const Graph& other);
  Graph(Graph&& other) noexcept;
  Graph& operator=(Graph&& other) noexcept;

  // Returns false iff the triple was already present. Throws ValidationError
  // for a non-IRI subject or predicate.
  bool Insert(const Triple& t);
  size_t InsertAll(std::span<const Triple> triples);

  std::vector<Triple> Match(const TriplePattern& p) const;
  // Number of stored triples agreeing with the concrete positions of `p`
  // (variables are wildcards). Used for join ordering.
  size_t Count(const TriplePattern& p) const;

  bool Contains(const Triple& t) const;
  // True if `term` occurs in any position of any triple.
  bool Mentions(const Term& term) const;
  size_t size() const;
  bool empty() const { return size() == 0; }

  // All triples in (s, p, o) order.
  std::vector<Triple> Triples() const;
  // Raw enumeration of one index, converted back to (s, p, o) triples in
  // that index's native order. Exposed for invariant checks.
  std::vector<Triple> EnumerateIndex(IndexOrder order) const;

  friend bool operator==(const Graph& a, const Graph& b);

 private:
  struct State;
  std::unique_ptr<State> state_;
  mutable std::shared_mutex mu_;
};

}  // namespace mmkg::kg

#endif  // MMKG_KG_GRAPH_H_
