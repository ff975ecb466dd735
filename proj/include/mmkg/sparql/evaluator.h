#ifndef MMKG_SPARQL_EVALUATOR_H_
#define MMKG_SPARQL_EVALUATOR_H_

#include <chrono>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmkg/kg/graph.h"
#include "mmkg/sparql/ast.h"

namespace mmkg::sparql {

class QueryTimeout : public std::runtime_error {
 public:
  QueryTimeout() : std::runtime_error("query evaluation exceeded its deadline") {}
};

struct BindingSet {
  std::vector<std::string> vars;
  std::vector<std::vector<kg::Term>> rows;  // one Term per var
  bool truncated = false;                   // more rows existed than max_rows
};

struct EvalOptions {
  std::optional<std::chrono::steady_clock::time_point> deadline;
  // Cap applied after LIMIT; sets BindingSet::truncated when exceeded.
  std::optional<size_t> max_rows;
};

// Lookup of a variable's current value; nullptr when unbound.
using Lookup = std::function<const kg::Term*(const std::string&)>;

// SPARQL error-as-false: comparisons on mismatched types are false.
bool EvalFilter(const Expr& e, const Lookup& lookup);

// Join order chosen for `q` against `graph`: indices into q.where.
std::vector<size_t> PlanJoinOrder(const Query& q, const kg::Graph& graph);

BindingSet Evaluate(const Query& q, const kg::Graph& graph, const EvalOptions& options = {});

}  // namespace mmkg::sparql

#endif  // MMKG_SPARQL_EVALUATOR_H_
