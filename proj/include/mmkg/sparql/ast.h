#ifndef MMKG_SPARQL_AST_H_
#define MMKG_SPARQL_AST_H_

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mmkg/kg/triple.h"

namespace mmkg::sparql {

enum class ExprKind {
  kOr,
  kAnd,
  kNot,
  kContains,    // CONTAINS(STR(?v) | ?v, "text")
  kRegex,       // REGEX(STR(?v) | ?v, "pattern" [, "flags"])
  kEquals,      // ?v = term | ?v = ?w
  kLangEquals,  // LANG(?v) = "tag"
};

struct Expr {
  ExprKind kind = ExprKind::kEquals;
  std::vector<Expr> children;  // kOr, kAnd (2+), kNot (1)
  std::string var;             // left-hand variable, without '?'
  bool str = false;            // argument wrapped in STR()
  std::string text;            // needle, pattern or language tag
  std::string flags;           // regex flags
  std::optional<kg::Term> term;  // kEquals against a constant
  std::string other_var;         // kEquals against a variable

  void CollectVariables(std::set<std::string>& out) const;

  static Expr Or(std::vector<Expr> children);
  static Expr And(std::vector<Expr> children);
  static Expr Not(Expr child);
  static Expr Contains(std::string var, std::string needle, bool str = true);
  static Expr Regex(std::string var, std::string pattern, std::string flags = {}, bool str = true);
  static Expr Equals(std::string var, kg::Term term);
  static Expr EqualsVar(std::string var, std::string other);
  static Expr LangEquals(std::string var, std::string tag);
};

bool operator==(const Expr& a, const Expr& b);

struct OrderKey {
  std::string var;
  bool descending = false;
  friend bool operator==(const OrderKey&, const OrderKey&) = default;
};

struct Query {
  std::vector<std::pair<std::string, std::string>> prefixes;  // declaration order
  bool distinct = false;
  bool select_all = false;
  std::vector<std::string> select;  // empty when select_all
  std::vector<kg::TriplePattern> where;
  std::vector<Expr> filters;
  std::vector<OrderKey> order_by;
  std::optional<std::uint64_t> limit;
  std::optional<std::uint64_t> offset;

  // Variables of the WHERE patterns in first-appearance order.
  std::vector<std::string> PatternVariables() const;
  // Result columns: `select`, or PatternVariables() for SELECT *.
  std::vector<std::string> Projection() const;

  friend bool operator==(const Query&, const Query&) = default;
};

// Query text that parses back to an identical Query. Terms are written with
// full IRIs; prefix declarations are kept.
std::string Serialize(const Query& q);
std::string SerializeExpr(const Expr& e);

}  // namespace mmkg::sparql

#endif  // MMKG_SPARQL_AST_H_
