#include "mmkg/sparql/ast.h"

#include <set>

namespace mmkg::sparql {

void Expr::CollectVariables(std::set<std::string>& out) const {
  if (!var.empty()) out.insert(var);
  if (!other_var.empty()) out.insert(other_var);
  for (const Expr& c : children) c.CollectVariables(out);
}

Expr Expr::Or(std::vector<Expr> children) {
  Expr e;
  e.kind = ExprKind::kOr;
  e.children = std::move(children);
  return e;
}

Expr Expr::And(std::vector<Expr> children) {
  Expr e;
  e.kind = ExprKind::kAnd;
  e.children = std::move(children);
  return e;
}

Expr Expr::Not(Expr child) {
  Expr e;
  e.kind = ExprKind::kNot;
  e.children.push_back(std::move(child));
  return e;
}

Expr Expr::Contains(std::string var, std::string needle, bool str) {
  Expr e;
  e.kind = ExprKind::kContains;
  e.var = std::move(var);
  e.text = std::move(needle);
  e.str = str;
  return e;
}

Expr Expr::Regex(std::string var, std::string pattern, std::string flags, bool str) {
  Expr e;
  e.kind = ExprKind::kRegex;
  e.var = std::move(var);
  e.text = std::move(pattern);
  e.flags = std::move(flags);
  e.str = str;
  return e;
}

Expr Expr::Equals(std::string var, kg::Term term) {
  Expr e;
  e.kind = ExprKind::kEquals;
  e.var = std::move(var);
  e.term = std::move(term);
  return e;
}

Expr Expr::EqualsVar(std::string var, std::string other) {
  Expr e;
  e.kind = ExprKind::kEquals;
  e.var = std::move(var);
  e.other_var = std::move(other);
  return e;
}

Expr Expr::LangEquals(std::string var, std::string tag) {
  Expr e;
  e.kind = ExprKind::kLangEquals;
  e.var = std::move(var);
  e.text = std::move(tag);
  return e;
}

bool operator==(const Expr& a, const Expr& b) {
  return a.kind == b.kind && a.var == b.var && a.str == b.str && a.text == b.text &&
         a.flags == b.flags && a.term == b.term && a.other_var == b.other_var &&
         a.children == b.children;
}

std::vector<std::string> Query::PatternVariables() const {
  std::vector<std::string> vars;
  std::set<std::string> seen;
  for (const kg::TriplePattern& p : where) {
    for (const kg::PatternSlot* s : {&p.subject, &p.predicate, &p.object}) {
      if (const kg::Variable* v = kg::AsVariable(*s); v && seen.insert(v->name).second) {
        vars.push_back(v->name);
      }
    }
  }
  return vars;
}

std::vector<std::string> Query::Projection() const {
  return select_all ? PatternVariables() : select;
}

namespace {

std::string Quote(const std::string& s) {
  std::string out = "\"";
  kg::AppendEscapedString(s, out);
  out += '"';
  return out;
}

std::string Slot(const kg::PatternSlot& s) {
  if (const kg::Variable* v = kg::AsVariable(s)) return "?" + v->name;
  return kg::AsTerm(s)->key();
}

std::string Arg(const Expr& e) { return e.str ? "STR(?" + e.var + ")" : "?" + e.var; }

}  // namespace

std::string SerializeExpr(const Expr& e) {
  switch (e.kind) {
    case ExprKind::kOr:
    case ExprKind::kAnd: {
      std::string out = "(";
      for (size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += e.kind == ExprKind::kOr ? " || " : " && ";
        out += SerializeExpr(e.children[i]);
      }
      return out + ")";
    }
    case ExprKind::kNot:
      return "!" + SerializeExpr(e.children.at(0));
    case ExprKind::kContains:
      return "CONTAINS(" + Arg(e) + ", " + Quote(e.text) + ")";
    case ExprKind::kRegex:
      return "REGEX(" + Arg(e) + ", " + Quote(e.text) +
             (e.flags.empty() ? "" : ", " + Quote(e.flags)) + ")";
    case ExprKind::kEquals:
      return "(?" + e.var + " = " + (e.term ? e.term->key() : "?" + e.other_var) + ")";
    case ExprKind::kLangEquals:
      return "(LANG(?" + e.var + ") = " + Quote(e.text) + ")";
  }
  return {};
}

std::string Serialize(const Query& q) {
  std::string out;
  for (const auto& [prefix, iri] : q.prefixes) out += "PREFIX " + prefix + ": <" + iri + ">\n";
  out += "SELECT ";
  if (q.distinct) out += "DISTINCT ";
  if (q.select_all) {
    out += "*";
  } else {
    for (size_t i = 0; i < q.select.size(); ++i) out += (i ? " ?" : "?") + q.select[i];
  }
  out += "\nWHERE {\n";
  for (const kg::TriplePattern& p : q.where) {
    out += "  " + Slot(p.subject) + " " + Slot(p.predicate) + " " + Slot(p.object) + " .\n";
  }
  for (const Expr& f : q.filters) out += "  FILTER(" + SerializeExpr(f) + ")\n";
  out += "}";
  if (!q.order_by.empty()) {
    out += "\nORDER BY";
    for (const OrderKey& k : q.order_by) out += (k.descending ? " DESC(?" : " ASC(?") + k.var + ")";
  }
  if (q.limit) out += "\nLIMIT " + std::to_string(*q.limit);
  if (q.offset) out += "\nOFFSET " + std::to_string(*q.offset);
  out += "\n";
  return out;
}

}  // namespace mmkg::sparql
