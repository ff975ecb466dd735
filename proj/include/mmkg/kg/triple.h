#ifndef MMKG_KG_TRIPLE_H_
#define MMKG_KG_TRIPLE_H_

#include <optional>
#include <string>
#include <variant>

#include "mmkg/kg/term.h"

namespace mmkg::kg {

struct Triple {
  Term subject;
  Term predicate;
  Term object;

  // Throws ValidationError unless subject and predicate are IRIs.
  static Triple Make(Term subject, Term predicate, Term object);

  // `<s> <p> o .` without the trailing newline.
  std::string ToNTriples() const;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct Variable {
  std::string name;

  friend bool operator==(const Variable&, const Variable&) = default;
  friend auto operator<=>(const Variable&, const Variable&) = default;
};

// Throws ValidationError unless `name` matches [A-Za-z_][A-Za-z0-9_]*.
Variable MakeVariable(std::string name);
bool IsValidVariableName(std::string_view name);

using PatternSlot = std::variant<Variable, Term>;

struct TriplePattern {
  PatternSlot subject;
  PatternSlot predicate;
  PatternSlot object;

  friend bool operator==(const TriplePattern&, const TriplePattern&) = default;
};

inline const Term* AsTerm(const PatternSlot& slot) { return std::get_if<Term>(&slot); }
inline const Variable* AsVariable(const PatternSlot& slot) {
  return std::get_if<Variable>(&slot);
}

// True if `t` unifies with `p`, including the constraint that a variable
// repeated across positions binds one term.
bool Unifies(const TriplePattern& p, const Triple& t);

}  // namespace mmkg::kg

#endif  // MMKG_KG_TRIPLE_H_
