#include "mmkg/kg/triple.h"

#include <array>

namespace mmkg::kg {

Triple Triple::Make(Term subject, Term predicate, Term object) {
  if (!subject.is_iri()) throw ValidationError("subject", "subject must be an IRI");
  if (!predicate.is_iri()) throw ValidationError("predicate", "predicate must be an IRI");
  return Triple{std::move(subject), std::move(predicate), std::move(object)};
}

std::string Triple::ToNTriples() const {
  std::string out;
  out.reserve(subject.key().size() + predicate.key().size() + object.key().size() + 4);
  out += subject.key();
  out += ' ';
  out += predicate.key();
  out += ' ';
  out += object.key();
  out += " .";
  return out;
}

bool IsValidVariableName(std::string_view name) {
  if (name.empty()) return false;
  auto head = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!head(name[0])) return false;
  for (char c : name.substr(1)) {
    if (!head(c) && !(c >= '0' && c <= '9')) return false;
  }
  return true;
}

Variable MakeVariable(std::string name) {
  if (!IsValidVariableName(name)) {
    throw ValidationError("variable", "invalid variable name '" + name + "'");
  }
  return Variable{std::move(name)};
}

bool Unifies(const TriplePattern& p, const Triple& t) {
  const std::array<const PatternSlot*, 3> slots{&p.subject, &p.predicate, &p.object};
  const std::array<const Term*, 3> terms{&t.subject, &t.predicate, &t.object};
  for (size_t i = 0; i < 3; ++i) {
    if (const Term* c = AsTerm(*slots[i])) {
      if (*c != *terms[i]) return false;
      continue;
    }
    const Variable& v = *AsVariable(*slots[i]);
    for (size_t j = 0; j < i; ++j) {
      const Variable* w = AsVariable(*slots[j]);
      if (w != nullptr && w->name == v.name && *terms[j] != *terms[i]) return false;
    }
  }
  return true;
}

}  // namespace mmkg::kg
