#ifndef MMKG_KG_TERM_H_
#define MMKG_KG_TERM_H_

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mmkg::kg {

// Raised when a term or triple violates the data-model invariants. The
// message names the offending field ("subject", "object.datatype", ...).
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class TermKind : std::uint8_t { kIri, kLiteral };

// An RDF term: an absolute IRI or a literal with an optional language tag or
// datatype (never both). Blank nodes are not representable.
//
// Terms compare and order by their canonical N-Triples serialization, which
// is computed once at construction. Equality is therefore codepoint-exact on
// (lexical form, language tag, datatype).
class Term {
 public:
  static Term Iri(std::string iri);
  static Term Literal(std::string lexical, std::string language = {},
                      std::string datatype = {});

  TermKind kind() const { return kind_; }
  bool is_iri() const { return kind_ == TermKind::kIri; }
  bool is_literal() const { return kind_ == TermKind::kLiteral; }

  // IRI text for IRIs, lexical form for literals.
  const std::string& value() const { return value_; }
  const std::string& language() const { return language_; }
  const std::string& datatype() const { return datatype_; }

  // Canonical N-Triples form, e.g. `<http://x>` or `"a\"b"@en`.
  const std::string& key() const { return key_; }

  friend bool operator==(const Term& a, const Term& b) { return a.key_ == b.key_; }
  friend std::strong_ordering operator<=>(const Term& a, const Term& b) {
    return a.key_.compare(b.key_) <=> 0;
  }

 private:
  Term() = default;

  TermKind kind_ = TermKind::kIri;
  std::string value_;
  std::string language_;
  std::string datatype_;
  std::string key_;
};

// Throws ValidationError(field, ...) unless `iri` is a non-empty absolute IRI
// free of whitespace, control characters and the characters <>"{}|^`\.
void ValidateIri(std::string_view iri, const std::string& field);

// BCP47-shaped tag: [a-zA-Z]+ ('-' [a-zA-Z0-9]+)*.
bool IsValidLanguageTag(std::string_view tag);

// Appends the N-Triples string escape of `text` (quotes not included).
// Escapes `"`, `\` and control characters only; everything else, including
// non-ASCII, is copied as raw UTF-8.
void AppendEscapedString(std::string_view text, std::string& out);

// Text after the last '/' or '#', or the whole IRI if neither occurs.
std::string_view IriLocalName(std::string_view iri);

}  // namespace mmkg::kg

#endif  // MMKG_KG_TERM_H_
