#include "mmkg/kg/term.h"

#include <cstdio>

namespace mmkg::kg {

namespace {

bool IsAsciiAlpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool IsAsciiDigit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

void ValidateIri(std::string_view iri, const std::string& field) {
  if (iri.empty()) throw ValidationError(field, "IRI is empty");
  for (unsigned char c : iri) {
    if (c <= 0x20 || c == 0x7F) {
      throw ValidationError(field, "IRI contains whitespace or a control character");
    }
    switch (c) {
      case '<': case '>': case '"': case '{': case '}':
      case '|': case '^': case '`': case '\\':
        throw ValidationError(field, std::string("IRI contains forbidden character '") +
                                         static_cast<char>(c) + "'");
      default:
        break;
    }
  }
  // scheme ":" ...
  if (!IsAsciiAlpha(iri[0])) throw ValidationError(field, "IRI is not absolute (no scheme)");
  size_t i = 1;
  while (i < iri.size() && (IsAsciiAlpha(iri[i]) || IsAsciiDigit(iri[i]) || iri[i] == '+' ||
                            iri[i] == '-' || iri[i] == '.')) {
    ++i;
  }
  if (i >= iri.size() || iri[i] != ':') {
    throw ValidationError(field, "IRI is not absolute (no scheme)");
  }
}

bool IsValidLanguageTag(std::string_view tag) {
  size_t i = 0;
  size_t n = 0;
  while (i < tag.size() && IsAsciiAlpha(tag[i])) ++i, ++n;
  if (n == 0) return false;
  while (i < tag.size()) {
    if (tag[i] != '-') return false;
    ++i;
    n = 0;
    while (i < tag.size() && (IsAsciiAlpha(tag[i]) || IsAsciiDigit(tag[i]))) ++i, ++n;
    if (n == 0) return false;
  }
  return true;
}

void AppendEscapedString(std::string_view text, std::string& out) {
  for (unsigned char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (c < 0x20 || c == 0x7F) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04X", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
}

std::string_view IriLocalName(std::string_view iri) {
  auto pos = iri.find_last_of("/#");
  if (pos == std::string_view::npos || pos + 1 == iri.size()) return iri;
  return iri.substr(pos + 1);
}

Term Term::Iri(std::string iri) {
  ValidateIri(iri, "iri");
  Term t;
  t.kind_ = TermKind::kIri;
  t.key_.reserve(iri.size() + 2);
  t.key_ += '<';
  t.key_ += iri;
  t.key_ += '>';
  t.value_ = std::move(iri);
  return t;
}

Term Term::Literal(std::string lexical, std::string language, std::string datatype) {
  if (!language.empty() && !datatype.empty()) {
    throw ValidationError("literal", "a literal carries at most one of language tag and datatype");
  }
  if (!language.empty() && !IsValidLanguageTag(language)) {
    throw ValidationError("literal.language", "malformed language tag '" + language + "'");
  }
  if (!datatype.empty()) ValidateIri(datatype, "literal.datatype");
  Term t;
  t.kind_ = TermKind::kLiteral;
  t.key_.reserve(lexical.size() + 2);
  t.key_ += '"';
  AppendEscapedString(lexical, t.key_);
  t.key_ += '"';
  if (!language.empty()) {
    t.key_ += '@';
    t.key_ += language;
  } else if (!datatype.empty()) {
    t.key_ += "^^<";
    t.key_ += datatype;
    t.key_ += '>';
  }
  t.value_ = std::move(lexical);
  t.language_ = std::move(language);
  t.datatype_ = std::move(datatype);
  return t;
}

}  // namespace mmkg::kg
