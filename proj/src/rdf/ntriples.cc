#include "mmkg/rdf/ntriples.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "mmkg/util/utf8.h"

namespace mmkg::rdf {

namespace {

struct LineError {
  size_t offset;
  std::string message;
};

bool IsHex(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return c - 'A' + 10;
}

// Parses one N-Triples line. The line has no terminator and is valid UTF-8.
class LineParser {
 public:
  explicit LineParser(std::string_view line) : line_(line) {}

  // Empty for blank and comment-only lines.
  std::optional<kg::Triple> Parse() {
    SkipWs();
    if (AtEnd() || Peek() == '#') return std::nullopt;
    kg::Term s = ParseSubject();
    SkipWs();
    kg::Term p = ParseIriTerm("predicate");
    SkipWs();
    kg::Term o = ParseObject();
    SkipWs();
    if (AtEnd() || Peek() != '.') Fail("missing terminal '.'");
    ++pos_;
    SkipWs();
    if (!AtEnd() && Peek() != '#') Fail("unexpected content after '.'");
    return kg::Triple{std::move(s), std::move(p), std::move(o)};
  }

 private:
  bool AtEnd() const { return pos_ >= line_.size(); }
  char Peek() const { return line_[pos_]; }
  [[noreturn]] void Fail(std::string message) const { throw LineError{pos_, std::move(message)}; }
  [[noreturn]] void FailAt(size_t at, std::string message) const {
    throw LineError{at, std::move(message)};
  }

  void SkipWs() {
    while (!AtEnd() && (Peek() == ' ' || Peek() == '\t')) ++pos_;
  }

  kg::Term ParseSubject() {
    if (!AtEnd() && Peek() == '_') Fail("blank nodes are not supported");
    if (!AtEnd() && Peek() == '"') Fail("subject must be an IRI");
    return ParseIriTerm("subject");
  }

  kg::Term ParseObject() {
    if (AtEnd()) Fail("missing object");
    if (Peek() == '"') return ParseLiteral();
    if (Peek() == '_') Fail("blank nodes are not supported");
    return ParseIriTerm("object");
  }

  kg::Term ParseIriTerm(const char* what) {
    size_t start = pos_;
    std::string iri = ParseIriRef(what);
    try {
      return kg::Term::Iri(std::move(iri));
    } catch (const kg::ValidationError& e) {
      FailAt(start, std::string(what) + ": " + e.what());
    }
  }

  std::string ParseIriRef(const char* what) {
    if (AtEnd() || Peek() != '<') Fail(std::string("expected IRI for ") + what);
    size_t start = pos_;
    ++pos_;
    std::string iri;
    while (true) {
      if (AtEnd()) FailAt(start, "unterminated IRI");
      char c = Peek();
      if (c == '>') break;
      if (c == '\\') {
        AppendUchar(iri);
        continue;
      }
      iri += c;
      ++pos_;
    }
    ++pos_;
    if (iri.find(':') == std::string::npos) FailAt(start, "relative IRI <" + iri + ">");
    return iri;
  }

  // \uXXXX or \UXXXXXXXX at pos_.
  void AppendUchar(std::string& out) {
    size_t start = pos_;
    if (pos_ + 1 >= line_.size()) FailAt(start, "dangling escape");
    char kind = line_[pos_ + 1];
    size_t digits = kind == 'u' ? 4 : kind == 'U' ? 8 : 0;
    if (digits == 0) FailAt(start, std::string("invalid escape '\\") + kind + "'");
    if (pos_ + 2 + digits > line_.size()) FailAt(start, "truncated unicode escape");
    char32_t cp = 0;
    for (size_t i = 0; i < digits; ++i) {
      char h = line_[pos_ + 2 + i];
      if (!IsHex(h)) FailAt(start, "non-hex digit in unicode escape");
      cp = (cp << 4) | static_cast<char32_t>(HexValue(h));
    }
    if (!util::AppendUtf8(cp, out)) FailAt(start, "escape is not a Unicode scalar value");
    pos_ += 2 + digits;
  }

  kg::Term ParseLiteral() {
    size_t start = pos_;
    ++pos_;
    std::string lexical;
    while (true) {
      if (AtEnd()) FailAt(start, "unterminated literal");
      char c = Peek();
      if (c == '"') break;
      if (c == '\\') {
        if (pos_ + 1 >= line_.size()) FailAt(pos_, "unterminated literal");
        char e = line_[pos_ + 1];
        switch (e) {
          case 't': lexical += '\t'; break;
          case 'b': lexical += '\b'; break;
          case 'n': lexical += '\n'; break;
          case 'r': lexical += '\r'; break;
          case 'f': lexical += '\f'; break;
          case '"': lexical += '"'; break;
          case '\'': lexical += '\''; break;
          case '\\': lexical += '\\'; break;
          case 'u':
          case 'U':
            AppendUchar(lexical);
            continue;
          default:
            Fail(std::string("invalid escape '\\") + e + "'");
        }
        pos_ += 2;
        continue;
      }
      lexical += c;
      ++pos_;
    }
    ++pos_;
    std::string language, datatype;
    if (!AtEnd() && Peek() == '@') {
      ++pos_;
      size_t tag_start = pos_;
      while (!AtEnd() && (std::isalnum(static_cast<unsigned char>(Peek())) || Peek() == '-')) {
        ++pos_;
      }
      language = std::string(line_.substr(tag_start, pos_ - tag_start));
      if (!kg::IsValidLanguageTag(language)) FailAt(tag_start, "malformed language tag");
    } else if (pos_ + 1 < line_.size() && Peek() == '^' && line_[pos_ + 1] == '^') {
      pos_ += 2;
      size_t dt_start = pos_;
      datatype = ParseIriRef("datatype");
      try {
        kg::ValidateIri(datatype, "datatype");
      } catch (const kg::ValidationError& e) {
        FailAt(dt_start, e.what());
      }
    }
    return kg::Term::Literal(std::move(lexical), std::move(language), std::move(datatype));
  }

  std::string_view line_;
  size_t pos_ = 0;
};

std::string Excerpt(std::string_view line) {
  constexpr size_t kMax = 120;
  if (line.size() <= kMax) return std::string(line);
  // Do not cut inside a UTF-8 sequence.
  size_t cut = kMax;
  while (cut > 0 && (static_cast<unsigned char>(line[cut]) & 0xC0) == 0x80) --cut;
  return std::string(line.substr(0, cut)) + "...";
}

}  // namespace

std::string ParseDiagnostic::ToString() const {
  std::ostringstream os;
  os << "line " << line << ", column " << column << ": " << message;
  if (!excerpt.empty()) os << " | " << excerpt;
  return os.str();
}

ParseResult ParseNTriples(std::string_view input, ParseMode mode) {
  ParseResult result;
  int line_no = 0;
  size_t pos = 0;
  while (pos < input.size()) {
    size_t eol = input.find('\n', pos);
    if (eol == std::string_view::npos) eol = input.size();
    std::string_view line = input.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::optional<LineError> error;
    std::optional<kg::Triple> triple;
    if (size_t bad = util::FindInvalidUtf8(line); bad != std::string_view::npos) {
      error = LineError{bad, "invalid UTF-8"};
    } else {
      try {
        triple = LineParser(line).Parse();
      } catch (const LineError& e) {
        error = e;
      }
    }
    if (error) {
      // Errors detected at end of line point at the last character.
      size_t offset = line.empty() ? 0 : std::min(error->offset, line.size() - 1);
      result.diagnostics.push_back(
          ParseDiagnostic{line_no, static_cast<int>(offset) + 1, error->message, Excerpt(line)});
      if (mode == ParseMode::kStrict) {
        result.complete = false;
        return result;
      }
      continue;
    }
    if (triple) result.triples.push_back(std::move(*triple));
  }
  return result;
}

ParseResult ParseNTriples(std::istream& in, ParseMode mode) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseNTriples(buffer.str(), mode);
}

std::string SerializeNTriples(std::span<const kg::Triple> triples) {
  std::string out;
  for (const kg::Triple& t : triples) {
    out += t.ToNTriples();
    out += '\n';
  }
  return out;
}

void WriteNTriples(std::span<const kg::Triple> triples, std::ostream& out) {
  for (const kg::Triple& t : triples) out << t.ToNTriples() << '\n';
}

kg::Graph LoadGraph(const std::string& path, ParseMode mode,
                    std::vector<ParseDiagnostic>* diagnostics) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  ParseResult parsed = ParseNTriples(in, mode);
  if (diagnostics != nullptr) *diagnostics = parsed.diagnostics;
  if (!parsed.complete) {
    throw std::runtime_error(path + ": " + parsed.diagnostics.front().ToString());
  }
  kg::Graph graph;
  graph.InsertAll(parsed.triples);
  return graph;
}

void SaveGraph(const kg::Graph& graph, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  WriteNTriples(graph.Triples(), out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace mmkg::rdf
