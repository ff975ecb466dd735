#include "mmkg/sparql/parser.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <set>

#include "mmkg/util/utf8.h"

namespace mmkg::sparql {

namespace {

constexpr char kXsd[] = "http://www.w3.org/2001/XMLSchema#";
constexpr char kRdfType[] = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

enum class Tok {
  kEof,
  kIri,      // text = IRI without brackets
  kPname,    // text = prefix, aux = local part
  kVar,      // text = name
  kString,   // text = decoded value
  kLangTag,  // text = tag without '@'
  kInteger,
  kDecimal,
  kDouble,
  kWord,   // keywords, 'a', true/false, function names
  kPunct,  // text = the operator
};

struct Token {
  Tok kind = Tok::kEof;
  std::string text;
  std::string aux;
  size_t offset = 0;
};

bool IsNameByte(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '-' || c == '.' || c >= 0x80;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> Run() {
    std::vector<Token> out;
    while (true) {
      SkipSpaceAndComments();
      Token t;
      t.offset = pos_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      Next(t);
      out.push_back(std::move(t));
    }
  }

  [[noreturn]] void Fail(size_t offset, const std::string& msg) const;

 private:
  void SkipSpaceAndComments() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  char Peek(size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void Next(Token& t) {
    const char c = Peek();
    if (c == '<') {
      // IRI if a '>' closes it before any whitespace.
      size_t end = pos_ + 1;
      while (end < src_.size() && src_[end] != '>' && !std::isspace(static_cast<unsigned char>(src_[end])) &&
             src_[end] != '<' && src_[end] != '"') {
        ++end;
      }
      if (end < src_.size() && src_[end] == '>') {
        t.kind = Tok::kIri;
        t.text = std::string(src_.substr(pos_ + 1, end - pos_ - 1));
        pos_ = end + 1;
        return;
      }
    }
    if (c == '?' || c == '$') {
      size_t end = pos_ + 1;
      while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) ||
                                   src_[end] == '_' || static_cast<unsigned char>(src_[end]) >= 0x80)) {
        ++end;
      }
      if (end > pos_ + 1) {
        t.kind = Tok::kVar;
        t.text = std::string(src_.substr(pos_ + 1, end - pos_ - 1));
        pos_ = end;
        return;
      }
    }
    if (c == '"' || c == '\'') return LexString(t);
    if (c == '@' && std::isalpha(static_cast<unsigned char>(Peek(1)))) {
      size_t end = pos_ + 1;
      while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '-')) {
        ++end;
      }
      t.kind = Tok::kLangTag;
      t.text = std::string(src_.substr(pos_ + 1, end - pos_ - 1));
      pos_ = end;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        ((c == '+' || c == '-') && std::isdigit(static_cast<unsigned char>(Peek(1))))) {
      return LexNumber(t);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':' ||
        static_cast<unsigned char>(c) >= 0x80) {
      return LexName(t);
    }
    static const char* kTwo[] = {"!=", "&&", "||", "^^", "<=", ">="};
    for (const char* op : kTwo) {
      if (src_.substr(pos_, 2) == op) {
        t.kind = Tok::kPunct;
        t.text = op;
        pos_ += 2;
        return;
      }
    }
    if (std::string_view("{}().;,*=!^/|+<>?[]-").find(c) != std::string_view::npos) {
      t.kind = Tok::kPunct;
      t.text = std::string(1, c);
      ++pos_;
      return;
    }
    Fail(pos_, std::string("unexpected character '") + c + "'");
  }

  void LexName(Token& t) {
    size_t end = pos_;
    while (end < src_.size() && IsNameByte(static_cast<unsigned char>(src_[end]))) ++end;
    if (end < src_.size() && src_[end] == ':') {
      t.kind = Tok::kPname;
      t.text = std::string(src_.substr(pos_, end - pos_));
      size_t local_end = end + 1;
      while (local_end < src_.size() &&
             (IsNameByte(static_cast<unsigned char>(src_[local_end])) || src_[local_end] == ':' ||
              src_[local_end] == '%')) {
        ++local_end;
      }
      while (local_end > end + 1 && src_[local_end - 1] == '.') --local_end;
      t.aux = std::string(src_.substr(end + 1, local_end - end - 1));
      pos_ = local_end;
      return;
    }
    while (end > pos_ && src_[end - 1] == '.') --end;
    t.kind = Tok::kWord;
    t.text = std::string(src_.substr(pos_, end - pos_));
    pos_ = end;
  }

  void LexNumber(Token& t) {
    size_t end = pos_;
    if (src_[end] == '+' || src_[end] == '-') ++end;
    auto digits = [&] {
      while (end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[end]))) ++end;
    };
    digits();
    t.kind = Tok::kInteger;
    if (end + 1 < src_.size() && src_[end] == '.' && std::isdigit(static_cast<unsigned char>(src_[end + 1]))) {
      ++end;
      digits();
      t.kind = Tok::kDecimal;
    }
    if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
      size_t e = end + 1;
      if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
      if (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) {
        end = e;
        digits();
        t.kind = Tok::kDouble;
      }
    }
    t.text = std::string(src_.substr(pos_, end - pos_));
    pos_ = end;
  }

  void LexString(Token& t) {
    const char q = Peek();
    const bool long_form = Peek(1) == q && Peek(2) == q;
    const size_t start = pos_;
    pos_ += long_form ? 3 : 1;
    std::string value;
    while (true) {
      if (pos_ >= src_.size()) Fail(start, "unterminated string literal");
      const char c = src_[pos_];
      if (long_form && c == q && Peek(1) == q && Peek(2) == q) {
        pos_ += 3;
        break;
      }
      if (!long_form && c == q) {
        ++pos_;
        break;
      }
      if (!long_form && (c == '\n' || c == '\r')) Fail(pos_, "line break inside a string literal");
      if (c == '\\') {
        const char e = Peek(1);
        switch (e) {
          case 't': value += '\t'; break;
          case 'b': value += '\b'; break;
          case 'n': value += '\n'; break;
          case 'r': value += '\r'; break;
          case 'f': value += '\f'; break;
          case '"': value += '"'; break;
          case '\'': value += '\''; break;
          case '\\': value += '\\'; break;
          case 'u':
          case 'U': {
            const size_t n = e == 'u' ? 4 : 8;
            if (pos_ + 2 + n > src_.size()) Fail(pos_, "truncated \\" + std::string(1, e) + " escape");
            char32_t cp = 0;
            for (size_t i = 0; i < n; ++i) {
              const char h = src_[pos_ + 2 + i];
              if (!std::isxdigit(static_cast<unsigned char>(h))) Fail(pos_, "malformed unicode escape");
              cp = cp * 16 + static_cast<char32_t>(std::isdigit(static_cast<unsigned char>(h))
                                                       ? h - '0'
                                                       : std::tolower(h) - 'a' + 10);
            }
            if (!util::AppendUtf8(cp, value)) Fail(pos_, "escape is not a valid code point");
            pos_ += n;
            break;
          }
          default:
            Fail(pos_, std::string("unknown escape '\\") + e + "'");
        }
        pos_ += 2;
        continue;
      }
      value += c;
      ++pos_;
    }
    t.kind = Tok::kString;
    t.text = std::move(value);
  }

  std::string_view src_;
  size_t pos_ = 0;
};

std::pair<int, int> LineColumn(std::string_view src, size_t offset) {
  int line = 1, col = 1;
  for (size_t i = 0; i < offset && i < src.size(); ++i) {
    const auto c = static_cast<unsigned char>(src[i]);
    if (c == '\n') {
      ++line;
      col = 1;
    } else if ((c & 0xC0) != 0x80) {
      ++col;
    }
  }
  return {line, col};
}

thread_local std::string_view t_src;

[[noreturn]] void ThrowAt(size_t offset, const std::string& msg, const std::string& feature = {}) {
  auto [line, col] = LineColumn(t_src, offset);
  throw QueryError(line, col, msg, feature);
}

void Lexer::Fail(size_t offset, const std::string& msg) const { ThrowAt(offset, msg); }

std::string Upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Query Run() {
    Query q;
    ParsePrologue(q);
    ParseSelect(q);
    ParseWhere(q);
    ParseModifiers(q);
    if (Cur().kind != Tok::kEof) Error(Cur(), "unexpected " + Describe(Cur()) + " after the query");
    Validate(q);
    return q;
  }

 private:
  const Token& Cur() const { return toks_[i_]; }
  const Token& Ahead(size_t n) const { return toks_[std::min(i_ + n, toks_.size() - 1)]; }
  const Token& Take() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }

  bool IsKw(const Token& t, const char* kw) const { return t.kind == Tok::kWord && Upper(t.text) == kw; }
  bool IsPunct(const Token& t, const char* p) const { return t.kind == Tok::kPunct && t.text == p; }

  [[noreturn]] void Error(const Token& t, const std::string& msg) { ThrowAt(t.offset, msg); }
  [[noreturn]] void Unsupported(const Token& t, const std::string& feature) {
    ThrowAt(t.offset, "unsupported feature: " + feature, feature);
  }

  static std::string Describe(const Token& t) {
    switch (t.kind) {
      case Tok::kEof: return "end of query";
      case Tok::kIri: return "IRI <" + t.text + ">";
      case Tok::kPname: return "'" + t.text + ":" + t.aux + "'";
      case Tok::kVar: return "variable ?" + t.text;
      case Tok::kString: return "string literal";
      case Tok::kLangTag: return "language tag @" + t.text;
      case Tok::kInteger:
      case Tok::kDecimal:
      case Tok::kDouble: return "number " + t.text;
      case Tok::kWord: return "'" + t.text + "'";
      case Tok::kPunct: return "'" + t.text + "'";
    }
    return "token";
  }

  void ExpectPunct(const char* p) {
    if (!IsPunct(Cur(), p)) Error(Cur(), std::string("expected '") + p + "' but found " + Describe(Cur()));
    Take();
  }

  void ParsePrologue(Query& q) {
    while (true) {
      if (IsKw(Cur(), "PREFIX")) {
        Take();
        const Token& name = Take();
        if (name.kind != Tok::kPname || !name.aux.empty()) {
          Error(name, "expected a prefix name like 'ex:' after PREFIX");
        }
        const Token& iri = Take();
        if (iri.kind != Tok::kIri) Error(iri, "expected an IRI in <> after the prefix name");
        CheckIri(iri, iri.text);
        prefixes_[name.text] = iri.text;
        auto it = std::find_if(q.prefixes.begin(), q.prefixes.end(),
                               [&](const auto& p) { return p.first == name.text; });
        if (it != q.prefixes.end()) it->second = iri.text;
        else q.prefixes.emplace_back(name.text, iri.text);
      } else if (IsKw(Cur(), "BASE")) {
        Unsupported(Cur(), "BASE");
      } else {
        return;
      }
    }
  }

  void ParseSelect(Query& q) {
    const Token& t = Cur();
    for (const char* form : {"CONSTRUCT", "ASK", "DESCRIBE"}) {
      if (IsKw(t, form)) Unsupported(t, std::string(form) + " queries");
    }
    for (const char* upd : {"INSERT", "DELETE", "LOAD", "CLEAR", "CREATE", "DROP", "WITH", "COPY", "MOVE", "ADD"}) {
      if (IsKw(t, upd)) Unsupported(t, std::string("SPARQL Update (") + upd + ")");
    }
    if (!IsKw(t, "SELECT")) Error(t, "expected SELECT but found " + Describe(t));
    Take();
    if (IsKw(Cur(), "DISTINCT")) {
      Take();
      q.distinct = true;
    } else if (IsKw(Cur(), "REDUCED")) {
      Unsupported(Cur(), "REDUCED");
    }
    if (IsPunct(Cur(), "*")) {
      Take();
      q.select_all = true;
    } else {
      while (Cur().kind == Tok::kVar || IsPunct(Cur(), "(")) {
        if (IsPunct(Cur(), "(")) Unsupported(Cur(), "projection expressions (SELECT (... AS ?v))");
        select_pos_.push_back(Cur().offset);
        q.select.push_back(Take().text);
      }
      if (q.select.empty()) Error(Cur(), "expected '*' or variables after SELECT but found " + Describe(Cur()));
    }
    if (IsKw(Cur(), "FROM")) Unsupported(Cur(), "FROM (dataset clauses)");
  }

  void ParseWhere(Query& q) {
    if (IsKw(Cur(), "WHERE")) Take();
    if (!IsPunct(Cur(), "{")) Error(Cur(), "expected '{' to open the WHERE clause but found " + Describe(Cur()));
    Take();
    while (true) {
      const Token& t = Cur();
      if (IsPunct(t, "}")) {
        Take();
        return;
      }
      if (t.kind == Tok::kEof) Error(t, "unterminated WHERE clause: expected '}'");
      if (IsPunct(t, ".")) {
        Take();
        continue;
      }
      if (IsKw(t, "FILTER")) {
        Take();
        filter_pos_.push_back(t.offset);
        q.filters.push_back(ParseConstraint());
        continue;
      }
      for (const char* kw : {"OPTIONAL", "MINUS", "BIND", "VALUES", "SERVICE", "GRAPH", "UNION"}) {
        if (IsKw(t, kw)) Unsupported(t, kw);
      }
      if (IsPunct(t, "{")) NestedGroup();
      ParseTriples(q);
      if (IsPunct(Cur(), ".")) {
        Take();
      } else if (!IsPunct(Cur(), "}") && !IsKw(Cur(), "FILTER") && !IsPunct(Cur(), "{") &&
                 Cur().kind != Tok::kWord) {
        Error(Cur(), "expected '.' or '}' after a triple pattern but found " + Describe(Cur()));
      }
    }
  }

  [[noreturn]] void NestedGroup() {
    const Token& open = Cur();
    if (IsKw(Ahead(1), "SELECT")) Unsupported(open, "subqueries");
    size_t depth = 0, j = i_;
    for (; j < toks_.size() && toks_[j].kind != Tok::kEof; ++j) {
      if (IsPunct(toks_[j], "{")) ++depth;
      if (IsPunct(toks_[j], "}") && --depth == 0) break;
    }
    if (j + 1 < toks_.size() && IsKw(toks_[j + 1], "UNION")) Unsupported(open, "UNION");
    Unsupported(open, "nested group graph patterns");
  }

  void CheckIri(const Token& t, const std::string& iri) {
    try {
      kg::ValidateIri(iri, "iri");
    } catch (const kg::ValidationError& e) {
      Error(t, std::string("invalid IRI: ") + e.what());
    }
  }

  kg::Term Iri(const Token& t) {
    std::string iri;
    if (t.kind == Tok::kIri) {
      iri = t.text;
    } else {
      if (t.text == "_") Unsupported(t, "blank nodes");
      auto it = prefixes_.find(t.text);
      if (it == prefixes_.end()) Error(t, "undefined prefix '" + t.text + ":'");
      iri = it->second + t.aux;
    }
    CheckIri(t, iri);
    return kg::Term::Iri(iri);
  }

  std::optional<kg::Term> TryTerm() {
    const Token& t = Cur();
    switch (t.kind) {
      case Tok::kIri:
      case Tok::kPname:
        Take();
        return Iri(t);
      case Tok::kString: {
        Take();
        std::string lexical = t.text;
        try {
          if (Cur().kind == Tok::kLangTag) return kg::Term::Literal(lexical, Take().text);
          if (IsPunct(Cur(), "^^")) {
            Take();
            const Token& dt = Take();
            if (dt.kind != Tok::kIri && dt.kind != Tok::kPname) Error(dt, "expected a datatype IRI after '^^'");
            return kg::Term::Literal(lexical, {}, Iri(dt).value());
          }
          return kg::Term::Literal(lexical);
        } catch (const kg::ValidationError& e) {
          Error(t, e.what());
        }
      }
      case Tok::kInteger:
        Take();
        return kg::Term::Literal(t.text, {}, std::string(kXsd) + "integer");
      case Tok::kDecimal:
        Take();
        return kg::Term::Literal(t.text, {}, std::string(kXsd) + "decimal");
      case Tok::kDouble:
        Take();
        return kg::Term::Literal(t.text, {}, std::string(kXsd) + "double");
      case Tok::kWord:
        if (t.text == "true" || t.text == "false") {
          Take();
          return kg::Term::Literal(t.text, {}, std::string(kXsd) + "boolean");
        }
        return std::nullopt;
      default:
        return std::nullopt;
    }
  }

  void RejectBlankOrCollection(const Token& t) {
    if (IsPunct(t, "[")) Unsupported(t, "blank nodes");
    if (t.kind == Tok::kPname && t.text == "_") Unsupported(t, "blank nodes");
    if (IsPunct(t, "(")) Unsupported(t, "RDF collections");
  }

  kg::PatternSlot ParseSubject() {
    const Token& t = Cur();
    RejectBlankOrCollection(t);
    if (t.kind == Tok::kVar) return kg::Variable{Take().text};
    if (t.kind == Tok::kIri || t.kind == Tok::kPname) return Iri(Take());
    if (t.kind == Tok::kString || t.kind == Tok::kInteger || t.kind == Tok::kDecimal ||
        t.kind == Tok::kDouble) {
      Error(t, "a literal cannot be the subject of a triple pattern");
    }
    Error(t, "expected a triple pattern subject but found " + Describe(t));
  }

  kg::PatternSlot ParseVerb() {
    const Token& t = Cur();
    if (IsPunct(t, "^") || IsPunct(t, "(") || IsPunct(t, "!")) Unsupported(t, "property paths");
    kg::PatternSlot slot;
    if (t.kind == Tok::kVar) {
      slot = kg::Variable{Take().text};
    } else if (t.kind == Tok::kIri || t.kind == Tok::kPname) {
      slot = Iri(Take());
    } else if (t.kind == Tok::kWord && t.text == "a") {
      Take();
      slot = kg::Term::Iri(kRdfType);
    } else {
      Error(t, "expected a predicate but found " + Describe(t));
    }
    for (const char* op : {"/", "|", "*", "+", "?"}) {
      if (IsPunct(Cur(), op)) Unsupported(Cur(), "property paths");
    }
    return slot;
  }

  kg::PatternSlot ParseObject() {
    const Token& t = Cur();
    RejectBlankOrCollection(t);
    if (t.kind == Tok::kVar) return kg::Variable{Take().text};
    if (auto term = TryTerm()) return *term;
    Error(t, "expected an object but found " + Describe(t));
  }

  void ParseTriples(Query& q) {
    const kg::PatternSlot subject = ParseSubject();
    while (true) {
      const kg::PatternSlot verb = ParseVerb();
      while (true) {
        q.where.push_back(kg::TriplePattern{subject, verb, ParseObject()});
        if (!IsPunct(Cur(), ",")) break;
        Take();
      }
      if (!IsPunct(Cur(), ";")) return;
      while (IsPunct(Cur(), ";")) Take();
      if (IsPunct(Cur(), ".") || IsPunct(Cur(), "}")) return;
    }
  }

  // ---- filters

  Expr ParseConstraint() {
    if (IsPunct(Cur(), "(")) {
      Take();
      Expr e = ParseOr();
      ExpectPunct(")");
      return e;
    }
    if (Cur().kind == Tok::kWord && IsPunct(Ahead(1), "(")) return ParseCall();
    if (IsKw(Cur(), "NOT") || IsKw(Cur(), "EXISTS")) Unsupported(Cur(), "EXISTS / NOT EXISTS");
    Error(Cur(), "expected '(' or a function call after FILTER but found " + Describe(Cur()));
  }

  Expr ParseOr() {
    std::vector<Expr> parts{ParseAnd()};
    while (IsPunct(Cur(), "||")) {
      Take();
      parts.push_back(ParseAnd());
    }
    return parts.size() == 1 ? std::move(parts[0]) : Expr::Or(std::move(parts));
  }

  Expr ParseAnd() {
    std::vector<Expr> parts{ParseUnary()};
    while (IsPunct(Cur(), "&&")) {
      Take();
      parts.push_back(ParseUnary());
    }
    return parts.size() == 1 ? std::move(parts[0]) : Expr::And(std::move(parts));
  }

  Expr ParseUnary() {
    if (IsPunct(Cur(), "!")) {
      Take();
      return Expr::Not(ParseUnary());
    }
    return ParsePrimary();
  }

  void RejectComparison() {
    for (const char* op : {"<", ">", "<=", ">="}) {
      if (IsPunct(Cur(), op)) Unsupported(Cur(), std::string("comparison operator ") + op);
    }
    for (const char* op : {"+", "-", "*", "/"}) {
      if (IsPunct(Cur(), op)) Unsupported(Cur(), "arithmetic expressions");
    }
  }

  // After `lhs`: '=' or '!=' and the right-hand side.
  Expr ParseEquality(const std::string& var) {
    RejectComparison();
    bool negate = false;
    if (IsPunct(Cur(), "!=")) {
      negate = true;
    } else if (!IsPunct(Cur(), "=")) {
      Error(Cur(), "expected '=' or '!=' after ?" + var + " but found " + Describe(Cur()));
    }
    Take();
    Expr e;
    if (Cur().kind == Tok::kVar) {
      e = Expr::EqualsVar(var, Take().text);
    } else if (auto term = TryTerm()) {
      e = Expr::Equals(var, *term);
    } else {
      Error(Cur(), "expected a variable or RDF term after '=' but found " + Describe(Cur()));
    }
    RejectComparison();
    return negate ? Expr::Not(std::move(e)) : e;
  }

  Expr ParsePrimary() {
    const Token& t = Cur();
    if (IsPunct(t, "(")) {
      Take();
      Expr e = ParseOr();
      ExpectPunct(")");
      return e;
    }
    if (t.kind == Tok::kVar) {
      Take();
      if (IsPunct(Cur(), ")") || IsPunct(Cur(), "&&") || IsPunct(Cur(), "||")) {
        Unsupported(t, "effective boolean value of a bare variable");
      }
      return ParseEquality(t.text);
    }
    if (t.kind == Tok::kWord && IsPunct(Ahead(1), "(")) return ParseCall();
    if (auto term = TryTerm()) {
      // term = ?v
      RejectComparison();
      const bool negate = IsPunct(Cur(), "!=");
      if (!negate && !IsPunct(Cur(), "=")) Error(Cur(), "expected '=' after a constant in FILTER");
      Take();
      if (Cur().kind != Tok::kVar) Error(Cur(), "expected a variable on one side of '='");
      Expr e = Expr::Equals(Take().text, *term);
      return negate ? Expr::Not(std::move(e)) : e;
    }
    Error(t, "expected a filter expression but found " + Describe(t));
  }

  // STR(?v) or ?v
  std::pair<std::string, bool> ParseStringArg() {
    if (IsKw(Cur(), "STR")) {
      Take();
      ExpectPunct("(");
      if (Cur().kind != Tok::kVar) Error(Cur(), "expected a variable inside STR()");
      std::string v = Take().text;
      ExpectPunct(")");
      return {v, true};
    }
    if (Cur().kind == Tok::kVar) return {Take().text, false};
    if (Cur().kind == Tok::kWord && IsPunct(Ahead(1), "(")) {
      Unsupported(Cur(), "function " + Upper(Cur().text) + " as an argument");
    }
    Error(Cur(), "expected STR(?var) or ?var but found " + Describe(Cur()));
  }

  std::string ExpectString(const char* what) {
    if (Cur().kind != Tok::kString) Error(Cur(), std::string("expected a string literal for ") + what);
    std::string s = Take().text;
    if (Cur().kind == Tok::kLangTag || IsPunct(Cur(), "^^")) {
      Unsupported(Cur(), std::string("tagged or typed literal as ") + what);
    }
    return s;
  }

  Expr ParseCall() {
    const Token& name = Take();
    const std::string fn = Upper(name.text);
    static const std::set<std::string> kAggregates = {"COUNT", "SUM", "MIN", "MAX", "AVG", "SAMPLE",
                                                      "GROUP_CONCAT"};
    if (kAggregates.count(fn)) Unsupported(name, "aggregates (" + fn + ")");
    if (fn == "EXISTS") Unsupported(name, "EXISTS / NOT EXISTS");
    ExpectPunct("(");
    if (fn == "CONTAINS") {
      auto [var, str] = ParseStringArg();
      ExpectPunct(",");
      std::string needle = ExpectString("CONTAINS");
      ExpectPunct(")");
      return Expr::Contains(var, needle, str);
    }
    if (fn == "REGEX") {
      auto [var, str] = ParseStringArg();
      ExpectPunct(",");
      const Token& pat_tok = Cur();
      std::string pattern = ExpectString("REGEX pattern");
      std::string flags;
      if (IsPunct(Cur(), ",")) {
        Take();
        const Token& flag_tok = Cur();
        flags = ExpectString("REGEX flags");
        for (char f : flags) {
          if (f != 'i') Unsupported(flag_tok, std::string("regex flag '") + f + "'");
        }
      }
      ExpectPunct(")");
      try {
        std::regex(pattern, flags.empty() ? std::regex::ECMAScript
                                          : std::regex::ECMAScript | std::regex::icase);
      } catch (const std::regex_error& e) {
        Error(pat_tok, std::string("invalid regular expression: ") + e.what());
      }
      return Expr::Regex(var, pattern, flags, str);
    }
    if (fn == "LANG") {
      if (Cur().kind != Tok::kVar) Error(Cur(), "expected a variable inside LANG()");
      std::string var = Take().text;
      ExpectPunct(")");
      RejectComparison();
      bool negate = IsPunct(Cur(), "!=");
      if (!negate && !IsPunct(Cur(), "=")) Error(Cur(), "expected '=' after LANG(?" + var + ")");
      Take();
      std::string tag = ExpectString("LANG comparison");
      Expr e = Expr::LangEquals(var, tag);
      return negate ? Expr::Not(std::move(e)) : e;
    }
    if (fn == "STR") Unsupported(name, "STR() outside CONTAINS/REGEX");
    Unsupported(name, "function " + fn);
  }

  // ---- solution modifiers

  void ParseModifiers(Query& q) {
    if (IsKw(Cur(), "GROUP")) Unsupported(Cur(), "GROUP BY");
    if (IsKw(Cur(), "HAVING")) Unsupported(Cur(), "HAVING");
    if (IsKw(Cur(), "UNION")) Unsupported(Cur(), "UNION");
    if (IsKw(Cur(), "ORDER")) {
      Take();
      if (!IsKw(Cur(), "BY")) Error(Cur(), "expected BY after ORDER");
      Take();
      while (true) {
        OrderKey key;
        const Token& t = Cur();
        if (IsKw(t, "ASC") || IsKw(t, "DESC")) {
          key.descending = IsKw(t, "DESC");
          Take();
          ExpectPunct("(");
          if (Cur().kind != Tok::kVar) Unsupported(Cur(), "ORDER BY expressions");
          order_pos_.push_back(Cur().offset);
          key.var = Take().text;
          ExpectPunct(")");
        } else if (t.kind == Tok::kVar) {
          order_pos_.push_back(t.offset);
          key.var = Take().text;
        } else if (IsPunct(t, "(") || t.kind == Tok::kWord) {
          if (!q.order_by.empty() && (IsKw(t, "LIMIT") || IsKw(t, "OFFSET"))) break;
          Unsupported(t, "ORDER BY expressions");
        } else {
          break;
        }
        q.order_by.push_back(key);
      }
      if (q.order_by.empty()) Error(Cur(), "expected a variable after ORDER BY");
    }
    for (int round = 0; round < 2; ++round) {
      if (IsKw(Cur(), "LIMIT") && !q.limit) {
        Take();
        q.limit = ParseCount("LIMIT");
      } else if (IsKw(Cur(), "OFFSET") && !q.offset) {
        Take();
        q.offset = ParseCount("OFFSET");
      }
    }
    if (IsKw(Cur(), "VALUES")) Unsupported(Cur(), "VALUES");
  }

  std::uint64_t ParseCount(const char* what) {
    const Token& t = Cur();
    if (t.kind != Tok::kInteger || t.text[0] == '-' || t.text[0] == '+') {
      Error(t, std::string("expected a non-negative integer after ") + what);
    }
    Take();
    try {
      return std::stoull(t.text);
    } catch (const std::exception&) {
      Error(t, std::string(what) + " value is out of range");
    }
  }

  void Validate(const Query& q) {
    const std::vector<std::string> vars = q.PatternVariables();
    const std::set<std::string> bound(vars.begin(), vars.end());
    for (size_t i = 0; i < q.select.size(); ++i) {
      if (!bound.count(q.select[i])) {
        ThrowAt(select_pos_[i], "projected variable ?" + q.select[i] + " is not bound by WHERE");
      }
    }
    for (size_t i = 0; i < q.filters.size(); ++i) {
      std::set<std::string> used;
      q.filters[i].CollectVariables(used);
      for (const std::string& v : used) {
        if (!bound.count(v)) ThrowAt(filter_pos_[i], "filter variable ?" + v + " is not bound by WHERE");
      }
    }
    for (size_t i = 0; i < q.order_by.size(); ++i) {
      if (!bound.count(q.order_by[i].var)) {
        ThrowAt(order_pos_[i], "ORDER BY variable ?" + q.order_by[i].var + " is not bound by WHERE");
      }
    }
  }

  std::vector<Token> toks_;
  size_t i_ = 0;
  std::map<std::string, std::string> prefixes_;
  std::vector<size_t> select_pos_, filter_pos_, order_pos_;
};

}  // namespace

Query ParseQuery(std::string_view text) {
  t_src = text;
  if (size_t bad = util::FindInvalidUtf8(text); bad != std::string_view::npos) {
    ThrowAt(bad, "query is not valid UTF-8");
  }
  return Parser(Lexer(text).Run()).Run();
}

}  // namespace mmkg::sparql
