#include "support.h"

#include <stdlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mmkg/ingest/content_store.h"
#include "mmkg/ingest/image_source.h"
#include "mmkg/ingest/ingestor.h"
#include "mmkg/rdf/ntriples.h"
#include "mmkg/select/entity_selector.h"
#include "mmkg/util/utf8.h"

namespace mmkg::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "mmkg-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path FixtureDir() { return MMKG_FIXTURE_DIR; }

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& p, const std::string& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------- generators

namespace {

const char* const kIriChars = "abcdefghijklmnopqrstuvwxyz0123456789-_.~/%:";

std::string RandomText(util::Rng& rng, size_t max_len) {
  static const std::vector<char32_t> pool = {
      'a', 'b', 'Z', '0', ' ', '"', '\\', '\n', '\r', '\t', 0x01, 0x1f, 0x7f, '#', '<', '>',
      '@', '^', 0xe9, 0x5bb6, 0x71d5, 0x5b9d, 0x9a6c, 0x1f600, 0x10ffff, 0xfffd};
  std::string out;
  const size_t n = rng.Below(max_len + 1);
  for (size_t i = 0; i < n; ++i) util::AppendUtf8(pool[rng.Below(pool.size())], out);
  return out;
}

}  // namespace

kg::Term RandomIri(util::Rng& rng) {
  static const char* const schemes[] = {"http://mmkb.test/", "https://example.org/a#", "urn:x:"};
  std::string iri = schemes[rng.Below(3)];
  const size_t n = 1 + rng.Below(12);
  const std::string chars = kIriChars;
  for (size_t i = 0; i < n; ++i) iri += chars[rng.Below(chars.size())];
  if (rng.Below(4) == 0) iri += "\xe5\xae\xb6";  // raw non-ASCII is legal in IRIs
  return kg::Term::Iri(iri);
}

kg::Term RandomLiteral(util::Rng& rng) {
  std::string lex = RandomText(rng, 10);
  switch (rng.Below(3)) {
    case 0:
      return kg::Term::Literal(lex);
    case 1: {
      static const char* const tags[] = {"en", "zh", "zh-Hans", "en-GB", "x-private1"};
      return kg::Term::Literal(lex, tags[rng.Below(5)]);
    }
    default: {
      static const char* const types[] = {"http://www.w3.org/2001/XMLSchema#integer",
                                          "http://www.w3.org/2001/XMLSchema#decimal",
                                          "http://mmkb.test/dt/custom"};
      return kg::Term::Literal(lex, "", types[rng.Below(3)]);
    }
  }
}

kg::Triple RandomTriple(util::Rng& rng) {
  kg::Term o = rng.Below(2) ? RandomIri(rng) : RandomLiteral(rng);
  return kg::Triple::Make(RandomIri(rng), RandomIri(rng), std::move(o));
}

Vocabulary SmallVocabulary(util::Rng& rng, size_t entities, size_t predicates) {
  Vocabulary v;
  for (size_t i = 0; i < entities; ++i) {
    v.subjects.push_back(kg::Term::Iri("http://mmkb.test/e/" + std::to_string(i)));
  }
  static const char* const pnames[] = {"name", "type", "withImage", "category", "near", "label"};
  for (size_t i = 0; i < predicates; ++i) {
    v.predicates.push_back(kg::Term::Iri(std::string("http://mmkb.test/p/") + pnames[i % 6] +
                                         (i >= 6 ? std::to_string(i) : "")));
  }
  v.objects = v.subjects;
  static const char* const words[] = {"BMW X1", "宝马X1", "bmw", "Aves", "家燕", "alpha", "Beta", "a1b2"};
  for (const char* w : words) {
    v.objects.push_back(kg::Term::Literal(w));
    if (rng.Below(2)) v.objects.push_back(kg::Term::Literal(w, rng.Below(2) ? "en" : "ZH"));
  }
  v.objects.push_back(kg::Term::Literal("7", "", "http://www.w3.org/2001/XMLSchema#integer"));
  return v;
}

kg::Graph RandomGraph(util::Rng& rng, const Vocabulary& v, size_t triples) {
  kg::Graph g;
  size_t attempts = 0;
  while (g.size() < triples && attempts++ < triples * 20) {
    g.Insert(kg::Triple::Make(v.subjects[rng.Below(v.subjects.size())],
                              v.predicates[rng.Below(v.predicates.size())],
                              v.objects[rng.Below(v.objects.size())]));
  }
  return g;
}

namespace {

sparql::Expr RandomAtom(util::Rng& rng, const Vocabulary& v, const std::vector<std::string>& vars) {
  const std::string& var = vars[rng.Below(vars.size())];
  static const char* const needles[] = {"BMW", "宝马", "a", "X1", "燕", "http", "/e/1", ""};
  static const char* const patterns[] = {"^b", "1$", "[0-9]", "马", "^$", "e/(1|2)"};
  switch (rng.Below(6)) {
    case 0:
      return sparql::Expr::Contains(var, needles[rng.Below(8)], rng.Below(3) != 0);
    case 1:
      return sparql::Expr::Regex(var, patterns[rng.Below(6)], rng.Below(2) ? "i" : "", rng.Below(3) != 0);
    case 2:
      return sparql::Expr::Equals(var, v.objects[rng.Below(v.objects.size())]);
    case 3:
      return sparql::Expr::EqualsVar(var, vars[rng.Below(vars.size())]);
    case 4:
      return sparql::Expr::LangEquals(var, rng.Below(2) ? "en" : "zh");
    default:
      return sparql::Expr::Equals(var, v.subjects[rng.Below(v.subjects.size())]);
  }
}

sparql::Expr RandomExpr(util::Rng& rng, const Vocabulary& v, const std::vector<std::string>& vars, int depth) {
  if (depth == 0 || rng.Below(2) == 0) return RandomAtom(rng, v, vars);
  switch (rng.Below(3)) {
    case 0:
      return sparql::Expr::And({RandomExpr(rng, v, vars, depth - 1), RandomExpr(rng, v, vars, depth - 1)});
    case 1:
      return sparql::Expr::Or({RandomExpr(rng, v, vars, depth - 1), RandomExpr(rng, v, vars, depth - 1)});
    default:
      return sparql::Expr::Not(RandomExpr(rng, v, vars, depth - 1));
  }
}

}  // namespace

sparql::Query RandomQuery(util::Rng& rng, const Vocabulary& v, int max_patterns) {
  static const char* const names[] = {"a", "b", "c", "d"};
  sparql::Query q;
  const size_t n = 1 + rng.Below(static_cast<uint64_t>(max_patterns));
  for (size_t i = 0; i < n; ++i) {
    auto slot = [&](const std::vector<kg::Term>& terms, int var_odds) -> kg::PatternSlot {
      if (rng.Below(10) < static_cast<uint64_t>(var_odds)) return kg::Variable{names[rng.Below(4)]};
      return terms[rng.Below(terms.size())];
    };
    q.where.push_back({slot(v.subjects, 7), slot(v.predicates, 3), slot(v.objects, 7)});
  }
  std::vector<std::string> vars = q.PatternVariables();
  if (vars.empty()) {
    q.where[0].subject = kg::Variable{"a"};
    vars = q.PatternVariables();
  }
  const size_t filters = rng.Below(3);
  for (size_t i = 0; i < filters; ++i) q.filters.push_back(RandomExpr(rng, v, vars, 2));
  if (rng.Below(3) == 0) {
    q.select_all = true;
  } else {
    for (const auto& var : vars) {
      if (rng.Below(3) != 0) q.select.push_back(var);
    }
    if (q.select.empty()) q.select.push_back(vars[0]);
  }
  return q;
}

SyntheticRun RunSyntheticPipeline(const ingest::CorpusSpec& spec, std::uint64_t seed, const fs::path& dir) {
  SyntheticRun run;
  run.corpus = ingest::SynthesizeCorpus(spec, seed, dir / "corpus");
  const kg::Graph g = rdf::LoadGraph(run.corpus.graph_path.string());
  const auto selected = select::SelectAll(g, select::LoadSelectorConfig(run.corpus.domains_path.string()));
  run.store = dir / "store";
  ingest::ContentStore store(run.store);
  ingest::LocalDirectorySource source(run.corpus.images_root);
  run.manifest = ingest::FetchImages(selected.records, source, store);
  ingest::ValidateManifest(run.manifest, store);
  run.embeddings = features::ExtractBuiltin(run.manifest, store);
  return run;
}

double OutlierRecall(const ingest::Manifest& filtered,
                     const std::map<std::pair<std::string, std::string>, ingest::SampleLabel>& labels) {
  size_t outliers = 0, caught = 0;
  for (const auto& r : filtered.records) {
    auto it = labels.find({r.entity_iri, r.source_locator});
    if (it == labels.end() || it->second != ingest::SampleLabel::kOutlier) continue;
    ++outliers;
    caught += r.status == ingest::ImageStatus::kFilteredOut;
  }
  return outliers == 0 ? 1.0 : static_cast<double>(caught) / static_cast<double>(outliers);
}

// ---------------------------------------------------------------- oracles

bool OracleFilter(const sparql::Expr& e, const std::vector<std::string>& vars,
                  const std::vector<const kg::Term*>& values) {
  auto value_of = [&](const std::string& name) -> const kg::Term* {
    for (size_t i = 0; i < vars.size(); ++i) {
      if (vars[i] == name) return values[i];
    }
    return nullptr;
  };
  auto text_of = [&](const std::string& name, bool str) -> std::optional<std::string> {
    const kg::Term* t = value_of(name);
    if (t == nullptr) return std::nullopt;
    if (t->is_iri() && !str) return std::nullopt;  // CONTAINS on an IRI is a type error
    return t->value();
  };
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  switch (e.kind) {
    case sparql::ExprKind::kAnd:
      return std::all_of(e.children.begin(), e.children.end(),
                         [&](const sparql::Expr& c) { return OracleFilter(c, vars, values); });
    case sparql::ExprKind::kOr:
      return std::any_of(e.children.begin(), e.children.end(),
                         [&](const sparql::Expr& c) { return OracleFilter(c, vars, values); });
    case sparql::ExprKind::kNot:
      return !OracleFilter(e.children[0], vars, values);
    case sparql::ExprKind::kContains: {
      auto s = text_of(e.var, e.str);
      return s && s->find(e.text) != std::string::npos;
    }
    case sparql::ExprKind::kRegex: {
      auto s = text_of(e.var, e.str);
      if (!s) return false;
      std::regex re(e.text, e.flags == "i" ? std::regex::ECMAScript | std::regex::icase : std::regex::ECMAScript);
      return std::regex_search(*s, re);
    }
    case sparql::ExprKind::kEquals: {
      const kg::Term* a = value_of(e.var);
      const kg::Term* b = e.term ? &*e.term : value_of(e.other_var);
      return a && b && a->key() == b->key();
    }
    case sparql::ExprKind::kLangEquals: {
      const kg::Term* a = value_of(e.var);
      return a && a->is_literal() && lower(a->language()) == lower(e.text);
    }
  }
  return false;
}

std::vector<std::vector<kg::Term>> BruteForceSolutions(const sparql::Query& q, const kg::Graph& g) {
  const std::vector<kg::Triple> all = g.Triples();
  const std::vector<std::string> vars = q.PatternVariables();
  std::vector<const kg::Term*> values(vars.size(), nullptr);
  auto index = [&](const std::string& name) {
    return static_cast<size_t>(std::find(vars.begin(), vars.end(), name) - vars.begin());
  };
  const std::vector<std::string> proj = q.Projection();

  std::vector<std::vector<kg::Term>> out;
  // Enumerate every combination of triples, one per pattern.
  std::vector<size_t> pick(q.where.size(), 0);
  if (!q.where.empty() && all.empty()) return out;
  while (true) {
    std::fill(values.begin(), values.end(), nullptr);
    bool ok = true;
    for (size_t i = 0; i < q.where.size() && ok; ++i) {
      const kg::Triple& t = all[pick[i]];
      const kg::PatternSlot* slots[] = {&q.where[i].subject, &q.where[i].predicate, &q.where[i].object};
      const kg::Term* terms[] = {&t.subject, &t.predicate, &t.object};
      for (int k = 0; k < 3 && ok; ++k) {
        if (const kg::Term* c = std::get_if<kg::Term>(slots[k])) {
          ok = c->key() == terms[k]->key();
        } else {
          const size_t vi = index(std::get<kg::Variable>(*slots[k]).name);
          if (values[vi] == nullptr) {
            values[vi] = terms[k];
          } else {
            ok = values[vi]->key() == terms[k]->key();
          }
        }
      }
    }
    for (size_t f = 0; f < q.filters.size() && ok; ++f) ok = OracleFilter(q.filters[f], vars, values);
    if (ok) {
      std::vector<kg::Term> row;
      for (const auto& p : proj) row.push_back(*values[index(p)]);
      out.push_back(std::move(row));
    }
    // Odometer increment.
    size_t i = 0;
    while (i < pick.size() && ++pick[i] == all.size()) pick[i++] = 0;
    if (i == pick.size()) break;
  }
  return out;
}

std::string CheckSparqlJsonShape(const std::string& text, const std::vector<std::string>& vars) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    return std::string("not JSON: ") + e.what();
  }
  if (!j.is_object() || !j.contains("head") || !j.contains("results")) return "missing head/results";
  if (!j["head"].is_object() || !j["head"].contains("vars") || !j["head"]["vars"].is_array()) {
    return "head.vars must be an array";
  }
  std::vector<std::string> got;
  for (const auto& v : j["head"]["vars"]) {
    if (!v.is_string()) return "head.vars entries must be strings";
    got.push_back(v.get<std::string>());
  }
  if (got != vars) return "head.vars differs from the projection";
  const auto& results = j["results"];
  if (!results.is_object() || !results.contains("bindings") || !results["bindings"].is_array()) {
    return "results.bindings must be an array";
  }
  const std::set<std::string> allowed(vars.begin(), vars.end());
  for (const auto& b : results["bindings"]) {
    if (!b.is_object()) return "binding must be an object";
    for (const auto& [name, value] : b.items()) {
      if (!allowed.count(name)) return "binding for unknown variable " + name;
      if (!value.is_object() || !value.contains("type") || !value.contains("value")) {
        return "binding value needs type and value";
      }
      if (!value["value"].is_string()) return "value must be a string";
      const std::string type = value["type"].get<std::string>();
      if (type != "uri" && type != "literal" && type != "bnode") return "bad type " + type;
      for (const auto& [k, unused] : value.items()) {
        if (k != "type" && k != "value" && k != "xml:lang" && k != "datatype") return "unexpected key " + k;
      }
      if (type == "uri" && (value.contains("xml:lang") || value.contains("datatype"))) {
        return "uri with literal annotations";
      }
      if (value.contains("xml:lang") && value.contains("datatype")) return "both xml:lang and datatype";
    }
  }
  return {};
}

double ReferenceC(long long n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n);
  return 2.0 * (std::log(m - 1.0) + 0.5772156649) - 2.0 * (m - 1.0) / m;
}

}  // namespace mmkg::testing
