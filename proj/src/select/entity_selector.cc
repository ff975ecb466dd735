#include "mmkg/select/entity_selector.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "mmkg/util/tsv.h"

namespace mmkg::select {

namespace {

std::string StripAngles(std::string s) {
  if (s.size() >= 2 && s.front() == '<' && s.back() == '>') return s.substr(1, s.size() - 2);
  return s;
}

std::string FoldAscii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> SplitTokens(std::string_view list) {
  std::vector<std::string> tokens;
  size_t start = 0;
  while (start <= list.size()) {
    size_t comma = list.find(',', start);
    if (comma == std::string_view::npos) comma = list.size();
    std::string token = util::Trim(list.substr(start, comma - start));
    if (!token.empty()) tokens.push_back(std::move(token));
    start = comma + 1;
  }
  return tokens;
}

// Subjects of triples matching `filter` (whose subject slot is a variable).
std::set<std::string> SubjectsMatching(const kg::Graph& graph, const kg::TriplePattern& filter) {
  std::set<std::string> out;
  for (const kg::Triple& t : graph.Match(filter)) out.insert(t.subject.value());
  return out;
}

bool PredicatePresent(const kg::Graph& graph, const kg::TriplePattern& filter) {
  return graph.Count(kg::TriplePattern{kg::Variable{"s"}, filter.predicate,
                                       kg::Variable{"o"}}) > 0;
}

std::string PredicateText(const kg::TriplePattern& p) {
  const kg::Term* t = kg::AsTerm(p.predicate);
  return t != nullptr ? t->key() : "?";
}

}  // namespace

DomainSpec DomainSpec::Make(std::string name, const std::string& type_predicate,
                            const std::string& type_object,
                            std::optional<std::pair<std::string, std::string>> taxonomy,
                            std::vector<std::string> exclusion_lexicon) {
  if (name.empty()) throw kg::ValidationError("domain-name", "domain name is empty");
  DomainSpec spec;
  spec.name = std::move(name);
  spec.type_filter = kg::TriplePattern{kg::Variable{"e"}, kg::Term::Iri(type_predicate),
                                       kg::Term::Iri(type_object)};
  if (taxonomy) {
    spec.taxonomy_filter = kg::TriplePattern{
        kg::Variable{"e"}, kg::Term::Iri(taxonomy->first), kg::Term::Iri(taxonomy->second)};
  }
  spec.exclusion_lexicon = std::move(exclusion_lexicon);
  return spec;
}

SelectorConfig ParseSelectorConfig(std::istream& in) {
  struct Section {
    std::string name;
    int line = 0;
    std::map<std::string, std::string> values;
  };
  std::map<std::string, std::string> defaults;
  std::vector<Section> sections;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    // '#' starts a comment unless it sits inside an IRI (after '<').
    std::string line = raw;
    for (size_t i = 0, depth = 0; i < line.size(); ++i) {
      if (line[i] == '<') ++depth;
      if (line[i] == '>' && depth > 0) --depth;
      if (line[i] == '#' && depth == 0 && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.resize(i);
        break;
      }
    }
    line = util::Trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
      std::string name = util::Trim(std::string_view(line).substr(1, line.size() - 2));
      if (name.rfind("domain ", 0) == 0) name = util::Trim(std::string_view(name).substr(7));
      if (name.empty()) throw ConfigError(line_no, "empty domain name");
      for (const Section& s : sections) {
        if (s.name == name) throw ConfigError(line_no, "duplicate domain '" + name + "'");
      }
      sections.push_back(Section{name, line_no, {}});
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
    std::string key = util::Trim(std::string_view(line).substr(0, eq));
    std::string value = util::Trim(std::string_view(line).substr(eq + 1));
    static const std::set<std::string> kGlobalKeys{"name_predicate", "type_predicate",
                                                   "taxon_predicate"};
    static const std::set<std::string> kDomainKeys{"type_predicate", "type_object",
                                                   "taxon_predicate", "taxon_object", "exclude"};
    auto& target = sections.empty() ? defaults : sections.back().values;
    const auto& allowed = sections.empty() ? kGlobalKeys : kDomainKeys;
    if (!allowed.contains(key)) throw ConfigError(line_no, "unknown key '" + key + "'");
    target[key] = value;
  }

  SelectorConfig config;
  if (auto it = defaults.find("name_predicate"); it != defaults.end()) {
    config.name_predicate = StripAngles(it->second);
    try {
      kg::ValidateIri(config.name_predicate, "name_predicate");
    } catch (const kg::ValidationError& e) {
      throw ConfigError(0, e.what());
    }
  }
  for (const Section& s : sections) {
    auto get = [&](const std::string& key) -> std::optional<std::string> {
      if (auto it = s.values.find(key); it != s.values.end()) return StripAngles(it->second);
      if (auto it = defaults.find(key); it != defaults.end()) return StripAngles(it->second);
      return std::nullopt;
    };
    auto type_predicate = get("type_predicate");
    auto type_object = get("type_object");
    if (!type_predicate || !type_object) {
      throw ConfigError(s.line, "domain '" + s.name + "' needs type_predicate and type_object");
    }
    std::optional<std::pair<std::string, std::string>> taxonomy;
    auto taxon_object = get("taxon_object");
    if (taxon_object) {
      auto taxon_predicate = get("taxon_predicate");
      if (!taxon_predicate) {
        throw ConfigError(s.line, "domain '" + s.name + "' has taxon_object but no taxon_predicate");
      }
      taxonomy = std::make_pair(*taxon_predicate, *taxon_object);
    }
    std::vector<std::string> lexicon;
    if (auto it = s.values.find("exclude"); it != s.values.end()) lexicon = SplitTokens(it->second);
    try {
      config.domains.push_back(
          DomainSpec::Make(s.name, *type_predicate, *type_object, taxonomy, std::move(lexicon)));
    } catch (const kg::ValidationError& e) {
      throw ConfigError(s.line, "domain '" + s.name + "': " + e.what());
    }
  }
  return config;
}

SelectorConfig LoadSelectorConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open domain config " + path);
  return ParseSelectorConfig(in);
}

std::string ResolveDisplayName(const kg::Graph& graph, const std::string& iri,
                               const std::string& name_predicate) {
  if (!name_predicate.empty()) {
    auto names = graph.Match(kg::TriplePattern{kg::Term::Iri(iri), kg::Term::Iri(name_predicate),
                                               kg::Variable{"n"}});
    for (const kg::Triple& t : names) {
      if (t.object.is_literal()) return t.object.value();
    }
  }
  return std::string(kg::IriLocalName(iri));
}

bool ContainsLexiconToken(std::string_view display_name, std::string_view token) {
  if (token.empty()) return false;
  return FoldAscii(display_name).find(FoldAscii(token)) != std::string::npos;
}

SelectionResult SelectEntities(const kg::Graph& graph, const DomainSpec& spec,
                               const std::string& name_predicate) {
  SelectionResult result;
  if (!PredicatePresent(graph, spec.type_filter)) {
    result.warnings.push_back("domain '" + spec.name + "': predicate " +
                              PredicateText(spec.type_filter) + " does not occur in the graph");
    return result;
  }
  if (spec.taxonomy_filter && !PredicatePresent(graph, *spec.taxonomy_filter)) {
    result.warnings.push_back("domain '" + spec.name + "': predicate " +
                              PredicateText(*spec.taxonomy_filter) +
                              " does not occur in the graph");
    return result;
  }

  std::set<std::string> candidates = SubjectsMatching(graph, spec.type_filter);
  std::set<std::string> taxon;
  if (spec.taxonomy_filter) taxon = SubjectsMatching(graph, *spec.taxonomy_filter);

  for (const std::string& iri : candidates) {
    EntityRecord record{iri, "", spec.name, {kTypeFilterId}};
    if (spec.taxonomy_filter) {
      if (!taxon.contains(iri)) continue;
      record.trace.push_back(kTaxonomyFilterId);
    }
    record.display_name = ResolveDisplayName(graph, iri, name_predicate);
    bool excluded = std::any_of(
        spec.exclusion_lexicon.begin(), spec.exclusion_lexicon.end(),
        [&](const std::string& token) { return ContainsLexiconToken(record.display_name, token); });
    if (excluded) continue;
    if (!spec.exclusion_lexicon.empty()) record.trace.push_back(kLexiconFilterId);
    result.records.push_back(std::move(record));
  }
  return result;
}

SelectionResult SelectAll(const kg::Graph& graph, const SelectorConfig& config) {
  SelectionResult all;
  for (const DomainSpec& spec : config.domains) {
    SelectionResult r = SelectEntities(graph, spec, config.name_predicate);
    all.records.insert(all.records.end(), std::make_move_iterator(r.records.begin()),
                       std::make_move_iterator(r.records.end()));
    all.warnings.insert(all.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  return all;
}

void WriteEntityTsv(std::span<const EntityRecord> records, std::ostream& out) {
  out << "iri\tdisplay_name\tdomain\n";
  for (const EntityRecord& r : records) {
    out << util::EscapeTsvField(r.iri) << '\t' << util::EscapeTsvField(r.display_name) << '\t'
        << util::EscapeTsvField(r.domain) << '\n';
  }
}

std::vector<EntityRecord> ReadEntityTsv(std::istream& in) {
  std::vector<EntityRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("iri\t", 0) == 0) continue;
    if (line.empty()) continue;
    auto fields = util::SplitTsvLine(line);
    if (fields.size() != 3) {
      throw std::runtime_error("entity TSV line " + std::to_string(line_no) +
                               ": expected 3 fields");
    }
    records.push_back(EntityRecord{fields[0], fields[1], fields[2], {}});
  }
  return records;
}

}  // namespace mmkg::select
