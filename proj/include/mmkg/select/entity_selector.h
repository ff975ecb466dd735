#ifndef MMKG_SELECT_ENTITY_SELECTOR_H_
#define MMKG_SELECT_ENTITY_SELECTOR_H_

#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mmkg/kg/graph.h"

namespace mmkg::select {

// Filter ids recorded in EntityRecord::trace.
inline constexpr char kTypeFilterId[] = "type";
inline constexpr char kTaxonomyFilterId[] = "taxonomy";
inline constexpr char kLexiconFilterId[] = "lexicon";

// One thematic domain. Entities are admitted by `<?e type_predicate
// type_object>`, optionally also by `<?e taxon_predicate taxon_object>`, and
// dropped when their display name contains an exclusion token.
struct DomainSpec {
  std::string name;
  kg::TriplePattern type_filter;
  std::optional<kg::TriplePattern> taxonomy_filter;
  std::vector<std::string> exclusion_lexicon;

  // Builds the `?e`-subject templates. Throws kg::ValidationError on bad IRIs
  // or an empty name.
  static DomainSpec Make(std::string name, const std::string& type_predicate,
                         const std::string& type_object,
                         std::optional<std::pair<std::string, std::string>> taxonomy = {},
                         std::vector<std::string> exclusion_lexicon = {});
};

struct SelectorConfig {
  // Predicate carrying display names; empty means "use the IRI local name".
  std::string name_predicate;
  std::vector<DomainSpec> domains;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Reads the INI-style domain file:
//
//   name_predicate = http://mmkb.test/p/name
//   type_predicate = http://mmkb.test/p/type      # default for all domains
//
//   [Birds]
//   type_object     = http://mmkb.test/c/Animal
//   taxon_predicate = http://mmkb.test/p/category
//   taxon_object    = http://mmkb.test/c/Aves
//   exclude         = human, book
//
// Keys before the first section are defaults; `type_predicate` and
// `taxon_predicate` may be overridden per section. IRIs may be written bare
// or in angle brackets. `exclude` is a comma-separated token list.
SelectorConfig ParseSelectorConfig(std::istream& in);
SelectorConfig LoadSelectorConfig(const std::string& path);

struct EntityRecord {
  std::string iri;
  std::string display_name;
  std::string domain;
  std::vector<std::string> trace;

  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

struct SelectionResult {
  std::vector<EntityRecord> records;
  std::vector<std::string> warnings;
};

// Name from `name_predicate` (first literal in canonical order), else the
// IRI local name.
std::string ResolveDisplayName(const kg::Graph& graph, const std::string& iri,
                               const std::string& name_predicate);

// ASCII case-folded, otherwise byte-exact substring test.
bool ContainsLexiconToken(std::string_view display_name, std::string_view token);

SelectionResult SelectEntities(const kg::Graph& graph, const DomainSpec& spec,
                               const std::string& name_predicate = {});

// Runs every domain; an entity in several domains yields one record per
// membership. Records are grouped by domain in config order.
SelectionResult SelectAll(const kg::Graph& graph, const SelectorConfig& config);

// Tab-separated `iri, display-name, domain` with a header row. Tabs,
// newlines and backslashes inside fields are backslash-escaped.
void WriteEntityTsv(std::span<const EntityRecord> records, std::ostream& out);
std::vector<EntityRecord> ReadEntityTsv(std::istream& in);

}  // namespace mmkg::select

#endif  // MMKG_SELECT_ENTITY_SELECTOR_H_
