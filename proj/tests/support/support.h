#ifndef MMKG_TESTS_SUPPORT_H_
#define MMKG_TESTS_SUPPORT_H_

#include <filesystem>
#include <string>
#include <vector>

#include "mmkg/features/embedding.h"
#include "mmkg/ingest/manifest.h"
#include "mmkg/ingest/synth.h"
#include "mmkg/kg/graph.h"
#include "mmkg/sparql/ast.h"
#include "mmkg/util/random.h"

namespace mmkg::testing {

// mkdtemp directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path FixtureDir();
std::string ReadFile(const std::filesystem::path& p);
void WriteFile(const std::filesystem::path& p, const std::string& bytes);

// ---- generators

// Arbitrary terms, including escapes, control characters, non-ASCII text,
// language tags and datatypes.
kg::Term RandomIri(util::Rng& rng);
kg::Term RandomLiteral(util::Rng& rng);
kg::Triple RandomTriple(util::Rng& rng);

// Graphs over a small vocabulary so that joins actually match.
struct Vocabulary {
  std::vector<kg::Term> subjects;
  std::vector<kg::Term> predicates;
  std::vector<kg::Term> objects;  // subjects plus literals
};
Vocabulary SmallVocabulary(util::Rng& rng, size_t entities = 12, size_t predicates = 4);
kg::Graph RandomGraph(util::Rng& rng, const Vocabulary& v, size_t triples);

// 1..max_patterns patterns with 0..2 filters; no modifiers.
sparql::Query RandomQuery(util::Rng& rng, const Vocabulary& v, int max_patterns = 3);

// Synthesize, select, fetch, validate and embed (builtin descriptor).
struct SyntheticRun {
  ingest::CorpusInfo corpus;
  ingest::Manifest manifest;  // validated
  features::EmbeddingMatrix embeddings;
  std::filesystem::path store;
};
SyntheticRun RunSyntheticPipeline(const ingest::CorpusSpec& spec, std::uint64_t seed,
                                  const std::filesystem::path& dir);

// Fraction of injected outliers (by label) that ended up filtered out.
double OutlierRecall(const ingest::Manifest& filtered,
                     const std::map<std::pair<std::string, std::string>, ingest::SampleLabel>& labels);

// ---- oracles

// Cross product of per-pattern linear scans, unification with consistent
// bindings, then filters; one row per solution, projected, in no
// particular order.
std::vector<std::vector<kg::Term>> BruteForceSolutions(const sparql::Query& q, const kg::Graph& g);

// Independent FILTER semantics used by the oracle.
bool OracleFilter(const sparql::Expr& e, const std::vector<std::string>& vars,
                  const std::vector<const kg::Term*>& values);

// Empty string when `json` has the SPARQL 1.1 SELECT results shape for
// exactly `vars`, otherwise a description of the first violation.
std::string CheckSparqlJsonShape(const std::string& json, const std::vector<std::string>& vars);

// Independent c(n) from the closed form.
double ReferenceC(long long n);

}  // namespace mmkg::testing

#endif  // MMKG_TESTS_SUPPORT_H_
