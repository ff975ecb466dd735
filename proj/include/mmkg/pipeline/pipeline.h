#ifndef MMKG_PIPELINE_PIPELINE_H_
#define MMKG_PIPELINE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmkg::pipeline {

inline constexpr int kRunVersion = 1;

// Run-directory artifact names.
inline constexpr char kGraphFile[] = "graph.nt";
inline constexpr char kEntitiesFile[] = "entities.tsv";
inline constexpr char kFetchedFile[] = "manifest.fetched.jsonl";
inline constexpr char kValidatedFile[] = "manifest.validated.jsonl";
inline constexpr char kEmbeddingsFile[] = "embeddings.bin";
inline constexpr char kFilteredFile[] = "manifest.filtered.jsonl";
inline constexpr char kProjectionFile[] = "projection.tsv";
inline constexpr char kCompletedFile[] = "completed.nt";
inline constexpr char kStatsFile[] = "stats.tsv";
inline constexpr char kStoreDir[] = "store";
inline constexpr char kRunFile[] = "run.json";
inline constexpr char kLockFile[] = ".lock";

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingArtifact : public PipelineError {
 public:
  MissingArtifact(const std::string& artifact, const std::string& producer)
      : PipelineError("missing " + artifact + "; run `mmkg " + producer + "` first"),
        producer_(producer) {}
  const std::string& producer() const { return producer_; }

 private:
  std::string producer_;
};

// A locked run directory with its run.json.
class RunDir {
 public:
  // Creates the directory if needed and takes the lock. `seed` must match
  // the recorded seed, if any. Throws PipelineError on a version mismatch
  // or when another process holds the lock.
  explicit RunDir(std::filesystem::path dir, std::optional<std::uint64_t> seed = std::nullopt);
  ~RunDir();
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path Path(const std::string& artifact) const { return dir_ / artifact; }
  bool Has(const std::string& artifact) const;
  // Throws MissingArtifact naming `producer`.
  void Require(const std::string& artifact, const std::string& producer) const;

  // The run's seed; fixes it at 0 if none was ever given.
  std::uint64_t Seed();

  // Stage bookkeeping. A stage is up to date when its input fingerprint is
  // unchanged and its outputs still hash to the recorded values.
  std::string Fingerprint(const std::string& stage, const std::string& params_json,
                          const std::vector<std::string>& inputs) const;
  bool UpToDate(const std::string& stage, const std::string& fingerprint) const;
  void Record(const std::string& stage, const std::string& fingerprint,
              const std::vector<std::string>& outputs, const std::string& params_json);
  // Parameters recorded for a completed stage, as JSON text; empty if none.
  std::string StageParams(const std::string& stage) const;

 private:
  void Save() const;

  struct State;
  std::filesystem::path dir_;
  std::unique_ptr<State> state_;
  int lock_fd_ = -1;
};

struct StageResult {
  bool skipped = false;  // inputs unchanged; outputs left as they were
  std::vector<std::string> messages;
};

struct ImportOptions {
  std::string source;  // N-Triples file
  bool lenient = false;
  bool force = false;
};

struct SelectOptions {
  std::string domains;  // selector config file
  bool force = false;
};

struct FetchStageOptions {
  std::string source;  // dir:<path> or http://...
  int cap = 30;
  int workers = 1;
  int max_attempts = 3;
  int backoff_ms = 200;
  bool force = false;
};

struct EmbedOptions {
  std::string external;  // exchange file; empty: built-in descriptor
  int workers = 1;
  bool force = false;
};

struct FilterOptions {
  int trees = 100;
  int subsample = 256;
  double contamination = 0.2;
  int workers = 1;
  bool force = false;
};

struct CompleteOptions {
  std::string base_iri = "http://mmkb.test";
  std::string with_image_predicate;
  bool provenance = false;
  bool force = false;
};

StageResult RunImport(RunDir& run, const ImportOptions& options);
StageResult RunSelect(RunDir& run, const SelectOptions& options);
StageResult RunFetch(RunDir& run, const FetchStageOptions& options);
StageResult RunValidate(RunDir& run, bool force = false);
StageResult RunEmbed(RunDir& run, const EmbedOptions& options);
StageResult RunFilter(RunDir& run, const FilterOptions& options);
StageResult RunComplete(RunDir& run, const CompleteOptions& options);
// Writes the completed graph (or the imported one before `complete`).
StageResult RunExport(RunDir& run, const std::filesystem::path& out);

struct StatsRow {
  std::string topic;
  size_t entities = 0;
  size_t images = 0;     // fetched
  size_t validated = 0;  // not rejected as corrupt or animated
  std::optional<size_t> filtered;  // retained after outlier filtering
};

struct IdentityCheck {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct StatsReport {
  std::vector<StatsRow> rows;  // per domain, then "Total"
  std::vector<IdentityCheck> checks;
  bool ok() const;
  std::string ToTsv() const;
};

// Table of per-domain counts plus identity checks. With `reference`, also
// compares our retained/validated ratio with the reference table's.
StatsReport RunStats(RunDir& run, const std::optional<std::filesystem::path>& reference = {});

}  // namespace mmkg::pipeline

#endif  // MMKG_PIPELINE_PIPELINE_H_
