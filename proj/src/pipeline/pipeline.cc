#include "mmkg/pipeline/pipeline.h"

#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mmkg/complete/completer.h"
#include "mmkg/features/embedding.h"
#include "mmkg/ingest/content_store.h"
#include "mmkg/ingest/image_codec.h"
#include "mmkg/ingest/ingestor.h"
#include "mmkg/outlier/filter.h"
#include "mmkg/rdf/ntriples.h"
#include "mmkg/select/entity_selector.h"
#include "mmkg/util/hash.h"
#include "mmkg/util/tsv.h"

namespace mmkg::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string HashFile(const fs::path& p) {
  return util::Sha256Hex(ingest::ReadFileBytes(p));
}

void WriteAtomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw PipelineError("cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

// ---------------------------------------------------------------- run dir

struct RunDir::State {
  json meta;
};

RunDir::RunDir(fs::path dir, std::optional<std::uint64_t> seed)
    : dir_(std::move(dir)), state_(std::make_unique<State>()) {
  fs::create_directories(dir_);
  const fs::path lock = dir_ / kLockFile;
  lock_fd_ = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (lock_fd_ < 0) {
    throw PipelineError("run directory " + dir_.string() +
                        " is locked by another mmkg command (delete " + lock.string() +
                        " if no command is running)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  if (::write(lock_fd_, pid.data(), pid.size()) < 0) {
    // The lock is the file's existence; its content is informational.
  }
  try {
    const fs::path run_file = dir_ / kRunFile;
    if (fs::exists(run_file)) {
      std::ifstream in(run_file);
      state_->meta = json::parse(in);
      const int version = state_->meta.value("version", 0);
      if (version != kRunVersion) {
        throw PipelineError("run directory " + dir_.string() + " has version " +
                            std::to_string(version) + "; this mmkg writes version " +
                            std::to_string(kRunVersion));
      }
    } else {
      state_->meta = {{"version", kRunVersion}, {"seed", nullptr}, {"stages", json::object()}};
    }
    if (seed) {
      const json& recorded = state_->meta["seed"];
      if (!recorded.is_null() && recorded.get<std::uint64_t>() != *seed) {
        throw PipelineError("run directory uses seed " + std::to_string(recorded.get<std::uint64_t>()) +
                            "; start a new run directory to change it");
      }
      state_->meta["seed"] = *seed;
    }
    Save();
  } catch (...) {
    ::close(lock_fd_);
    fs::remove(lock);
    throw;
  }
}

RunDir::~RunDir() {
  if (lock_fd_ >= 0) {
    ::close(lock_fd_);
    std::error_code ec;
    fs::remove(dir_ / kLockFile, ec);
  }
}

bool RunDir::Has(const std::string& artifact) const {
  std::error_code ec;
  return fs::exists(Path(artifact), ec);
}

void RunDir::Require(const std::string& artifact, const std::string& producer) const {
  if (!Has(artifact)) throw MissingArtifact(artifact, producer);
}

std::uint64_t RunDir::Seed() {
  if (state_->meta["seed"].is_null()) {
    state_->meta["seed"] = 0;
    Save();
  }
  return state_->meta["seed"].get<std::uint64_t>();
}

std::string RunDir::Fingerprint(const std::string& stage, const std::string& params_json,
                                const std::vector<std::string>& inputs) const {
  std::string material = "v" + std::to_string(kRunVersion) + "\n" + stage + "\n" + params_json + "\n";
  for (const std::string& in : inputs) {
    const fs::path p = fs::path(in).is_absolute() ? fs::path(in) : Path(in);
    material += in + "=" + HashFile(p) + "\n";
  }
  return util::Sha256Hex(material);
}

bool RunDir::UpToDate(const std::string& stage, const std::string& fingerprint) const {
  const json& stages = state_->meta["stages"];
  if (!stages.contains(stage)) return false;
  const json& s = stages[stage];
  if (s.value("fingerprint", std::string()) != fingerprint) return false;
  for (const auto& [name, hash] : s["outputs"].items()) {
    if (!Has(name)) return false;
    if (!hash.is_null() && HashFile(Path(name)) != hash.get<std::string>()) return false;
  }
  return true;
}

void RunDir::Record(const std::string& stage, const std::string& fingerprint,
                    const std::vector<std::string>& outputs, const std::string& params_json) {
  json out = json::object();
  for (const std::string& name : outputs) {
    out[name] = fs::is_directory(Path(name)) ? json(nullptr) : json(HashFile(Path(name)));
  }
  state_->meta["stages"][stage] = {
      {"fingerprint", fingerprint}, {"params", json::parse(params_json)}, {"outputs", out}};
  Save();
}

std::string RunDir::StageParams(const std::string& stage) const {
  const json& stages = state_->meta["stages"];
  if (!stages.contains(stage)) return {};
  return stages[stage]["params"].dump();
}

void RunDir::Save() const { WriteAtomic(dir_ / kRunFile, state_->meta.dump(2) + "\n"); }

// ---------------------------------------------------------------- stages

namespace {

// Runs `body` unless the stage is up to date.
template <typename Body>
StageResult Stage(RunDir& run, const std::string& name, const json& params,
                  const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                  bool force, Body body) {
  const std::string params_text = params.dump();
  const std::string fp = run.Fingerprint(name, params_text, inputs);
  StageResult result;
  if (!force && run.UpToDate(name, fp)) {
    result.skipped = true;
    result.messages.push_back(name + ": up to date");
    return result;
  }
  body(result);
  run.Record(name, fp, outputs, params_text);
  return result;
}

std::string Absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

}  // namespace

StageResult RunImport(RunDir& run, const ImportOptions& o) {
  if (o.source.empty()) throw PipelineError("import needs a source N-Triples file");
  if (!fs::exists(o.source)) throw PipelineError("source graph " + o.source + " does not exist");
  const json params = {{"source", Absolute(o.source)}, {"lenient", o.lenient}};
  return Stage(run, "import", params, {Absolute(o.source)}, {kGraphFile}, o.force, [&](StageResult& r) {
    std::vector<rdf::ParseDiagnostic> diags;
    const kg::Graph g = rdf::LoadGraph(o.source, o.lenient ? rdf::ParseMode::kLenient : rdf::ParseMode::kStrict,
                                       &diags);
    for (const auto& d : diags) r.messages.push_back("skipped: " + d.ToString());
    rdf::SaveGraph(g, run.Path(kGraphFile).string());
    r.messages.push_back("import: " + std::to_string(g.size()) + " triples");
  });
}

StageResult RunSelect(RunDir& run, const SelectOptions& o) {
  run.Require(kGraphFile, "import");
  if (o.domains.empty()) throw PipelineError("select needs a domain configuration file");
  if (!fs::exists(o.domains)) throw PipelineError("domain configuration " + o.domains + " does not exist");
  const json params = {{"domains", Absolute(o.domains)}};
  return Stage(run, "select", params, {kGraphFile, Absolute(o.domains)}, {kEntitiesFile}, o.force,
               [&](StageResult& r) {
                 const kg::Graph g = rdf::LoadGraph(run.Path(kGraphFile).string());
                 const select::SelectorConfig config = select::LoadSelectorConfig(o.domains);
                 const select::SelectionResult sel = select::SelectAll(g, config);
                 for (const auto& w : sel.warnings) r.messages.push_back("warning: " + w);
                 std::ostringstream out;
                 select::WriteEntityTsv(sel.records, out);
                 WriteAtomic(run.Path(kEntitiesFile), out.str());
                 std::map<std::string, size_t> per_domain;
                 for (const auto& e : sel.records) ++per_domain[e.domain];
                 for (const auto& [d, n] : per_domain) {
                   r.messages.push_back("select: " + d + " " + std::to_string(n) + " entities");
                 }
               });
}

StageResult RunFetch(RunDir& run, const FetchStageOptions& o) {
  run.Require(kEntitiesFile, "select");
  if (o.source.empty()) throw PipelineError("fetch needs an image source (dir:<path> or http://...)");
  std::string source = o.source;
  if (source.rfind("dir:", 0) == 0) source = "dir:" + Absolute(source.substr(4));
  const json params = {{"source", source}, {"cap", o.cap}, {"max_attempts", o.max_attempts}};
  return Stage(run, "fetch", params, {kEntitiesFile}, {kFetchedFile, kStoreDir}, o.force, [&](StageResult& r) {
    std::ifstream in(run.Path(kEntitiesFile));
    const std::vector<select::EntityRecord> entities = select::ReadEntityTsv(in);
    ingest::ContentStore store(run.Path(kStoreDir));
    auto src = ingest::MakeImageSource(source);
    ingest::FetchOptions fo;
    fo.cap = o.cap;
    fo.workers = o.workers;
    fo.max_attempts = o.max_attempts;
    fo.initial_backoff = std::chrono::milliseconds(o.backoff_ms);
    fo.checkpoint_path = run.Path("fetch.checkpoint.json").string();
    const ingest::Manifest m = ingest::FetchImages(entities, *src, store, fo);
    ingest::WriteManifestJsonl(m, run.Path(kFetchedFile).string());
    r.messages.push_back("fetch: " + std::to_string(m.records.size()) + " images, " +
                         std::to_string(m.metadata.imageless_entities.size()) + " entities without images, " +
                         std::to_string(m.metadata.absent.size()) + " absent");
  });
}

StageResult RunValidate(RunDir& run, bool force) {
  run.Require(kFetchedFile, "fetch");
  return Stage(run, "validate", json::object(), {kFetchedFile}, {kValidatedFile}, force, [&](StageResult& r) {
    ingest::Manifest m = ingest::ReadManifestJsonl(run.Path(kFetchedFile).string());
    const ingest::ContentStore store(run.Path(kStoreDir));
    const ingest::ValidationSummary s = ingest::ValidateManifest(m, store);
    ingest::WriteManifestJsonl(m, run.Path(kValidatedFile).string());
    r.messages.push_back("validate: " + std::to_string(s.ok) + " ok, " + std::to_string(s.corrupt) +
                         " corrupt, " + std::to_string(s.animated) + " animated");
  });
}

StageResult RunEmbed(RunDir& run, const EmbedOptions& o) {
  run.Require(kValidatedFile, "validate");
  json params = {{"extractor", o.external.empty() ? features::kBuiltinExtractorId : "external"}};
  std::vector<std::string> inputs{kValidatedFile};
  if (!o.external.empty()) {
    if (!fs::exists(o.external)) throw PipelineError("embedding file " + o.external + " does not exist");
    params["external"] = Absolute(o.external);
    inputs.push_back(Absolute(o.external));
  }
  return Stage(run, "embed", params, inputs, {kEmbeddingsFile}, o.force, [&](StageResult& r) {
    const ingest::Manifest m = ingest::ReadManifestJsonl(run.Path(kValidatedFile).string());
    features::EmbeddingMatrix e;
    if (o.external.empty()) {
      e = features::ExtractBuiltin(m, ingest::ContentStore(run.Path(kStoreDir)), o.workers);
    } else {
      e = features::LoadExternal(o.external, m);
    }
    features::WriteEmbeddingsBinary(e, run.Path(kEmbeddingsFile));
    r.messages.push_back("embed: " + std::to_string(e.rows()) + " rows (" + params["extractor"].get<std::string>() + ")");
  });
}

StageResult RunFilter(RunDir& run, const FilterOptions& o) {
  run.Require(kValidatedFile, "validate");
  run.Require(kEmbeddingsFile, "embed");
  outlier::ForestParams fp;
  fp.tree_count = o.trees;
  fp.subsample_size = o.subsample;
  fp.contamination = o.contamination;
  fp.seed = run.Seed();
  fp.Validate();
  const json params = {{"trees", o.trees}, {"subsample", o.subsample},
                       {"contamination", o.contamination}, {"seed", fp.seed}};
  return Stage(run, "filter", params, {kValidatedFile, kEmbeddingsFile}, {kFilteredFile, kProjectionFile},
               o.force, [&](StageResult& r) {
                 ingest::Manifest m = ingest::ReadManifestJsonl(run.Path(kValidatedFile).string());
                 const features::EmbeddingMatrix e = features::LoadExternal(run.Path(kEmbeddingsFile), m);
                 const outlier::FilterSummary s = outlier::FilterManifest(m, e, fp, o.workers);
                 for (const auto& line : s.log) r.messages.push_back(line);
                 ingest::WriteManifestJsonl(m, run.Path(kFilteredFile).string());

                 std::vector<std::pair<std::string, bool>> flags;
                 std::set<std::string> seen;
                 for (const auto& rec : m.records) {
                   if (rec.status != ingest::ImageStatus::kRetained &&
                       rec.status != ingest::ImageStatus::kFilteredOut) {
                     continue;
                   }
                   if (seen.insert(rec.image_id).second) {
                     flags.emplace_back(rec.image_id, rec.status == ingest::ImageStatus::kRetained);
                   }
                 }
                 std::ostringstream proj;
                 if (flags.size() >= 2) {
                   const outlier::Projection p = outlier::Project2d(e, flags);
                   for (const auto& w : p.warnings) r.messages.push_back("projection: " + w);
                   outlier::WriteProjectionTsv(p, proj);
                 } else {
                   proj << "image_id\tx\ty\tflag\n";
                 }
                 WriteAtomic(run.Path(kProjectionFile), proj.str());
                 r.messages.push_back("filter: " + std::to_string(s.retained) + " retained, " +
                                      std::to_string(s.filtered) + " filtered out across " +
                                      std::to_string(s.entities) + " entities");
               });
}

StageResult RunComplete(RunDir& run, const CompleteOptions& o) {
  run.Require(kGraphFile, "import");
  run.Require(kFilteredFile, "filter");
  complete::CompletionOptions co;
  co.base_iri = o.base_iri;
  co.with_image_predicate = o.with_image_predicate;
  co.provenance = o.provenance;
  const json params = {{"base_iri", o.base_iri}, {"with_image", co.WithImage()}, {"provenance", o.provenance}};
  return Stage(run, "complete", params, {kGraphFile, kFilteredFile}, {kCompletedFile}, o.force,
               [&](StageResult& r) {
                 kg::Graph g = rdf::LoadGraph(run.Path(kGraphFile).string());
                 const ingest::Manifest m = ingest::ReadManifestJsonl(run.Path(kFilteredFile).string());
                 const complete::CompletionResult c = complete::CompleteTriples(m, g, co);
                 for (const auto& w : c.warnings) r.messages.push_back("warning: " + w);
                 rdf::SaveGraph(g, run.Path(kCompletedFile).string());
                 r.messages.push_back("complete: " + std::to_string(c.added) + " with-image triples" +
                                      (o.provenance ? ", " + std::to_string(c.provenance_added) + " provenance triples"
                                                    : std::string()));
               });
}

StageResult RunExport(RunDir& run, const fs::path& out) {
  std::string from = kCompletedFile;
  if (!run.Has(kCompletedFile)) {
    run.Require(kGraphFile, "import");
    from = kGraphFile;
  }
  const kg::Graph g = rdf::LoadGraph(run.Path(from).string());
  rdf::SaveGraph(g, out.string());
  StageResult r;
  r.messages.push_back("export: " + std::to_string(g.size()) + " triples from " + from + " to " + out.string());
  return r;
}

// ---------------------------------------------------------------- stats

bool StatsReport::ok() const {
  for (const auto& c : checks) {
    if (!c.ok) return false;
  }
  return true;
}

std::string StatsReport::ToTsv() const {
  std::string out = "Topic\tEntities\tImages\tValidated\tFiltered Images\n";
  for (const StatsRow& r : rows) {
    out += util::EscapeTsvField(r.topic) + "\t" + std::to_string(r.entities) + "\t" +
           std::to_string(r.images) + "\t" + std::to_string(r.validated) + "\t" +
           (r.filtered ? std::to_string(*r.filtered) : std::string("NA")) + "\n";
  }
  return out;
}

namespace {

std::vector<std::string> SplitDomains(const std::string& joined) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : joined) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct ReferenceTable {
  std::vector<StatsRow> rows;  // includes Total when present
  std::optional<long long> validated_total;
};

ReferenceTable ReadReference(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cannot open reference table " + path.string());
  ReferenceTable t;
  std::string line;
  bool header = true;
  auto number = [&](const std::string& s) {
    std::string digits;
    for (char c : s) {
      if (c != ',') digits += c;
    }
    return std::stoll(digits);
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("validated_total=");
      if (pos != std::string::npos) t.validated_total = number(line.substr(pos + 16));
      continue;
    }
    if (header) {
      header = false;
      continue;
    }
    const auto f = util::SplitTsvLine(line);
    if (f.size() < 4) throw PipelineError("reference row needs 4 columns: " + line);
    StatsRow r;
    r.topic = f[0];
    r.entities = static_cast<size_t>(number(f[1]));
    r.images = static_cast<size_t>(number(f[2]));
    r.filtered = static_cast<size_t>(number(f[3]));
    t.rows.push_back(r);
  }
  return t;
}

}  // namespace

StatsReport RunStats(RunDir& run, const std::optional<fs::path>& reference) {
  run.Require(kEntitiesFile, "select");
  std::ifstream ein(run.Path(kEntitiesFile));
  const std::vector<select::EntityRecord> entities = select::ReadEntityTsv(ein);

  std::string manifest_file;
  for (const char* f : {kFilteredFile, kValidatedFile, kFetchedFile}) {
    if (run.Has(f)) {
      manifest_file = f;
      break;
    }
  }
  if (manifest_file.empty()) throw MissingArtifact(kFetchedFile, "fetch");
  const ingest::Manifest m = ingest::ReadManifestJsonl(run.Path(manifest_file).string());
  const bool validated_stage = manifest_file != kFetchedFile;
  const bool filtered_stage = manifest_file == kFilteredFile;

  StatsReport report;
  std::map<std::string, StatsRow> by_domain;
  std::vector<std::string> domain_order;
  std::set<std::string> selected;
  for (const auto& e : entities) {
    if (!by_domain.count(e.domain)) {
      domain_order.push_back(e.domain);
      by_domain[e.domain].topic = e.domain;
    }
    ++by_domain[e.domain].entities;
    selected.insert(e.iri);
  }
  StatsRow total;
  total.topic = "Total";
  total.entities = selected.size();
  auto tally = [&](StatsRow& row, const ingest::ImageRecord& r) {
    ++row.images;
    const bool rejected = r.status == ingest::ImageStatus::kRejectedCorrupt ||
                          r.status == ingest::ImageStatus::kRejectedAnimated;
    if (validated_stage && !rejected) ++row.validated;
    if (filtered_stage) row.filtered = row.filtered.value_or(0) + (r.status == ingest::ImageStatus::kRetained);
  };
  if (filtered_stage) total.filtered = 0;
  for (const auto& r : m.records) {
    for (const std::string& d : SplitDomains(r.domain)) {
      if (!by_domain.count(d)) {
        domain_order.push_back(d);
        by_domain[d].topic = d;
      }
      if (filtered_stage && !by_domain[d].filtered) by_domain[d].filtered = 0;
      tally(by_domain[d], r);
    }
    tally(total, r);
  }
  for (const auto& d : domain_order) report.rows.push_back(by_domain[d]);
  report.rows.push_back(total);

  // Identities.
  std::map<std::string, std::vector<const ingest::ImageRecord*>> per_entity;
  for (const auto& r : m.records) per_entity[r.entity_iri].push_back(&r);
  {
    IdentityCheck c{"selected entities >= entities with images", per_entity.size() <= selected.size(), ""};
    c.detail = std::to_string(selected.size()) + " >= " + std::to_string(per_entity.size());
    report.checks.push_back(c);
  }
  {
    size_t unknown = 0;
    for (const auto& [iri, recs] : per_entity) unknown += selected.count(iri) ? 0 : 1;
    report.checks.push_back({"every fetched entity was selected", unknown == 0,
                             std::to_string(unknown) + " unknown entities"});
  }
  if (validated_stage) {
    const auto counts = m.CountByStatus();
    auto count = [&](ingest::ImageStatus s) {
      auto it = counts.find(s);
      return it == counts.end() ? size_t{0} : it->second;
    };
    const size_t rejected =
        count(ingest::ImageStatus::kRejectedCorrupt) + count(ingest::ImageStatus::kRejectedAnimated);
    size_t unvalidated = 0;
    for (const auto& r : m.records) unvalidated += r.validated ? 0 : 1;
    report.checks.push_back({"every image validated", unvalidated == 0, std::to_string(unvalidated) + " unvalidated"});
    if (filtered_stage) {
      const size_t retained = count(ingest::ImageStatus::kRetained);
      const size_t filtered = count(ingest::ImageStatus::kFilteredOut);
      const size_t fetched_left = count(ingest::ImageStatus::kFetched);
      report.checks.push_back({"fetched = rejected + retained + filtered-out",
                               m.records.size() == rejected + retained + filtered && fetched_left == 0,
                               std::to_string(m.records.size()) + " = " + std::to_string(rejected) + " + " +
                                   std::to_string(retained) + " + " + std::to_string(filtered)});

      double contamination = 0.2;
      const std::string fp = run.StageParams("filter");
      if (!fp.empty()) contamination = json::parse(fp).value("contamination", 0.2);
      size_t bad = 0;
      std::string first_bad;
      for (const auto& [iri, recs] : per_entity) {
        size_t n = 0, out = 0;
        for (const auto* r : recs) {
          if (r->status == ingest::ImageStatus::kRetained || r->status == ingest::ImageStatus::kFilteredOut) ++n;
          if (r->status == ingest::ImageStatus::kFilteredOut) ++out;
        }
        const size_t expect = n < static_cast<size_t>(outlier::kMinFilterSize) ? 0 : outlier::FilterCount(contamination, n);
        if (out != expect) {
          if (!bad++) first_bad = iri + " filtered " + std::to_string(out) + " of " + std::to_string(n);
        }
      }
      report.checks.push_back({"per-entity filtered-out = floor(contamination * n)", bad == 0,
                               bad ? first_bad : "all " + std::to_string(per_entity.size()) + " entities"});

      if (run.Has(kCompletedFile)) {
        const std::string params = run.StageParams("complete");
        const std::string with_image =
            params.empty() ? "http://mmkb.test/p/withImage" : json::parse(params).value("with_image", "");
        const kg::Graph g = rdf::LoadGraph(run.Path(kCompletedFile).string());
        std::map<std::string, std::set<std::string>> retained_pairs;
        for (const auto& r : m.records) {
          if (r.status == ingest::ImageStatus::kRetained) retained_pairs[r.entity_iri].insert(r.image_id);
        }
        size_t expected = 0, mismatched = 0;
        for (const auto& [iri, ids] : retained_pairs) {
          expected += ids.size();
          const size_t have = g.Count(kg::TriplePattern{kg::Term::Iri(iri), kg::Term::Iri(with_image), kg::Variable{"i"}});
          mismatched += have == ids.size() ? 0 : 1;
        }
        const size_t triples = g.Count(kg::TriplePattern{kg::Variable{"e"}, kg::Term::Iri(with_image), kg::Variable{"i"}});
        report.checks.push_back({"with-image triples = retained images", mismatched == 0 && triples == expected,
                                 std::to_string(triples) + " triples, " + std::to_string(expected) + " retained"});
      }
    }
  }

  if (reference) {
    const ReferenceTable ref = ReadReference(*reference);
    const StatsRow* ref_total = nullptr;
    StatsRow sum;
    sum.filtered = 0;
    for (const auto& r : ref.rows) {
      if (r.topic == "Total") {
        ref_total = &r;
        continue;
      }
      sum.entities += r.entities;
      sum.images += r.images;
      *sum.filtered += r.filtered.value_or(0);
    }
    if (!ref_total) throw PipelineError("reference table has no Total row");
    report.checks.push_back({"reference domain rows sum to Total",
                             sum.entities == ref_total->entities && sum.images == ref_total->images &&
                                 sum.filtered == ref_total->filtered,
                             std::to_string(sum.entities) + "/" + std::to_string(sum.images) + "/" +
                                 std::to_string(*sum.filtered)});
    const double ref_denominator = ref.validated_total ? static_cast<double>(*ref.validated_total)
                                                       : static_cast<double>(ref_total->images);
    const double ref_ratio = static_cast<double>(ref_total->filtered.value_or(0)) / ref_denominator;
    if (!filtered_stage || total.validated == 0) {
      report.checks.push_back({"retention ratio matches reference", false, "run has not been filtered"});
    } else {
      const double ours = static_cast<double>(*total.filtered) / static_cast<double>(total.validated);
      char buf[128];
      std::snprintf(buf, sizeof(buf), "ours %.4f, reference %.4f, difference %.4f", ours, ref_ratio,
                    std::fabs(ours - ref_ratio));
      report.checks.push_back({"retention ratio matches reference (+/-0.01)", std::fabs(ours - ref_ratio) <= 0.01, buf});
    }
  }

  WriteAtomic(run.Path(kStatsFile), report.ToTsv());
  return report;
}

}  // namespace mmkg::pipeline
