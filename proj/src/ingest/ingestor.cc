#include "mmkg/ingest/ingestor.h"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "json.hpp"
#include "mmkg/ingest/image_codec.h"

namespace mmkg::ingest {

namespace {

using nlohmann::json;

struct EntityJob {
  select::EntityRecord entity;  // domain holds the joined domain list
};

struct EntityOutcome {
  bool done = false;
  std::vector<ImageRecord> records;
  std::vector<AbsentImage> absent;
};

struct Checkpoint {
  std::string source_id;
  std::map<std::string, EntityOutcome> completed;  // by entity IRI
};

void SaveCheckpoint(const std::string& path, const Checkpoint& cp) {
  json j;
  j["version"] = kManifestVersion;
  j["source"] = cp.source_id;
  json entities = json::array();
  for (const auto& [iri, outcome] : cp.completed) {
    json records = json::array();
    for (const ImageRecord& r : outcome.records) records.push_back(json::parse(RecordToJson(r)));
    json absent = json::array();
    for (const AbsentImage& a : outcome.absent) {
      absent.push_back({{"entity-iri", a.entity_iri},
                        {"source-locator", a.source_locator},
                        {"reason", a.reason}});
    }
    entities.push_back({{"entity-iri", iri}, {"records", records}, {"absent", absent}});
  }
  j["entities"] = entities;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out << j.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::optional<Checkpoint> LoadCheckpoint(const std::string& path, const std::string& source_id) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json j = json::parse(in);
  if (j.value("version", 0) != kManifestVersion) {
    throw std::runtime_error("checkpoint " + path + " has an unsupported version");
  }
  if (j.value("source", std::string()) != source_id) {
    throw std::runtime_error("checkpoint " + path + " was written for source '" +
                             j.value("source", std::string()) + "', not '" + source_id + "'");
  }
  Checkpoint cp;
  cp.source_id = source_id;
  for (const json& e : j.at("entities")) {
    EntityOutcome outcome;
    outcome.done = true;
    for (const json& r : e.at("records")) outcome.records.push_back(RecordFromJson(r.dump()));
    for (const json& a : e.at("absent")) {
      outcome.absent.push_back(AbsentImage{a.at("entity-iri").get<std::string>(),
                                           a.at("source-locator").get<std::string>(),
                                           a.at("reason").get<std::string>()});
    }
    cp.completed[e.at("entity-iri").get<std::string>()] = std::move(outcome);
  }
  return cp;
}

// Runs `op` up to max_attempts times, sleeping initial_backoff * 2^k between
// attempts. Only TransientFetchError is retried.
template <typename Op>
auto WithRetries(const FetchOptions& options, Op op) -> decltype(op()) {
  std::chrono::milliseconds delay = options.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return op();
    } catch (const TransientFetchError&) {
      if (attempt >= options.max_attempts) throw;
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

EntityOutcome FetchEntity(const select::EntityRecord& entity, ImageSource& source,
                          ContentStore& store, const FetchOptions& options) {
  EntityOutcome outcome;
  std::vector<std::string> candidates;
  try {
    candidates = WithRetries(options, [&] { return source.ListCandidates(entity); });
  } catch (const TransientFetchError& e) {
    outcome.absent.push_back(AbsentImage{entity.iri, "", std::string("listing failed: ") + e.what()});
    outcome.done = true;
    return outcome;
  }
  const size_t take = std::min(candidates.size(), static_cast<size_t>(options.cap));
  for (size_t rank = 0; rank < take; ++rank) {
    const std::string& locator = candidates[rank];
    std::string bytes;
    try {
      bytes = WithRetries(options, [&] { return source.Fetch(locator); });
    } catch (const ImageNotFound&) {
      outcome.absent.push_back(AbsentImage{entity.iri, locator, "not found"});
      continue;
    } catch (const TransientFetchError& e) {
      outcome.absent.push_back(AbsentImage{entity.iri, locator, e.what()});
      continue;
    }
    ContentStore::Stored stored = store.Put(bytes);
    ImageRecord record;
    record.image_id = stored.image_id;
    record.entity_iri = entity.iri;
    record.domain = entity.domain;
    record.source_locator = locator;
    record.local_path = stored.relative_path;
    record.format = stored.format;
    record.rank = static_cast<int>(rank);
    outcome.records.push_back(std::move(record));
  }
  outcome.done = true;
  return outcome;
}

}  // namespace

Manifest FetchImages(std::span<const select::EntityRecord> entities, ImageSource& source,
                     ContentStore& store, const FetchOptions& options) {
  if (options.cap < 1 || options.cap > kDefaultImageCap) {
    throw std::invalid_argument("cap must be between 1 and " + std::to_string(kDefaultImageCap));
  }
  if (options.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");

  // One job per distinct IRI, in first-selection order.
  std::vector<EntityJob> jobs;
  std::map<std::string, size_t> job_of;
  for (const select::EntityRecord& e : entities) {
    auto [it, added] = job_of.try_emplace(e.iri, jobs.size());
    if (added) {
      jobs.push_back(EntityJob{e});
    } else {
      std::string& domains = jobs[it->second].entity.domain;
      if (("," + domains + ",").find("," + e.domain + ",") == std::string::npos) {
        domains += "," + e.domain;
      }
    }
  }

  std::vector<EntityOutcome> outcomes(jobs.size());
  if (!options.checkpoint_path.empty()) {
    if (auto cp = LoadCheckpoint(options.checkpoint_path, source.id())) {
      for (size_t i = 0; i < jobs.size(); ++i) {
        auto it = cp->completed.find(jobs[i].entity.iri);
        if (it != cp->completed.end()) outcomes[i] = std::move(it->second);
      }
    }
  }

  std::atomic<size_t> next{0};
  std::atomic<bool> aborted{false};
  std::mutex error_mu;
  std::string abort_reason;
  auto worker = [&] {
    while (!aborted.load()) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      if (outcomes[i].done) continue;
      try {
        outcomes[i] = FetchEntity(jobs[i].entity, source, store, options);
      } catch (const SourceUnavailable& e) {
        std::lock_guard lock(error_mu);
        if (!aborted.exchange(true)) abort_reason = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(options.workers, static_cast<int>(jobs.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  if (aborted) {
    size_t completed = 0;
    if (!options.checkpoint_path.empty()) {
      Checkpoint cp;
      cp.source_id = source.id();
      for (size_t i = 0; i < jobs.size(); ++i) {
        if (outcomes[i].done) cp.completed[jobs[i].entity.iri] = outcomes[i];
      }
      completed = cp.completed.size();
      SaveCheckpoint(options.checkpoint_path, cp);
    } else {
      for (const auto& o : outcomes) completed += o.done ? 1 : 0;
    }
    throw FetchAborted("fetch aborted after " + std::to_string(completed) + " of " +
                           std::to_string(jobs.size()) + " entities: " + abort_reason,
                       completed);
  }

  Manifest manifest;
  manifest.metadata.timestamp = CurrentTimestampUtc();
  manifest.metadata.fetcher_id = source.id();
  manifest.metadata.cap = options.cap;
  for (size_t i = 0; i < jobs.size(); ++i) {
    EntityOutcome& o = outcomes[i];
    if (o.records.empty()) manifest.metadata.imageless_entities.push_back(jobs[i].entity.iri);
    for (ImageRecord& r : o.records) manifest.records.push_back(std::move(r));
    for (AbsentImage& a : o.absent) manifest.metadata.absent.push_back(std::move(a));
  }
  if (!options.checkpoint_path.empty()) {
    std::error_code ec;
    std::filesystem::remove(options.checkpoint_path, ec);
  }
  return manifest;
}

ValidationSummary ValidateManifest(Manifest& manifest, const ContentStore& store) {
  ValidationSummary summary;
  // Identical bytes give identical verdicts; check each stored file once.
  std::map<std::string, ImageCheck> cache;
  for (ImageRecord& r : manifest.records) {
    if (r.validated) continue;
    auto it = cache.find(r.image_id);
    if (it == cache.end()) {
      it = cache.emplace(r.image_id, ValidateImage(store.Resolve(r.local_path))).first;
    }
    const ImageCheck& check = it->second;
    r.format = check.format;
    r.width = check.width;
    r.height = check.height;
    r.validated = true;
    switch (check.verdict) {
      case ImageVerdict::kOk:
        ++summary.ok;
        break;
      case ImageVerdict::kCorrupt:
        r.Advance(ImageStatus::kRejectedCorrupt);
        ++summary.corrupt;
        break;
      case ImageVerdict::kAnimated:
        r.Advance(ImageStatus::kRejectedAnimated);
        ++summary.animated;
        break;
    }
  }
  return summary;
}

}  // namespace mmkg::ingest
