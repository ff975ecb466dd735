#include "mmkg/ingest/manifest.h"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace mmkg::ingest {

using nlohmann::json;

namespace {

constexpr std::pair<ImageFormat, std::string_view> kFormats[] = {
    {ImageFormat::kJpeg, "jpeg"}, {ImageFormat::kPng, "png"},   {ImageFormat::kGif, "gif"},
    {ImageFormat::kWebp, "webp"}, {ImageFormat::kBmp, "bmp"},   {ImageFormat::kUnknown, "unknown"},
};

constexpr std::pair<ImageStatus, std::string_view> kStatuses[] = {
    {ImageStatus::kFetched, "fetched"},
    {ImageStatus::kRejectedCorrupt, "rejected-corrupt"},
    {ImageStatus::kRejectedAnimated, "rejected-animated"},
    {ImageStatus::kRetained, "retained"},
    {ImageStatus::kFilteredOut, "filtered-out"},
};

}  // namespace

std::string_view FormatName(ImageFormat f) {
  for (auto [k, v] : kFormats) {
    if (k == f) return v;
  }
  return "unknown";
}

ImageFormat ParseFormatName(std::string_view name) {
  for (auto [k, v] : kFormats) {
    if (v == name) return k;
  }
  throw std::invalid_argument("unknown image format '" + std::string(name) + "'");
}

std::string_view FormatExtension(ImageFormat f) {
  switch (f) {
    case ImageFormat::kJpeg: return "jpg";
    case ImageFormat::kPng: return "png";
    case ImageFormat::kGif: return "gif";
    case ImageFormat::kWebp: return "webp";
    case ImageFormat::kBmp: return "bmp";
    case ImageFormat::kUnknown: break;
  }
  return "bin";
}

std::string_view StatusName(ImageStatus s) {
  for (auto [k, v] : kStatuses) {
    if (k == s) return v;
  }
  return "fetched";
}

ImageStatus ParseStatusName(std::string_view name) {
  for (auto [k, v] : kStatuses) {
    if (v == name) return k;
  }
  throw std::invalid_argument("unknown image status '" + std::string(name) + "'");
}

bool IsAllowedTransition(ImageStatus from, ImageStatus to) {
  return from == ImageStatus::kFetched && to != ImageStatus::kFetched;
}

void ImageRecord::Advance(ImageStatus to) {
  if (to == status) return;
  if (!IsAllowedTransition(status, to)) {
    throw std::logic_error("image " + image_id + ": illegal status transition " +
                           std::string(StatusName(status)) + " -> " +
                           std::string(StatusName(to)));
  }
  status = to;
}

std::map<ImageStatus, size_t> Manifest::CountByStatus() const {
  std::map<ImageStatus, size_t> counts;
  for (auto [k, v] : kStatuses) counts[k] = 0;
  for (const ImageRecord& r : records) ++counts[r.status];
  return counts;
}

std::map<std::string, std::vector<size_t>> Manifest::RecordsByEntity() const {
  std::map<std::string, std::vector<size_t>> out;
  for (size_t i = 0; i < records.size(); ++i) out[records[i].entity_iri].push_back(i);
  return out;
}

std::vector<std::string> Manifest::CandidateImageIds() const {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const ImageRecord& r : records) {
    if (r.status == ImageStatus::kRejectedCorrupt || r.status == ImageStatus::kRejectedAnimated) {
      continue;
    }
    if (seen.insert(r.image_id).second) ids.push_back(r.image_id);
  }
  return ids;
}

std::string RecordToJson(const ImageRecord& r) {
  // ordered_json keeps the documented key order on disk.
  nlohmann::ordered_json j;
  j["image-id"] = r.image_id;
  j["entity-iri"] = r.entity_iri;
  j["domain"] = r.domain;
  j["source-locator"] = r.source_locator;
  j["local-path"] = r.local_path;
  j["format"] = FormatName(r.format);
  j["width"] = r.width;
  j["height"] = r.height;
  j["rank"] = r.rank;
  j["status"] = StatusName(r.status);
  j["validated"] = r.validated;
  if (r.anomaly_score) j["anomaly-score"] = *r.anomaly_score;
  return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

ImageRecord RecordFromJson(std::string_view line) {
  json j = json::parse(line);
  ImageRecord r;
  r.image_id = j.at("image-id").get<std::string>();
  r.entity_iri = j.at("entity-iri").get<std::string>();
  r.domain = j.value("domain", std::string());
  r.source_locator = j.at("source-locator").get<std::string>();
  r.local_path = j.at("local-path").get<std::string>();
  r.format = ParseFormatName(j.at("format").get<std::string>());
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  r.rank = j.at("rank").get<int>();
  r.status = ParseStatusName(j.at("status").get<std::string>());
  r.validated = j.value("validated", false);
  if (j.contains("anomaly-score")) r.anomaly_score = j.at("anomaly-score").get<double>();
  if (r.rank < 0 || r.rank >= kDefaultImageCap) throw std::invalid_argument("rank out of range");
  return r;
}

std::string MetadataPath(const std::string& manifest_path) { return manifest_path + ".meta.json"; }

void WriteManifestJsonl(const Manifest& manifest, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const ImageRecord& r : manifest.records) out << RecordToJson(r) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
  }
  std::filesystem::rename(tmp, path);

  nlohmann::ordered_json meta;
  const RunMetadata& m = manifest.metadata;
  meta["version"] = m.version;
  meta["timestamp"] = m.timestamp;
  meta["fetcher"] = m.fetcher_id;
  meta["cap"] = m.cap;
  meta["records"] = manifest.records.size();
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (auto [status, n] : manifest.CountByStatus()) counts[std::string(StatusName(status))] = n;
  meta["counts"] = counts;
  meta["imageless-entities"] = m.imageless_entities;
  nlohmann::ordered_json absent = nlohmann::ordered_json::array();
  for (const AbsentImage& a : m.absent) {
    absent.push_back({{"entity-iri", a.entity_iri},
                      {"source-locator", a.source_locator},
                      {"reason", a.reason}});
  }
  meta["absent"] = absent;
  meta["notes"] = m.notes;
  std::ofstream out(MetadataPath(path), std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + MetadataPath(path));
  out << meta.dump(2) << '\n';
}

Manifest ReadManifestJsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  Manifest manifest;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      manifest.records.push_back(RecordFromJson(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }

  std::ifstream meta_in(MetadataPath(path), std::ios::binary);
  if (meta_in) {
    json meta = json::parse(meta_in);
    RunMetadata& m = manifest.metadata;
    m.version = meta.value("version", 0);
    if (m.version != kManifestVersion) {
      throw std::runtime_error(path + ": manifest version " + std::to_string(m.version) +
                               " is not supported (expected " +
                               std::to_string(kManifestVersion) + ")");
    }
    m.timestamp = meta.value("timestamp", std::string());
    m.fetcher_id = meta.value("fetcher", std::string());
    m.cap = meta.value("cap", kDefaultImageCap);
    m.imageless_entities = meta.value("imageless-entities", std::vector<std::string>{});
    for (const auto& a : meta.value("absent", json::array())) {
      m.absent.push_back(AbsentImage{a.at("entity-iri").get<std::string>(),
                                     a.at("source-locator").get<std::string>(),
                                     a.at("reason").get<std::string>()});
    }
    m.notes = meta.value("notes", std::map<std::string, std::string>{});
    // The stored tallies must agree with the records.
    if (meta.contains("counts")) {
      auto actual = manifest.CountByStatus();
      for (auto [status, n] : actual) {
        size_t stored = meta["counts"].value(std::string(StatusName(status)), size_t{0});
        if (stored != n) {
          throw std::runtime_error(path + ": metadata count for " +
                                   std::string(StatusName(status)) + " is " +
                                   std::to_string(stored) + " but records tally " +
                                   std::to_string(n));
        }
      }
    }
  }
  return manifest;
}

std::string CurrentTimestampUtc() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace mmkg::ingest
