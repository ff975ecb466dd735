#ifndef MMKG_INGEST_MANIFEST_H_
#define MMKG_INGEST_MANIFEST_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmkg::ingest {

// Per-entity candidate cap: up to 30 search results are kept.
inline constexpr int kDefaultImageCap = 30;
inline constexpr int kManifestVersion = 1;

enum class ImageFormat { kJpeg, kPng, kGif, kWebp, kBmp, kUnknown };

enum class ImageStatus {
  kFetched,
  kRejectedCorrupt,
  kRejectedAnimated,
  kRetained,
  kFilteredOut,
};

std::string_view FormatName(ImageFormat f);
ImageFormat ParseFormatName(std::string_view name);
// File extension used in the content store ("jpg", "png", ..., "bin").
std::string_view FormatExtension(ImageFormat f);

std::string_view StatusName(ImageStatus s);
ImageStatus ParseStatusName(std::string_view name);

// Statuses only move forward: fetched -> one of the four terminal states.
bool IsAllowedTransition(ImageStatus from, ImageStatus to);

struct ImageRecord {
  std::string image_id;  // SHA-256 hex of the file bytes
  std::string entity_iri;
  std::string domain;
  std::string source_locator;
  std::string local_path;  // relative to the content store root
  ImageFormat format = ImageFormat::kUnknown;
  int width = 0;
  int height = 0;
  int rank = 0;  // search-result position, 0-based
  ImageStatus status = ImageStatus::kFetched;
  bool validated = false;
  std::optional<double> anomaly_score;

  // Throws std::logic_error on a backward or sideways transition.
  void Advance(ImageStatus to);

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct AbsentImage {
  std::string entity_iri;
  std::string source_locator;
  std::string reason;

  friend bool operator==(const AbsentImage&, const AbsentImage&) = default;
};

struct RunMetadata {
  int version = kManifestVersion;
  std::string timestamp;  // ISO-8601 UTC
  std::string fetcher_id;
  int cap = kDefaultImageCap;
  std::vector<std::string> imageless_entities;
  std::vector<AbsentImage> absent;
  std::map<std::string, std::string> notes;

  friend bool operator==(const RunMetadata&, const RunMetadata&) = default;
};

struct Manifest {
  std::vector<ImageRecord> records;
  RunMetadata metadata;

  std::map<ImageStatus, size_t> CountByStatus() const;
  // Indices of each entity's records, keyed by entity IRI, in manifest order.
  std::map<std::string, std::vector<size_t>> RecordsByEntity() const;
  // Distinct image ids in order of first appearance among records whose
  // status is not a rejection.
  std::vector<std::string> CandidateImageIds() const;
};

// One JSON object per line, keys: image-id, entity-iri, domain,
// source-locator, local-path, format, width, height, rank, status,
// validated, and anomaly-score when scored.
void WriteManifestJsonl(const Manifest& manifest, const std::string& path);
Manifest ReadManifestJsonl(const std::string& path);
std::string RecordToJson(const ImageRecord& r);
ImageRecord RecordFromJson(std::string_view line);

// Sidecar `<path>.meta.json` holding RunMetadata plus per-status counts,
// always recomputed from the records on write.
std::string MetadataPath(const std::string& manifest_path);

std::string CurrentTimestampUtc();

}  // namespace mmkg::ingest

#endif  // MMKG_INGEST_MANIFEST_H_
