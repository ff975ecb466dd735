#ifndef MMKG_FEATURES_EMBEDDING_H_
#define MMKG_FEATURES_EMBEDDING_H_

#include <array>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmkg/ingest/content_store.h"
#include "mmkg/ingest/image_codec.h"
#include "mmkg/ingest/manifest.h"

namespace mmkg::features {

inline constexpr int kEmbeddingDim = 128;
inline constexpr char kBuiltinExtractorId[] = "builtin-grid-hist-v1";
inline constexpr char kExchangeMagic[] = "MMKGEMB1";

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = std::array<float, kEmbeddingDim>;

// One unit-norm row per image id, in insertion order.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(std::string extractor_id) : extractor_id_(std::move(extractor_id)) {}

  // Throws EmbeddingError on a duplicate id.
  void AddRow(const std::string& image_id, std::span<const float> values);

  size_t rows() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> row(size_t i) const {
    return {data_.data() + i * kEmbeddingDim, static_cast<size_t>(kEmbeddingDim)};
  }
  // Row index of `image_id`, or -1.
  long IndexOf(const std::string& image_id) const;
  const std::string& extractor_id() const { return extractor_id_; }
  void set_extractor_id(std::string id) { extractor_id_ = std::move(id); }

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.extractor_id_ == b.extractor_id_ && a.ids_ == b.ids_ && a.data_ == b.data_;
  }

 private:
  std::string extractor_id_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, size_t> index_;
};

// 96 grid statistics + 32 luminance bins, L2-normalized.
Vector DescribeImage(const ingest::RgbImage& image);

// Area-average resample (exposed for tests).
ingest::RgbImage ResampleArea(const ingest::RgbImage& image, int width, int height);

// Rows for Manifest::CandidateImageIds(), in that order. Every candidate
// must be validated; unreadable files raise EmbeddingError naming the id.
EmbeddingMatrix ExtractBuiltin(const ingest::Manifest& manifest, const ingest::ContentStore& store,
                               int workers = 1);

// Binary exchange format (little-endian): magic, dim u32, count u64, then
// per row id-length u16, id bytes, dim x f32.
void WriteEmbeddingsBinary(const EmbeddingMatrix& m, const std::filesystem::path& path);
// Text variant: "# MMKGEMB1 dim=128 count=N extractor=<id>" then id<TAB>values.
void WriteEmbeddingsTsv(const EmbeddingMatrix& m, const std::filesystem::path& path);

// Reads either variant without any manifest checks. Rows must be finite;
// they are returned as stored.
EmbeddingMatrix ReadEmbeddings(const std::filesystem::path& path);

// Reads an externally produced file and re-associates its rows to the
// manifest's candidate ids. Rows within 1e-3 of unit norm are renormalized;
// others, non-finite rows, and missing or extra ids are rejected.
EmbeddingMatrix LoadExternal(const std::filesystem::path& path, const ingest::Manifest& manifest);

double L2Norm(std::span<const float> v);
double Cosine(std::span<const float> a, std::span<const float> b);

}  // namespace mmkg::features

#endif  // MMKG_FEATURES_EMBEDDING_H_
