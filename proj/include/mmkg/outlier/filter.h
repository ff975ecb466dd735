#ifndef MMKG_OUTLIER_FILTER_H_
#define MMKG_OUTLIER_FILTER_H_

#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mmkg/features/embedding.h"
#include "mmkg/ingest/manifest.h"
#include "mmkg/outlier/isolation_forest.h"

namespace mmkg::outlier {

// Entities with fewer candidate images are retained wholesale.
inline constexpr int kMinFilterSize = 5;

struct ImageDecision {
  size_t record = 0;  // index into Manifest::records
  std::optional<double> score;
  bool retained = true;
};

struct EntityFilterResult {
  std::vector<ImageDecision> decisions;  // in slice order
  size_t filtered = 0;
  bool small_entity = false;
};

// floor(contamination * n), guarded against representation error.
size_t FilterCount(double contamination, size_t n);

// Scores one entity's images with a forest trained on exactly those images
// and flags the FilterCount highest scores. Equal scores: the later search
// rank goes first. The forest seed is derived from params.seed and the IRI.
EntityFilterResult FilterEntity(const ingest::Manifest& manifest, std::span<const size_t> slice,
                                const features::EmbeddingMatrix& embeddings,
                                const ForestParams& params, const std::string& entity_iri);

struct FilterSummary {
  size_t entities = 0;
  size_t retained = 0;
  size_t filtered = 0;
  std::vector<std::string> log;  // small-entity notices
};

// Applies FilterEntity to every entity with candidate images, moving each
// `fetched` record to retained or filtered-out and recording its score.
FilterSummary FilterManifest(ingest::Manifest& manifest, const features::EmbeddingMatrix& embeddings,
                             const ForestParams& params, int workers = 1);

struct ProjectedPoint {
  std::string image_id;
  double x = 0;
  double y = 0;
  bool retained = true;
};

struct Projection {
  std::vector<ProjectedPoint> points;
  std::vector<double> mean;
  std::array<std::vector<double>, 2> components;
  std::array<double, 2> variances{};
  std::vector<std::string> warnings;
};

// Mean-centered PCA onto the top two components. Each component's
// largest-magnitude loading is made positive. `flags` pairs image ids
// with their retained flag; every id needs an embedding row.
Projection Project2d(const features::EmbeddingMatrix& embeddings,
                     const std::vector<std::pair<std::string, bool>>& flags);
Projection Project2d(const PointSet& points, const std::vector<std::pair<std::string, bool>>& flags);

// image-id, x, y, flag (retained | filtered-out)
void WriteProjectionTsv(const Projection& p, std::ostream& out);

}  // namespace mmkg::outlier

#endif  // MMKG_OUTLIER_FILTER_H_
