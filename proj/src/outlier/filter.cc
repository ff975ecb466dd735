#include "mmkg/outlier/filter.h"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "mmkg/util/hash.h"

namespace mmkg::outlier {

size_t FilterCount(double contamination, size_t n) {
  return static_cast<size_t>(std::floor(contamination * static_cast<double>(n) + 1e-9));
}

EntityFilterResult FilterEntity(const ingest::Manifest& manifest, std::span<const size_t> slice,
                                const features::EmbeddingMatrix& embeddings,
                                const ForestParams& params, const std::string& entity_iri) {
  params.Validate();
  EntityFilterResult result;
  PointSet points;
  for (size_t idx : slice) {
    const ingest::ImageRecord& r = manifest.records.at(idx);
    const long row = embeddings.IndexOf(r.image_id);
    if (row < 0) throw std::invalid_argument("no embedding row for image " + r.image_id);
    points.Add(embeddings.row(static_cast<size_t>(row)));
    result.decisions.push_back(ImageDecision{idx, std::nullopt, true});
  }
  if (slice.size() < static_cast<size_t>(kMinFilterSize)) {
    result.small_entity = true;
    return result;
  }

  ForestParams p = params;
  p.seed = util::MixSeed(params.seed, util::Fnv1a64(entity_iri));
  const IsolationForest forest = IsolationForest::Build(points, p);
  for (size_t i = 0; i < slice.size(); ++i) result.decisions[i].score = forest.Score(points.row(i)).score;

  std::vector<size_t> order(slice.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const double sa = *result.decisions[a].score, sb = *result.decisions[b].score;
    if (sa != sb) return sa > sb;
    return manifest.records[slice[a]].rank > manifest.records[slice[b]].rank;
  });
  result.filtered = FilterCount(params.contamination, slice.size());
  for (size_t k = 0; k < result.filtered; ++k) result.decisions[order[k]].retained = false;
  return result;
}

FilterSummary FilterManifest(ingest::Manifest& manifest, const features::EmbeddingMatrix& embeddings,
                             const ForestParams& params, int workers) {
  params.Validate();
  std::vector<std::pair<std::string, std::vector<size_t>>> jobs;
  for (auto& [iri, indices] : manifest.RecordsByEntity()) {
    std::vector<size_t> candidates;
    for (size_t i : indices) {
      const ingest::ImageStatus s = manifest.records[i].status;
      if (s == ingest::ImageStatus::kRetained || s == ingest::ImageStatus::kFilteredOut) {
        throw std::invalid_argument("manifest has already been filtered (entity " + iri + ")");
      }
      if (s == ingest::ImageStatus::kFetched) {
        if (!manifest.records[i].validated) {
          throw std::invalid_argument("image " + manifest.records[i].image_id + " is not validated");
        }
        candidates.push_back(i);
      }
    }
    if (!candidates.empty()) jobs.emplace_back(iri, std::move(candidates));
  }

  std::vector<EntityFilterResult> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      try {
        results[i] = FilterEntity(manifest, jobs[i].second, embeddings, params, jobs[i].first);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < n_workers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw std::invalid_argument(e);
  }

  FilterSummary summary;
  summary.entities = jobs.size();
  for (size_t j = 0; j < jobs.size(); ++j) {
    const EntityFilterResult& r = results[j];
    if (r.small_entity) {
      summary.log.push_back("entity " + jobs[j].first + " has " +
                            std::to_string(r.decisions.size()) + " images (< " +
                            std::to_string(kMinFilterSize) + "); all retained");
    }
    for (const ImageDecision& d : r.decisions) {
      ingest::ImageRecord& rec = manifest.records[d.record];
      rec.anomaly_score = d.score;
      rec.Advance(d.retained ? ingest::ImageStatus::kRetained : ingest::ImageStatus::kFilteredOut);
      ++(d.retained ? summary.retained : summary.filtered);
    }
  }
  return summary;
}

Projection Project2d(const PointSet& points, const std::vector<std::pair<std::string, bool>>& flags) {
  const size_t n = points.size(), dim = points.dim;
  if (n < 2) throw std::invalid_argument("projection needs at least 2 points");
  if (flags.size() != n) throw std::invalid_argument("one flag per point is required");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (size_t i = 0; i < n; ++i) {
    for (size_t d = 0; d < dim; ++d) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = points.row(i)[d];
    }
  }
  const Eigen::VectorXd mean = x.colwise().mean();
  x.rowwise() -= mean.transpose();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd values = eig.eigenvalues();  // ascending
  const Eigen::MatrixXd vectors = eig.eigenvectors();

  Projection proj;
  proj.mean.assign(mean.data(), mean.data() + mean.size());
  const double top = std::max(0.0, values(values.size() - 1));
  const double tol = std::max(top, 1.0) * 1e-12 * static_cast<double>(std::max(n, dim));
  int rank = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) rank += values(i) > tol ? 1 : 0;

  std::array<Eigen::VectorXd, 2> comp;
  for (int c = 0; c < 2; ++c) {
    const Eigen::Index col = values.size() - 1 - c;
    comp[c] = col >= 0 ? Eigen::VectorXd(vectors.col(col)) : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    if (c >= rank) comp[c].setZero();
    Eigen::Index arg = 0;
    for (Eigen::Index k = 1; k < comp[c].size(); ++k) {
      if (std::fabs(comp[c](k)) > std::fabs(comp[c](arg))) arg = k;
    }
    if (comp[c].size() > 0 && comp[c](arg) < 0) comp[c] = -comp[c];
    proj.components[c].assign(comp[c].data(), comp[c].data() + comp[c].size());
    proj.variances[c] = c < rank ? values(col) : 0.0;
  }
  if (rank < 2) {
    proj.warnings.push_back("embeddings have rank " + std::to_string(rank) +
                            " after centering; second coordinate set to 0");
  }
  for (size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd row = x.row(static_cast<Eigen::Index>(i)).transpose();
    proj.points.push_back(
        ProjectedPoint{flags[i].first, row.dot(comp[0]), row.dot(comp[1]), flags[i].second});
  }
  return proj;
}

Projection Project2d(const features::EmbeddingMatrix& embeddings,
                     const std::vector<std::pair<std::string, bool>>& flags) {
  PointSet points;
  for (const auto& [id, retained] : flags) {
    const long row = embeddings.IndexOf(id);
    if (row < 0) throw std::invalid_argument("no embedding row for image " + id);
    points.Add(embeddings.row(static_cast<size_t>(row)));
  }
  return Project2d(points, flags);
}

void WriteProjectionTsv(const Projection& p, std::ostream& out) {
  out << "image_id\tx\ty\tflag\n";
  char buf[64];
  for (const ProjectedPoint& pt : p.points) {
    std::snprintf(buf, sizeof(buf), "\t%.9g\t%.9g\t", pt.x, pt.y);
    out << pt.image_id << buf << (pt.retained ? "retained" : "filtered-out") << '\n';
  }
}

}  // namespace mmkg::outlier
