#ifndef MMKG_OUTLIER_ISOLATION_FOREST_H_
#define MMKG_OUTLIER_ISOLATION_FOREST_H_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace mmkg::outlier {

inline constexpr double kEulerGamma = 0.5772156649;

// Expected unsuccessful-search path length in a BST of n points.
// c(0) = c(1) = 0, c(2) = 1.
double AvgPathC(std::int64_t n);

struct ForestParams {
  int tree_count = 100;
  int subsample_size = 256;  // capped at the row count
  double contamination = 0.2;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument.
  void Validate() const;
};

// Row-major points, all of the same dimension.
struct PointSet {
  size_t dim = 0;
  std::vector<double> values;

  size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(size_t i) const { return {values.data() + i * dim, dim}; }
  void Add(std::span<const double> p);
  void Add(std::span<const float> p);
};

struct TreeNode {
  int dim = -1;  // -1 marks a leaf
  double split = 0;
  int left = -1;  // x[dim] < split
  int right = -1;
  int size = 0;  // points that reached this node at build time
  bool leaf() const { return dim < 0; }
};

struct IsolationTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int Depth() const;
  // Edges from the root to the leaf `point` falls into, plus c(leaf size).
  double PathLength(std::span<const double> point) const;
};

struct AnomalyScore {
  double score = 0;             // 2^(-E(h) / c(psi))
  double mean_path_length = 0;  // E(h)
};

class IsolationForest {
 public:
  // Throws std::invalid_argument for fewer than 2 points.
  static IsolationForest Build(const PointSet& points, const ForestParams& params);
  // For hand-built fixtures.
  static IsolationForest FromTrees(std::vector<IsolationTree> trees, int sample_size, size_t dim);

  // Throws std::invalid_argument on dimension mismatch or non-finite input.
  AnomalyScore Score(std::span<const double> point) const;

  const std::vector<IsolationTree>& trees() const { return trees_; }
  int sample_size() const { return sample_size_; }
  int height_limit() const { return height_limit_; }

 private:
  std::vector<IsolationTree> trees_;
  int sample_size_ = 0;
  int height_limit_ = 0;
  size_t dim_ = 0;
};

}  // namespace mmkg::outlier

#endif  // MMKG_OUTLIER_ISOLATION_FOREST_H_
