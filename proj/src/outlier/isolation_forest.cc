#include "mmkg/outlier/isolation_forest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mmkg/util/random.h"

namespace mmkg::outlier {

double AvgPathC(std::int64_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n);
  return 2.0 * (std::log(m - 1.0) + kEulerGamma) - 2.0 * (m - 1.0) / m;
}

void ForestParams::Validate() const {
  if (tree_count < 1) throw std::invalid_argument("tree count must be >= 1");
  if (subsample_size < 2) throw std::invalid_argument("subsample size must be >= 2");
  if (!(contamination > 0.0 && contamination <= 0.5)) {
    throw std::invalid_argument("contamination must lie in (0, 0.5]");
  }
}

void PointSet::Add(std::span<const double> p) {
  if (dim == 0) dim = p.size();
  if (p.size() != dim || dim == 0) throw std::invalid_argument("point dimension mismatch");
  values.insert(values.end(), p.begin(), p.end());
}

void PointSet::Add(std::span<const float> p) {
  std::vector<double> d(p.begin(), p.end());
  Add(std::span<const double>(d));
}

int IsolationTree::Depth() const {
  if (nodes.empty()) return 0;
  int best = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    const TreeNode& n = nodes[static_cast<size_t>(i)];
    if (n.leaf()) {
      best = std::max(best, d);
    } else {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return best;
}

double IsolationTree::PathLength(std::span<const double> point) const {
  int i = 0, edges = 0;
  while (!nodes[static_cast<size_t>(i)].leaf()) {
    const TreeNode& n = nodes[static_cast<size_t>(i)];
    i = point[static_cast<size_t>(n.dim)] < n.split ? n.left : n.right;
    ++edges;
  }
  return edges + AvgPathC(nodes[static_cast<size_t>(i)].size);
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const PointSet& points, int height_limit, util::Rng& rng)
      : points_(points), height_limit_(height_limit), rng_(rng) {}

  int Grow(std::vector<size_t>& idx, size_t begin, size_t end, int depth, IsolationTree& tree) {
    const int self = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    tree.nodes.back().size = static_cast<int>(end - begin);
    if (depth >= height_limit_ || end - begin <= 1) return self;

    // Dimensions with spread among the points at this node.
    std::vector<int> dims;
    std::vector<std::pair<double, double>> range;
    for (size_t d = 0; d < points_.dim; ++d) {
      double lo = points_.row(idx[begin])[d], hi = lo;
      for (size_t k = begin + 1; k < end; ++k) {
        const double v = points_.row(idx[k])[d];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      // Needs a representable value strictly inside (lo, hi).
      if (lo < hi && std::nextafter(lo, hi) < hi) {
        dims.push_back(static_cast<int>(d));
        range.push_back({lo, hi});
      }
    }
    if (dims.empty()) return self;  // all identical

    const size_t pick = rng_.Below(dims.size());
    const auto [lo, hi] = range[pick];
    double split = rng_.Uniform(lo, hi);
    while (!(split > lo && split < hi)) split = rng_.Uniform(lo, hi);
    const int dim = dims[pick];

    auto mid_it = std::stable_partition(idx.begin() + static_cast<long>(begin),
                                        idx.begin() + static_cast<long>(end), [&](size_t p) {
                                          return points_.row(p)[static_cast<size_t>(dim)] < split;
                                        });
    const size_t mid = static_cast<size_t>(mid_it - idx.begin());
    const int left = Grow(idx, begin, mid, depth + 1, tree);
    const int right = Grow(idx, mid, end, depth + 1, tree);
    TreeNode& node = tree.nodes[static_cast<size_t>(self)];
    node.dim = dim;
    node.split = split;
    node.left = left;
    node.right = right;
    return self;
  }

 private:
  const PointSet& points_;
  int height_limit_;
  util::Rng& rng_;
};

}  // namespace

IsolationForest IsolationForest::Build(const PointSet& points, const ForestParams& params) {
  params.Validate();
  const size_t n = points.size();
  if (n < 2) {
    throw std::invalid_argument("isolation forest needs at least 2 points; retain smaller sets as-is");
  }
  for (double v : points.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite value in training points");
  }
  IsolationForest forest;
  forest.dim_ = points.dim;
  forest.sample_size_ = static_cast<int>(std::min<size_t>(n, static_cast<size_t>(params.subsample_size)));
  forest.height_limit_ = static_cast<int>(std::ceil(std::log2(forest.sample_size_)));

  util::Rng rng(params.seed);
  TreeBuilder builder(points, forest.height_limit_, rng);
  std::vector<size_t> all(n);
  for (int t = 0; t < params.tree_count; ++t) {
    // Partial Fisher-Yates: the first sample_size entries are the subsample.
    std::iota(all.begin(), all.end(), size_t{0});
    const size_t psi = static_cast<size_t>(forest.sample_size_);
    for (size_t i = 0; i < psi; ++i) std::swap(all[i], all[i + rng.Below(n - i)]);
    std::vector<size_t> sample(all.begin(), all.begin() + static_cast<long>(psi));
    std::sort(sample.begin(), sample.end());
    IsolationTree tree;
    builder.Grow(sample, 0, sample.size(), 0, tree);
    forest.trees_.push_back(std::move(tree));
  }
  return forest;
}

IsolationForest IsolationForest::FromTrees(std::vector<IsolationTree> trees, int sample_size,
                                           size_t dim) {
  if (trees.empty()) throw std::invalid_argument("forest needs at least one tree");
  IsolationForest forest;
  forest.trees_ = std::move(trees);
  forest.sample_size_ = sample_size;
  forest.height_limit_ = static_cast<int>(std::ceil(std::log2(std::max(sample_size, 1))));
  forest.dim_ = dim;
  return forest;
}

AnomalyScore IsolationForest::Score(std::span<const double> point) const {
  if (point.size() != dim_) {
    throw std::invalid_argument("point has dimension " + std::to_string(point.size()) +
                                ", forest expects " + std::to_string(dim_));
  }
  for (double v : point) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite component in scored point");
  }
  double total = 0;
  for (const IsolationTree& t : trees_) total += t.PathLength(point);
  AnomalyScore s;
  s.mean_path_length = total / static_cast<double>(trees_.size());
  const double c = AvgPathC(sample_size_);
  s.score = c > 0 ? std::exp2(-s.mean_path_length / c) : 0.5;
  return s;
}

}  // namespace mmkg::outlier
