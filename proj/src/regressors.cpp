#include <algorithm>
#include <cmath>

#include <Eigen/Sparse>

#include "beliefsim/error.hpp"
#include "beliefsim/predictor.hpp"
#include "beliefsim/random.hpp"

namespace beliefsim::predictor {

namespace {

constexpr const char* kModule = "predictor";

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

SparseRows to_sparse(const FeatureMatrix& x) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < x.rows.size(); ++i) {
    for (const auto& [j, value] : x.rows[i].entries) {
      if (j >= x.cols) throw DomainError(kModule, "feature index outside the matrix width");
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), value);
    }
  }
  SparseRows out(static_cast<Eigen::Index>(x.rows.size()), static_cast<Eigen::Index>(x.cols));
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

void require_shape(const FeatureMatrix& x, std::span<const double> y) {
  if (x.rows.empty()) throw DomainError(kModule, "cannot fit a regressor on no examples");
  if (x.rows.size() != y.size()) {
    throw DomainError(kModule, "feature rows (" + std::to_string(x.rows.size()) +
                                   ") and targets (" + std::to_string(y.size()) + ") differ");
  }
}

Eigen::VectorXd solve_symmetric(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double penalty) {
  if (penalty > 0.0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw NumericError(kModule, "ridge system could not be factored");
    return ldlt.solve(b);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.rows()) {
    throw NumericError(kModule, "ridge system is singular at penalty 0 (rank " +
                                    std::to_string(qr.rank()) + " of " + std::to_string(a.rows()) + ")");
  }
  return qr.solve(b);
}

}  // namespace

double RidgeModel::predict(const SparseVector& x) const {
  double out = intercept;
  for (const auto& [j, value] : x.entries) {
    if (j < static_cast<std::size_t>(weights.size())) out += weights[static_cast<Eigen::Index>(j)] * value;
  }
  return out;
}

RidgeModel fit_ridge(const FeatureMatrix& x, std::span<const double> y, double penalty) {
  require_shape(x, y);
  if (!(penalty >= 0.0) || !std::isfinite(penalty)) {
    throw DomainError(kModule, "ridge penalty must be finite and >= 0");
  }
  const auto n = static_cast<Eigen::Index>(x.rows.size());
  const auto p = static_cast<Eigen::Index>(x.cols);
  const SparseRows xs = to_sparse(x);
  const Eigen::Map<const Eigen::VectorXd> target(y.data(), n);
  const double y_mean = target.mean();
  const Eigen::VectorXd yc = target.array() - y_mean;
  const Eigen::VectorXd x_mean = (xs.transpose() * Eigen::VectorXd::Ones(n)) / static_cast<double>(n);

  RidgeModel model;
  model.penalty = penalty;
  if (p == 0) {
    model.weights = Eigen::VectorXd();
  } else if (p <= n) {
    // Centered normal equations: (X'X - n m m' + penalty I) w = X' yc.
    Eigen::MatrixXd gram = Eigen::MatrixXd(xs.transpose() * xs);
    gram -= static_cast<double>(n) * x_mean * x_mean.transpose();
    gram.diagonal().array() += penalty;
    model.weights = solve_symmetric(gram, xs.transpose() * yc, penalty);
  } else {
    // Dual form: (Xc Xc' + penalty I) alpha = yc, w = Xc' alpha.
    const Eigen::VectorXd row_dot_mean = xs * x_mean;
    Eigen::MatrixXd kernel = Eigen::MatrixXd(xs * xs.transpose());
    kernel.rowwise() -= row_dot_mean.transpose();
    kernel.colwise() -= row_dot_mean;
    kernel.array() += x_mean.squaredNorm();
    kernel.diagonal().array() += penalty;
    const Eigen::VectorXd alpha = solve_symmetric(kernel, yc, penalty);
    model.weights = xs.transpose() * alpha - x_mean * alpha.sum();
  }
  model.intercept = y_mean - (p == 0 ? 0.0 : x_mean.dot(model.weights));
  return model;
}

// --- random forest --------------------------------------------------------------

double RegressionTree::predict(const SparseVector& x) const {
  if (nodes.empty()) throw DomainError(kModule, "empty regression tree");
  std::size_t at = 0;
  while (nodes[at].feature >= 0) {
    const auto& node = nodes[at];
    at = static_cast<std::size_t>(x.at(static_cast<std::size_t>(node.feature)) <= node.threshold
                                      ? node.left
                                      : node.right);
  }
  return nodes[at].value;
}

double ForestModel::predict(const SparseVector& x) const {
  if (trees.empty()) throw DomainError(kModule, "empty forest");
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.predict(x);
  return sum / static_cast<double>(trees.size());
}

namespace {

struct Cell {
  std::size_t feature;
  double value;
  double target;
};

struct Candidate {
  std::size_t feature = 0;
  std::size_t begin = 0;  // range in the node's sorted cells
  std::size_t end = 0;
};

struct BestSplit {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double score = -1.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const double> y, std::size_t mtry, int min_split)
      : x_(x), y_(y), mtry_(mtry), min_split_(static_cast<std::size_t>(min_split)) {}

  RegressionTree build(std::uint64_t seed, bool bootstrap) {
    Rng rng(seed);
    std::vector<std::size_t> samples(x_.rows.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      samples[i] = bootstrap ? static_cast<std::size_t>(rng.uniform_index(samples.size())) : i;
    }
    RegressionTree tree;
    tree.seed = seed;
    tree.nodes.emplace_back();
    struct Pending {
      std::size_t node;
      std::vector<std::size_t> samples;
    };
    std::vector<Pending> stack;
    stack.push_back({0, std::move(samples)});
    while (!stack.empty()) {
      auto pending = std::move(stack.back());
      stack.pop_back();
      auto [left, right] = grow(tree, pending.node, pending.samples, rng);
      // Push right first so the left subtree is expanded first.
      if (!right.empty()) stack.push_back({static_cast<std::size_t>(tree.nodes[pending.node].right), std::move(right)});
      if (!left.empty()) stack.push_back({static_cast<std::size_t>(tree.nodes[pending.node].left), std::move(left)});
    }
    return tree;
  }

 private:
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> grow(
      RegressionTree& tree, std::size_t index, const std::vector<std::size_t>& samples, Rng& rng) {
    double sum = 0.0;
    double lo = y_[samples.front()];
    double hi = lo;
    for (auto s : samples) {
      sum += y_[s];
      lo = std::min(lo, y_[s]);
      hi = std::max(hi, y_[s]);
    }
    tree.nodes[index].value = sum / static_cast<double>(samples.size());
    if (samples.size() < min_split_ || lo == hi) return {};

    std::vector<Cell> cells;
    for (auto s : samples) {
      for (const auto& [feature, value] : x_.rows[s].entries) cells.push_back({feature, value, y_[s]});
    }
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
      return a.feature != b.feature ? a.feature < b.feature : a.value < b.value;
    });
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < cells.size();) {
      std::size_t j = i;
      while (j < cells.size() && cells[j].feature == cells[i].feature) ++j;
      const bool has_zeros = j - i < samples.size();
      if (has_zeros || cells[i].value != cells[j - 1].value) candidates.push_back({cells[i].feature, i, j});
      i = j;
    }
    if (candidates.empty()) return {};

    const std::size_t draws = std::min(mtry_, candidates.size());
    BestSplit best;
    for (std::size_t k = 0; k < draws; ++k) {
      const auto pick = k + static_cast<std::size_t>(rng.uniform_index(candidates.size() - k));
      std::swap(candidates[k], candidates[pick]);
      evaluate(candidates[k], cells, samples.size(), sum, best);
    }
    if (!best.found) return {};

    std::vector<std::size_t> left, right;
    for (auto s : samples) {
      (x_.rows[s].at(best.feature) <= best.threshold ? left : right).push_back(s);
    }
    auto& node = tree.nodes[index];
    node.feature = static_cast<int>(best.feature);
    node.threshold = best.threshold;
    node.left = static_cast<int>(tree.nodes.size());
    node.right = static_cast<int>(tree.nodes.size() + 1);
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    return {std::move(left), std::move(right)};
  }

  // Scans the feature's values in increasing order, with the implicit zeros
  // as one block, scoring every boundary between distinct values.
  static void evaluate(const Candidate& c, const std::vector<Cell>& cells, std::size_t count,
                       double total, BestSplit& best) {
    struct Block {
      double value;
      double count;
      double sum;
    };
    std::vector<Block> blocks;
    const std::size_t zeros = count - (c.end - c.begin);
    double nonzero_sum = 0.0;
    for (std::size_t i = c.begin; i < c.end; ++i) nonzero_sum += cells[i].target;
    bool zero_placed = zeros == 0;
    for (std::size_t i = c.begin; i < c.end; ++i) {
      if (!zero_placed && cells[i].value > 0.0) {
        blocks.push_back({0.0, static_cast<double>(zeros), total - nonzero_sum});
        zero_placed = true;
      }
      if (!blocks.empty() && blocks.back().value == cells[i].value) {
        blocks.back().count += 1.0;
        blocks.back().sum += cells[i].target;
      } else {
        blocks.push_back({cells[i].value, 1.0, cells[i].target});
      }
    }
    if (!zero_placed) blocks.push_back({0.0, static_cast<double>(zeros), total - nonzero_sum});

    const double n = static_cast<double>(count);
    double left_count = 0.0;
    double left_sum = 0.0;
    for (std::size_t b = 0; b + 1 < blocks.size(); ++b) {
      left_count += blocks[b].count;
      left_sum += blocks[b].sum;
      const double right_count = n - left_count;
      const double right_sum = total - left_sum;
      // Maximizing this minimizes the summed squared error of the children.
      const double score = left_sum * left_sum / left_count + right_sum * right_sum / right_count;
      if (!best.found || score > best.score) {
        const double a = blocks[b].value;
        const double z = blocks[b + 1].value;
        double threshold = a + (z - a) / 2.0;
        if (threshold >= z) threshold = a;
        best = {true, c.feature, threshold, score};
      }
    }
  }

  const FeatureMatrix& x_;
  std::span<const double> y_;
  std::size_t mtry_;
  std::size_t min_split_;
};

}  // namespace

ForestModel fit_forest(const FeatureMatrix& x, std::span<const double> y, const ForestConfig& config) {
  require_shape(x, y);
  if (config.trees < 1) throw DomainError(kModule, "forest needs at least one tree");
  if (config.min_split < 2) throw DomainError(kModule, "min_split must be >= 2");
  if (config.features_per_split < 0) throw DomainError(kModule, "features_per_split must be >= 0");
  for (const auto& row : x.rows) {
    for (const auto& [j, value] : row.entries) {
      if (j >= x.cols) throw DomainError(kModule, "feature index outside the matrix width");
      if (!std::isfinite(value)) throw DomainError(kModule, "non-finite feature value");
    }
  }
  const std::size_t mtry = config.features_per_split > 0
                               ? static_cast<std::size_t>(config.features_per_split)
                               : std::max<std::size_t>(1, x.cols / 3);
  ForestModel forest;
  forest.config = config;
  TreeBuilder builder(x, y, mtry, config.min_split);
  for (int t = 0; t < config.trees; ++t) {
    forest.trees.push_back(builder.build(mix_seed(config.seed, static_cast<std::uint64_t>(t)), config.bootstrap));
  }
  return forest;
}

}  // namespace beliefsim::predictor
