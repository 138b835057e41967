#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <vector>

#include "varimp/core.hpp"
#include "varimp/predictor.hpp"
#include "varimp/rng.hpp"

namespace varimp {

inline std::size_t resolve_max_features(const TreeConfig& config, std::size_t d) {
  const std::size_t m =
      config.max_features_per_split == 0
          ? (d + 2) / 3  // ceil(d/3)
          : config.max_features_per_split;
  if (m < 1 || m > d)
    throw config_error("tree: max_features_per_split must lie in [1, d]");
  return m;
}

namespace tree_detail {

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  std::int32_t left = -1, right = -1;
};

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double child_sse = std::numeric_limits<double>::infinity();
};

// Best squared-error split of `rows` along `feature`: candidates are midpoints
// between consecutive distinct sorted values, scored by prefix sums.
inline Split best_split_on_feature(const Matrix& X, const std::vector<double>& y,
                                   std::vector<std::size_t>& rows, std::size_t feature,
                                   std::size_t min_samples_leaf) {
  Split best;
  best.feature = feature;
  const std::size_t n = rows.size();
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    const double va = X(a, feature), vb = X(b, feature);
    if (va != vb) return va < vb;
    return a < b;  // stable order for determinism
  });
  double left_sum = 0.0, left_sum2 = 0.0, total_sum = 0.0, total_sum2 = 0.0;
  for (std::size_t r : rows) {
    total_sum += y[r];
    total_sum2 += y[r] * y[r];
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double yi = y[rows[i]];
    left_sum += yi;
    left_sum2 += yi * yi;
    const double a = X(rows[i], feature), b = X(rows[i + 1], feature);
    if (a == b) continue;
    const std::size_t n_left = i + 1, n_right = n - n_left;
    if (n_left < min_samples_leaf || n_right < min_samples_leaf) continue;
    const double right_sum = total_sum - left_sum;
    const double right_sum2 = total_sum2 - left_sum2;
    const double sse = (left_sum2 - left_sum * left_sum / n_left) +
                       (right_sum2 - right_sum * right_sum / n_right);
    if (sse < best.child_sse) {
      double thr = 0.5 * (a + b);
      if (!(thr < b)) thr = a;  // keep the left-of-threshold rule exact
      best.found = true;
      best.threshold = thr;
      best.child_sse = sse;
    }
  }
  return best;
}

}  // namespace tree_detail

class TreeModel final : public Predictor {
 public:
  TreeModel(TreeConfig config, std::vector<tree_detail::Node> nodes, std::size_t d,
            std::uint64_t seed)
      : config_(std::move(config)), nodes_(std::move(nodes)), d_(d), seed_(seed) {}

  std::vector<double> predict(const Matrix& X) const override {
    check_columns(X);
    std::vector<double> out(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) {
      const double* x = X.row_ptr(r);
      std::int32_t idx = 0;
      while (nodes_[static_cast<std::size_t>(idx)].feature >= 0) {
        const auto& node = nodes_[static_cast<std::size_t>(idx)];
        idx = x[node.feature] <= node.threshold ? node.left : node.right;
      }
      out[r] = nodes_[static_cast<std::size_t>(idx)].value;
    }
    return out;
  }

  std::size_t feature_count() const override { return d_; }
  std::string type_name() const override { return "tree"; }
  std::uint64_t fit_seed() const override { return seed_; }
  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<tree_detail::Node>& nodes() const { return nodes_; }
  const TreeConfig& config() const { return config_; }

  nlohmann::json payload() const override {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : nodes_) {
      nodes.push_back({{"f", node.feature},
                       {"t", node.threshold},
                       {"v", node.value},
                       {"l", node.left},
                       {"r", node.right}});
    }
    return {{"d", d_}, {"nodes", nodes}};
  }

  static std::shared_ptr<TreeModel> from_payload(const TreeConfig& config,
                                                 const nlohmann::json& p,
                                                 std::uint64_t seed) {
    std::vector<tree_detail::Node> nodes;
    for (const auto& jn : p.at("nodes")) {
      tree_detail::Node node;
      node.feature = jn.at("f").get<int>();
      node.threshold = jn.at("t").get<double>();
      node.value = jn.at("v").get<double>();
      node.left = jn.at("l").get<std::int32_t>();
      node.right = jn.at("r").get<std::int32_t>();
      nodes.push_back(node);
    }
    return std::make_shared<TreeModel>(config, std::move(nodes),
                                       p.at("d").get<std::size_t>(), seed);
  }

 private:
  TreeConfig config_;
  std::vector<tree_detail::Node> nodes_;
  std::size_t d_;
  std::uint64_t seed_;
};

// Greedy CART regression tree. Each node considers a uniformly random subset
// of features (drawn without replacement) and takes the split minimizing the
// summed child squared error; leaves predict the mean response.
inline PredictorPtr tree_fit(const TreeConfig& config, const Matrix& X,
                             const std::vector<double>& y, std::uint64_t seed) {
  validate(config);
  const std::size_t n = X.rows(), d = X.cols();
  if (y.size() != n) throw shape_error("tree_fit: X/y row mismatch");
  if (n < 2) throw config_error("tree_fit: need at least 2 rows");
  if (d == 0) throw shape_error("tree_fit: need at least 1 feature");
  const std::size_t max_features = resolve_max_features(config, d);

  std::vector<tree_detail::Node> nodes;
  RngStream stream(RngKey(seed).child("tree").key);

  struct Frame {
    std::vector<std::size_t> rows;
    std::size_t depth;
    std::int32_t index;
  };

  // Nodes are grown in preorder so the RNG consumption order — and therefore
  // the tree — is a pure function of (X, y, seed, config).
  std::vector<Frame> stack;
  {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    nodes.emplace_back();
    stack.push_back({std::move(all), 0, 0});
  }
  while (!stack.empty()) {
    Frame frame = std::move(stack.back());
    stack.pop_back();
    const std::vector<std::size_t>& rows = frame.rows;
    double sum = 0.0;
    for (std::size_t r : rows) sum += y[r];
    const double node_mean = sum / static_cast<double>(rows.size());

    bool splittable = rows.size() >= 2 * config.min_samples_leaf && rows.size() >= 2 &&
                      (config.max_depth == 0 || frame.depth < config.max_depth);
    if (splittable) {
      bool pure = true;
      for (std::size_t r : rows)
        if (y[r] != y[rows[0]]) {
          pure = false;
          break;
        }
      splittable = !pure;
    }

    tree_detail::Split best;
    if (splittable) {
      const std::vector<std::size_t> features =
          stream.sample_without_replacement(d, max_features);
      std::vector<std::size_t> scratch = rows;
      for (std::size_t f : features) {
        const tree_detail::Split s = tree_detail::best_split_on_feature(
            X, y, scratch, f, config.min_samples_leaf);
        if (s.found && s.child_sse < best.child_sse) best = s;
      }
    }

    auto& node = nodes[static_cast<std::size_t>(frame.index)];
    if (!best.found) {
      node.feature = -1;
      node.value = node_mean;
      continue;
    }
    node.feature = static_cast<int>(best.feature);
    node.threshold = best.threshold;
    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      if (X(r, best.feature) <= best.threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    const std::int32_t left_index = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    const std::int32_t right_index = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    nodes[static_cast<std::size_t>(frame.index)].left = left_index;
    nodes[static_cast<std::size_t>(frame.index)].right = right_index;
    // Preorder: process the left child next.
    stack.push_back({std::move(right_rows), frame.depth + 1, right_index});
    stack.push_back({std::move(left_rows), frame.depth + 1, left_index});
  }

  return std::make_shared<TreeModel>(config, std::move(nodes), d, seed);
}

}  // namespace varimp
