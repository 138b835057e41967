#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "varimp/core.hpp"

namespace varimp {

enum class FeatureSubset { support, null_features, all };

inline FeatureSubset feature_subset_from_name(const std::string& name) {
  if (name == "support") return FeatureSubset::support;
  if (name == "null") return FeatureSubset::null_features;
  if (name == "all") return FeatureSubset::all;
  throw config_error("unknown feature subset '" + name + "'");
}

// Mean squared error of estimated importances over a subset of features.
inline double importance_mse(const std::vector<double>& estimates,
                             const std::vector<double>& truth,
                             const std::vector<int>& support,
                             FeatureSubset subset = FeatureSubset::all) {
  if (estimates.size() != truth.size() || estimates.size() != support.size())
    throw shape_error("importance_mse: length mismatch");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    const bool in_support = support[j] != 0;
    if (subset == FeatureSubset::support && !in_support) continue;
    if (subset == FeatureSubset::null_features && in_support) continue;
    const double e = estimates[j] - truth[j];
    acc += e * e;
    ++count;
  }
  if (count == 0) throw config_error("importance_mse: empty feature subset");
  return acc / static_cast<double>(count);
}

struct DecompositionResult {
  std::vector<double> mse, bias_sq, variance;
  std::size_t n_runs = 0;
};

// Per-feature decomposition over replicated runs. Population variance
// (divide by n_runs) makes mse = bias_sq + variance an exact identity.
inline DecompositionResult bias_variance(const Matrix& run_estimates,
                                         const std::vector<double>& truth) {
  const std::size_t R = run_estimates.rows(), d = run_estimates.cols();
  if (R < 2) throw config_error("bias_variance: need at least 2 runs");
  if (truth.size() != d) throw shape_error("bias_variance: truth length mismatch");
  DecompositionResult out;
  out.n_runs = R;
  out.mse.resize(d);
  out.bias_sq.resize(d);
  out.variance.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const std::vector<double> runs = run_estimates.column(j);
    const double mu = mean(runs);
    out.bias_sq[j] = (mu - truth[j]) * (mu - truth[j]);
    out.variance[j] = population_variance(runs);
    double acc = 0.0;
    for (double v : runs) acc += (v - truth[j]) * (v - truth[j]);
    out.mse[j] = acc / static_cast<double>(R);
  }
  return out;
}

// Mann-Whitney AUC: probability a random relevant feature outscores a random
// irrelevant one, ties counted one half.
inline double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw shape_error("roc_auc: length mismatch");
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t k = 0; k < scores.size(); ++k) {
      if (labels[k]) continue;
      ++pairs;
      if (scores[i] > scores[k])
        wins += 1.0;
      else if (scores[i] == scores[k])
        wins += 0.5;
    }
  }
  if (pairs == 0) throw numeric_error("roc_auc: need both relevant and irrelevant labels");
  return wins / static_cast<double>(pairs);
}

inline double r2(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size()) throw shape_error("r2: length mismatch");
  if (y.empty()) throw numeric_error("r2: empty input");
  const double ybar = mean(y);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  if (ss_tot <= 0.0) throw numeric_error("r2: undefined for constant y");
  return 1.0 - ss_res / ss_tot;
}

inline std::vector<bool> relevance_labels(const std::vector<double>& truth,
                                          double epsilon) {
  if (epsilon < 0.0) throw config_error("relevance_labels: epsilon must be >= 0");
  std::vector<bool> labels(truth.size());
  for (std::size_t j = 0; j < truth.size(); ++j) labels[j] = std::fabs(truth[j]) > epsilon;
  return labels;
}

// Default relevance threshold: the asymptotic truth is itself a Monte-Carlo
// estimate, so features below 1% of the top score count as irrelevant.
inline double relevance_epsilon(const std::vector<double>& truth) {
  double top = 0.0;
  for (double v : truth) top = std::max(top, std::fabs(v));
  return 1e-2 * top;
}

}  // namespace varimp
