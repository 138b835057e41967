#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "varimp/core.hpp"
#include "varimp/ensemble.hpp"
#include "varimp/metrics.hpp"
#include "varimp/rng.hpp"
#include "varimp/tree.hpp"

namespace varimp {

enum class Method { loco, cfi, sage };
enum class Strategy { ensemble, sub_models };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::loco: return "loco";
    case Method::cfi: return "cfi";
    default: return "sage";
  }
}

inline std::string to_string(Strategy s) {
  return s == Strategy::ensemble ? "ensemble" : "sub_models";
}

inline Method method_from_name(const std::string& name) {
  if (name == "loco") return Method::loco;
  if (name == "cfi") return Method::cfi;
  if (name == "sage") return Method::sage;
  throw config_error("unknown method '" + name + "'");
}

inline Strategy strategy_from_name(const std::string& name) {
  if (name == "ensemble") return Strategy::ensemble;
  if (name == "sub_models") return Strategy::sub_models;
  throw config_error("unknown strategy '" + name + "'");
}

struct ImportanceScores {
  Method method = Method::loco;
  Strategy strategy = Strategy::ensemble;
  std::vector<double> scores;
  std::vector<double> se;  // zero where the estimator has no sampling axis
  std::size_t n_test = 0;
  nlohmann::json diagnostics;
};

// Elementwise mean of per-member score vectors.
inline std::vector<double> aggregate_submodel_scores(
    const std::vector<std::vector<double>>& per_member) {
  if (per_member.empty()) throw config_error("aggregate_submodel_scores: no members");
  const std::size_t d = per_member.front().size();
  for (const auto& v : per_member)
    if (v.size() != d) throw shape_error("aggregate_submodel_scores: length mismatch");
  std::vector<double> out(d, 0.0);
  for (const auto& v : per_member)
    for (std::size_t j = 0; j < d; ++j) out[j] += v[j];
  const double inv = 1.0 / static_cast<double>(per_member.size());
  for (double& v : out) v *= inv;
  return out;
}

namespace importance_detail {

struct Risks {
  double ensemble = 0.0;
  std::vector<double> member;
};

// Member and mean-combined risks for one prediction task.
inline Risks risks_of(const std::vector<std::vector<double>>& member_preds,
                      const std::vector<double>& y) {
  Risks out;
  const std::size_t B = member_preds.size(), n = y.size();
  std::vector<double> combined(n, 0.0);
  out.member.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    out.member[b] = mse(member_preds[b], y);
    for (std::size_t i = 0; i < n; ++i) combined[i] += member_preds[b][i];
  }
  const double inv = 1.0 / static_cast<double>(B);
  for (double& v : combined) v *= inv;
  out.ensemble = mse(combined, y);
  return out;
}

inline std::vector<std::vector<double>> predict_members(const EnsembleModel& ens,
                                                        const Matrix& X) {
  std::vector<std::vector<double>> preds;
  preds.reserve(ens.size());
  for (const auto& member : ens.members) preds.push_back(member->predict(X));
  return preds;
}

// Per-test-row squared errors under both aggregation views; row means of
// these are the ensemble and mean-member risks.
struct RowSquaredErrors {
  std::vector<double> combined;     // (mean_b pred_b - y)^2
  std::vector<double> member_mean;  // mean_b (pred_b - y)^2
};

inline RowSquaredErrors row_squared_errors(
    const std::vector<std::vector<double>>& member_preds,
    const std::vector<double>& y) {
  const std::size_t B = member_preds.size(), n = y.size();
  RowSquaredErrors out;
  out.combined.assign(n, 0.0);
  out.member_mean.assign(n, 0.0);
  const double inv = 1.0 / static_cast<double>(B);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0, sq = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double p = member_preds[b][i];
      acc += p;
      sq += (p - y[i]) * (p - y[i]);
    }
    const double e = acc * inv - y[i];
    out.combined[i] = e * e;
    out.member_mean[i] = sq * inv;
  }
  return out;
}

inline double r2_of_risk(double risk, const std::vector<double>& y) {
  const double var = population_variance(y);
  return var > 0.0 ? 1.0 - risk / var : 0.0;
}

}  // namespace importance_detail

// Member-level fit that also knows which original feature column was removed
// (-1 for the full set): real learners ignore it, oracle stubs use it to
// select the matching conditional-expectation predictor.
using RestrictedFitFn = std::function<PredictorPtr(
    const Matrix&, const std::vector<double>&, std::uint64_t, int dropped_feature)>;

inline RestrictedFitFn restricted_fit_fn(const MemberFitFn& fit) {
  return [fit](const Matrix& X, const std::vector<double>& y, std::uint64_t seed,
               int) { return fit(X, y, seed); };
}

struct StrategyPair {
  ImportanceScores ensemble;
  ImportanceScores sub_models;

  const ImportanceScores& get(Strategy s) const {
    return s == Strategy::ensemble ? ensemble : sub_models;
  }
};

// Leave-one-covariate-out: for every feature, refit each ensemble member
// without that column — identical member seed, identical bootstrap rows — and
// score the test-risk increase. One set of refits serves both strategies:
// the combined-model risk difference (ensemble) and the member-averaged risk
// difference (sub_models).
inline StrategyPair loco_pair(const RestrictedFitFn& fit, const Matrix& X_train,
                              const std::vector<double>& y_train, const Matrix& X_test,
                              const std::vector<double>& y_test,
                              const EnsembleModel& ens) {
  const std::size_t d = X_train.cols(), B = ens.size();
  if (X_test.cols() != d) throw shape_error("loco: train/test column mismatch");
  if (y_train.size() != X_train.rows() || y_test.size() != X_test.rows())
    throw shape_error("loco: X/y row mismatch");
  if (X_test.rows() == 0) throw config_error("loco: empty test set");
  if (B == 0) throw config_error("loco: empty ensemble");

  const auto base_preds = importance_detail::predict_members(ens, X_test);
  const auto base = importance_detail::row_squared_errors(base_preds, y_test);
  const std::size_t n = X_test.rows();

  std::vector<double> ens_scores(d), sub_scores(d), ens_se(d), sub_se(d),
      refit_r2_ens(d), refit_r2_sub(d);
  for (std::size_t j = 0; j < d; ++j) {
    const Matrix Xtr = X_train.without_column(j);
    const Matrix Xte = X_test.without_column(j);
    std::vector<std::vector<double>> restricted_preds(B);
    for (std::size_t b = 0; b < B; ++b) {
      try {
        PredictorPtr restricted;
        if (ens.kind == EnsembleKind::bagging) {
          const auto& idx = ens.bootstrap_indices.at(b);
          const Matrix Xb = Xtr.select_rows(idx);
          std::vector<double> yb(idx.size());
          for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = y_train[idx[i]];
          restricted = fit(Xb, yb, ens.member_seeds[b], static_cast<int>(j));
        } else {
          restricted = fit(Xtr, y_train, ens.member_seeds[b], static_cast<int>(j));
        }
        restricted_preds[b] = restricted->predict(Xte);
      } catch (const std::exception& e) {
        throw training_error("loco refit failed at feature " + std::to_string(j) +
                                 ", member " + std::to_string(b) + ": " + e.what(),
                             0);
      }
    }
    const auto restricted =
        importance_detail::row_squared_errors(restricted_preds, y_test);
    std::vector<double> diff_ens(n), diff_sub(n);
    for (std::size_t i = 0; i < n; ++i) {
      diff_ens[i] = restricted.combined[i] - base.combined[i];
      diff_sub[i] = restricted.member_mean[i] - base.member_mean[i];
    }
    ens_scores[j] = mean(diff_ens);
    sub_scores[j] = mean(diff_sub);
    ens_se[j] = n > 1 ? std::sqrt(sample_variance(diff_ens) / n) : 0.0;
    sub_se[j] = n > 1 ? std::sqrt(sample_variance(diff_sub) / n) : 0.0;
    refit_r2_ens[j] =
        importance_detail::r2_of_risk(mean(restricted.combined), y_test);
    refit_r2_sub[j] =
        importance_detail::r2_of_risk(mean(restricted.member_mean), y_test);
  }

  StrategyPair out;
  out.ensemble = {Method::loco,
                  Strategy::ensemble,
                  std::move(ens_scores),
                  std::move(ens_se),
                  n,
                  {{"refit_r2", refit_r2_ens},
                   {"r2_full",
                    importance_detail::r2_of_risk(mean(base.combined), y_test)}}};
  out.sub_models = {Method::loco,
                    Strategy::sub_models,
                    std::move(sub_scores),
                    std::move(sub_se),
                    n,
                    {{"refit_r2", refit_r2_sub},
                     {"r2_full", importance_detail::r2_of_risk(
                                     mean(base.member_mean), y_test)}}};
  return out;
}

inline ImportanceScores loco(const RestrictedFitFn& fit, const Matrix& X_train,
                             const std::vector<double>& y_train, const Matrix& X_test,
                             const std::vector<double>& y_test, Strategy strategy,
                             const EnsembleModel& ens) {
  return loco_pair(fit, X_train, y_train, X_test, y_test, ens).get(strategy);
}

inline ImportanceScores loco(const MemberFitFn& fit, const Matrix& X_train,
                             const std::vector<double>& y_train, const Matrix& X_test,
                             const std::vector<double>& y_test, Strategy strategy,
                             const EnsembleModel& ens) {
  return loco(restricted_fit_fn(fit), X_train, y_train, X_test, y_test, strategy, ens);
}

struct SamplerConfig {
  std::size_t bags = 10;
  std::size_t min_samples_leaf = 20;
};

// Conditional resampler for one feature: a bagged-tree regressor of X^j on
// X^{-j} fitted on the first half of the calibration rows, with residuals
// taken on the held-out second half so interpolation cannot shrink them.
struct ConditionalSampler {
  std::size_t target = 0;
  std::size_t d = 0;
  std::vector<PredictorPtr> regressors;  // empty => constant-mean regressor
  double constant_mean = 0.0;
  std::vector<double> residuals;

  std::vector<double> predicted_mean(const Matrix& X) const {
    if (X.cols() != d) throw shape_error("sampler: column-count mismatch");
    if (regressors.empty()) return std::vector<double>(X.rows(), constant_mean);
    const Matrix reduced = X.without_column(target);
    std::vector<double> acc(X.rows(), 0.0);
    for (const auto& reg : regressors) {
      const std::vector<double> p = reg->predict(reduced);
      for (std::size_t i = 0; i < p.size(); ++i) acc[i] += p[i];
    }
    const double inv = 1.0 / static_cast<double>(regressors.size());
    for (double& v : acc) v *= inv;
    return acc;
  }

  // Adds one seeded residual redraw onto the predicted means.
  void add_residuals(std::vector<double>& column, RngStream& stream) const {
    const std::size_t n = column.size(), m = residuals.size();
    if (m >= n) {
      const std::vector<std::size_t> perm = stream.permutation(m);
      for (std::size_t i = 0; i < n; ++i) column[i] += residuals[perm[i]];
    } else {
      for (std::size_t i = 0; i < n; ++i) column[i] += residuals[stream.next_below(m)];
    }
  }

  std::vector<double> resample(const Matrix& X, RngStream& stream) const {
    std::vector<double> column = predicted_mean(X);
    add_residuals(column, stream);
    return column;
  }
};

inline ConditionalSampler conditional_sampler_fit(const Matrix& X_calib, std::size_t j,
                                                  std::uint64_t seed,
                                                  const SamplerConfig& config = {}) {
  const std::size_t n = X_calib.rows(), d = X_calib.cols();
  if (n < 20) throw config_error("conditional_sampler_fit: need >= 20 calibration rows");
  if (j >= d) throw shape_error("conditional_sampler_fit: feature index out of range");
  const std::vector<double> col = X_calib.column(j);
  if (population_variance(col) < 1e-24)
    throw calibration_error("conditional_sampler_fit: constant column " +
                            std::to_string(j));

  ConditionalSampler sampler;
  sampler.target = j;
  sampler.d = d;
  const std::size_t half = n / 2;
  const Matrix fit_rows = X_calib.slice_rows(0, half);
  const Matrix held_rows = X_calib.slice_rows(half, n);
  const std::vector<double> y_fit(col.begin(), col.begin() + half);

  if (d == 1) {
    sampler.constant_mean = mean(y_fit);
  } else {
    TreeConfig tree;
    tree.min_samples_leaf = config.min_samples_leaf;
    tree.max_features_per_split = d - 1;
    const EnsembleModel bag = fit_bagging(tree, config.bags,
                                          fit_rows.without_column(j), y_fit,
                                          RngKey(seed).child("sampler", j).key);
    sampler.regressors = bag.members;
  }

  const std::vector<double> xhat = sampler.predicted_mean(held_rows);
  sampler.residuals.resize(held_rows.rows());
  for (std::size_t i = 0; i < held_rows.rows(); ++i)
    sampler.residuals[i] = held_rows(i, j) - xhat[i];
  return sampler;
}

inline std::vector<ConditionalSampler> fit_all_samplers(const Matrix& X_calib,
                                                        std::uint64_t seed,
                                                        const SamplerConfig& config = {}) {
  std::vector<ConditionalSampler> samplers;
  for (std::size_t j = 0; j < X_calib.cols(); ++j)
    samplers.push_back(conditional_sampler_fit(X_calib, j, seed, config));
  return samplers;
}

// Conditional feature importance: risk increase when one test column is
// replaced by a conditional redraw, scored by the unchanged model. Both
// strategies read off the same member predictions.
inline StrategyPair cfi_pair(const EnsembleModel& ens, const Matrix& X_test,
                             const std::vector<double>& y_test,
                             const std::vector<ConditionalSampler>& samplers,
                             std::size_t n_perm, std::uint64_t seed) {
  const std::size_t d = X_test.cols(), B = ens.size();
  if (n_perm < 1) throw config_error("cfi: n_perm must be >= 1");
  if (samplers.size() != d) throw shape_error("cfi: need one sampler per feature");
  if (y_test.size() != X_test.rows()) throw shape_error("cfi: X/y row mismatch");
  if (B == 0) throw config_error("cfi: empty ensemble");
  for (std::size_t j = 0; j < d; ++j)
    if (samplers[j].target != j || samplers[j].d != d)
      throw config_error("cfi: sampler " + std::to_string(j) +
                         " does not match its feature");

  const auto base_preds = importance_detail::predict_members(ens, X_test);
  const auto base = importance_detail::risks_of(base_preds, y_test);
  const RngKey key = RngKey(seed).child("cfi");

  std::vector<double> ens_scores(d), sub_scores(d), ens_se(d), sub_se(d);
  Matrix scratch = X_test;
  for (std::size_t j = 0; j < d; ++j) {
    const std::vector<double> xhat = samplers[j].predicted_mean(X_test);
    std::vector<double> ens_draws(n_perm), sub_draws(n_perm);
    for (std::size_t k = 0; k < n_perm; ++k) {
      RngStream stream(key.child("feature", j).child(k).key);
      std::vector<double> column = xhat;
      samplers[j].add_residuals(column, stream);
      scratch.set_column(j, column);
      const auto preds = importance_detail::predict_members(ens, scratch);
      const auto perturbed = importance_detail::risks_of(preds, y_test);
      ens_draws[k] = perturbed.ensemble - base.ensemble;
      double acc = 0.0;
      for (std::size_t b = 0; b < B; ++b) acc += perturbed.member[b] - base.member[b];
      sub_draws[k] = acc / static_cast<double>(B);
    }
    scratch.set_column(j, X_test.column(j));
    ens_scores[j] = mean(ens_draws);
    sub_scores[j] = mean(sub_draws);
    const double denom = std::sqrt(static_cast<double>(n_perm));
    ens_se[j] = n_perm > 1 ? std::sqrt(sample_variance(ens_draws)) / denom : 0.0;
    sub_se[j] = n_perm > 1 ? std::sqrt(sample_variance(sub_draws)) / denom : 0.0;
  }

  double mean_base_member_r2 = 0.0;
  for (double risk : base.member)
    mean_base_member_r2 += importance_detail::r2_of_risk(risk, y_test);
  mean_base_member_r2 /= static_cast<double>(B);

  StrategyPair out;
  out.ensemble = {Method::cfi,
                  Strategy::ensemble,
                  std::move(ens_scores),
                  std::move(ens_se),
                  X_test.rows(),
                  {{"n_perm", n_perm},
                   {"r2_full", importance_detail::r2_of_risk(base.ensemble, y_test)}}};
  out.sub_models = {Method::cfi,
                    Strategy::sub_models,
                    std::move(sub_scores),
                    std::move(sub_se),
                    X_test.rows(),
                    {{"n_perm", n_perm}, {"r2_full", mean_base_member_r2}}};
  return out;
}

inline ImportanceScores cfi(const EnsembleModel& ens, const Matrix& X_test,
                            const std::vector<double>& y_test,
                            const std::vector<ConditionalSampler>& samplers,
                            std::size_t n_perm, Strategy strategy, std::uint64_t seed) {
  return cfi_pair(ens, X_test, y_test, samplers, n_perm, seed).get(strategy);
}

// Marginal-imputation value function shared by the sampled Shapley estimator
// and the exact subset enumeration: risks are cached per subset bitmask, so
// both consumers see identical numbers for identical subsets.
class SageValueFunction {
 public:
  SageValueFunction(const EnsembleModel& ens, const Matrix& X_test,
                    const std::vector<double>& y_test, const Matrix& background,
                    std::size_t n_cal, std::uint64_t seed)
      : ens_(&ens), X_test_(X_test), y_test_(y_test), n_cal_(n_cal) {
    d_ = X_test.cols();
    if (y_test.size() != X_test.rows()) throw shape_error("sage: X/y row mismatch");
    if (X_test.rows() == 0) throw config_error("sage: empty test set");
    if (background.cols() != d_) throw shape_error("sage: background column mismatch");
    if (n_cal < 1) throw config_error("sage: n_cal must be >= 1");
    if (background.rows() < n_cal)
      throw config_error("sage: background must hold at least n_cal rows");
    if (d_ > 63) throw config_error("sage: at most 63 features supported");
    RngStream stream(RngKey(seed).child("background").key);
    const std::vector<std::size_t> pick =
        stream.sample_without_replacement(background.rows(), n_cal);
    cal_rows_ = Matrix(n_cal, d_);
    for (std::size_t l = 0; l < n_cal; ++l)
      for (std::size_t j = 0; j < d_; ++j) cal_rows_(l, j) = background(pick[l], j);
  }

  std::size_t dims() const { return d_; }
  std::uint64_t full_mask() const {
    return d_ == 63 ? ~0ULL >> 1 : ((1ULL << d_) - 1ULL);
  }

  // Risks of the restricted model f^S: features in `mask` come from the test
  // row, the rest are averaged over the n_cal background draws.
  const importance_detail::Risks& risks_for_subset(std::uint64_t mask) const {
    auto it = cache_.find(mask);
    if (it != cache_.end()) return it->second;

    importance_detail::Risks risks;
    const std::size_t n = X_test_.rows(), B = ens_->size();
    if (mask == full_mask()) {
      const auto preds = importance_detail::predict_members(*ens_, X_test_);
      risks = importance_detail::risks_of(preds, y_test_);
    } else {
      Matrix hybrids(n * n_cal_, d_);
      for (std::size_t i = 0; i < n; ++i) {
        const double* test_row = X_test_.row_ptr(i);
        for (std::size_t l = 0; l < n_cal_; ++l) {
          double* dst = hybrids.row_ptr(i * n_cal_ + l);
          const double* cal_row = cal_rows_.row_ptr(l);
          for (std::size_t j = 0; j < d_; ++j)
            dst[j] = (mask >> j) & 1ULL ? test_row[j] : cal_row[j];
        }
      }
      std::vector<std::vector<double>> member_means(B);
      for (std::size_t b = 0; b < B; ++b) {
        const std::vector<double> raw = ens_->members[b]->predict(hybrids);
        std::vector<double> averaged(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t l = 0; l < n_cal_; ++l) acc += raw[i * n_cal_ + l];
          averaged[i] = acc / static_cast<double>(n_cal_);
        }
        member_means[b] = std::move(averaged);
      }
      risks = importance_detail::risks_of(member_means, y_test_);
    }
    return cache_.emplace(mask, std::move(risks)).first->second;
  }

  const importance_detail::Risks& baseline() const { return risks_for_subset(0); }

  // v(S) under the combined-model view; v(empty) = 0 by construction.
  double value(std::uint64_t mask) const {
    return baseline().ensemble - risks_for_subset(mask).ensemble;
  }

  std::size_t n_test() const { return X_test_.rows(); }
  std::size_t cal_draws() const { return n_cal_; }

 private:
  const EnsembleModel* ens_;
  Matrix X_test_;
  std::vector<double> y_test_;
  std::size_t n_cal_, d_ = 0;
  Matrix cal_rows_;
  mutable std::map<std::uint64_t, importance_detail::Risks> cache_;
};

inline std::uint64_t subset_mask(const std::vector<std::size_t>& S, std::size_t d) {
  std::uint64_t mask = 0;
  for (std::size_t j : S) {
    if (j >= d) throw shape_error("subset feature index out of range");
    mask |= 1ULL << j;
  }
  return mask;
}

inline double sage_value(const EnsembleModel& ens, const std::vector<std::size_t>& S,
                         const Matrix& X_test, const std::vector<double>& y_test,
                         const Matrix& background, std::size_t n_cal,
                         std::uint64_t seed) {
  const SageValueFunction v(ens, X_test, y_test, background, n_cal, seed);
  return v.value(subset_mask(S, X_test.cols()));
}

// Seed of the value function used by the permutation-sampling estimator for
// a given estimator seed. Exposed so an exact enumeration can share the same
// background draws and differ only in how orderings are weighted.
inline std::uint64_t sage_value_seed(std::uint64_t seed) {
  return RngKey(seed).child("sage").child("values").key;
}

// Permutation-sampling Shapley estimator over marginal-imputation value
// functions. Each ordering contributes one telescoping pass, so the summed
// scores equal v(full set) up to float rounding.
inline StrategyPair sage_pair(const EnsembleModel& ens, const Matrix& X_test,
                              const std::vector<double>& y_test,
                              const Matrix& background, std::size_t n_outer_perms,
                              std::size_t n_cal, std::uint64_t seed) {
  if (n_outer_perms < 1) throw config_error("sage: n_outer_perms must be >= 1");
  const RngKey key = RngKey(seed).child("sage");
  const SageValueFunction v(ens, X_test, y_test, background, n_cal,
                            sage_value_seed(seed));
  const std::size_t d = v.dims(), B = ens.size();

  Matrix ens_gains(n_outer_perms, d);
  Matrix sub_gains(n_outer_perms, d);
  for (std::size_t p = 0; p < n_outer_perms; ++p) {
    RngStream stream(key.child("ordering", p).key);
    const std::vector<std::size_t> order = stream.permutation(d);
    const importance_detail::Risks* prev = &v.baseline();
    std::uint64_t mask = 0;
    for (std::size_t f : order) {
      mask |= 1ULL << f;
      const importance_detail::Risks& curr = v.risks_for_subset(mask);
      ens_gains(p, f) = prev->ensemble - curr.ensemble;
      double acc = 0.0;
      for (std::size_t b = 0; b < B; ++b) acc += prev->member[b] - curr.member[b];
      sub_gains(p, f) = acc / static_cast<double>(B);
      prev = &curr;
    }
  }

  const auto reduce = [&](const Matrix& gains, std::vector<double>& scores,
                          std::vector<double>& se) {
    scores.resize(d);
    se.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      const std::vector<double> col = gains.column(j);
      scores[j] = mean(col);
      se[j] = n_outer_perms > 1
                  ? std::sqrt(sample_variance(col) /
                              static_cast<double>(n_outer_perms))
                  : 0.0;
    }
  };
  std::vector<double> ens_scores, sub_scores, ens_se, sub_se;
  reduce(ens_gains, ens_scores, ens_se);
  reduce(sub_gains, sub_scores, sub_se);

  const auto make = [&](Strategy s, std::vector<double> scores, std::vector<double> se) {
    ImportanceScores out;
    out.method = Method::sage;
    out.strategy = s;
    out.scores = std::move(scores);
    out.se = std::move(se);
    out.n_test = X_test.rows();
    out.diagnostics = {{"n_perm", n_outer_perms},
                       {"n_cal", n_cal},
                       {"convergence_se", out.se}};
    return out;
  };
  StrategyPair out;
  out.ensemble = make(Strategy::ensemble, std::move(ens_scores), std::move(ens_se));
  out.sub_models = make(Strategy::sub_models, std::move(sub_scores), std::move(sub_se));
  return out;
}

inline ImportanceScores sage(const EnsembleModel& ens, const Matrix& X_test,
                             const std::vector<double>& y_test, const Matrix& background,
                             std::size_t n_outer_perms, std::size_t n_cal,
                             Strategy strategy, std::uint64_t seed) {
  return sage_pair(ens, X_test, y_test, background, n_outer_perms, n_cal, seed)
      .get(strategy);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_scores_csv(const std::vector<ImportanceScores>& all,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open " + path + " for writing");
  out << "method,strategy,feature,score,se\n";
  for (const auto& s : all)
    for (std::size_t j = 0; j < s.scores.size(); ++j)
      out << to_string(s.method) << ',' << to_string(s.strategy) << ',' << j << ','
          << format_double(s.scores[j]) << ','
          << format_double(j < s.se.size() ? s.se[j] : 0.0) << '\n';
}

inline void write_diagnostics_json(const std::vector<ImportanceScores>& all,
                                   const std::string& path) {
  nlohmann::json blob = nlohmann::json::array();
  for (const auto& s : all)
    blob.push_back({{"method", to_string(s.method)},
                    {"strategy", to_string(s.strategy)},
                    {"n_test", s.n_test},
                    {"diagnostics", s.diagnostics}});
  std::ofstream out(path);
  if (!out) throw config_error("cannot open " + path + " for writing");
  out << blob.dump(2) << '\n';
}

}  // namespace varimp
