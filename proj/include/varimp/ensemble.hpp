#pragma once

#include <functional>
#include <string>
#include <vector>

#include "varimp/core.hpp"
#include "varimp/learners.hpp"
#include "varimp/predictor.hpp"
#include "varimp/rng.hpp"

namespace varimp {

enum class EnsembleKind { bagging, voting };

inline std::string to_string(EnsembleKind kind) {
  return kind == EnsembleKind::bagging ? "bagging" : "voting";
}

inline EnsembleKind ensemble_kind_from_name(const std::string& name) {
  if (name == "bagging") return EnsembleKind::bagging;
  if (name == "voting") return EnsembleKind::voting;
  throw config_error("unknown ensembling kind '" + name + "'");
}

using MemberFitFn = std::function<PredictorPtr(
    const Matrix&, const std::vector<double>&, std::uint64_t)>;

inline MemberFitFn member_fit_fn(const LearnerConfig& config) {
  return [config](const Matrix& X, const std::vector<double>& y, std::uint64_t seed) {
    return fit_model(config, X, y, seed);
  };
}

// Mean-prediction ensemble. Records per-member learner seeds and (for
// bagging) the bootstrap row indices, so a member can later be refit on
// transformed inputs with its exact original randomness.
struct EnsembleModel {
  EnsembleKind kind = EnsembleKind::voting;
  LearnerConfig base_config;
  std::vector<PredictorPtr> members;
  std::vector<std::uint64_t> member_seeds;
  std::vector<std::vector<std::size_t>> bootstrap_indices;  // bagging only

  std::size_t size() const { return members.size(); }
  std::size_t feature_count() const {
    if (members.empty()) throw config_error("ensemble: no members");
    return members.front()->feature_count();
  }
};

namespace ensemble_detail {

template <typename Fn>
auto with_member_context(std::size_t b, Fn&& fn) {
  try {
    return fn();
  } catch (const config_error& e) {
    throw config_error("member " + std::to_string(b) + ": " + e.what());
  } catch (const training_error& e) {
    throw training_error("member " + std::to_string(b) + ": " + e.what(), e.epoch);
  } catch (const shape_error& e) {
    throw shape_error("member " + std::to_string(b) + ": " + e.what());
  }
}

}  // namespace ensemble_detail

inline EnsembleModel fit_ensemble(const MemberFitFn& fit, EnsembleKind kind,
                                  const LearnerConfig& base_config, std::size_t B,
                                  const Matrix& X, const std::vector<double>& y,
                                  std::uint64_t master_seed) {
  if (B < 1) throw config_error("ensemble: B must be >= 1");
  if (X.rows() != y.size()) throw shape_error("ensemble: X/y row mismatch");
  EnsembleModel ens;
  ens.kind = kind;
  ens.base_config = base_config;
  RngKey key(master_seed);
  for (std::size_t b = 0; b < B; ++b) {
    const std::uint64_t learner_seed = key.child("learner", b).key;
    ens.member_seeds.push_back(learner_seed);
    if (kind == EnsembleKind::bagging) {
      RngStream resample(key.child("bootstrap", b).key);
      std::vector<std::size_t> idx(X.rows());
      for (auto& v : idx) v = resample.next_below(X.rows());
      const Matrix Xb = X.select_rows(idx);
      std::vector<double> yb(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = y[idx[i]];
      ens.bootstrap_indices.push_back(std::move(idx));
      ens.members.push_back(ensemble_detail::with_member_context(
          b, [&] { return fit(Xb, yb, learner_seed); }));
    } else {
      ens.members.push_back(ensemble_detail::with_member_context(
          b, [&] { return fit(X, y, learner_seed); }));
    }
  }
  return ens;
}

inline EnsembleModel fit_bagging(const LearnerConfig& base_config, std::size_t B,
                                 const Matrix& X, const std::vector<double>& y,
                                 std::uint64_t master_seed) {
  return fit_ensemble(member_fit_fn(base_config), EnsembleKind::bagging, base_config, B,
                      X, y, master_seed);
}

inline EnsembleModel fit_voting(const LearnerConfig& base_config, std::size_t B,
                                const Matrix& X, const std::vector<double>& y,
                                std::uint64_t master_seed) {
  return fit_ensemble(member_fit_fn(base_config), EnsembleKind::voting, base_config, B,
                      X, y, master_seed);
}

// Re-train member b with its recorded learner seed — and, for bagging, its
// recorded bootstrap rows — on possibly transformed training data. Refitting
// on the original data reproduces the member bit-exactly.
inline PredictorPtr refit_member(const MemberFitFn& fit, const EnsembleModel& ens,
                                 std::size_t b, const Matrix& X_train,
                                 const std::vector<double>& y_train) {
  if (b >= ens.size()) throw config_error("refit_member: member index out of range");
  return ensemble_detail::with_member_context(b, [&]() -> PredictorPtr {
    if (ens.kind == EnsembleKind::bagging) {
      const auto& idx = ens.bootstrap_indices.at(b);
      const Matrix Xb = X_train.select_rows(idx);
      std::vector<double> yb(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = y_train[idx[i]];
      return fit(Xb, yb, ens.member_seeds[b]);
    }
    return fit(X_train, y_train, ens.member_seeds[b]);
  });
}

inline EnsembleModel refit_ensemble(const MemberFitFn& fit, const EnsembleModel& ens,
                                    const Matrix& X_train,
                                    const std::vector<double>& y_train) {
  EnsembleModel out = ens;
  out.members.clear();
  for (std::size_t b = 0; b < ens.size(); ++b)
    out.members.push_back(refit_member(fit, ens, b, X_train, y_train));
  return out;
}

// One column per member, one row per sample.
inline Matrix member_predictions(const EnsembleModel& ens, const Matrix& X) {
  if (ens.members.empty()) throw config_error("ensemble: no members");
  Matrix out(X.rows(), ens.size());
  for (std::size_t b = 0; b < ens.size(); ++b) {
    const std::vector<double> pred = ens.members[b]->predict(X);
    out.set_column(b, pred);
  }
  return out;
}

inline std::vector<double> ensemble_predict(const EnsembleModel& ens, const Matrix& X) {
  if (ens.members.empty()) throw config_error("ensemble: no members");
  std::vector<double> acc(X.rows(), 0.0);
  for (std::size_t b = 0; b < ens.size(); ++b) {
    const std::vector<double> pred = ens.members[b]->predict(X);
    for (std::size_t i = 0; i < pred.size(); ++i) acc[i] += pred[i];
  }
  const double inv = 1.0 / static_cast<double>(ens.size());
  for (double& v : acc) v *= inv;
  return acc;
}

// Mean Pearson correlation of member prediction vectors over unordered pairs.
inline double pairwise_correlation(const EnsembleModel& ens, const Matrix& X) {
  if (ens.size() < 2) throw config_error("pairwise_correlation: need B >= 2");
  if (X.rows() < 2) throw config_error("pairwise_correlation: need >= 2 rows");
  std::vector<std::vector<double>> preds;
  for (const auto& member : ens.members) preds.push_back(member->predict(X));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < preds.size(); ++a)
    for (std::size_t b = a + 1; b < preds.size(); ++b) {
      sum += pearson_correlation(preds[a], preds[b]);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

}  // namespace varimp
