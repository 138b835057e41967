#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "varimp/core.hpp"
#include "varimp/ensemble.hpp"
#include "varimp/importance.hpp"
#include "varimp/learners.hpp"
#include "varimp/synthdata.hpp"

namespace varimp {

// Independent ground-truth vector used to judge estimator output.
struct GroundTruth {
  std::vector<double> scores;
  std::vector<double> se;
  std::string provenance;  // asymptotic | enumeration | analytic | montecarlo
  std::size_t n_used = 0;
};

// ---------------------------------------------------------------------------
// Analytic linear-Gaussian target

// For y = beta' X with X ~ N(0, Sigma), the expected conditional variance of
// the regression function given all other coordinates is
//   psi(j) = beta_j^2 * (Sigma_jj - Sigma_{j,-j} Sigma_{-j,-j}^{-1} Sigma_{-j,j}),
// the Schur complement scaled by the squared coefficient.
inline GroundTruth true_loco_linear(const std::vector<double>& betas,
                                    const Matrix& covariance) {
  const std::size_t d = betas.size();
  if (covariance.rows() != d || covariance.cols() != d)
    throw shape_error("true_loco_linear: covariance must be d x d");
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (std::fabs(covariance(i, j) - covariance(j, i)) >
          1e-12 * std::max(1.0, std::fabs(covariance(i, j))))
        throw numeric_error("true_loco_linear: covariance must be symmetric");

  Eigen::MatrixXd S(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) S(i, j) = covariance(i, j);
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw numeric_error("true_loco_linear: covariance must be positive definite");

  GroundTruth out;
  out.provenance = "analytic";
  out.n_used = 0;
  out.scores.resize(d);
  out.se.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double cond = S(j, j);
    if (d > 1) {
      Eigen::MatrixXd S_rest(d - 1, d - 1);
      Eigen::VectorXd s_j(d - 1);
      std::size_t r = 0;
      for (std::size_t a = 0; a < d; ++a) {
        if (a == j) continue;
        s_j(r) = S(a, j);
        std::size_t c = 0;
        for (std::size_t b = 0; b < d; ++b) {
          if (b == j) continue;
          S_rest(r, c++) = S(a, b);
        }
        ++r;
      }
      cond -= s_j.dot(S_rest.ldlt().solve(s_j));
    }
    out.scores[j] = betas[j] * betas[j] * cond;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nested Monte-Carlo total-variance contribution

// psi(j) = E over X^{-j} of Var over X^j of f*(X), estimated with n_outer
// outer draws of the full vector and n_inner redraws of coordinate j. Valid
// only for independent inputs: with dependence the inner redraw would need
// the conditional law, which this oracle does not model.
inline GroundTruth montecarlo_total_sobol(Dgp dgp, double rho, std::size_t n_outer,
                                          std::size_t n_inner, std::uint64_t seed,
                                          std::size_t dims = kBenchmarkDims) {
  if (rho != 0.0)
    throw config_error(
        "montecarlo_total_sobol: only independent inputs (rho = 0) are supported");
  if (n_outer < 2 || n_inner < 2)
    throw config_error("montecarlo_total_sobol: need n_outer, n_inner >= 2");
  const DgpInfo info = dgp_info(dgp);

  GroundTruth out;
  out.provenance = "montecarlo";
  out.n_used = n_outer * n_inner;
  out.scores.resize(dims);
  out.se.resize(dims);
  std::vector<double> row(dims), inner(n_inner), condvar(n_outer);
  for (std::size_t j = 0; j < dims; ++j) {
    RngStream stream(RngKey(seed).child("feature", j).key);
    for (std::size_t i = 0; i < n_outer; ++i) {
      for (std::size_t k = 0; k < dims; ++k)
        row[k] = stream.next_uniform(info.lo, info.hi);
      for (std::size_t t = 0; t < n_inner; ++t) {
        row[j] = stream.next_uniform(info.lo, info.hi);
        inner[t] = eval_dgp(dgp, row.data(), dims);
      }
      condvar[i] = sample_variance(inner);
    }
    out.scores[j] = mean(condvar);
    // Leave-one-out jackknife of a sample mean reduces to sd/sqrt(n).
    out.se[j] = std::sqrt(sample_variance(condvar) / static_cast<double>(n_outer));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form data-generating predictors

// Evaluates the noiseless generating function directly (dropped < 0), or its
// conditional expectation with one coordinate integrated out by a fixed set
// of marginal draws (dropped = that coordinate). The inner draws are frozen
// at construction so predictions are deterministic.
class DgpOraclePredictor : public Predictor {
 public:
  DgpOraclePredictor(Dgp dgp, std::size_t dims, int dropped,
                     std::vector<double> inner_draws)
      : dgp_(dgp), dims_(dims), dropped_(dropped), inner_(std::move(inner_draws)) {
    if (dropped_ >= 0 && inner_.empty())
      throw config_error("dgp oracle: restricted form needs inner draws");
  }

  std::vector<double> predict(const Matrix& X) const override {
    check_columns(X);
    std::vector<double> out(X.rows());
    if (dropped_ < 0) {
      for (std::size_t i = 0; i < X.rows(); ++i)
        out[i] = eval_dgp(dgp_, X.row_ptr(i), dims_);
      return out;
    }
    std::vector<double> full(dims_);
    for (std::size_t i = 0; i < X.rows(); ++i) {
      const double* src = X.row_ptr(i);
      std::size_t c = 0;
      for (std::size_t k = 0; k < dims_; ++k)
        if (k != static_cast<std::size_t>(dropped_)) full[k] = src[c++];
      double acc = 0.0;
      for (double z : inner_) {
        full[static_cast<std::size_t>(dropped_)] = z;
        acc += eval_dgp(dgp_, full.data(), dims_);
      }
      out[i] = acc / static_cast<double>(inner_.size());
    }
    return out;
  }
  std::size_t feature_count() const override {
    return dims_ - (dropped_ >= 0 ? 1 : 0);
  }
  std::string type_name() const override { return "dgp_oracle"; }
  std::uint64_t fit_seed() const override { return 0; }
  nlohmann::json payload() const override { return {}; }

 private:
  Dgp dgp_;
  std::size_t dims_;
  int dropped_;
  std::vector<double> inner_;
};

// Drop-in replacement for a learner in the refit-based estimator: training
// data is ignored, the returned predictor is the generating function or its
// exact (inner-MC) conditional-expectation restriction.
inline RestrictedFitFn dgp_oracle_fit_fn(Dgp dgp, std::size_t dims,
                                         std::size_t n_inner) {
  return [dgp, dims, n_inner](const Matrix&, const std::vector<double>&,
                              std::uint64_t seed, int dropped) -> PredictorPtr {
    if (dropped < 0)
      return std::make_shared<DgpOraclePredictor>(dgp, dims, -1,
                                                  std::vector<double>{});
    const DgpInfo info = dgp_info(dgp);
    RngStream stream(
        RngKey(seed).child("marginal", static_cast<std::uint64_t>(dropped)).key);
    std::vector<double> z(n_inner);
    for (double& v : z) v = stream.next_uniform(info.lo, info.hi);
    return std::make_shared<DgpOraclePredictor>(dgp, dims, dropped, std::move(z));
  };
}

// ---------------------------------------------------------------------------
// Exact Shapley enumeration

inline double binomial_coefficient(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 0; i < k; ++i)
    r = r * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return r;
}

struct ExactSageScores {
  std::vector<double> ensemble;
  std::vector<double> sub_models;
};

// Shapley values over every subset, using the same marginal-imputation value
// function (and the same background draws, via the shared seed derivation) as
// the permutation-sampling estimator — only ordering-sampling error differs.
inline ExactSageScores exact_sage_pair(const EnsembleModel& ens, const Matrix& X_test,
                                       const std::vector<double>& y_test,
                                       const Matrix& background, std::size_t n_cal,
                                       std::uint64_t seed) {
  const std::size_t d = X_test.cols();
  if (d > 10)
    throw config_error("exact_sage_enumeration: refusing d > 10 (2^d subsets)");
  const SageValueFunction v(ens, X_test, y_test, background, n_cal,
                            sage_value_seed(seed));
  const std::size_t B = ens.size();

  std::vector<double> weight(d);  // |S|! (d-1-|S|)! / d! for S excluding j
  for (std::size_t s = 0; s < d; ++s)
    weight[s] = 1.0 / (static_cast<double>(d) * binomial_coefficient(d - 1, s));

  ExactSageScores out;
  out.ensemble.assign(d, 0.0);
  out.sub_models.assign(d, 0.0);
  const std::uint64_t limit = 1ULL << d;
  for (std::uint64_t mask = 0; mask < limit; ++mask) {
    const auto& before = v.risks_for_subset(mask);
    const double w = weight[static_cast<std::size_t>(std::popcount(mask))];
    for (std::size_t j = 0; j < d; ++j) {
      if ((mask >> j) & 1ULL) continue;
      const auto& after = v.risks_for_subset(mask | (1ULL << j));
      out.ensemble[j] += w * (before.ensemble - after.ensemble);
      double acc = 0.0;
      for (std::size_t b = 0; b < B; ++b) acc += before.member[b] - after.member[b];
      out.sub_models[j] += w * (acc / static_cast<double>(B));
    }
  }
  return out;
}

inline GroundTruth exact_sage_enumeration(const EnsembleModel& ens,
                                          const Matrix& X_test,
                                          const std::vector<double>& y_test,
                                          const Matrix& background, std::size_t n_cal,
                                          std::uint64_t seed,
                                          Strategy strategy = Strategy::ensemble) {
  const ExactSageScores scores =
      exact_sage_pair(ens, X_test, y_test, background, n_cal, seed);
  GroundTruth out;
  out.scores = strategy == Strategy::ensemble ? scores.ensemble : scores.sub_models;
  out.se.assign(out.scores.size(), 0.0);
  out.provenance = "enumeration";
  out.n_used = static_cast<std::size_t>(1) << X_test.cols();
  return out;
}

// ---------------------------------------------------------------------------
// Asymptotic (large-n pipeline) truth with a disk cache

struct EnsembleSpec {
  LearnerConfig learner;
  EnsembleKind kind = EnsembleKind::bagging;
  std::size_t B = 10;
};

inline nlohmann::json ensemble_spec_json(const EnsembleSpec& s) {
  return {{"learner", config_to_json(s.learner)},
          {"kind", to_string(s.kind)},
          {"B", s.B}};
}

inline EnsembleSpec ensemble_spec_from_json(const nlohmann::json& j) {
  EnsembleSpec s;
  s.learner = config_from_json(j.at("learner"));
  s.kind = ensemble_kind_from_name(j.at("kind").get<std::string>());
  s.B = j.at("B").get<std::size_t>();
  if (s.B < 1) throw config_error("ensemble spec: B must be >= 1");
  return s;
}

struct TruthRequest {
  Method method = Method::loco;
  Dgp dgp = Dgp::friedman1;
  EnsembleSpec model;
  Strategy strategy = Strategy::ensemble;
  std::size_t n = 100000;
  double rho = std::numeric_limits<double>::quiet_NaN();  // NaN = dgp default
  double snr = 1.0;
  std::uint64_t seed = 0x7c0597a11ULL;
  std::size_t n_perm = 20;           // conditional-resampling redraws
  std::size_t sage_n_outer = 256;    // orderings
  std::size_t sage_n_cal = 32;       // imputation draws per evaluation
  std::size_t sage_background = 128; // background rows subsampled from train
  std::size_t sage_test_cap = 2048;  // test rows actually scored
};

inline double resolved_rho(const TruthRequest& req) {
  return std::isnan(req.rho) ? dgp_info(req.dgp).default_rho : req.rho;
}

inline nlohmann::json truth_request_json(const TruthRequest& req) {
  nlohmann::json j = {{"method", to_string(req.method)},
                      {"dgp", to_string(req.dgp)},
                      {"model", ensemble_spec_json(req.model)},
                      {"strategy", to_string(req.strategy)},
                      {"n", req.n},
                      {"rho", resolved_rho(req)},
                      {"snr", std::isinf(req.snr) ? -1.0 : req.snr},
                      {"seed", req.seed}};
  if (req.method == Method::cfi) j["n_perm"] = req.n_perm;
  if (req.method == Method::sage)
    j["sage"] = {{"n_outer", req.sage_n_outer},
                 {"n_cal", req.sage_n_cal},
                 {"background", req.sage_background},
                 {"test_cap", req.sage_test_cap}};
  return j;
}

inline std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string truth_cache_path(const std::string& cache_dir,
                                    const TruthRequest& req) {
  return cache_dir + "/truth_" + to_string(req.dgp) + "_" + to_string(req.method) +
         "_" + hex16(config_hash(truth_request_json(req))) + ".json";
}

inline GroundTruth compute_asymptotic_importance(const TruthRequest& req) {
  const double rho = resolved_rho(req);
  const RngKey root = RngKey(req.seed).child("asymptotic");
  const Dataset ds = generate(req.dgp, req.n, rho, req.snr, root.child("data").key);
  const DataSplit split = train_test_split(ds);
  const EnsembleModel ens =
      fit_ensemble(member_fit_fn(req.model.learner), req.model.kind,
                   req.model.learner, req.model.B, split.X_train, split.y_train,
                   root.child("fit").key);

  ImportanceScores scores;
  switch (req.method) {
    case Method::loco:
      scores = loco(member_fit_fn(req.model.learner), split.X_train, split.y_train,
                    split.X_test, split.y_test, req.strategy, ens);
      break;
    case Method::cfi: {
      const auto samplers =
          fit_all_samplers(split.X_train, root.child("sampler").key);
      scores = cfi(ens, split.X_test, split.y_test, samplers, req.n_perm,
                   req.strategy, root.child("perm").key);
      break;
    }
    case Method::sage: {
      const std::size_t n_test = std::min(req.sage_test_cap, split.X_test.rows());
      const Matrix X_test = split.X_test.slice_rows(0, n_test);
      const std::vector<double> y_test(split.y_test.begin(),
                                       split.y_test.begin() +
                                           static_cast<std::ptrdiff_t>(n_test));
      RngStream bg(root.child("background").key);
      const std::size_t m = std::min(req.sage_background, split.X_train.rows());
      const auto pick = bg.sample_without_replacement(split.X_train.rows(), m);
      const Matrix background = split.X_train.select_rows(pick);
      scores = sage(ens, X_test, y_test, background, req.sage_n_outer,
                    std::min(req.sage_n_cal, m), req.strategy,
                    root.child("orderings").key);
      break;
    }
  }
  return GroundTruth{scores.scores, scores.se, "asymptotic", req.n};
}

inline void write_ground_truth(const GroundTruth& gt, const TruthRequest& req,
                               const std::string& path) {
  const nlohmann::json blob = {
      {"dgp", to_string(req.dgp)},
      {"method", to_string(req.method)},
      {"model_config_hash", hex16(config_hash(ensemble_spec_json(req.model)))},
      {"scores", gt.scores},
      {"se", gt.se},
      {"n_used", gt.n_used},
      {"provenance", gt.provenance}};
  const std::string tmp = path + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp);
    if (!out) throw config_error("cannot open " + tmp + " for writing");
    out << blob.dump(2) << '\n';
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw config_error("cannot move truth cache into place at " + path);
  }
}

inline std::optional<GroundTruth> load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  nlohmann::json blob;
  try {
    in >> blob;
    GroundTruth gt;
    gt.scores = blob.at("scores").get<std::vector<double>>();
    gt.se = blob.at("se").get<std::vector<double>>();
    gt.provenance = blob.at("provenance").get<std::string>();
    gt.n_used = blob.at("n_used").get<std::size_t>();
    return gt;
  } catch (const nlohmann::json::exception&) {
    throw config_error("truth cache at " + path + " is malformed");
  }
}

// Cached full-pipeline truth: computed once per request signature with its
// dedicated seed, then served from disk.
inline GroundTruth asymptotic_importance(const TruthRequest& req,
                                         const std::string& cache_dir) {
  std::filesystem::create_directories(cache_dir);
  const std::string path = truth_cache_path(cache_dir, req);
  if (auto cached = load_ground_truth(path)) return *cached;
  const GroundTruth gt = compute_asymptotic_importance(req);
  write_ground_truth(gt, req, path);
  return gt;
}

}  // namespace varimp
