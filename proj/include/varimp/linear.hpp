#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "varimp/core.hpp"
#include "varimp/mlp.hpp"  // to_eigen
#include "varimp/predictor.hpp"

namespace varimp {

class LinearModel final : public Predictor {
 public:
  LinearModel(LinearConfig config, std::vector<double> coef, double intercept,
              std::uint64_t seed)
      : config_(config), coef_(std::move(coef)), intercept_(intercept), seed_(seed) {}

  std::vector<double> predict(const Matrix& X) const override {
    check_columns(X);
    std::vector<double> out(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) {
      const double* x = X.row_ptr(r);
      double acc = intercept_;
      for (std::size_t j = 0; j < coef_.size(); ++j) acc += coef_[j] * x[j];
      out[r] = acc;
    }
    return out;
  }

  std::size_t feature_count() const override { return coef_.size(); }
  std::string type_name() const override { return "linear"; }
  std::uint64_t fit_seed() const override { return seed_; }
  const std::vector<double>& coefficients() const { return coef_; }
  double intercept() const { return intercept_; }

  nlohmann::json payload() const override {
    return {{"coef", coef_}, {"intercept", intercept_}};
  }

  static std::shared_ptr<LinearModel> from_payload(const LinearConfig& config,
                                                   const nlohmann::json& p,
                                                   std::uint64_t seed) {
    return std::make_shared<LinearModel>(config, p.at("coef").get<std::vector<double>>(),
                                         p.at("intercept").get<double>(), seed);
  }

 private:
  LinearConfig config_;
  std::vector<double> coef_;
  double intercept_;
  std::uint64_t seed_;
};

// Ridge-regularized least squares on centered data; seed is recorded but
// unused (the fit is deterministic in the data alone).
inline PredictorPtr linear_fit(const LinearConfig& config, const Matrix& X,
                               const std::vector<double>& y, std::uint64_t seed) {
  validate(config);
  const std::size_t n = X.rows(), d = X.cols();
  if (y.size() != n) throw shape_error("linear_fit: X/y row mismatch");
  if (n < 2) throw config_error("linear_fit: need at least 2 rows");

  EMatrix Z = to_eigen(X);
  const Eigen::RowVectorXd x_mean = Z.colwise().mean();
  Z.rowwise() -= x_mean;
  EVector yv(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) yv(static_cast<Eigen::Index>(i)) = y[i];
  const double y_mean = yv.mean();
  yv.array() -= y_mean;

  Eigen::MatrixXd gram = Z.transpose() * Z;
  gram.diagonal().array() += config.ridge;
  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success)
    throw numeric_error("linear_fit: normal equations not solvable");
  const EVector beta = solver.solve(Z.transpose() * yv);

  std::vector<double> coef(beta.data(), beta.data() + beta.size());
  double intercept = y_mean;
  for (std::size_t j = 0; j < d; ++j) intercept -= coef[j] * x_mean(static_cast<Eigen::Index>(j));
  return std::make_shared<LinearModel>(config, std::move(coef), intercept, seed);
}

}  // namespace varimp
