#include <cstdio>
#include <numeric>

#include "varimp/ensemble.hpp"
#include "varimp/metrics.hpp"
#include "varimp/mlp.hpp"
#include "varimp/synthdata.hpp"

using namespace varimp;

int main() {
  MlpConfig cfg;
  cfg.batch_size = 32;
  const Dataset ds = generate(Dgp::friedman1, 512, 0.0, 1.0, 7);
  const DataSplit sp = train_test_split(ds);
  const std::uint64_t seed = 99;
  const auto m = std::static_pointer_cast<const MlpModel>(
      fit_model(LearnerConfig{cfg}, sp.X_train, sp.y_train, seed));

  // Replicate the trainer's preprocessing and validation split byte for byte.
  const auto& X = sp.X_train;
  const auto& y = sp.y_train;
  const std::size_t n = X.rows(), d = X.cols();
  EMatrix Z = to_eigen(X);
  for (std::size_t j = 0; j < d; ++j) {
    const auto col = X.column(j);
    const double mu = mean(col), sd = std::sqrt(population_variance(col));
    Z.col(static_cast<Eigen::Index>(j)) =
        (Z.col(static_cast<Eigen::Index>(j)).array() - mu) / (sd > 1e-12 ? sd : 1.0);
  }
  const double y_mean = mean(y), y_sd = std::sqrt(population_variance(y));
  EVector ys(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    ys(static_cast<Eigen::Index>(i)) = (y[i] - y_mean) / y_sd;

  std::size_t n_val = static_cast<std::size_t>(
      std::llround(cfg.validation_fraction * static_cast<double>(n)));
  n_val = std::min(std::max<std::size_t>(n_val, 1), n - cfg.batch_size);
  RngStream split_stream(RngKey(seed).child("valsplit").key);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  split_stream.shuffle(order);

  const auto subset_loss = [&](std::size_t lo, std::size_t hi) {
    EMatrix Xs(static_cast<Eigen::Index>(hi - lo), static_cast<Eigen::Index>(d));
    EVector yv(static_cast<Eigen::Index>(hi - lo));
    for (std::size_t i = lo; i < hi; ++i) {
      Xs.row(static_cast<Eigen::Index>(i - lo)) =
          Z.row(static_cast<Eigen::Index>(order[i]));
      yv(static_cast<Eigen::Index>(i - lo)) = ys(static_cast<Eigen::Index>(order[i]));
    }
    return m->net().loss(Xs, yv);
  };

  std::printf("loss on replicated TRAIN part (%zu rows): %.4f\n", n - n_val,
              subset_loss(0, n - n_val));
  std::printf("loss on replicated VAL part (%zu rows): %.4f\n", n_val,
              subset_loss(n - n_val, n));
  std::printf("reported best_val: %.4f\n", m->best_validation_mse());
  return 0;
}
