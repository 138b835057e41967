#include <cstdio>

#include "varimp/mlp.hpp"
#include "varimp/synthdata.hpp"

using namespace varimp;

int main() {
  const Dataset ds = generate(Dgp::friedman1, 512, 0.0, 1.0, 7);
  const DataSplit sp = train_test_split(ds);
  const auto& y = sp.y_train;
  std::printf("n=%zu mean(y)=%.4f popvar(y)=%.4f sd=%.4f\n", y.size(), mean(y),
              population_variance(y), std::sqrt(population_variance(y)));

  // Standardize exactly as the trainer does, then evaluate the freshly
  // initialized network's loss.
  const double y_mean = mean(y), y_sd = std::sqrt(population_variance(y));
  EMatrix Z = to_eigen(sp.X_train);
  for (Eigen::Index c = 0; c < Z.cols(); ++c) {
    const auto col = sp.X_train.column(static_cast<std::size_t>(c));
    const double m = mean(col), s = std::sqrt(population_variance(col));
    Z.col(c) = (Z.col(c).array() - m) / (s > 1e-12 ? s : 1.0);
  }
  EVector ys(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i)
    ys(static_cast<Eigen::Index>(i)) = (y[i] - y_mean) / y_sd;

  std::vector<std::size_t> sizes{20, 64, 32, 8, 1};
  const auto net =
      mlp_detail::Net::init(sizes, mlp_detail::Activation::relu, RngKey(99).child("init").key);
  const EVector out = net.forward(Z);
  std::printf("init net: loss=%.4f, out mean=%.4f sd=%.4f, out[0..4]=", net.loss(Z, ys),
              out.mean(), std::sqrt((out.array() - out.mean()).square().mean()));
  for (int i = 0; i < 5; ++i) std::printf("%.3f ", out(i));
  std::printf("\n");
  return 0;
}
