#include <cstdio>

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
  const auto m = std::static_pointer_cast<const MlpModel>(
      fit_model(LearnerConfig{cfg}, sp.X_train, sp.y_train, 99));

  const auto& h = m->validation_history();
  std::printf("best_epoch=%zu best_val=%.4f epochs=%zu\n", m->best_epoch(),
              m->best_validation_mse(), h.size() - 1);
  std::printf("val history: ");
  for (std::size_t i = 0; i < h.size() && i < 8; ++i) std::printf("%.4f ", h[i]);
  std::printf("\n");

  const auto payload = m->payload();
  std::printf("y_mean=%.4f y_scale=%.4f\n", payload.at("y_mean").get<double>(),
              payload.at("y_scale").get<double>());

  const auto tr = m->predict(sp.X_train);
  const auto te = m->predict(sp.X_test);
  std::printf("train R2 %.4f  test R2 %.4f\n", r2(sp.y_train, tr), r2(sp.y_test, te));
  double lo = te[0], hi = te[0];
  for (double p : te) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  std::printf("test pred range [%.2f, %.2f], y_test mean %.2f\n", lo, hi,
              mean(sp.y_test));
  return 0;
}
