#include <cstdio>

#include "varimp/learners.hpp"
#include "varimp/metrics.hpp"
#include "varimp/mlp.hpp"
#include "varimp/synthdata.hpp"

using namespace varimp;

int main() {
  const Dataset ds = generate(Dgp::friedman1, 512, 0.0, 1.0, 7);
  const DataSplit sp = train_test_split(ds);

  MlpConfig cfg;
  cfg.batch_size = 32;
  const auto model = std::static_pointer_cast<const MlpModel>(
      fit_model(LearnerConfig{cfg}, sp.X_train, sp.y_train, 99));

  std::printf("best_epoch=%zu best_val=%.4f epochs_run=%zu\n", model->best_epoch(),
              model->best_validation_mse(), model->validation_history().size() - 1);
  const auto& h = model->validation_history();
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i < 15 || i + 5 >= h.size() || i % 10 == 0)
      std::printf("  epoch %3zu: val %.4f\n", i, h[i]);
  }
  std::printf("train R2 %.4f  test R2 %.4f\n",
              r2(model->predict(sp.X_train), sp.y_train),
              r2(model->predict(sp.X_test), sp.y_test));

  const auto preds = model->predict(sp.X_test);
  double lo = preds[0], hi = preds[0];
  for (double p : preds) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  std::printf("test pred range [%.2f, %.2f]; y range approx [0, 30]\n", lo, hi);
  return 0;
}
