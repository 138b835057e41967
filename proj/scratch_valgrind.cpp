#include <cstdio>

#include "varimp/ensemble.hpp"
#include "varimp/metrics.hpp"
#include "varimp/synthdata.hpp"

using namespace varimp;

int main() {
  MlpConfig mlp;
  mlp.batch_size = 32;
  const Dataset ds = generate(Dgp::friedman1, 512, 0.0, 1.0, 7);
  const DataSplit sp = train_test_split(ds);
  const PredictorPtr m = fit_model(LearnerConfig{mlp}, sp.X_train, sp.y_train, 99);
  const auto payload = m->payload();
  std::printf("y_mean=%.4f y_scale=%.4f test R2 %.4f\n",
              payload.at("y_mean").get<double>(), payload.at("y_scale").get<double>(),
              r2(m->predict(sp.X_test), sp.y_test));
  return 0;
}
