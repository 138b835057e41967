#include <chrono>
#include <cstdio>

#include "varimp/ensemble.hpp"
#include "varimp/metrics.hpp"
#include "varimp/synthdata.hpp"

using namespace varimp;
using Clock = std::chrono::steady_clock;

int main() {
  for (double rho : {0.0, 0.3}) {
    const Dataset ds = generate(Dgp::gfunction, 30000, rho, kNoiseless, 11);
    const DataSplit sp = train_test_split(ds);
    for (std::size_t mf : {7ul, 14ul, 20ul}) {
      TreeConfig cfg;
      cfg.max_features_per_split = mf;
      const auto t0 = Clock::now();
      const auto ens = fit_bagging(LearnerConfig{cfg}, 10, sp.X_train, sp.y_train, 42);
      const double secs =
          std::chrono::duration<double>(Clock::now() - t0).count();
      std::printf("gfunction rho=%.1f mf=%2zu  %5.1f s  test R2 %.4f\n", rho, mf,
                  secs, r2(sp.y_test, ensemble_predict(ens, sp.X_test)));
    }
  }
  return 0;
}
