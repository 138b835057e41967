#include <chrono>
#include <cstdio>

#include "varimp/ensemble.hpp"
#include "varimp/metrics.hpp"
#include "varimp/synthdata.hpp"

using namespace varimp;
using Clock = std::chrono::steady_clock;

static double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int main() {
  // MLP across the benchmark n-grid, noisy friedman1.
  for (std::size_t n : {128ul, 256ul, 512ul, 1024ul, 2048ul}) {
    MlpConfig cfg;
    cfg.batch_size = 32;
    const Dataset ds = generate(Dgp::friedman1, n, 0.0, 1.0, 7);
    const DataSplit sp = train_test_split(ds);
    const auto t0 = Clock::now();
    const auto m = fit_model(LearnerConfig{cfg}, sp.X_train, sp.y_train, 42);
    std::printf("mlp n=%5zu  %7.1f ms  test R2 %.4f\n", n, ms_since(t0),
                r2(sp.y_test, m->predict(sp.X_test)));
  }
  // Patience variants at n=1024.
  for (std::size_t pat : {10ul, 30ul, 60ul}) {
    MlpConfig cfg;
    cfg.batch_size = 32;
    cfg.patience = pat;
    const Dataset ds = generate(Dgp::friedman1, 1024, 0.0, 1.0, 7);
    const DataSplit sp = train_test_split(ds);
    const auto t0 = Clock::now();
    const auto m = fit_model(LearnerConfig{cfg}, sp.X_train, sp.y_train, 42);
    std::printf("mlp n=1024 patience=%2zu  %7.1f ms  test R2 %.4f\n", pat,
                ms_since(t0), r2(sp.y_test, m->predict(sp.X_test)));
  }
  // Noiseless fits at n=30000 (MLP and two tree-bagging variants).
  for (Dgp dgp : {Dgp::friedman1, Dgp::gfunction, Dgp::ishigami}) {
    const Dataset ds = generate(dgp, 30000, dgp_info(dgp).default_rho, kNoiseless, 11);
    const DataSplit sp = train_test_split(ds);
    {
      MlpConfig cfg;
      cfg.batch_size = 32;
      const auto t0 = Clock::now();
      const auto m = fit_model(LearnerConfig{cfg}, sp.X_train, sp.y_train, 42);
      std::printf("%s noiseless mlp        %8.1f ms  test R2 %.4f\n",
                  to_string(dgp).c_str(), ms_since(t0),
                  r2(sp.y_test, m->predict(sp.X_test)));
    }
    for (std::size_t mf : {0ul, 20ul}) {
      TreeConfig cfg;
      cfg.max_features_per_split = mf;
      const auto t0 = Clock::now();
      const auto ens = fit_bagging(LearnerConfig{cfg}, 10,
                            sp.X_train, sp.y_train, 42);
      std::printf("%s noiseless bag10 mf=%2zu %7.1f ms  test R2 %.4f\n",
                  to_string(dgp).c_str(), mf, ms_since(t0),
                  r2(sp.y_test, ensemble_predict(ens, sp.X_test)));
    }
  }
  // Truth-scale MLP fit (asymptotic pipeline trains at ~2/3 of 1e5 rows).
  {
    MlpConfig cfg;
    cfg.batch_size = 32;
    const Dataset ds = generate(Dgp::friedman1, 100000, 0.0, 1.0, 13);
    const DataSplit sp = train_test_split(ds);
    const auto t0 = Clock::now();
    const auto m = fit_model(LearnerConfig{cfg}, sp.X_train, sp.y_train, 42);
    std::printf("mlp n=100000 (train %zu)  %8.1f ms  test R2 %.4f\n",
                sp.X_train.rows(), ms_since(t0),
                r2(sp.y_test, m->predict(sp.X_test)));
  }
  return 0;
}
