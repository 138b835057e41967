#include <cstdio>

#include "varimp/ensemble.hpp"
#include "varimp/metrics.hpp"
#include "varimp/synthdata.hpp"

using namespace varimp;

int main() {
  for (Dgp dgp : {Dgp::friedman1, Dgp::gfunction, Dgp::ishigami}) {
    const Dataset ds = generate(dgp, 30000, dgp_info(dgp).default_rho, kNoiseless, 11);
    const DataSplit sp = train_test_split(ds);
    TreeConfig cfg;
    cfg.max_features_per_split = 20;
    cfg.min_samples_leaf = 2;
    const auto ens = fit_bagging(LearnerConfig{cfg}, 10, sp.X_train, sp.y_train, 42);
    std::printf("%s rf-final  R2 %.4f\n", to_string(dgp).c_str(),
                r2(sp.y_test, ensemble_predict(ens, sp.X_test)));
  }
  return 0;
}
