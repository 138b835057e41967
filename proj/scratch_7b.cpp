#include <cstdio>

#include "varimp/bench.hpp"

using namespace varimp;

class SignalStub : public Predictor {
 public:
  SignalStub(Dgp dgp, std::size_t d, int dropped)
      : dgp_(dgp), d_(d), dropped_(dropped) {}
  std::vector<double> predict(const Matrix& X) const override {
    std::vector<double> out(X.rows());
    std::vector<double> buf(d_);
    for (std::size_t i = 0; i < X.rows(); ++i) {
      if (dropped_ < 0) {
        for (std::size_t j = 0; j < d_; ++j) buf[j] = X(i, j);
        out[i] = eval_dgp(dgp_, buf.data(), d_);
      } else {
        std::size_t pos = 0;
        for (std::size_t j = 0; j < d_; ++j)
          if (int(j) != dropped_) buf[j] = X(i, pos++);
        constexpr std::size_t K = 256;
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          buf[std::size_t(dropped_)] = (double(k) + 0.5) / double(K);
          acc += eval_dgp(dgp_, buf.data(), d_);
        }
        out[i] = acc / double(K);
      }
    }
    return out;
  }
  std::size_t feature_count() const override { return dropped_ < 0 ? d_ : d_ - 1; }
  std::string type_name() const override { return "signal_stub"; }
  std::uint64_t fit_seed() const override { return 0; }
  nlohmann::json payload() const override { return {}; }

 private:
  Dgp dgp_;
  std::size_t d_;
  int dropped_;
};

int main() {
  const GroundTruth sobol = montecarlo_total_sobol(Dgp::friedman1, 0.0, 4000, 400, 808);
  std::printf("sobol f0=%.4f(se %.4f) f1=%.4f(se %.4f)\n", sobol.scores[0],
              sobol.se[0], sobol.scores[1], sobol.se[1]);
  for (std::uint64_t seed : {909ull, 910ull, 911ull, 912ull}) {
    for (std::size_t n : {24000ull, 60000ull}) {
      const Dataset ds = generate(Dgp::friedman1, n, 0.0, kNoiseless, seed);
      EnsembleModel ens;
      ens.kind = EnsembleKind::voting;
      ens.base_config = LinearConfig{};
      ens.members.push_back(
          std::make_shared<SignalStub>(Dgp::friedman1, kBenchmarkDims, -1));
      ens.member_seeds.assign(1, 0);
      const RestrictedFitFn stub_fit =
          [](const Matrix&, const std::vector<double>&, std::uint64_t,
             int dropped) -> PredictorPtr {
        return std::make_shared<SignalStub>(Dgp::friedman1, kBenchmarkDims, dropped);
      };
      const std::vector<double> y_dummy(ds.y.begin(), ds.y.begin() + 10);
      const StrategyPair pair =
          loco_pair(stub_fit, ds.X.slice_rows(0, 10), y_dummy, ds.X, ds.y, ens);
      std::printf("seed=%llu n=%zu:", (unsigned long long)seed, n);
      for (std::size_t j = 0; j < 5; ++j) {
        const double se = std::sqrt(sobol.se[j] * sobol.se[j] +
                                    pair.ensemble.se[j] * pair.ensemble.se[j]);
        const double gap = std::fabs(pair.ensemble.scores[j] - sobol.scores[j]);
        std::printf(" f%zu=%.4f(g/3se %.2f)", j, pair.ensemble.scores[j],
                    gap / (3.0 * se));
      }
      std::printf("\n");
    }
  }
  return 0;
}
