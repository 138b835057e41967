#include "varimp/learners.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "varimp/synthdata.hpp"

using namespace varimp;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, double lo = 0.0,
                     double hi = 1.0) {
  RngStream r(seed);
  Matrix X(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) X(i, j) = r.next_uniform(lo, hi);
  return X;
}

double r2_of(const std::vector<double>& y, const std::vector<double>& yhat) {
  double ss_res = 0.0, ss_tot = 0.0;
  const double ybar = mean(y);
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  return 1.0 - ss_res / ss_tot;
}

// Exhaustive minimum of summed child SSE over every (feature, boundary) split,
// computed with direct O(n^2) sums — the oracle for the tree's greedy choice.
double brute_force_best_sse(const Matrix& X, const std::vector<double>& y,
                            const std::vector<std::size_t>& rows) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < X.cols(); ++f) {
    std::vector<double> values;
    for (std::size_t r : rows) values.push_back(X(r, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double thr = 0.5 * (values[i] + values[i + 1]);
      double suml = 0.0, sumr = 0.0;
      std::size_t nl = 0, nr = 0;
      for (std::size_t r : rows) {
        if (X(r, f) <= thr) {
          suml += y[r];
          ++nl;
        } else {
          sumr += y[r];
          ++nr;
        }
      }
      if (nl == 0 || nr == 0) continue;
      const double ml = suml / nl, mr = sumr / nr;
      double sse = 0.0;
      for (std::size_t r : rows)
        sse += X(r, f) <= thr ? (y[r] - ml) * (y[r] - ml) : (y[r] - mr) * (y[r] - mr);
      best = std::min(best, sse);
    }
  }
  return best;
}

double node_sse(const std::vector<double>& y, const std::vector<std::size_t>& rows) {
  double sum = 0.0;
  for (std::size_t r : rows) sum += y[r];
  const double m = sum / static_cast<double>(rows.size());
  double sse = 0.0;
  for (std::size_t r : rows) sse += (y[r] - m) * (y[r] - m);
  return sse;
}

}  // namespace

TEST(Glorot, BoundAndDeterminism) {
  const Matrix w = glorot_init(64, 32, 3);
  const double bound = std::sqrt(6.0 / 96.0);
  EXPECT_NEAR(bound, 0.25, 0.001);
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c) EXPECT_LE(std::fabs(w(r, c)), bound);
  EXPECT_TRUE(glorot_init(64, 32, 3) == w);
  EXPECT_FALSE(glorot_init(64, 32, 4) == w);
}

TEST(Glorot, VarianceMatchesUniformMoment) {
  const Matrix w = glorot_init(100, 100, 11);
  std::vector<double> flat(w.data(), w.data() + 100 * 100);
  const double expected = 2.0 / 200.0;  // Var of U(-a, a) with a^2 = 6/(fi+fo)
  EXPECT_NEAR(sample_variance(flat), expected, 0.05 * expected);
}

TEST(MlpGradients, MatchCentralFiniteDifferences) {
  const std::vector<std::size_t> sizes = {3, 2, 1};
  auto net = mlp_detail::Net::init(sizes, mlp_detail::Activation::tanh, 5);
  const Matrix Xm = random_matrix(5, 3, 17, -1.0, 1.0);
  const EMatrix X = to_eigen(Xm);
  EVector y(5);
  y << 0.3, -0.7, 1.2, 0.0, 0.5;

  std::vector<EMatrix> dW;
  std::vector<EVector> db;
  net.gradients(X, y, dW, db);

  const double h = 1e-5;
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    for (Eigen::Index i = 0; i < net.W[l].size(); ++i) {
      auto probe = net;
      probe.W[l].data()[i] += h;
      const double up = probe.loss(X, y);
      probe.W[l].data()[i] -= 2 * h;
      const double down = probe.loss(X, y);
      const double numeric = (up - down) / (2 * h);
      const double analytic = dW[l].data()[i];
      const double scale = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
      EXPECT_LT(std::fabs(numeric - analytic) / scale, 1e-4);
    }
    for (Eigen::Index i = 0; i < net.b[l].size(); ++i) {
      auto probe = net;
      probe.b[l](i) += h;
      const double up = probe.loss(X, y);
      probe.b[l](i) -= 2 * h;
      const double down = probe.loss(X, y);
      const double numeric = (up - down) / (2 * h);
      const double analytic = db[l](i);
      const double scale = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
      EXPECT_LT(std::fabs(numeric - analytic) / scale, 1e-4);
    }
  }
}

TEST(MlpGradients, ReluPathMatchesFiniteDifferences) {
  auto net = mlp_detail::Net::init({4, 3, 1}, mlp_detail::Activation::relu, 9);
  const Matrix Xm = random_matrix(6, 4, 23, -1.0, 1.0);
  const EMatrix X = to_eigen(Xm);
  EVector y(6);
  y << 1.0, 0.0, -1.0, 0.5, 2.0, -0.5;
  std::vector<EMatrix> dW;
  std::vector<EVector> db;
  net.gradients(X, y, dW, db);
  const double h = 1e-5;
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    for (Eigen::Index i = 0; i < net.W[l].size(); ++i) {
      auto probe = net;
      probe.W[l].data()[i] += h;
      const double up = probe.loss(X, y);
      probe.W[l].data()[i] -= 2 * h;
      const double numeric = (up - probe.loss(X, y)) / (2 * h);
      const double scale = std::max({std::fabs(numeric), std::fabs(dW[l].data()[i]), 1e-8});
      EXPECT_LT(std::fabs(numeric - dW[l].data()[i]) / scale, 1e-4);
    }
  }
}

TEST(MlpFit, ConstantTargetLearnsTheMean) {
  MlpConfig config;
  config.hidden = {16, 8};
  config.batch_size = 32;
  config.activation = "tanh";  // smooth basin; the kinkless path settles deepest
  config.max_epochs = 8000;
  config.patience = 8000;
  const Matrix X = random_matrix(256, 5, 41);
  const std::vector<double> y(256, 3.0);
  const PredictorPtr model = mlp_fit(config, X, y, 7);
  for (double p : model->predict(X)) EXPECT_NEAR(p, 3.0, 1e-3);
}

TEST(MlpFit, PreconditionsAndValidation) {
  MlpConfig config;
  const Matrix X = random_matrix(100, 3, 2);  // < 2*batch_size rows
  const std::vector<double> y(100, 0.0);
  EXPECT_THROW(mlp_fit(config, X, y, 1), config_error);

  MlpConfig bad = config;
  bad.patience = 1000;
  EXPECT_THROW(validate(bad), config_error);
  bad = config;
  bad.activation = "gelu";
  EXPECT_THROW(validate(bad), config_error);
  bad = config;
  bad.validation_fraction = 1.5;
  EXPECT_THROW(validate(bad), config_error);
}

TEST(MlpFit, ReproducibleGivenSeed) {
  MlpConfig config;
  config.hidden = {8, 4};
  config.batch_size = 16;
  config.max_epochs = 30;
  config.patience = 30;
  Dataset ds = generate(Dgp::friedman1, 200, 0.0, 1.0, 12);
  const PredictorPtr a = mlp_fit(config, ds.X, ds.y, 99);
  const PredictorPtr b = mlp_fit(config, ds.X, ds.y, 99);
  const Matrix probe = random_matrix(50, 20, 5);
  EXPECT_EQ(a->predict(probe), b->predict(probe));
}

TEST(MlpFit, SeedsDifferButAreEquallyPredictive) {
  MlpConfig config;
  config.batch_size = 32;
  Dataset ds = generate(Dgp::friedman1, 2500, 0.0, kNoiseless, 31);
  DataSplit split = train_test_split(ds);
  const PredictorPtr a = mlp_fit(config, split.X_train, split.y_train, 1);
  const PredictorPtr b = mlp_fit(config, split.X_train, split.y_train, 2);
  const auto* ma = dynamic_cast<const MlpModel*>(a.get());
  const auto* mb = dynamic_cast<const MlpModel*>(b.get());
  ASSERT_NE(ma, nullptr);
  ASSERT_NE(mb, nullptr);
  EXPECT_NE(ma->net().W[0], mb->net().W[0]);
  const double r2a = r2_of(split.y_test, a->predict(split.X_test));
  const double r2b = r2_of(split.y_test, b->predict(split.X_test));
  EXPECT_GT(r2a, 0.8);
  EXPECT_GT(r2b, 0.8);
  EXPECT_LT(std::fabs(r2a - r2b), 0.1);
}

TEST(MlpFit, EarlyStoppingKeepsTheBestEpoch) {
  MlpConfig config;
  config.hidden = {8};
  config.batch_size = 16;
  config.max_epochs = 100;
  config.patience = 5;
  Dataset ds = generate(Dgp::friedman1, 150, 0.0, 1.0, 77);
  const PredictorPtr model = mlp_fit(config, ds.X, ds.y, 3);
  const auto* mlp = dynamic_cast<const MlpModel*>(model.get());
  ASSERT_NE(mlp, nullptr);
  const auto& history = mlp->validation_history();
  ASSERT_FALSE(history.empty());
  ASSERT_LT(mlp->best_epoch(), history.size());
  EXPECT_EQ(history[mlp->best_epoch()], mlp->best_validation_mse());
  for (double v : history) EXPECT_GE(v, mlp->best_validation_mse());
  // Stopping rule: no more than patience epochs follow the best one.
  EXPECT_LE(history.size() - 1 - mlp->best_epoch(), config.patience);
}

TEST(TreeFit, SingleDistinctValueYieldsOneLeaf) {
  Matrix X(6, 2, 0.5);
  const std::vector<double> y = {1, 2, 3, 4, 5, 6};
  TreeConfig config;
  config.max_features_per_split = 2;
  const PredictorPtr model = tree_fit(config, X, y, 1);
  const auto* tree = dynamic_cast<const TreeModel*>(model.get());
  ASSERT_NE(tree, nullptr);
  EXPECT_EQ(tree->node_count(), 1u);
  EXPECT_DOUBLE_EQ(model->predict(X)[0], 3.5);
}

TEST(TreeFit, PerfectSplitOnTwoPoints) {
  Matrix X = Matrix::from_rows({{0.0}, {1.0}});
  const std::vector<double> y = {0.0, 1.0};
  TreeConfig config;
  config.max_features_per_split = 1;
  const PredictorPtr model = tree_fit(config, X, y, 1);
  const std::vector<double> pred = model->predict(X);
  EXPECT_DOUBLE_EQ(pred[0], 0.0);
  EXPECT_DOUBLE_EQ(pred[1], 1.0);
}

TEST(TreeFit, UnlimitedDepthInterpolatesDistinctRows) {
  const Matrix X = random_matrix(200, 5, 8);
  RngStream r(9);
  std::vector<double> y(200);
  for (auto& v : y) v = r.next_normal();
  const PredictorPtr model = tree_fit(TreeConfig{}, X, y, 4);
  const std::vector<double> pred = model->predict(X);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(pred[i], y[i]);
}

TEST(TreeFit, EveryChosenSplitIsExhaustivelyOptimal) {
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    RngStream r(1000 + inst);
    const std::size_t n = 5 + r.next_below(46);
    const std::size_t d = 1 + r.next_below(4);
    const Matrix X = random_matrix(n, d, 2000 + inst);
    std::vector<double> y(n);
    for (auto& v : y) v = r.next_normal();
    TreeConfig config;
    config.max_features_per_split = d;  // all features considered
    const PredictorPtr model = tree_fit(config, X, y, 3000 + inst);
    const auto* tree = dynamic_cast<const TreeModel*>(model.get());
    ASSERT_NE(tree, nullptr);

    // Recover each node's row set by routing, then compare the realized child
    // SSE with the exhaustive optimum.
    std::vector<std::vector<std::size_t>> node_rows(tree->node_count());
    for (std::size_t i = 0; i < n; ++i) {
      std::int32_t idx = 0;
      node_rows[0].push_back(i);
      while (tree->nodes()[static_cast<std::size_t>(idx)].feature >= 0) {
        const auto& node = tree->nodes()[static_cast<std::size_t>(idx)];
        idx = X(i, static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left
                                                                            : node.right;
        node_rows[static_cast<std::size_t>(idx)].push_back(i);
      }
    }
    for (std::size_t k = 0; k < tree->node_count(); ++k) {
      const auto& node = tree->nodes()[k];
      if (node.feature < 0) continue;
      const double realized =
          node_sse(y, node_rows[static_cast<std::size_t>(node.left)]) +
          node_sse(y, node_rows[static_cast<std::size_t>(node.right)]);
      const double oracle = brute_force_best_sse(X, y, node_rows[k]);
      EXPECT_NEAR(realized, oracle, 1e-9 * std::max(1.0, std::fabs(oracle)));
    }
  }
}

TEST(TreeFit, ReproducibleAndConfigValidated) {
  const Matrix X = random_matrix(80, 6, 14);
  RngStream r(15);
  std::vector<double> y(80);
  for (auto& v : y) v = r.next_normal();
  const PredictorPtr a = tree_fit(TreeConfig{}, X, y, 5);
  const PredictorPtr b = tree_fit(TreeConfig{}, X, y, 5);
  const Matrix probe = random_matrix(30, 6, 16);
  EXPECT_EQ(a->predict(probe), b->predict(probe));

  TreeConfig bad;
  bad.max_features_per_split = 7;  // > d
  EXPECT_THROW(tree_fit(bad, X, y, 1), config_error);
  TreeConfig zero_leaf;
  zero_leaf.min_samples_leaf = 0;
  EXPECT_THROW(tree_fit(zero_leaf, X, y, 1), config_error);
}

TEST(TreeFit, MinSamplesLeafRespected) {
  const Matrix X = random_matrix(60, 3, 21);
  RngStream r(22);
  std::vector<double> y(60);
  for (auto& v : y) v = r.next_normal();
  TreeConfig config;
  config.min_samples_leaf = 10;
  config.max_features_per_split = 3;
  const PredictorPtr model = tree_fit(config, X, y, 6);
  const auto* tree = dynamic_cast<const TreeModel*>(model.get());
  std::vector<std::size_t> counts(tree->node_count(), 0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    std::int32_t idx = 0;
    while (tree->nodes()[static_cast<std::size_t>(idx)].feature >= 0) {
      const auto& node = tree->nodes()[static_cast<std::size_t>(idx)];
      idx = X(i, static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left
                                                                           : node.right;
    }
    ++counts[static_cast<std::size_t>(idx)];
  }
  for (std::size_t k = 0; k < tree->node_count(); ++k)
    if (tree->nodes()[k].feature < 0) EXPECT_GE(counts[k], 10u);
}

TEST(Predict, ContractHolds) {
  const Matrix X = random_matrix(40, 4, 31);
  RngStream r(32);
  std::vector<double> y(40);
  for (auto& v : y) v = r.next_normal();
  TreeConfig config;
  config.max_features_per_split = 4;
  const PredictorPtr model = tree_fit(config, X, y, 2);

  const Matrix empty(0, 4);
  EXPECT_TRUE(model->predict(empty).empty());
  EXPECT_EQ(model->predict(X), model->predict(X));
  EXPECT_EQ(model->predict(X), y);  // interpolating tree reproduces training y

  const Matrix wrong(3, 5);
  EXPECT_THROW(model->predict(wrong), shape_error);
}

TEST(LinearFit, RecoversPlantedCoefficients) {
  const Matrix X = random_matrix(200, 3, 51, -2.0, 2.0);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = 2.0 * X(i, 0) + X(i, 1) + 3.0;
  const PredictorPtr model = linear_fit(LinearConfig{}, X, y, 0);
  const auto* lin = dynamic_cast<const LinearModel*>(model.get());
  ASSERT_NE(lin, nullptr);
  EXPECT_NEAR(lin->coefficients()[0], 2.0, 1e-6);
  EXPECT_NEAR(lin->coefficients()[1], 1.0, 1e-6);
  EXPECT_NEAR(lin->coefficients()[2], 0.0, 1e-6);
  EXPECT_NEAR(lin->intercept(), 3.0, 1e-6);
}

TEST(Serialization, RoundTripsEveryModelType) {
  Dataset ds = generate(Dgp::friedman1, 200, 0.0, 1.0, 61);
  const Matrix probe = random_matrix(25, 20, 62);

  MlpConfig mlp_config;
  mlp_config.hidden = {6, 3};
  mlp_config.batch_size = 16;
  mlp_config.max_epochs = 15;
  mlp_config.patience = 15;
  const std::vector<LearnerConfig> configs = {mlp_config, TreeConfig{}, LinearConfig{}};
  for (const LearnerConfig& config : configs) {
    const PredictorPtr model = fit_model(config, ds.X, ds.y, 8);
    const nlohmann::json blob = serialize_model(*model, config);
    const PredictorPtr restored = deserialize_model(blob);
    EXPECT_EQ(model->type_name(), restored->type_name());
    EXPECT_EQ(model->predict(probe), restored->predict(probe));

    nlohmann::json tampered = blob;
    tampered["payload"]["extra"] = 1;
    EXPECT_THROW(deserialize_model(tampered), config_error);
  }
}

TEST(Serialization, ConfigJsonRoundTrip) {
  MlpConfig mlp_config;
  mlp_config.hidden = {5, 4};
  mlp_config.activation = "tanh";
  const LearnerConfig original = mlp_config;
  const LearnerConfig restored = config_from_json(config_to_json(original));
  EXPECT_EQ(config_to_json(original).dump(), config_to_json(restored).dump());
  EXPECT_NE(config_hash(config_to_json(MlpConfig{})),
            config_hash(config_to_json(TreeConfig{})));
}
