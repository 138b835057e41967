#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <vector>

#include "varimp/core.hpp"
#include "varimp/predictor.hpp"
#include "varimp/rng.hpp"

namespace varimp {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EVector = Eigen::VectorXd;

inline EMatrix to_eigen(const Matrix& X) {
  if (X.rows() == 0) return EMatrix(0, X.cols());
  return Eigen::Map<const EMatrix>(X.data(), static_cast<Eigen::Index>(X.rows()),
                                   static_cast<Eigen::Index>(X.cols()));
}

// Uniform Glorot weight initialization on [-sqrt(6/(fan_in+fan_out)), +...].
inline Matrix glorot_init(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  if (fan_in == 0 || fan_out == 0) throw config_error("glorot_init: fans must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  RngStream stream(seed);
  Matrix w(fan_out, fan_in);
  for (std::size_t r = 0; r < fan_out; ++r)
    for (std::size_t c = 0; c < fan_in; ++c) w(r, c) = stream.next_uniform(-bound, bound);
  return w;
}

namespace mlp_detail {

enum class Activation { relu, tanh };

inline Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw config_error("mlp: unknown activation '" + name + "'");
}

// Fully-connected net with linear scalar output. Weights W[l] map layer l
// inputs to layer l+1 units; biases start at zero.
struct Net {
  std::vector<EMatrix> W;  // (n_out x n_in)
  std::vector<EVector> b;  // (n_out)
  Activation act = Activation::relu;

  static Net init(const std::vector<std::size_t>& layer_sizes, Activation act,
                  std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw config_error("mlp: need input and output layers");
    Net net;
    net.act = act;
    RngKey key(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      const std::size_t n_in = layer_sizes[l], n_out = layer_sizes[l + 1];
      const Matrix w = glorot_init(n_in, n_out, key.child("layer", l).key);
      EMatrix ew(n_out, n_in);
      for (std::size_t r = 0; r < n_out; ++r)
        for (std::size_t c = 0; c < n_in; ++c) ew(r, c) = w(r, c);
      net.W.push_back(std::move(ew));
      net.b.push_back(EVector::Zero(static_cast<Eigen::Index>(n_out)));
    }
    return net;
  }

  EMatrix activate(EMatrix z) const {
    if (act == Activation::relu) return z.cwiseMax(0.0);
    return z.array().tanh().matrix();
  }

  // Rows of X are samples; returns one prediction per row.
  EVector forward(const EMatrix& X) const {
    EMatrix a = X;
    for (std::size_t l = 0; l + 1 < W.size(); ++l)
      a = activate((a * W[l].transpose()).rowwise() + b[l].transpose());
    EMatrix out = (a * W.back().transpose()).rowwise() + b.back().transpose();
    return out.col(0);
  }

  double loss(const EMatrix& X, const EVector& y) const {
    return (forward(X) - y).squaredNorm() / static_cast<double>(y.size());
  }

  // Analytic gradient of the mean-squared-error loss over the batch.
  void gradients(const EMatrix& X, const EVector& y, std::vector<EMatrix>& dW,
                 std::vector<EVector>& db) const {
    const std::size_t L = W.size();
    std::vector<EMatrix> pre(L);   // pre-activation of each layer
    std::vector<EMatrix> post(L + 1);
    post[0] = X;
    for (std::size_t l = 0; l < L; ++l) {
      pre[l] = (post[l] * W[l].transpose()).rowwise() + b[l].transpose();
      post[l + 1] = (l + 1 < L) ? activate(pre[l]) : pre[l];
    }
    const double n = static_cast<double>(y.size());
    EMatrix delta = post[L];
    delta.col(0) -= y;
    delta *= 2.0 / n;  // d(mean (pred-y)^2)/d pred
    dW.assign(L, EMatrix());
    db.assign(L, EVector());
    for (std::size_t l = L; l-- > 0;) {
      dW[l].noalias() = delta.transpose() * post[l];
      db[l] = delta.colwise().sum().transpose();
      if (l > 0) {
        EMatrix back = delta * W[l];
        if (act == Activation::relu) {
          delta = ((pre[l - 1].array() > 0.0).cast<double>() * back.array()).matrix();
        } else {
          delta = ((1.0 - pre[l - 1].array().tanh().square()) * back.array()).matrix();
        }
      }
    }
  }
};

struct AdamState {
  std::vector<EMatrix> mW, vW;
  std::vector<EVector> mb, vb;
  std::size_t t = 0;

  explicit AdamState(const Net& net) {
    for (const auto& w : net.W) {
      mW.push_back(EMatrix::Zero(w.rows(), w.cols()));
      vW.push_back(EMatrix::Zero(w.rows(), w.cols()));
    }
    for (const auto& bias : net.b) {
      mb.push_back(EVector::Zero(bias.size()));
      vb.push_back(EVector::Zero(bias.size()));
    }
  }

  void step(Net& net, const std::vector<EMatrix>& dW, const std::vector<EVector>& db,
            double lr) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    ++t;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    for (std::size_t l = 0; l < net.W.size(); ++l) {
      mW[l] = kBeta1 * mW[l] + (1.0 - kBeta1) * dW[l];
      vW[l] = kBeta2 * vW[l] + (1.0 - kBeta2) * dW[l].cwiseProduct(dW[l]);
      net.W[l].array() -=
          lr * (mW[l].array() / c1) / ((vW[l].array() / c2).sqrt() + kEps);
      mb[l] = kBeta1 * mb[l] + (1.0 - kBeta1) * db[l];
      vb[l] = kBeta2 * vb[l] + (1.0 - kBeta2) * db[l].cwiseProduct(db[l]);
      net.b[l].array() -=
          lr * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + kEps);
    }
  }
};

}  // namespace mlp_detail

class MlpModel final : public Predictor {
 public:
  MlpModel(MlpConfig config, mlp_detail::Net net, std::vector<double> feat_mean,
           std::vector<double> feat_scale, double y_mean, double y_scale,
           std::uint64_t seed, std::size_t best_epoch, double best_val_mse,
           std::vector<double> val_history)
      : config_(std::move(config)),
        net_(std::move(net)),
        feat_mean_(std::move(feat_mean)),
        feat_scale_(std::move(feat_scale)),
        y_mean_(y_mean),
        y_scale_(y_scale),
        seed_(seed),
        best_epoch_(best_epoch),
        best_val_mse_(best_val_mse),
        val_history_(std::move(val_history)) {}

  std::vector<double> predict(const Matrix& X) const override {
    check_columns(X);
    if (X.rows() == 0) return {};
    EMatrix Z = to_eigen(X);
    for (Eigen::Index c = 0; c < Z.cols(); ++c)
      Z.col(c) = (Z.col(c).array() - feat_mean_[static_cast<std::size_t>(c)]) /
                 feat_scale_[static_cast<std::size_t>(c)];
    const EVector out = net_.forward(Z);
    std::vector<double> preds(out.data(), out.data() + out.size());
    for (double& p : preds) p = p * y_scale_ + y_mean_;
    return preds;
  }

  std::size_t feature_count() const override { return feat_mean_.size(); }
  std::string type_name() const override { return "mlp"; }
  std::uint64_t fit_seed() const override { return seed_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_validation_mse() const { return best_val_mse_; }
  // Validation MSE per epoch; entry 0 is the untrained net's loss.
  const std::vector<double>& validation_history() const { return val_history_; }
  const mlp_detail::Net& net() const { return net_; }
  const MlpConfig& config() const { return config_; }

  nlohmann::json payload() const override {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < net_.W.size(); ++l) {
      std::vector<double> w(net_.W[l].data(), net_.W[l].data() + net_.W[l].size());
      std::vector<double> b(net_.b[l].data(), net_.b[l].data() + net_.b[l].size());
      layers.push_back({{"rows", net_.W[l].rows()},
                        {"cols", net_.W[l].cols()},
                        {"w", w},
                        {"b", b}});
    }
    return {{"layers", layers},
            {"feat_mean", feat_mean_},
            {"feat_scale", feat_scale_},
            {"y_mean", y_mean_},
            {"y_scale", y_scale_},
            {"best_epoch", best_epoch_},
            {"best_val_mse", best_val_mse_},
            {"val_history", val_history_}};
  }

  static std::shared_ptr<MlpModel> from_payload(const MlpConfig& config,
                                                const nlohmann::json& p,
                                                std::uint64_t seed) {
    mlp_detail::Net net;
    net.act = mlp_detail::activation_from_name(config.activation);
    for (const auto& layer : p.at("layers")) {
      const Eigen::Index rows = layer.at("rows").get<Eigen::Index>();
      const Eigen::Index cols = layer.at("cols").get<Eigen::Index>();
      const auto w = layer.at("w").get<std::vector<double>>();
      const auto b = layer.at("b").get<std::vector<double>>();
      EMatrix W(rows, cols);
      std::copy(w.begin(), w.end(), W.data());
      net.W.push_back(std::move(W));
      EVector bv(static_cast<Eigen::Index>(b.size()));
      std::copy(b.begin(), b.end(), bv.data());
      net.b.push_back(std::move(bv));
    }
    return std::make_shared<MlpModel>(
        config, std::move(net), p.at("feat_mean").get<std::vector<double>>(),
        p.at("feat_scale").get<std::vector<double>>(), p.at("y_mean").get<double>(),
        p.at("y_scale").get<double>(), seed, p.at("best_epoch").get<std::size_t>(),
        p.at("best_val_mse").get<double>(),
        p.at("val_history").get<std::vector<double>>());
  }

 private:
  MlpConfig config_;
  mlp_detail::Net net_;
  std::vector<double> feat_mean_, feat_scale_;
  double y_mean_ = 0.0, y_scale_ = 1.0;
  std::uint64_t seed_;
  std::size_t best_epoch_;
  double best_val_mse_;
  std::vector<double> val_history_;
};

// Minibatch-Adam MSE training with validation-based early stopping; the
// parameters with the best validation loss are restored at the end. Bit
// reproducible given (X, y, seed, config).
inline PredictorPtr mlp_fit(const MlpConfig& config, const Matrix& X,
                            const std::vector<double>& y, std::uint64_t seed) {
  validate(config);
  const std::size_t n = X.rows(), d = X.cols();
  if (y.size() != n) throw shape_error("mlp_fit: X/y row mismatch");
  if (n < 2 * config.batch_size)
    throw config_error("mlp_fit: need rows >= 2*batch_size (" +
                       std::to_string(2 * config.batch_size) + "), got " +
                       std::to_string(n));
  for (double v : y)
    if (!std::isfinite(v)) throw config_error("mlp_fit: non-finite target");

  // Standardize inputs with training statistics; constant columns pass through.
  std::vector<double> feat_mean(d, 0.0), feat_scale(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    const std::vector<double> col = X.column(j);
    feat_mean[j] = mean(col);
    const double sd = std::sqrt(population_variance(col));
    feat_scale[j] = sd > 1e-12 ? sd : 1.0;
  }

  // Standardize the target too: optimizer step sizes are tuned for unit-scale
  // outputs, so raw targets with a large mean train pathologically slowly.
  const double y_mean = mean(y);
  const double y_sd = std::sqrt(population_variance(y));
  const double y_scale = y_sd > 1e-12 ? y_sd : 1.0;
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = (y[i] - y_mean) / y_scale;
  EMatrix Z = to_eigen(X);
  for (Eigen::Index c = 0; c < Z.cols(); ++c)
    Z.col(c) = (Z.col(c).array() - feat_mean[static_cast<std::size_t>(c)]) /
               feat_scale[static_cast<std::size_t>(c)];

  RngKey key(seed);

  // Hold out a validation slice chosen by a seeded shuffle.
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(config.validation_fraction * static_cast<double>(n)));
  n_val = std::min(std::max<std::size_t>(n_val, 1), n - config.batch_size);
  RngStream split_stream(key.child("valsplit").key);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  split_stream.shuffle(order);
  std::vector<std::size_t> train_idx(order.begin(), order.end() - n_val);
  std::vector<std::size_t> val_idx(order.end() - n_val, order.end());

  const auto gather = [&](const std::vector<std::size_t>& idx, EMatrix& Xo, EVector& yo) {
    Xo.resize(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(d));
    yo.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      Xo.row(static_cast<Eigen::Index>(i)) = Z.row(static_cast<Eigen::Index>(idx[i]));
      yo(static_cast<Eigen::Index>(i)) = ys[idx[i]];
    }
  };
  EMatrix Xtr, Xval;
  EVector ytr, yval;
  gather(train_idx, Xtr, ytr);
  gather(val_idx, Xval, yval);

  std::vector<std::size_t> layer_sizes;
  layer_sizes.push_back(d);
  for (std::size_t h : config.hidden) layer_sizes.push_back(h);
  layer_sizes.push_back(1);
  const auto act = mlp_detail::activation_from_name(config.activation);
  mlp_detail::Net net = mlp_detail::Net::init(layer_sizes, act, key.child("init").key);
  mlp_detail::AdamState adam(net);

  mlp_detail::Net best = net;
  double best_val = net.loss(Xval, yval);
  std::vector<double> val_history{best_val};
  std::size_t best_epoch = 0, since_best = 0;
  const std::size_t n_train = train_idx.size();
  std::vector<std::size_t> batch_order(n_train);
  std::iota(batch_order.begin(), batch_order.end(), 0);
  std::vector<EMatrix> dW;
  std::vector<EVector> db;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    RngStream epoch_stream(key.child("epoch", epoch).key);
    epoch_stream.shuffle(batch_order);
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t stop = std::min(start + config.batch_size, n_train);
      EMatrix Xb(static_cast<Eigen::Index>(stop - start), static_cast<Eigen::Index>(d));
      EVector yb(static_cast<Eigen::Index>(stop - start));
      for (std::size_t i = start; i < stop; ++i) {
        Xb.row(static_cast<Eigen::Index>(i - start)) =
            Xtr.row(static_cast<Eigen::Index>(batch_order[i]));
        yb(static_cast<Eigen::Index>(i - start)) =
            ytr(static_cast<Eigen::Index>(batch_order[i]));
      }
      net.gradients(Xb, yb, dW, db);
      adam.step(net, dW, db, config.learning_rate);
    }
    const double val = net.loss(Xval, yval);
    if (!std::isfinite(val)) throw training_error("mlp_fit: non-finite loss", epoch);
    val_history.push_back(val);
    if (val < best_val) {  // ties keep the earlier epoch
      best_val = val;
      best = net;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  return std::make_shared<MlpModel>(config, std::move(best), std::move(feat_mean),
                                    std::move(feat_scale), y_mean, y_scale, seed,
                                    best_epoch, best_val, std::move(val_history));
}

}  // namespace varimp
