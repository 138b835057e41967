#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "varimp/core.hpp"
#include "varimp/rng.hpp"

namespace varimp {

// Abstract regression model. Trained models are immutable: predict never
// mutates state, so a shared model may be used from many threads at once.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<double> predict(const Matrix& X) const = 0;
  virtual std::size_t feature_count() const = 0;
  virtual std::string type_name() const = 0;
  virtual std::uint64_t fit_seed() const = 0;
  virtual nlohmann::json payload() const = 0;

 protected:
  void check_columns(const Matrix& X) const {
    if (X.cols() != feature_count())
      throw shape_error("predict: expected " + std::to_string(feature_count()) +
                        " columns, got " + std::to_string(X.cols()));
  }
};

using PredictorPtr = std::shared_ptr<const Predictor>;

struct MlpConfig {
  std::vector<std::size_t> hidden{64, 32, 8};
  std::size_t max_epochs = 500;
  std::size_t patience = 10;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  double validation_fraction = 0.1;
  std::string activation = "relu";
};

struct TreeConfig {
  std::size_t max_depth = 0;               // 0 = unbounded
  std::size_t max_features_per_split = 0;  // 0 = ceil(d/3), resolved at fit
  std::size_t min_samples_leaf = 1;
};

struct LinearConfig {
  double ridge = 1e-8;
};

using LearnerConfig = std::variant<MlpConfig, TreeConfig, LinearConfig>;

inline void validate(const MlpConfig& c) {
  if (c.hidden.empty()) throw config_error("mlp: need at least one hidden layer");
  for (std::size_t h : c.hidden)
    if (h == 0) throw config_error("mlp: hidden layer sizes must be positive");
  if (c.patience == 0 || c.patience > c.max_epochs)
    throw config_error("mlp: require 1 <= patience <= max_epochs");
  if (c.learning_rate <= 0.0) throw config_error("mlp: learning_rate must be positive");
  if (c.batch_size == 0) throw config_error("mlp: batch_size must be positive");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0))
    throw config_error("mlp: validation_fraction must lie in (0,1)");
  if (c.activation != "relu" && c.activation != "tanh")
    throw config_error("mlp: unknown activation '" + c.activation + "'");
}

inline void validate(const TreeConfig& c) {
  if (c.min_samples_leaf == 0) throw config_error("tree: min_samples_leaf must be >= 1");
}

inline void validate(const LinearConfig& c) {
  if (c.ridge < 0.0) throw config_error("linear: ridge must be >= 0");
}

inline nlohmann::json config_to_json(const MlpConfig& c) {
  return {{"type", "mlp"},          {"hidden", c.hidden},
          {"max_epochs", c.max_epochs}, {"patience", c.patience},
          {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"validation_fraction", c.validation_fraction}, {"activation", c.activation}};
}

inline nlohmann::json config_to_json(const TreeConfig& c) {
  return {{"type", "tree"},
          {"max_depth", c.max_depth},
          {"max_features_per_split", c.max_features_per_split},
          {"min_samples_leaf", c.min_samples_leaf}};
}

inline nlohmann::json config_to_json(const LinearConfig& c) {
  return {{"type", "linear"}, {"ridge", c.ridge}};
}

inline nlohmann::json config_to_json(const LearnerConfig& c) {
  return std::visit([](const auto& v) { return config_to_json(v); }, c);
}

inline LearnerConfig config_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "mlp") {
    MlpConfig c;
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.patience = j.at("patience").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.validation_fraction = j.at("validation_fraction").get<double>();
    c.activation = j.at("activation").get<std::string>();
    validate(c);
    return c;
  }
  if (type == "tree") {
    TreeConfig c;
    c.max_depth = j.at("max_depth").get<std::size_t>();
    c.max_features_per_split = j.at("max_features_per_split").get<std::size_t>();
    c.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
    validate(c);
    return c;
  }
  if (type == "linear") {
    LinearConfig c;
    c.ridge = j.at("ridge").get<double>();
    validate(c);
    return c;
  }
  throw config_error("unknown learner type '" + type + "'");
}

inline std::string learner_type_name(const LearnerConfig& c) {
  return config_to_json(c).at("type").get<std::string>();
}

// Stable hash of a learner config, used to key cached ground-truth vectors.
inline std::uint64_t config_hash(const nlohmann::json& j) {
  return hash_str(0x6f0c0f16ULL, j.dump());
}

}  // namespace varimp
