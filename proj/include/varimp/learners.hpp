#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "json.hpp"
#include "varimp/core.hpp"
#include "varimp/linear.hpp"
#include "varimp/mlp.hpp"
#include "varimp/predictor.hpp"
#include "varimp/rng.hpp"
#include "varimp/tree.hpp"

namespace varimp {

inline PredictorPtr fit_model(const LearnerConfig& config, const Matrix& X,
                              const std::vector<double>& y, std::uint64_t seed) {
  return std::visit(
      [&](const auto& c) -> PredictorPtr {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, MlpConfig>) return mlp_fit(c, X, y, seed);
        if constexpr (std::is_same_v<C, TreeConfig>) return tree_fit(c, X, y, seed);
        if constexpr (std::is_same_v<C, LinearConfig>) return linear_fit(c, X, y, seed);
      },
      config);
}

// Self-describing versioned model blob: {version, type, config, seed,
// checksum, payload}. The checksum covers the payload dump so truncated or
// edited blobs are rejected on load.
inline nlohmann::json serialize_model(const Predictor& model, const LearnerConfig& config) {
  nlohmann::json payload = model.payload();
  return {{"version", 1},
          {"type", model.type_name()},
          {"config", config_to_json(config)},
          {"seed", model.fit_seed()},
          {"checksum", hash_str(0xb10bULL, payload.dump())},
          {"payload", std::move(payload)}};
}

inline PredictorPtr deserialize_model(const nlohmann::json& blob) {
  if (blob.at("version").get<int>() != 1)
    throw config_error("model blob: unsupported version");
  const LearnerConfig config = config_from_json(blob.at("config"));
  const nlohmann::json& payload = blob.at("payload");
  if (blob.at("checksum").get<std::uint64_t>() != hash_str(0xb10bULL, payload.dump()))
    throw config_error("model blob: checksum mismatch");
  const std::uint64_t seed = blob.at("seed").get<std::uint64_t>();
  const std::string type = blob.at("type").get<std::string>();
  if (type == "mlp")
    return MlpModel::from_payload(std::get<MlpConfig>(config), payload, seed);
  if (type == "tree")
    return TreeModel::from_payload(std::get<TreeConfig>(config), payload, seed);
  if (type == "linear")
    return LinearModel::from_payload(std::get<LinearConfig>(config), payload, seed);
  throw config_error("model blob: unknown type '" + type + "'");
}

}  // namespace varimp
