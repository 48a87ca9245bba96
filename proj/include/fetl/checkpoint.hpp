#pragma once

#include "fetl/embednet.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace fetl {

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::ordered_json config_to_json(const EmbedNetConfig& config);
/// Missing keys keep their defaults; unknown keys raise ConfigError naming the key.
EmbedNetConfig config_from_json(const nlohmann::json& j, const EmbedNetConfig& defaults = {});

nlohmann::ordered_json mlp_to_json(const Mlp<double>& mlp);
Mlp<double> mlp_from_json(const nlohmann::json& j);

nlohmann::ordered_json model_to_json(const FeatureEmbeddingModel& model);
FeatureEmbeddingModel model_from_json(const nlohmann::json& j);

void save_checkpoint(const FeatureEmbeddingModel& model, const std::filesystem::path& path);
FeatureEmbeddingModel load_checkpoint(const std::filesystem::path& path);

}  // namespace fetl
