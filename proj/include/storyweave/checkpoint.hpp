#pragma once

#include <filesystem>

#include <json.hpp>

#include "storyweave/classifier.hpp"

namespace storyweave {

/// Binary checkpoint: magic, a JSON header (encoder config, output mode,
/// label order, vocabulary, tensor directory) and raw float64 tensor data.
void save_checkpoint(const RelationModel& model, const std::filesystem::path& path);

/// Throws std::runtime_error on I/O or format problems and
/// std::invalid_argument when a tensor shape disagrees with the config.
RelationModel load_checkpoint(const std::filesystem::path& path);

nlohmann::json encoder_config_to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j, EncoderConfig base = {});

nlohmann::json train_config_to_json(const TrainConfig& config);
/// Missing keys keep the values of `base`; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

}  // namespace storyweave
