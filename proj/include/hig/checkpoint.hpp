#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hig/model.hpp"
#include "hig/optimizer.hpp"
#include "hig/rng.hpp"

namespace hig {

// Everything needed for a bit-exact resume: parameter matrices, model config,
// optimizer moments and the training cursor.
struct TrainState {
  int epoch = 0;
  std::string rng_state;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json mask_to_json(const ApplicabilityMask& mask);
ApplicabilityMask mask_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, Model& model, const AdamW& optimizer,
                     const TrainState& state);

struct LoadedCheckpoint {
  Model model;
  AdamW optimizer;
  TrainState state;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hig
