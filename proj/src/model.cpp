#include "hig/model.hpp"

#include <cmath>

#include "hig/error.hpp"
#include "hig/rng.hpp"

namespace hig {

void ModelConfig::validate() const {
  hierarchy.validate();
  vocab.validate();
  mask.validate();
  // One classifier head serves every level, so the classified dims must agree.
  for (int l = 1; l <= hierarchy.levels; ++l)
    if (hierarchy.dim_out(l) != hierarchy.dim_out(1))
      throw ConfigError("classifier is shared across levels; dims D_1..D_L must be equal (D_" +
                        std::to_string(l) + " = " + std::to_string(hierarchy.dim_out(l)) +
                        " != " + std::to_string(hierarchy.dim_out(1)) + ")");
}

Model::Model(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(init_seed);
  Rng weight_rng = rng.fork(1);
  Rng head_rng = rng.fork(2);

  int stored = config_.hierarchy.weight_sharing == WeightSharing::SharedAcrossLevels
                   ? 1
                   : config_.hierarchy.levels;
  for (int l = 1; l <= stored; ++l) {
    Matrix w(config_.hierarchy.dim_out(l), config_.hierarchy.dim_in(l));
    double stddev = std::sqrt(2.0 / config_.hierarchy.dim_in(l));
    for (int i = 0; i < w.size(); ++i) w[i] = weight_rng.gaussian(0.0, stddev);
    std::string name = config_.hierarchy.weight_sharing == WeightSharing::SharedAcrossLevels
                           ? "level.shared.w"
                           : "level." + std::to_string(l) + ".w";
    level_weights_.emplace_back(name, std::move(w));
  }

  classifier_ = ClassifierParams::create(config_.hierarchy.dim_out(1), config_.vocab, &head_rng);
}

Parameter& Model::level_weight(int level) {
  if (level < 1 || level > config_.hierarchy.levels)
    throw ConfigError("level " + std::to_string(level) + " outside 1.." +
                      std::to_string(config_.hierarchy.levels));
  if (config_.hierarchy.weight_sharing == WeightSharing::SharedAcrossLevels)
    return level_weights_[0];
  return level_weights_[static_cast<std::size_t>(level) - 1];
}

std::vector<Parameter*> Model::all_parameters() {
  std::vector<Parameter*> out;
  for (Parameter& w : level_weights_) out.push_back(&w);
  for (Parameter* p : classifier_.all()) out.push_back(p);
  return out;
}

std::vector<Parameter*> Model::weights_for_depth(int depth) {
  std::vector<Parameter*> out;
  for (int l = 1; l <= depth; ++l) out.push_back(&level_weight(l));
  return out;
}

void Model::zero_grads() {
  for (Parameter* p : all_parameters()) p->zero_grad();
}

void Model::set_confidence_threshold(double threshold) {
  config_.hierarchy.confidence_threshold = threshold;
  config_.hierarchy.validate();
}

void Model::set_neighbor_k(int k) {
  config_.hierarchy.neighbor_k = k;
  config_.hierarchy.validate();
}

void Model::set_trainable_levels(const std::set<int>& levels) {
  if (config_.hierarchy.weight_sharing == WeightSharing::SharedAcrossLevels) {
    level_weights_[0].frozen = !levels.count(1);
    return;
  }
  for (int l = 1; l <= config_.hierarchy.levels; ++l)
    level_weights_[static_cast<std::size_t>(l) - 1].frozen = !levels.count(l);
}

}  // namespace hig
