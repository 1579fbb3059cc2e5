#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "hig/autodiff.hpp"
#include "hig/classifier.hpp"
#include "hig/graph.hpp"

namespace hig {

struct ModelConfig {
  HierarchyConfig hierarchy;
  VocabSizes vocab;
  ApplicabilityMask mask;

  void validate() const;
};

// Owns every trainable parameter: the per-level message weights W^(l) (one
// matrix under SharedAcrossLevels) and the classifier trunk/heads.
class Model {
public:
  Model(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }

  // W^(l), 1-based level; under sharing every level aliases the same matrix.
  Parameter& level_weight(int level);
  int stored_weight_count() const { return static_cast<int>(level_weights_.size()); }

  ClassifierParams& classifier() { return classifier_; }

  std::vector<Parameter*> all_parameters();
  std::vector<Parameter*> weights_for_depth(int depth);

  void zero_grads();

  // Freezes every W^(l) whose level is not in `levels`; classifier heads stay
  // trainable. Under sharing the single weight is trainable iff level 1 is.
  void set_trainable_levels(const std::set<int>& levels);

  // Inference-time knobs; parameters are unaffected.
  void set_confidence_threshold(double threshold);
  void set_neighbor_k(int k);

private:
  ModelConfig config_;
  std::vector<Parameter> level_weights_;
  ClassifierParams classifier_;
};

}  // namespace hig
