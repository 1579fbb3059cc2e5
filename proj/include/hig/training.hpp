#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hig/annotations.hpp"
#include "hig/autodiff.hpp"
#include "hig/classifier.hpp"
#include "hig/dataset.hpp"
#include "hig/model.hpp"
#include "hig/optimizer.hpp"

namespace hig {

// Cumulative unfreezing stages: level 1 first, later stages only add levels.
struct UnfreezeStage {
  int epochs = 1;
  std::set<int> trainable_levels;
};

struct UnfreezeSchedule {
  std::vector<UnfreezeStage> stages;

  // L stages of `epochs_per_stage`, stage s training levels {1..s}.
  static UnfreezeSchedule sequential(int levels, int epochs_per_stage);
  static UnfreezeSchedule single_stage(int levels);

  void validate() const;
  int stage_index(int epoch) const;  // epochs beyond the schedule stay in the last stage
};

std::set<int> apply_unfreezing(const UnfreezeSchedule& schedule, int epoch);

struct TrainConfig {
  int epochs = 100;
  int epochs_per_stage = 0;  // 0: epochs spread evenly over the levels
  double learning_rate = 1e-4;
  int batch_size = 1;        // videos per optimizer step
  FocalParams focal;         // alpha 0.25, gamma 2
  double weight_decay = 0.01;
  std::uint64_t seed = 1;
  int sampling_rate = 1;

  void validate() const;
};

// A dataset video lowered to engine form (after any frame subsampling).
struct PreparedVideo {
  std::string id;
  std::vector<FrameSubjects> frames;
  std::vector<GroundTruthTriplet> gt;
};

PreparedVideo prepare_video(const DatasetVideo& video, int sampling_rate);

// Multi-hot targets for one cell. A predicate is positive iff the cell's
// window is fully contained in the triplet's span.
struct CellTargets {
  // node index -> [Appearance, Situation] target vectors
  std::vector<std::array<std::vector<double>, 2>> nodes;
  // edge index -> [Position, Interaction, Relation]; absent when masked
  std::vector<std::array<std::optional<std::vector<double>>, 3>> edges;
};

CellTargets assign_labels(const std::vector<GroundTruthTriplet>& gt, const GraphCell& cell,
                          const VocabSizes& vocab, const ApplicabilityMask& mask);

struct LevelLoss {
  double value = 0.0;
  long entries = 0;
  std::optional<Tape::ValueId> mean;  // absent when the level has no entries
};

// Mean focal loss over every unmasked (node|edge, category, predicate) entry
// of all cells at one level.
LevelLoss level_loss(Tape& tape, const std::vector<GraphCell>& cells,
                     const std::vector<CellActivations>& activations,
                     const std::vector<GroundTruthTriplet>& gt, ClassifierParams& classifier,
                     const VocabSizes& vocab, const ApplicabilityMask& mask,
                     const FocalParams& focal);

struct VideoLoss {
  double total = 0.0;                   // sum over all levels (reported)
  std::vector<double> per_level;       // indexed by level-1
};

struct EpochMetrics {
  double mean_total = 0.0;
  std::vector<double> mean_per_level;  // averaged over videos reaching that level
  std::set<int> trainable_levels;
};

class Trainer {
public:
  Trainer(Model& model, TrainConfig config);

  const UnfreezeSchedule& schedule() const { return schedule_; }
  AdamW& optimizer() { return optimizer_; }

  // Forward + losses for one video; when `backward` is set, gradients for the
  // trainable levels' means accumulate into the model. The total is reported
  // over every level regardless.
  VideoLoss compute_loss(const PreparedVideo& video, bool backward,
                         const std::set<int>& trainable);

  // One pass over the dataset: per batch, accumulate gradients and step the
  // optimizer (skipped entirely when learning_rate == 0).
  EpochMetrics run_epoch(const std::vector<PreparedVideo>& videos, int epoch);

private:
  Model& model_;
  TrainConfig config_;
  UnfreezeSchedule schedule_;
  AdamW optimizer_;
};

}  // namespace hig
