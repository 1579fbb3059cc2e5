#include "hig/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hig/error.hpp"

namespace hig {

UnfreezeSchedule UnfreezeSchedule::sequential(int levels, int epochs_per_stage) {
  if (levels < 1) throw ConfigError("schedule needs at least one level");
  if (epochs_per_stage < 1) throw ConfigError("epochs_per_stage must be >= 1");
  UnfreezeSchedule out;
  std::set<int> trainable;
  for (int l = 1; l <= levels; ++l) {
    trainable.insert(l);
    out.stages.push_back({epochs_per_stage, trainable});
  }
  return out;
}

UnfreezeSchedule UnfreezeSchedule::single_stage(int levels) {
  UnfreezeSchedule out;
  std::set<int> all;
  for (int l = 1; l <= levels; ++l) all.insert(l);
  out.stages.push_back({1, all});
  return out;
}

void UnfreezeSchedule::validate() const {
  if (stages.empty()) throw ConfigError("unfreeze schedule has no stages");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (stages[s].epochs < 1) throw ConfigError("unfreeze stage epochs must be >= 1");
    if (stages[s].trainable_levels.empty())
      throw ConfigError("unfreeze stage has no trainable levels");
    if (s > 0)
      for (int l : stages[s - 1].trainable_levels)
        if (!stages[s].trainable_levels.count(l))
          throw ConfigError("unfreezing must be monotone: level " + std::to_string(l) +
                            " re-freezes at stage " + std::to_string(s + 1));
  }
}

int UnfreezeSchedule::stage_index(int epoch) const {
  int cursor = 0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    cursor += stages[s].epochs;
    if (epoch < cursor) return static_cast<int>(s);
  }
  return static_cast<int>(stages.size()) - 1;
}

std::set<int> apply_unfreezing(const UnfreezeSchedule& schedule, int epoch) {
  schedule.validate();
  return schedule.stages[static_cast<std::size_t>(schedule.stage_index(epoch))].trainable_levels;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (epochs_per_stage < 0) throw ConfigError("train: epochs_per_stage must be >= 0");
  if (learning_rate < 0.0) throw ConfigError("train: learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (focal.alpha <= 0.0 || focal.alpha > 1.0) throw ConfigError("train: alpha must be in (0,1]");
  if (focal.gamma < 0.0) throw ConfigError("train: gamma must be >= 0");
  if (sampling_rate < 1) throw ConfigError("train: sampling_rate must be >= 1");
}

PreparedVideo prepare_video(const DatasetVideo& video, int sampling_rate) {
  PreparedVideo out;
  out.id = video.id;
  AnnotationFile annotations =
      sampling_rate > 1 ? subsample_frames(video.annotations, sampling_rate) : video.annotations;
  FeatureTable features =
      sampling_rate > 1 ? subsample_features(video.features, sampling_rate) : video.features;
  out.frames = assemble_frames(annotations, features);
  out.gt = extract_ground_truth(annotations);
  return out;
}

namespace {
int single_actor_slot(Category c) { return c == Category::Appearance ? 0 : 1; }
int double_actor_slot(Category c) {
  switch (c) {
    case Category::Position: return 0;
    case Category::Interaction: return 1;
    default: return 2;
  }
}
const std::array<Category, 2> kSingleActor = {Category::Appearance, Category::Situation};
const std::array<Category, 3> kDoubleActor = {Category::Position, Category::Interaction,
                                              Category::Relation};
}  // namespace

CellTargets assign_labels(const std::vector<GroundTruthTriplet>& gt, const GraphCell& cell,
                          const VocabSizes& vocab, const ApplicabilityMask& mask) {
  CellTargets targets;
  targets.nodes.resize(cell.nodes.size());
  for (std::size_t i = 0; i < cell.nodes.size(); ++i)
    for (Category c : kSingleActor)
      targets.nodes[i][static_cast<std::size_t>(single_actor_slot(c))]
          .assign(static_cast<std::size_t>(vocab.size(c)), 0.0);

  targets.edges.resize(cell.edges.size());
  for (std::size_t e = 0; e < cell.edges.size(); ++e) {
    const SubjectNode& subject = cell.nodes[static_cast<std::size_t>(cell.edges[e].sender)];
    const SubjectNode& object = cell.nodes[static_cast<std::size_t>(cell.edges[e].receiver)];
    for (Category c : kDoubleActor)
      if (mask.allows(c, subject.kind, object.kind))
        targets.edges[e][static_cast<std::size_t>(double_actor_slot(c))].emplace(
            static_cast<std::size_t>(vocab.size(c)), 0.0);
  }

  // lookups: track -> node index, (sender track, receiver track) -> edge index
  std::map<int, std::size_t> node_of_track;
  for (std::size_t i = 0; i < cell.nodes.size(); ++i)
    node_of_track[cell.nodes[i].track_id] = i;
  std::map<std::pair<int, int>, std::size_t> edge_of_pair;
  for (std::size_t e = 0; e < cell.edges.size(); ++e)
    edge_of_pair[{cell.nodes[static_cast<std::size_t>(cell.edges[e].sender)].track_id,
                  cell.nodes[static_cast<std::size_t>(cell.edges[e].receiver)].track_id}] = e;

  for (const GroundTruthTriplet& triplet : gt) {
    if (triplet.t1 > cell.window_begin() || triplet.t2 < cell.window_end())
      continue;  // window not fully contained in the span
    if (!triplet.object_track) {
      auto it = node_of_track.find(triplet.subject_track);
      if (it == node_of_track.end()) continue;
      auto& vec = targets.nodes[it->second][static_cast<std::size_t>(
          single_actor_slot(triplet.category))];
      if (triplet.predicate >= 0 && triplet.predicate < static_cast<int>(vec.size()))
        vec[static_cast<std::size_t>(triplet.predicate)] = 1.0;
    } else {
      auto it = edge_of_pair.find({triplet.subject_track, *triplet.object_track});
      if (it == edge_of_pair.end()) continue;
      auto& slot =
          targets.edges[it->second][static_cast<std::size_t>(double_actor_slot(triplet.category))];
      if (!slot) continue;  // masked for this kind pair
      if (triplet.predicate >= 0 && triplet.predicate < static_cast<int>(slot->size()))
        (*slot)[static_cast<std::size_t>(triplet.predicate)] = 1.0;
    }
  }
  return targets;
}

LevelLoss level_loss(Tape& tape, const std::vector<GraphCell>& cells,
                     const std::vector<CellActivations>& activations,
                     const std::vector<GroundTruthTriplet>& gt, ClassifierParams& classifier,
                     const VocabSizes& vocab, const ApplicabilityMask& mask,
                     const FocalParams& focal) {
  std::vector<Tape::ValueId> sums;
  long entries = 0;

  for (std::size_t c = 0; c < cells.size(); ++c) {
    const GraphCell& cell = cells[c];
    const CellActivations& act = activations[c];
    CellTargets targets = assign_labels(gt, cell, vocab, mask);

    for (std::size_t i = 0; i < cell.nodes.size(); ++i) {
      auto logits = classify_node(tape, act.node_outputs[i], classifier);
      for (Category cat : kSingleActor) {
        auto& target = targets.nodes[i][static_cast<std::size_t>(single_actor_slot(cat))];
        entries += static_cast<long>(target.size());
        sums.push_back(tape.focal_loss_sum(*logits[static_cast<std::size_t>(cat)],
                                           std::move(target), focal));
      }
    }
    for (std::size_t e = 0; e < cell.edges.size(); ++e) {
      const Edge& edge = cell.edges[e];
      const SubjectNode& subject = cell.nodes[static_cast<std::size_t>(edge.sender)];
      const SubjectNode& object = cell.nodes[static_cast<std::size_t>(edge.receiver)];
      auto logits = classify_edge(tape, act.messages[e],
                                  act.node_outputs[static_cast<std::size_t>(edge.receiver)],
                                  subject.kind, object.kind, classifier, mask);
      for (Category cat : kDoubleActor) {
        auto& slot = targets.edges[e][static_cast<std::size_t>(double_actor_slot(cat))];
        if (!slot) continue;
        entries += static_cast<long>(slot->size());
        sums.push_back(tape.focal_loss_sum(*logits[static_cast<std::size_t>(cat)],
                                           std::move(*slot), focal));
      }
    }
  }

  LevelLoss out;
  out.entries = entries;
  if (entries == 0) return out;
  out.mean = tape.scale(tape.sum(sums), 1.0 / static_cast<double>(entries));
  out.value = tape.value(*out.mean)[0];
  return out;
}

Trainer::Trainer(Model& model, TrainConfig config)
    : model_(model), config_(std::move(config)) {
  config_.validate();
  int levels = model_.config().hierarchy.levels;
  int per_stage = config_.epochs_per_stage;
  if (per_stage == 0) per_stage = std::max(1, config_.epochs / std::max(1, levels));
  schedule_ = UnfreezeSchedule::sequential(levels, per_stage);
  AdamWConfig ocfg;
  // lr 0 means "report losses, never step"; keep the optimizer constructible.
  ocfg.learning_rate = config_.learning_rate > 0.0 ? config_.learning_rate : 1.0;
  ocfg.weight_decay = config_.weight_decay;
  optimizer_ = AdamW(ocfg);
}

VideoLoss Trainer::compute_loss(const PreparedVideo& video, bool backward,
                                const std::set<int>& trainable) {
  Tape tape;
  ForwardResult forward;
  try {
    forward = forward_hierarchy(tape, video.frames,
                                model_.weights_for_depth(
                                    std::min(model_.config().hierarchy.levels,
                                             static_cast<int>(video.frames.size()))),
                                model_.config().hierarchy);
  } catch (const NumericError& err) {
    throw NumericError("video " + video.id + ": " + err.what());
  }

  VideoLoss out;
  std::vector<Tape::ValueId> objective_terms;
  for (int level = 1; level <= forward.depth(); ++level) {
    LevelLoss ll = level_loss(tape, forward.hierarchy.levels[static_cast<std::size_t>(level - 1)],
                              forward.activations[static_cast<std::size_t>(level - 1)], video.gt,
                              model_.classifier(), model_.config().vocab, model_.config().mask,
                              config_.focal);
    if (!std::isfinite(ll.value))
      throw NumericError("video " + video.id + " level " + std::to_string(level) +
                         ": non-finite loss");
    out.per_level.push_back(ll.value);
    out.total += ll.value;
    if (ll.mean && trainable.count(level)) objective_terms.push_back(*ll.mean);
  }
  if (backward && !objective_terms.empty()) tape.backward(tape.sum(objective_terms));
  return out;
}

EpochMetrics Trainer::run_epoch(const std::vector<PreparedVideo>& videos, int epoch) {
  std::set<int> trainable = apply_unfreezing(schedule_, epoch);
  model_.set_trainable_levels(trainable);
  std::vector<Parameter*> params = model_.all_parameters();

  EpochMetrics metrics;
  metrics.trainable_levels = trainable;
  std::vector<double> level_sums;
  std::vector<int> level_counts;

  bool stepping = config_.learning_rate > 0.0;
  std::size_t batch_fill = 0;
  model_.zero_grads();
  for (std::size_t v = 0; v < videos.size(); ++v) {
    VideoLoss loss = compute_loss(videos[v], stepping, trainable);
    metrics.mean_total += loss.total;
    if (loss.per_level.size() > level_sums.size()) {
      level_sums.resize(loss.per_level.size(), 0.0);
      level_counts.resize(loss.per_level.size(), 0);
    }
    for (std::size_t l = 0; l < loss.per_level.size(); ++l) {
      level_sums[l] += loss.per_level[l];
      level_counts[l] += 1;
    }
    if (!stepping) continue;
    if (++batch_fill == static_cast<std::size_t>(config_.batch_size) || v + 1 == videos.size()) {
      optimizer_.step(params);
      model_.zero_grads();
      batch_fill = 0;
    }
  }
  if (!videos.empty()) metrics.mean_total /= static_cast<double>(videos.size());
  for (std::size_t l = 0; l < level_sums.size(); ++l)
    metrics.mean_per_level.push_back(level_sums[l] / std::max(1, level_counts[l]));
  return metrics;
}

}  // namespace hig
