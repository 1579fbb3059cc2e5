#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hig/annotations.hpp"
#include "hig/classifier.hpp"
#include "hig/model.hpp"

namespace hig {

struct MatchCriteria {
  bool require_identity = true;  // subject/object track ids must match
  double temporal_iou = 0.5;     // tau; spans match when IoU >= tau
  bool macro_average = true;     // per-video recall averaged over videos

  void validate() const;
};

// |intersection| / |union| over inclusive frame intervals.
double temporal_iou(int a1, int a2, int b1, int b2);

struct VideoInstance {
  std::vector<Prediction> predictions;
  std::vector<GroundTruthTriplet> gt;
};

struct RecallResult {
  int matched = 0;
  int gt_count = 0;
  double recall() const { return gt_count == 0 ? 0.0 : static_cast<double>(matched) / gt_count; }
};

// Greedy top-K matching on one video: predictions in confidence order, each
// consuming at most one unmatched ground truth (highest IoU first, then the
// earlier span, then canonical order).
RecallResult recall_on_video(const VideoInstance& instance, int k, const MatchCriteria& criteria);

struct RecallSummary {
  double value = 0.0;
  int videos_counted = 0;
  int videos_skipped_empty_gt = 0;
};

RecallSummary recall_at_k(const std::vector<VideoInstance>& videos, int k,
                          const MatchCriteria& criteria);

// Mean over (category, predicate) classes present in each video's ground
// truth of the class-restricted recall, then averaged over videos.
RecallSummary mean_recall_at_k(const std::vector<VideoInstance>& videos, int k,
                               const MatchCriteria& criteria);

struct MetricsRow {
  Category category = Category::Appearance;
  int k = 0;
  double recall = 0.0;
  double mean_recall = 0.0;
  int videos = 0;
  int skipped = 0;
};

struct MetricsTable {
  std::vector<int> ks;
  std::vector<MetricsRow> rows;

  std::string to_csv() const;  // category,K,R,mR
  nlohmann::json to_json() const;
  const MetricsRow* find(Category c, int k) const;
};

// Restricts predictions and ground truth per category, then computes R@K and
// mR@K for each K.
MetricsTable compute_metrics(const std::vector<VideoInstance>& videos,
                             const std::vector<int>& ks, const MatchCriteria& criteria);

// Prediction interchange: a JSON list of prediction records.
std::string write_predictions(const std::vector<Prediction>& predictions);
std::vector<Prediction> parse_predictions(const std::string& bytes);

// Reads predictions/<id>.predictions.json next to the dataset's videos and
// evaluates them against the dataset's ground truth.
MetricsTable evaluate_run(const std::filesystem::path& predictions_dir,
                          const std::filesystem::path& dataset_dir, const std::vector<int>& ks,
                          const MatchCriteria& criteria);

// Inference: full forward pass + classification + cross-level selection.
std::vector<Prediction> infer_video(Model& model, const std::vector<FrameSubjects>& frames);

}  // namespace hig
