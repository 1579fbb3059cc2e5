#include "hig/evaluation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "hig/dataset.hpp"
#include "hig/error.hpp"
#include "hig/graph.hpp"

namespace hig {

using nlohmann::json;

void MatchCriteria::validate() const {
  if (temporal_iou <= 0.0 || temporal_iou > 1.0)
    throw ConfigError("temporal IoU threshold must lie in (0, 1]");
}

double temporal_iou(int a1, int a2, int b1, int b2) {
  if (a2 < a1 || b2 < b1) throw ConfigError("temporal_iou: spans must be well-ordered");
  int inter = std::min(a2, b2) - std::max(a1, b1) + 1;
  if (inter <= 0) return 0.0;
  int uni = std::max(a2, b2) - std::min(a1, b1) + 1;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

bool triplet_matches(const Prediction& p, const GroundTruthTriplet& g,
                     const MatchCriteria& criteria) {
  if (p.category != g.category || p.predicate != g.predicate) return false;
  if (p.object_track.has_value() != g.object_track.has_value()) return false;
  if (criteria.require_identity) {
    if (p.subject_track != g.subject_track) return false;
    if (p.object_track && *p.object_track != *g.object_track) return false;
  }
  return temporal_iou(p.t1, p.t2, g.t1, g.t2) >= criteria.temporal_iou;
}

}  // namespace

RecallResult recall_on_video(const VideoInstance& instance, int k,
                             const MatchCriteria& criteria) {
  criteria.validate();
  RecallResult result;
  result.gt_count = static_cast<int>(instance.gt.size());
  if (instance.gt.empty() || instance.predictions.empty() || k <= 0) return result;

  std::vector<Prediction> ranked = instance.predictions;
  sort_predictions(ranked);
  if (static_cast<int>(ranked.size()) > k) ranked.resize(static_cast<std::size_t>(k));

  std::vector<GroundTruthTriplet> gt = instance.gt;
  std::sort(gt.begin(), gt.end(),
            [](const GroundTruthTriplet& a, const GroundTruthTriplet& b) {
              return a.key() < b.key();
            });
  std::vector<bool> used(gt.size(), false);

  for (const Prediction& p : ranked) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (used[g] || !triplet_matches(p, gt[g], criteria)) continue;
      double iou = temporal_iou(p.t1, p.t2, gt[g].t1, gt[g].t2);
      if (iou > best_iou) {
        best = static_cast<int>(g);
        best_iou = iou;
      } else if (iou == best_iou && best >= 0) {
        auto span_key = [](const GroundTruthTriplet& t) { return std::make_pair(t.t1, t.t2); };
        if (span_key(gt[g]) < span_key(gt[static_cast<std::size_t>(best)]))
          best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      result.matched += 1;
    }
  }
  return result;
}

RecallSummary recall_at_k(const std::vector<VideoInstance>& videos, int k,
                          const MatchCriteria& criteria) {
  RecallSummary summary;
  double sum = 0.0;
  long total_matched = 0, total_gt = 0;
  for (const VideoInstance& video : videos) {
    if (video.gt.empty()) {
      summary.videos_skipped_empty_gt += 1;
      continue;
    }
    RecallResult r = recall_on_video(video, k, criteria);
    sum += r.recall();
    total_matched += r.matched;
    total_gt += r.gt_count;
    summary.videos_counted += 1;
  }
  if (summary.videos_counted > 0)
    summary.value = criteria.macro_average
                        ? sum / summary.videos_counted
                        : static_cast<double>(total_matched) / static_cast<double>(total_gt);
  return summary;
}

namespace {

// Restriction of one video to a (category, predicate) class.
VideoInstance restrict_to_class(const VideoInstance& video, Category category, int predicate) {
  VideoInstance out;
  for (const Prediction& p : video.predictions)
    if (p.category == category && p.predicate == predicate) out.predictions.push_back(p);
  for (const GroundTruthTriplet& g : video.gt)
    if (g.category == category && g.predicate == predicate) out.gt.push_back(g);
  return out;
}

}  // namespace

RecallSummary mean_recall_at_k(const std::vector<VideoInstance>& videos, int k,
                               const MatchCriteria& criteria) {
  RecallSummary summary;
  double sum = 0.0;
  for (const VideoInstance& video : videos) {
    if (video.gt.empty()) {
      summary.videos_skipped_empty_gt += 1;
      continue;
    }
    std::set<std::pair<int, int>> classes;
    for (const GroundTruthTriplet& g : video.gt)
      classes.insert({static_cast<int>(g.category), g.predicate});
    double class_sum = 0.0;
    for (auto [category, predicate] : classes) {
      VideoInstance restricted =
          restrict_to_class(video, static_cast<Category>(category), predicate);
      class_sum += recall_on_video(restricted, k, criteria).recall();
    }
    sum += class_sum / static_cast<double>(classes.size());
    summary.videos_counted += 1;
  }
  if (summary.videos_counted > 0) summary.value = sum / summary.videos_counted;
  return summary;
}

MetricsTable compute_metrics(const std::vector<VideoInstance>& videos,
                             const std::vector<int>& ks, const MatchCriteria& criteria) {
  criteria.validate();
  MetricsTable table;
  table.ks = ks;
  for (Category category : kAllCategories) {
    std::vector<VideoInstance> restricted(videos.size());
    for (std::size_t v = 0; v < videos.size(); ++v) {
      for (const Prediction& p : videos[v].predictions)
        if (p.category == category) restricted[v].predictions.push_back(p);
      for (const GroundTruthTriplet& g : videos[v].gt)
        if (g.category == category) restricted[v].gt.push_back(g);
    }
    for (int k : ks) {
      RecallSummary r = recall_at_k(restricted, k, criteria);
      RecallSummary mr = mean_recall_at_k(restricted, k, criteria);
      table.rows.push_back(
          {category, k, r.value, mr.value, r.videos_counted, r.videos_skipped_empty_gt});
    }
  }
  return table;
}

std::string MetricsTable::to_csv() const {
  std::ostringstream out;
  out << "category,K,R,mR\n";
  char buf[64];
  for (const MetricsRow& row : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", row.recall);
    std::string r = buf;
    std::snprintf(buf, sizeof buf, "%.6f", row.mean_recall);
    out << category_name(row.category) << "," << row.k << "," << r << "," << buf << "\n";
  }
  return out.str();
}

json MetricsTable::to_json() const {
  json arr = json::array();
  for (const MetricsRow& row : rows)
    arr.push_back({{"category", category_name(row.category)},
                   {"K", row.k},
                   {"R", row.recall},
                   {"mR", row.mean_recall},
                   {"videos", row.videos},
                   {"skipped_empty_gt", row.skipped}});
  return json{{"metrics", arr}};
}

const MetricsRow* MetricsTable::find(Category c, int k) const {
  for (const MetricsRow& row : rows)
    if (row.category == c && row.k == k) return &row;
  return nullptr;
}

std::string write_predictions(const std::vector<Prediction>& predictions) {
  json arr = json::array();
  for (const Prediction& p : predictions) {
    json pj = json::object();
    pj["subject"] = p.subject_track;
    if (p.object_track) pj["object"] = *p.object_track;
    pj["category"] = category_name(p.category);
    pj["predicate"] = p.predicate;
    pj["confidence"] = p.confidence;
    pj["t1"] = p.t1;
    pj["t2"] = p.t2;
    pj["level"] = p.level;
    arr.push_back(std::move(pj));
  }
  return arr.dump(2) + "\n";
}

std::vector<Prediction> parse_predictions(const std::string& bytes) {
  json arr;
  try {
    arr = json::parse(bytes);
  } catch (const json::parse_error& err) {
    throw ParseError(std::string("prediction JSON: ") + err.what(), err.byte);
  }
  if (!arr.is_array()) throw SchemaError("prediction file: expected a JSON list");
  std::vector<Prediction> out;
  for (const json& pj : arr) {
    Prediction p;
    p.subject_track = pj.at("subject").get<int>();
    if (pj.contains("object")) p.object_track = pj.at("object").get<int>();
    p.category = category_from_name(pj.at("category").get<std::string>());
    p.predicate = pj.at("predicate").get<int>();
    p.confidence = pj.at("confidence").get<double>();
    p.t1 = pj.at("t1").get<int>();
    p.t2 = pj.at("t2").get<int>();
    p.level = pj.value("level", 1);
    if (p.t2 < p.t1) throw SchemaError("prediction file: span not well-ordered");
    out.push_back(std::move(p));
  }
  return out;
}

MetricsTable evaluate_run(const std::filesystem::path& predictions_dir,
                          const std::filesystem::path& dataset_dir, const std::vector<int>& ks,
                          const MatchCriteria& criteria) {
  Dataset dataset = load_dataset(dataset_dir);
  std::vector<VideoInstance> instances;
  for (const DatasetVideo& video : dataset.videos) {
    std::filesystem::path pred_path = predictions_dir / (video.id + ".predictions.json");
    if (!std::filesystem::exists(pred_path))
      throw IoError("missing predictions file " + pred_path.string());
    VideoInstance instance;
    instance.predictions = parse_predictions(read_file(pred_path));
    instance.gt = extract_ground_truth(video.annotations);
    instances.push_back(std::move(instance));
  }
  return compute_metrics(instances, ks, criteria);
}

std::vector<Prediction> infer_video(Model& model, const std::vector<FrameSubjects>& frames) {
  Tape tape;
  int depth = std::min(model.config().hierarchy.levels, static_cast<int>(frames.size()));
  ForwardResult forward =
      forward_hierarchy(tape, frames, model.weights_for_depth(depth), model.config().hierarchy);
  std::vector<Prediction> all =
      classify_all(tape, forward, model.classifier(), model.config().mask);
  return select_predictions(all, model.config().hierarchy.confidence_threshold);
}

}  // namespace hig
