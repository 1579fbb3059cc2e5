#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "hig/dataset.hpp"
#include "hig/error.hpp"
#include "hig/evaluation.hpp"
#include "hig/rng.hpp"
#include "hig/synthgen.hpp"

using namespace hig;
namespace fs = std::filesystem;

namespace {

GroundTruthTriplet gt(int subject, std::optional<int> object, Category cat, int pred, int t1,
                      int t2) {
  GroundTruthTriplet g;
  g.subject_track = subject;
  g.object_track = object;
  g.category = cat;
  g.predicate = pred;
  g.t1 = t1;
  g.t2 = t2;
  return g;
}

Prediction pred(int subject, std::optional<int> object, Category cat, int predicate,
                double conf, int t1, int t2, int level = 1) {
  return Prediction{subject, object, cat, predicate, conf, t1, t2, level};
}

// Brute-force matcher: plain nested loops over plain vectors, no shared
// ranking/matching code with the implementation. Ranks by the documented
// deterministic order, then scans ground truths exhaustively per prediction.
double oracle_recall(std::vector<Prediction> preds, std::vector<GroundTruthTriplet> gts, int k,
                     double tau) {
  if (gts.empty()) return 0.0;
  std::stable_sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.level != b.level) return a.level > b.level;
    if (a.t1 != b.t1) return a.t1 < b.t1;
    if (a.t2 != b.t2) return a.t2 < b.t2;
    if (a.subject_track != b.subject_track) return a.subject_track < b.subject_track;
    if (a.object_track.value_or(-1) != b.object_track.value_or(-1))
      return a.object_track.value_or(-1) < b.object_track.value_or(-1);
    if (a.category != b.category) return static_cast<int>(a.category) < static_cast<int>(b.category);
    return a.predicate < b.predicate;
  });
  std::sort(gts.begin(), gts.end(), [](const GroundTruthTriplet& a, const GroundTruthTriplet& b) {
    return a.key() < b.key();
  });
  std::vector<bool> used(gts.size(), false);
  int matched = 0;
  int considered = 0;
  for (const Prediction& p : preds) {
    if (considered++ >= k) break;
    double best_iou = -1.0;
    int best = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const GroundTruthTriplet& t = gts[g];
      if (t.category != p.category || t.predicate != p.predicate) continue;
      if (t.object_track.has_value() != p.object_track.has_value()) continue;
      if (t.subject_track != p.subject_track) continue;
      if (t.object_track && *t.object_track != *p.object_track) continue;
      int inter = std::min(p.t2, t.t2) - std::max(p.t1, t.t1) + 1;
      double iou = inter <= 0 ? 0.0
                              : static_cast<double>(inter) /
                                    (std::max(p.t2, t.t2) - std::min(p.t1, t.t1) + 1);
      if (iou < tau) continue;
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      } else if (iou == best_iou && best >= 0) {
        if (std::make_pair(t.t1, t.t2) < std::make_pair(gts[static_cast<std::size_t>(best)].t1,
                                                        gts[static_cast<std::size_t>(best)].t2))
          best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      matched += 1;
    }
  }
  return static_cast<double>(matched) / static_cast<double>(gts.size());
}

double oracle_mean_recall(const std::vector<Prediction>& preds,
                          const std::vector<GroundTruthTriplet>& gts, int k, double tau) {
  if (gts.empty()) return 0.0;
  std::set<std::pair<int, int>> classes;
  for (const GroundTruthTriplet& g : gts) classes.insert({static_cast<int>(g.category), g.predicate});
  double sum = 0.0;
  for (auto [cat, predicate] : classes) {
    std::vector<Prediction> ps;
    std::vector<GroundTruthTriplet> gs;
    for (const Prediction& p : preds)
      if (static_cast<int>(p.category) == cat && p.predicate == predicate) ps.push_back(p);
    for (const GroundTruthTriplet& g : gts)
      if (static_cast<int>(g.category) == cat && g.predicate == predicate) gs.push_back(g);
    sum += oracle_recall(ps, gs, k, tau);
  }
  return sum / static_cast<double>(classes.size());
}

}  // namespace

TEST_CASE("temporal IoU basics") {
  CHECK(temporal_iou(1, 4, 1, 4) == 1.0);
  CHECK(temporal_iou(1, 2, 3, 4) == 0.0);
  // [1,4] vs [3,6]: overlap {3,4} = 2 frames, union [1,6] = 6 frames
  CHECK(temporal_iou(1, 4, 3, 6) == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
  CHECK_THROWS_AS(temporal_iou(4, 1, 1, 4), ConfigError);
}

TEST_CASE("recall: perfect predictions and empty predictions") {
  MatchCriteria criteria;
  std::vector<GroundTruthTriplet> gts = {
      gt(1, std::nullopt, Category::Appearance, 0, 1, 4),
      gt(1, 2, Category::Position, 1, 2, 3),
      gt(2, 1, Category::Interaction, 2, 1, 1),
  };
  VideoInstance perfect;
  perfect.gt = gts;
  for (const GroundTruthTriplet& g : gts)
    perfect.predictions.push_back(pred(g.subject_track, g.object_track, g.category, g.predicate,
                                       1.0, g.t1, g.t2));
  CHECK(recall_on_video(perfect, 20, criteria).recall() == 1.0);

  VideoInstance empty;
  empty.gt = gts;
  CHECK(recall_on_video(empty, 20, criteria).recall() == 0.0);
}

TEST_CASE("recall: 3 gt, top-2 matching 2 of them, K=2 gives 2/3") {
  MatchCriteria criteria;
  VideoInstance instance;
  instance.gt = {
      gt(1, std::nullopt, Category::Appearance, 0, 1, 2),
      gt(1, std::nullopt, Category::Appearance, 1, 3, 4),
      gt(1, std::nullopt, Category::Appearance, 2, 5, 6),
  };
  instance.predictions = {
      pred(1, std::nullopt, Category::Appearance, 0, 0.9, 1, 2),
      pred(1, std::nullopt, Category::Appearance, 1, 0.8, 3, 4),
      pred(1, std::nullopt, Category::Appearance, 2, 0.7, 5, 6),  // outside top-2
  };
  RecallResult r = recall_on_video(instance, 2, criteria);
  CHECK(r.matched == 2);
  CHECK(r.recall() == doctest::Approx(2.0 / 3.0));
  CHECK(r.recall() ==
        doctest::Approx(oracle_recall(instance.predictions, instance.gt, 2, 0.5)));
}

TEST_CASE("videos with empty ground truth are excluded from the average") {
  MatchCriteria criteria;
  VideoInstance with_gt;
  with_gt.gt = {gt(1, std::nullopt, Category::Appearance, 0, 1, 2)};
  with_gt.predictions = {pred(1, std::nullopt, Category::Appearance, 0, 0.9, 1, 2)};
  VideoInstance empty_gt;
  empty_gt.predictions = {pred(9, std::nullopt, Category::Appearance, 0, 0.9, 1, 1)};
  RecallSummary summary = recall_at_k({with_gt, empty_gt}, 10, criteria);
  CHECK(summary.value == 1.0);
  CHECK(summary.videos_counted == 1);
  CHECK(summary.videos_skipped_empty_gt == 1);
}

TEST_CASE("mean recall: single class equals recall; two classes average") {
  MatchCriteria criteria;
  VideoInstance single;
  single.gt = {gt(1, std::nullopt, Category::Appearance, 0, 1, 2),
               gt(2, std::nullopt, Category::Appearance, 0, 3, 4)};
  single.predictions = {pred(1, std::nullopt, Category::Appearance, 0, 0.9, 1, 2)};
  CHECK(mean_recall_at_k({single}, 10, criteria).value ==
        recall_at_k({single}, 10, criteria).value);

  VideoInstance two;
  two.gt = {gt(1, std::nullopt, Category::Appearance, 0, 1, 2),
            gt(1, std::nullopt, Category::Appearance, 1, 3, 4)};
  two.predictions = {pred(1, std::nullopt, Category::Appearance, 0, 0.9, 1, 2)};
  CHECK(mean_recall_at_k({two}, 10, criteria).value == doctest::Approx(0.5));
}

TEST_CASE("matcher is bijective: no double-matching in either direction") {
  MatchCriteria criteria;
  VideoInstance instance;
  instance.gt = {gt(1, std::nullopt, Category::Appearance, 0, 1, 4),
                 gt(1, std::nullopt, Category::Appearance, 0, 1, 3)};
  // three predictions could all hit the first gt; only two matches possible
  instance.predictions = {
      pred(1, std::nullopt, Category::Appearance, 0, 0.9, 1, 4),
      pred(1, std::nullopt, Category::Appearance, 0, 0.8, 1, 4),
      pred(1, std::nullopt, Category::Appearance, 0, 0.7, 1, 4),
  };
  RecallResult r = recall_on_video(instance, 10, criteria);
  CHECK(r.matched == 2);
}

TEST_CASE("R@K and mR@K equal the brute-force oracle on random instances") {
  Rng rng(97531);
  MatchCriteria criteria;
  for (int trial = 0; trial < 300; ++trial) {
    VideoInstance instance;
    int gt_count = rng.uniform_int(0, 10);
    int pred_count = rng.uniform_int(0, 30);
    for (int g = 0; g < gt_count; ++g) {
      int t1 = rng.uniform_int(1, 8);
      Category cat = kAllCategories[static_cast<std::size_t>(rng.uniform_int(0, 4))];
      std::optional<int> object;
      if (!is_single_actor(cat)) object = rng.uniform_int(1, 3);
      instance.gt.push_back(gt(rng.uniform_int(1, 3), object, cat, rng.uniform_int(0, 2), t1,
                               t1 + rng.uniform_int(0, 4)));
    }
    for (int p = 0; p < pred_count; ++p) {
      int t1 = rng.uniform_int(1, 8);
      Category cat = kAllCategories[static_cast<std::size_t>(rng.uniform_int(0, 4))];
      std::optional<int> object;
      if (!is_single_actor(cat)) object = rng.uniform_int(1, 3);
      // coarse confidences force plenty of ties
      double conf = rng.uniform_int(1, 5) / 5.0;
      instance.predictions.push_back(pred(rng.uniform_int(1, 3), object, cat,
                                          rng.uniform_int(0, 2), conf, t1,
                                          t1 + rng.uniform_int(0, 4),
                                          rng.uniform_int(1, 3)));
    }
    for (int k : {1, 3, 10, 50}) {
      if (instance.gt.empty()) continue;
      double r = recall_on_video(instance, k, criteria).recall();
      CHECK(r == oracle_recall(instance.predictions, instance.gt, k, criteria.temporal_iou));
      double mr = mean_recall_at_k({instance}, k, criteria).value;
      CHECK(mr ==
            oracle_mean_recall(instance.predictions, instance.gt, k, criteria.temporal_iou));
    }
  }
}

TEST_CASE("R@K is non-decreasing in K and invariant to confidence scaling") {
  Rng rng(2727);
  MatchCriteria criteria;
  VideoInstance instance;
  for (int g = 0; g < 8; ++g) {
    int t1 = rng.uniform_int(1, 6);
    instance.gt.push_back(
        gt(rng.uniform_int(1, 2), std::nullopt, Category::Situation, rng.uniform_int(0, 2), t1,
           t1 + rng.uniform_int(0, 3)));
  }
  for (int p = 0; p < 25; ++p) {
    int t1 = rng.uniform_int(1, 6);
    instance.predictions.push_back(pred(rng.uniform_int(1, 2), std::nullopt,
                                        Category::Situation, rng.uniform_int(0, 2),
                                        rng.uniform(0.1, 0.9), t1, t1 + rng.uniform_int(0, 3)));
  }
  double previous = 0.0;
  for (int k = 1; k <= 30; ++k) {
    double r = recall_on_video(instance, k, criteria).recall();
    CHECK(r >= previous);
    previous = r;
  }
  VideoInstance scaled = instance;
  for (Prediction& p : scaled.predictions) p.confidence *= 0.1;
  for (int k : {1, 5, 20})
    CHECK(recall_on_video(scaled, k, criteria).recall() ==
          recall_on_video(instance, k, criteria).recall());
}

TEST_CASE("equal-confidence shuffles do not change metrics (deterministic tiebreak)") {
  Rng rng(31415);
  VideoInstance instance;
  for (int g = 0; g < 6; ++g) {
    int t1 = rng.uniform_int(1, 6);
    instance.gt.push_back(gt(rng.uniform_int(1, 2), std::nullopt, Category::Appearance,
                             rng.uniform_int(0, 2), t1, t1 + rng.uniform_int(0, 2)));
  }
  for (int p = 0; p < 20; ++p) {
    int t1 = rng.uniform_int(1, 6);
    instance.predictions.push_back(pred(rng.uniform_int(1, 2), std::nullopt,
                                        Category::Appearance, rng.uniform_int(0, 2), 0.5, t1,
                                        t1 + rng.uniform_int(0, 2)));
  }
  MatchCriteria criteria;
  double base = recall_on_video(instance, 5, criteria).recall();
  for (int shuffle = 0; shuffle < 10; ++shuffle) {
    VideoInstance shuffled = instance;
    for (std::size_t i = shuffled.predictions.size(); i > 1; --i)
      std::swap(shuffled.predictions[i - 1],
                shuffled.predictions[static_cast<std::size_t>(rng.uniform_int(
                    0, static_cast<int>(i) - 1))]);
    CHECK(recall_on_video(shuffled, 5, criteria).recall() == base);
  }
}

TEST_CASE("evaluate_run on a hand-built 2-video fixture matches hand-computed values") {
  fs::path dir = fs::temp_directory_path() / "hig_test_eval";
  fs::remove_all(dir);

  ScenarioConfig cfg;
  cfg.videos = 2;
  cfg.frames = 6;
  cfg.min_subjects = 2;
  cfg.max_subjects = 2;
  cfg.vocab = {3, 3, 3, 3, 3};
  cfg.object_category_count = 2;
  cfg.feature_dim = 4;
  cfg.noise_sigma = 0.0;
  cfg.density = 1.0;
  cfg.max_span = 4;
  cfg.seed = 77;
  cfg.train_fraction = 1.0;
  generate_dataset(cfg, dir);

  // predictions = the ground truth verbatim at confidence 1 -> all recalls 1
  Dataset dataset = load_dataset(dir);
  fs::path pred_dir = dir / "preds";
  fs::create_directories(pred_dir);
  for (const DatasetVideo& video : dataset.videos) {
    std::vector<Prediction> preds;
    for (const GroundTruthTriplet& g : extract_ground_truth(video.annotations))
      preds.push_back(pred(g.subject_track, g.object_track, g.category, g.predicate, 1.0, g.t1,
                           g.t2));
    write_file(pred_dir / (video.id + ".predictions.json"), write_predictions(preds));
  }

  MatchCriteria criteria;
  MetricsTable table = evaluate_run(pred_dir, dir, {20, 50, 100}, criteria);
  for (const MetricsRow& row : table.rows) {
    if (row.videos == 0) continue;  // category absent from this dataset
    CHECK(row.recall == 1.0);
    CHECK(row.mean_recall == 1.0);
  }
  // csv layout: header + 15 rows (5 categories x 3 Ks)
  std::string csv = table.to_csv();
  CHECK(csv.rfind("category,K,R,mR\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 16);

  // missing prediction file -> IoError naming the file
  fs::remove(pred_dir / (dataset.videos[0].id + ".predictions.json"));
  CHECK_THROWS_AS(evaluate_run(pred_dir, dir, {20}, criteria), IoError);
  fs::remove_all(dir);
}

TEST_CASE("prediction interchange round-trips") {
  std::vector<Prediction> preds = {
      pred(1, 2, Category::Relation, 3, 0.75, 2, 5, 4),
      pred(4, std::nullopt, Category::Situation, 0, 0.5, 1, 1, 1),
  };
  auto reparsed = parse_predictions(write_predictions(preds));
  REQUIRE(reparsed.size() == 2);
  CHECK(reparsed[0] == preds[0]);
  CHECK(reparsed[1] == preds[1]);
}
