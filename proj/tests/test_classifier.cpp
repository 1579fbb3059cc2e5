#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hig/classifier.hpp"
#include "hig/error.hpp"
#include "hig/rng.hpp"

using namespace hig;

namespace {

// 1-d heads with hand-set weights so logits can be checked by hand. The
// hidden layers are identity-like: weight rows pass the input through relu.
ClassifierParams tiny_params(int dim, const VocabSizes& vocab) {
  ClassifierParams p = ClassifierParams::create(dim, vocab, nullptr);  // zero-initialized
  return p;
}

}  // namespace

TEST_CASE("category metadata") {
  CHECK(is_single_actor(Category::Appearance));
  CHECK(is_single_actor(Category::Situation));
  CHECK(!is_single_actor(Category::Position));
  CHECK(!is_single_actor(Category::Interaction));
  CHECK(!is_single_actor(Category::Relation));
  CHECK(category_from_name("interaction") == Category::Interaction);
  CHECK_THROWS_AS(category_from_name("bogus"), SchemaError);
  VocabSizes defaults;
  CHECK(defaults.appearances == 722);
  CHECK(defaults.situations == 2902);
  CHECK(defaults.positions == 130);
  CHECK(defaults.interactions == 565);
  CHECK(defaults.relations == 230);
}

TEST_CASE("default applicability mask follows the annotated-attribute table") {
  ApplicabilityMask mask;
  // Position/Relation: Person subject only.
  CHECK(mask.allows(Category::Position, SubjectKind::Person, SubjectKind::Person));
  CHECK(mask.allows(Category::Position, SubjectKind::Person, SubjectKind::Object));
  CHECK(!mask.allows(Category::Position, SubjectKind::Object, SubjectKind::Person));
  CHECK(!mask.allows(Category::Position, SubjectKind::Object, SubjectKind::Object));
  CHECK(mask.allows(Category::Relation, SubjectKind::Person, SubjectKind::Person));
  CHECK(mask.allows(Category::Relation, SubjectKind::Person, SubjectKind::Object));
  CHECK(!mask.allows(Category::Relation, SubjectKind::Object, SubjectKind::Object));
  // Interaction: only Object -> Person.
  CHECK(mask.allows(Category::Interaction, SubjectKind::Object, SubjectKind::Person));
  CHECK(!mask.allows(Category::Interaction, SubjectKind::Person, SubjectKind::Person));
  CHECK(!mask.allows(Category::Interaction, SubjectKind::Person, SubjectKind::Object));
  CHECK(!mask.allows(Category::Interaction, SubjectKind::Object, SubjectKind::Object));
  mask.validate();
}

TEST_CASE("mask validation rejects a fully disabled category") {
  ApplicabilityMask mask;
  for (SubjectKind s : {SubjectKind::Person, SubjectKind::Object})
    for (SubjectKind o : {SubjectKind::Person, SubjectKind::Object})
      mask.set(Category::Relation, s, o, false);
  CHECK_THROWS_AS(mask.validate(), ConfigError);
}

TEST_CASE("classify_edge: zero weights give confidence 0.5 on allowed categories") {
  VocabSizes vocab{2, 2, 2, 2, 2};
  ClassifierParams params = tiny_params(3, vocab);
  Tape tape;
  Tape::ValueId msg = tape.constant(Matrix::column({0.5, -0.25, 1.0}));
  Tape::ValueId feat = tape.constant(Matrix::column({1.0, 2.0, -1.0}));
  auto logits = classify_edge(tape, msg, feat, SubjectKind::Person, SubjectKind::Object, params,
                              ApplicabilityMask());
  REQUIRE(logits[static_cast<std::size_t>(Category::Position)].has_value());
  const Matrix& z = tape.value(*logits[static_cast<std::size_t>(Category::Position)]);
  for (int i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);  // sigmoid(0) = 0.5
}

TEST_CASE("classify_edge: Person->Person excludes Interaction under the default mask") {
  VocabSizes vocab{2, 2, 2, 2, 2};
  ClassifierParams params = tiny_params(3, vocab);
  Tape tape;
  Tape::ValueId msg = tape.constant(Matrix::column({1.0, 0.0, 0.0}));
  Tape::ValueId feat = tape.constant(Matrix::column({0.0, 1.0, 0.0}));
  auto logits = classify_edge(tape, msg, feat, SubjectKind::Person, SubjectKind::Person, params,
                              ApplicabilityMask());
  CHECK(!logits[static_cast<std::size_t>(Category::Interaction)].has_value());
  CHECK(logits[static_cast<std::size_t>(Category::Position)].has_value());
  CHECK(logits[static_cast<std::size_t>(Category::Relation)].has_value());
  CHECK(!logits[static_cast<std::size_t>(Category::Appearance)].has_value());
}

TEST_CASE("classify_edge: hand-set 1-d head gives sigmoid(1) = 0.7310586") {
  // input (message, feature) = (1, 1); edge hidden = identity on the 2-concat
  // reduced to 1-d via weights (2, -1); logit = 2*1 - 1*1 = 1.
  VocabSizes vocab{1, 1, 1, 1, 1};
  ClassifierParams params = tiny_params(1, vocab);
  // hidden: 1x2 weight [1, 0], bias 0 -> hidden = relu(message) = 1
  params.edge_hidden_w.value = Matrix{{2.0, -1.0}};
  // position head: 1x1 weight [1], bias 0 -> logit = hidden
  params.head_w[static_cast<std::size_t>(Category::Position)].value = Matrix{{1.0}};

  Tape tape;
  Tape::ValueId msg = tape.constant(Matrix::column({1.0}));
  Tape::ValueId feat = tape.constant(Matrix::column({1.0}));
  auto logits = classify_edge(tape, msg, feat, SubjectKind::Person, SubjectKind::Object, params,
                              ApplicabilityMask());
  double z = tape.value(*logits[static_cast<std::size_t>(Category::Position)])[0];
  CHECK(z == doctest::Approx(1.0));
  double confidence = 1.0 / (1.0 + std::exp(-z));
  CHECK(std::abs(confidence - 0.7310585786300049) < 1e-12);
}

TEST_CASE("classify_node: zero params give 0.5 everywhere; identical features, identical logits") {
  VocabSizes vocab{3, 2, 1, 1, 1};
  ClassifierParams params = tiny_params(2, vocab);
  Tape tape;
  Tape::ValueId f1 = tape.constant(Matrix::column({0.7, -0.3}));
  Tape::ValueId f2 = tape.constant(Matrix::column({0.7, -0.3}));
  auto l1 = classify_node(tape, f1, params);
  auto l2 = classify_node(tape, f2, params);
  const Matrix& a1 = tape.value(*l1[static_cast<std::size_t>(Category::Appearance)]);
  const Matrix& a2 = tape.value(*l2[static_cast<std::size_t>(Category::Appearance)]);
  REQUIRE(a1.rows() == 3);
  for (int i = 0; i < a1.size(); ++i) {
    CHECK(a1[i] == 0.0);
    CHECK(a1[i] == a2[i]);
  }
  CHECK(tape.value(*l1[static_cast<std::size_t>(Category::Situation)]).rows() == 2);
  CHECK(!l1[static_cast<std::size_t>(Category::Position)].has_value());
}

namespace {
Prediction make_pred(int subject, std::optional<int> object, Category cat, int pred,
                     double conf, int t1, int t2, int level) {
  return Prediction{subject, object, cat, pred, conf, t1, t2, level};
}
}  // namespace

TEST_CASE("select_predictions prefers the higher level above threshold") {
  std::vector<Prediction> all = {
      make_pred(1, 2, Category::Position, 0, 0.99, 1, 1, 1),
      make_pred(1, 2, Category::Position, 0, 0.95, 1, 3, 3),
  };
  auto out = select_predictions(all, 0.9);
  REQUIRE(out.size() == 1);
  CHECK(out[0].level == 3);
  CHECK(out[0].confidence == 0.95);
}

TEST_CASE("select_predictions falls back to level-1 when nothing clears the threshold") {
  std::vector<Prediction> all = {
      make_pred(1, std::nullopt, Category::Appearance, 0, 0.4, 1, 1, 1),
      make_pred(1, std::nullopt, Category::Appearance, 1, 0.3, 2, 2, 1),
      make_pred(1, std::nullopt, Category::Appearance, 0, 0.8, 1, 2, 2),
  };
  auto out = select_predictions(all, 0.9);
  REQUIRE(out.size() == 2);  // the two level-1 records, any predicate
  for (const Prediction& p : out) CHECK(p.level == 1);
}

TEST_CASE("select_predictions: a passing predicate suppresses the pair's fallback") {
  std::vector<Prediction> all = {
      make_pred(1, 2, Category::Relation, 0, 0.95, 1, 2, 2),
      make_pred(1, 2, Category::Relation, 1, 0.5, 1, 1, 1),   // same pair, other predicate
      make_pred(1, 3, Category::Relation, 1, 0.4, 1, 1, 1),   // other pair -> fallback
  };
  auto out = select_predictions(all, 0.9);
  REQUIRE(out.size() == 2);
  CHECK(out[0].confidence == 0.95);
  CHECK(out[1].object_track == 3);
}

TEST_CASE("select_predictions on empty input") {
  CHECK(select_predictions({}, 0.9).empty());
}

TEST_CASE("select_predictions emits every above-threshold window of the chosen level") {
  std::vector<Prediction> all = {
      make_pred(1, 2, Category::Position, 0, 0.92, 1, 2, 2),
      make_pred(1, 2, Category::Position, 0, 0.94, 4, 5, 2),
      make_pred(1, 2, Category::Position, 0, 0.99, 2, 2, 1),
  };
  auto out = select_predictions(all, 0.9);
  REQUIRE(out.size() == 2);
  CHECK(out[0].level == 2);
  CHECK(out[1].level == 2);
}

TEST_CASE("select_predictions is idempotent on its own output") {
  Rng rng(404);
  std::vector<Prediction> all;
  for (int i = 0; i < 200; ++i) {
    int level = rng.uniform_int(1, 4);
    int t1 = rng.uniform_int(1, 5);
    std::optional<int> object;
    Category cat = kAllCategories[static_cast<std::size_t>(rng.uniform_int(0, 4))];
    if (!is_single_actor(cat)) object = rng.uniform_int(1, 3);
    all.push_back(make_pred(rng.uniform_int(1, 3), object, cat, rng.uniform_int(0, 2),
                            rng.uniform_int(0, 100) / 100.0, t1, t1 + level - 1, level));
  }
  auto once = select_predictions(all, 0.9);
  std::vector<Prediction> relabeled = once;
  for (Prediction& p : relabeled) p.level = 1;
  auto twice = select_predictions(relabeled, 0.9);
  std::vector<Prediction> expected = relabeled;
  sort_predictions(expected);
  REQUIRE(twice.size() == expected.size());
  for (std::size_t i = 0; i < twice.size(); ++i) CHECK(twice[i] == expected[i]);
}

TEST_CASE("select_predictions: raising the threshold never adds non-fallback output") {
  Rng rng(505);
  std::vector<Prediction> all;
  for (int i = 0; i < 300; ++i) {
    int level = rng.uniform_int(1, 3);
    int t1 = rng.uniform_int(1, 6);
    all.push_back(make_pred(rng.uniform_int(1, 4), std::nullopt, Category::Appearance,
                            rng.uniform_int(0, 3), rng.uniform_int(0, 100) / 100.0, t1,
                            t1 + level - 1, level));
  }
  double previous = -1.0;
  long previous_count = -1;
  for (double threshold : {0.5, 0.7, 0.9, 0.99}) {
    auto out = select_predictions(all, threshold);
    long above = std::count_if(out.begin(), out.end(), [&](const Prediction& p) {
      return p.confidence >= threshold;
    });
    if (previous >= 0.0) CHECK(above <= previous_count);
    previous = threshold;
    previous_count = above;
  }
}

TEST_CASE("prediction spans always equal the emitting cell window") {
  // classify_all attaches the window; verified through a tiny real forward.
  HierarchyConfig cfg;
  cfg.levels = 3;
  cfg.dims = {2, 2, 2, 2};
  cfg.neighbor_k = 2;
  Rng rng(606);
  std::vector<Parameter> weights;
  for (int l = 1; l <= 3; ++l) {
    Matrix w(2, 2);
    for (int i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.0, 1.0);
    weights.emplace_back("w" + std::to_string(l), std::move(w));
  }
  std::vector<Parameter*> ptrs;
  for (auto& w : weights) ptrs.push_back(&w);

  std::vector<FrameSubjects> frames(4);
  for (int t = 0; t < 4; ++t) {
    for (int track = 1; track <= 2; ++track) {
      SubjectNode node;
      node.track_id = track;
      node.kind = track == 1 ? SubjectKind::Person : SubjectKind::Object;
      node.category_id = track - 1;
      node.box = {0.1, 0.1, 0.3, 0.3};
      node.feature = {rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0)};
      frames[static_cast<std::size_t>(t)].push_back(node);
    }
  }
  Tape tape;
  auto fwd = forward_hierarchy(tape, frames, ptrs, cfg);
  VocabSizes vocab{2, 2, 2, 2, 2};

  // masked combinations never appear, for any weights
  for (std::uint64_t head_seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    Rng head_rng(head_seed);
    ClassifierParams params = ClassifierParams::create(2, vocab, &head_rng);
    auto preds = classify_all(tape, fwd, params, ApplicabilityMask());
    CHECK(!preds.empty());
    for (const Prediction& p : preds) {
      CHECK(p.t2 - p.t1 + 1 == p.level);
      CHECK(p.t1 >= 1);
      CHECK(p.t2 <= 4);
      if (is_single_actor(p.category))
        CHECK(!p.object_track.has_value());
      else
        CHECK(p.object_track.has_value());
      if (p.category == Category::Interaction) {
        CHECK(p.subject_track == 2);  // Object subject
        CHECK(p.object_track == 1);   // Person object
      }
      if (p.category == Category::Position || p.category == Category::Relation)
        CHECK(p.subject_track == 1);  // Person subject
    }
  }
}
