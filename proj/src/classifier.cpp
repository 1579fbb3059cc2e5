#include "hig/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "hig/error.hpp"
#include "hig/rng.hpp"

namespace hig {

bool is_single_actor(Category c) {
  return c == Category::Appearance || c == Category::Situation;
}

const char* category_name(Category c) {
  switch (c) {
    case Category::Appearance: return "appearance";
    case Category::Situation: return "situation";
    case Category::Position: return "position";
    case Category::Interaction: return "interaction";
    case Category::Relation: return "relation";
  }
  return "?";
}

Category category_from_name(const std::string& name) {
  for (Category c : kAllCategories)
    if (name == category_name(c)) return c;
  throw SchemaError("unknown interactivity category: " + name);
}

int VocabSizes::size(Category c) const {
  switch (c) {
    case Category::Appearance: return appearances;
    case Category::Situation: return situations;
    case Category::Position: return positions;
    case Category::Interaction: return interactions;
    case Category::Relation: return relations;
  }
  return 0;
}

void VocabSizes::validate() const {
  for (Category c : kAllCategories)
    if (size(c) <= 0)
      throw ConfigError(std::string("vocabulary size for ") + category_name(c) +
                        " must be positive");
}

namespace {
int double_actor_index(Category c) {
  switch (c) {
    case Category::Position: return 0;
    case Category::Interaction: return 1;
    case Category::Relation: return 2;
    default: throw ConfigError(std::string(category_name(c)) + " is not double-actor");
  }
}
int kind_index(SubjectKind k) { return k == SubjectKind::Person ? 0 : 1; }
}  // namespace

ApplicabilityMask::ApplicabilityMask() {
  for (auto& by_subject : allowed_)
    for (auto& by_object : by_subject)
      for (bool& b : by_object) b = false;
  // Position and Relation: Person subject, any object kind.
  set(Category::Position, SubjectKind::Person, SubjectKind::Person, true);
  set(Category::Position, SubjectKind::Person, SubjectKind::Object, true);
  set(Category::Relation, SubjectKind::Person, SubjectKind::Person, true);
  set(Category::Relation, SubjectKind::Person, SubjectKind::Object, true);
  // Interaction: Object subject acting on a Person receiver only.
  set(Category::Interaction, SubjectKind::Object, SubjectKind::Person, true);
}

ApplicabilityMask ApplicabilityMask::all_allowed() {
  ApplicabilityMask mask;
  for (Category c : {Category::Position, Category::Interaction, Category::Relation})
    for (SubjectKind s : {SubjectKind::Person, SubjectKind::Object})
      for (SubjectKind o : {SubjectKind::Person, SubjectKind::Object}) mask.set(c, s, o, true);
  return mask;
}

bool ApplicabilityMask::allows(Category c, SubjectKind subject, SubjectKind object) const {
  return allowed_[double_actor_index(c)][kind_index(subject)][kind_index(object)];
}

void ApplicabilityMask::set(Category c, SubjectKind subject, SubjectKind object, bool allowed) {
  allowed_[double_actor_index(c)][kind_index(subject)][kind_index(object)] = allowed;
}

void ApplicabilityMask::validate() const {
  for (Category c : {Category::Position, Category::Interaction, Category::Relation}) {
    bool any = false;
    for (int s = 0; s < 2 && !any; ++s)
      for (int o = 0; o < 2 && !any; ++o) any = allowed_[double_actor_index(c)][s][o];
    if (!any)
      throw ConfigError(std::string("applicability mask rules out every pair for ") +
                        category_name(c));
  }
}

namespace {
Matrix random_init(int rows, int cols, double fan_in, Rng* rng) {
  Matrix m(rows, cols);
  if (rng) {
    double stddev = std::sqrt(2.0 / fan_in);
    for (int i = 0; i < m.size(); ++i) m[i] = rng->gaussian(0.0, stddev);
  }
  return m;
}
}  // namespace

ClassifierParams ClassifierParams::create(int feature_dim, const VocabSizes& vocab,
                                          Rng* init_rng) {
  vocab.validate();
  if (feature_dim <= 0) throw ConfigError("classifier feature dim must be positive");
  ClassifierParams p;
  p.edge_hidden_w = Parameter("classifier.edge_hidden.w",
                              random_init(feature_dim, 2 * feature_dim, 2 * feature_dim, init_rng));
  p.edge_hidden_b = Parameter("classifier.edge_hidden.b", Matrix(feature_dim, 1));
  p.node_hidden_w = Parameter("classifier.node_hidden.w",
                              random_init(feature_dim, feature_dim, feature_dim, init_rng));
  p.node_hidden_b = Parameter("classifier.node_hidden.b", Matrix(feature_dim, 1));
  for (int i = 0; i < kCategoryCount; ++i) {
    Category c = kAllCategories[static_cast<std::size_t>(i)];
    p.head_w[static_cast<std::size_t>(i)] =
        Parameter(std::string("classifier.head.") + category_name(c) + ".w",
                  random_init(vocab.size(c), feature_dim, feature_dim, init_rng));
    p.head_b[static_cast<std::size_t>(i)] =
        Parameter(std::string("classifier.head.") + category_name(c) + ".b",
                  Matrix(vocab.size(c), 1));
  }
  return p;
}

std::vector<Parameter*> ClassifierParams::all() {
  std::vector<Parameter*> out = {&edge_hidden_w, &edge_hidden_b, &node_hidden_w, &node_hidden_b};
  for (auto& p : head_w) out.push_back(&p);
  for (auto& p : head_b) out.push_back(&p);
  return out;
}

namespace {
Tape::ValueId head_logits(Tape& tape, Tape::ValueId hidden, ClassifierParams& params,
                          Category c) {
  std::size_t i = static_cast<std::size_t>(std::find(kAllCategories.begin(), kAllCategories.end(),
                                                     c) -
                                           kAllCategories.begin());
  return tape.add(tape.matmul(tape.parameter(&params.head_w[i]), hidden),
                  tape.parameter(&params.head_b[i]));
}
}  // namespace

std::array<std::optional<Tape::ValueId>, kCategoryCount> classify_edge(
    Tape& tape, Tape::ValueId message, Tape::ValueId receiver_feature, SubjectKind subject_kind,
    SubjectKind object_kind, ClassifierParams& params, const ApplicabilityMask& mask) {
  std::array<std::optional<Tape::ValueId>, kCategoryCount> out;
  bool any = false;
  for (Category c : {Category::Position, Category::Interaction, Category::Relation})
    any = any || mask.allows(c, subject_kind, object_kind);
  if (!any) return out;

  Tape::ValueId input = tape.concat_rows(message, receiver_feature);
  Tape::ValueId hidden = tape.rectify(
      tape.add(tape.matmul(tape.parameter(&params.edge_hidden_w), input),
               tape.parameter(&params.edge_hidden_b)));
  for (Category c : {Category::Position, Category::Interaction, Category::Relation}) {
    if (!mask.allows(c, subject_kind, object_kind)) continue;
    out[static_cast<std::size_t>(c)] = head_logits(tape, hidden, params, c);
  }
  return out;
}

std::array<std::optional<Tape::ValueId>, kCategoryCount> classify_node(Tape& tape,
                                                                       Tape::ValueId feature,
                                                                       ClassifierParams& params) {
  std::array<std::optional<Tape::ValueId>, kCategoryCount> out;
  Tape::ValueId hidden = tape.rectify(
      tape.add(tape.matmul(tape.parameter(&params.node_hidden_w), feature),
               tape.parameter(&params.node_hidden_b)));
  for (Category c : {Category::Appearance, Category::Situation})
    out[static_cast<std::size_t>(c)] = head_logits(tape, hidden, params, c);
  return out;
}

bool operator==(const Prediction& a, const Prediction& b) {
  return a.subject_track == b.subject_track && a.object_track == b.object_track &&
         a.category == b.category && a.predicate == b.predicate &&
         a.confidence == b.confidence && a.t1 == b.t1 && a.t2 == b.t2 && a.level == b.level;
}

namespace {
double sigmoid_scalar(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

auto order_key(const Prediction& p) {
  return std::make_tuple(-p.confidence, -p.level, p.t1, p.t2, p.subject_track,
                         p.object_track.value_or(-1), static_cast<int>(p.category), p.predicate);
}
}  // namespace

void sort_predictions(std::vector<Prediction>& preds) {
  std::sort(preds.begin(), preds.end(),
            [](const Prediction& a, const Prediction& b) { return order_key(a) < order_key(b); });
}

std::vector<Prediction> classify_all(Tape& tape, const ForwardResult& forward,
                                     ClassifierParams& params, const ApplicabilityMask& mask) {
  std::vector<Prediction> preds;
  for (int level = 1; level <= forward.depth(); ++level) {
    const auto& cells = forward.hierarchy.levels[static_cast<std::size_t>(level - 1)];
    const auto& acts = forward.activations[static_cast<std::size_t>(level - 1)];
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const GraphCell& cell = cells[c];
      const CellActivations& act = acts[c];
      for (std::size_t i = 0; i < cell.nodes.size(); ++i) {
        auto logits = classify_node(tape, act.node_outputs[i], params);
        for (Category cat : {Category::Appearance, Category::Situation}) {
          const Matrix& z = tape.value(*logits[static_cast<std::size_t>(cat)]);
          for (int pred = 0; pred < z.rows(); ++pred)
            preds.push_back({cell.nodes[i].track_id, std::nullopt, cat, pred,
                             sigmoid_scalar(z[pred]), cell.window_begin(), cell.window_end(),
                             level});
        }
      }
      for (std::size_t e = 0; e < cell.edges.size(); ++e) {
        const Edge& edge = cell.edges[e];
        const SubjectNode& subject = cell.nodes[static_cast<std::size_t>(edge.sender)];
        const SubjectNode& object = cell.nodes[static_cast<std::size_t>(edge.receiver)];
        auto logits =
            classify_edge(tape, act.messages[e], act.node_outputs[static_cast<std::size_t>(
                                                     edge.receiver)],
                          subject.kind, object.kind, params, mask);
        for (Category cat : {Category::Position, Category::Interaction, Category::Relation}) {
          const auto& slot = logits[static_cast<std::size_t>(cat)];
          if (!slot) continue;
          const Matrix& z = tape.value(*slot);
          for (int pred = 0; pred < z.rows(); ++pred)
            preds.push_back({subject.track_id, object.track_id, cat, pred,
                             sigmoid_scalar(z[pred]), cell.window_begin(), cell.window_end(),
                             level});
        }
      }
    }
  }
  return preds;
}

std::vector<Prediction> select_predictions(const std::vector<Prediction>& all, double threshold) {
  if (threshold <= 0.0 || threshold > 1.0)
    throw ConfigError("selection threshold must lie in (0, 1]");

  using TripleKey = std::tuple<int, int, int, int>;  // subject, object(-1), category, predicate
  using PairKey = std::tuple<int, int, int>;         // subject, object(-1), category

  std::map<TripleKey, int> best_level;  // highest level with confidence >= threshold
  for (const Prediction& p : all) {
    if (p.confidence < threshold) continue;
    TripleKey key{p.subject_track, p.object_track.value_or(-1), static_cast<int>(p.category),
                  p.predicate};
    auto [it, inserted] = best_level.emplace(key, p.level);
    if (!inserted) it->second = std::max(it->second, p.level);
  }

  std::map<PairKey, bool> pair_has_hit;
  for (const Prediction& p : all) {
    PairKey key{p.subject_track, p.object_track.value_or(-1), static_cast<int>(p.category)};
    bool& hit = pair_has_hit[key];
    TripleKey tkey{p.subject_track, p.object_track.value_or(-1), static_cast<int>(p.category),
                   p.predicate};
    hit = hit || best_level.count(tkey) > 0;
  }

  std::vector<Prediction> out;
  for (const Prediction& p : all) {
    TripleKey tkey{p.subject_track, p.object_track.value_or(-1), static_cast<int>(p.category),
                   p.predicate};
    auto it = best_level.find(tkey);
    if (it != best_level.end()) {
      if (p.level == it->second && p.confidence >= threshold) out.push_back(p);
      continue;
    }
    PairKey pkey{p.subject_track, p.object_track.value_or(-1), static_cast<int>(p.category)};
    if (!pair_has_hit[pkey] && p.level == 1) out.push_back(p);  // per-frame fallback
  }
  sort_predictions(out);
  return out;
}

}  // namespace hig
