#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hig/autodiff.hpp"
#include "hig/graph.hpp"

namespace hig {

// The five interactivity families. Appearance and Situation are single-actor;
// Position, Interaction and Relation are double-actor.
enum class Category { Appearance, Situation, Position, Interaction, Relation };

inline constexpr int kCategoryCount = 5;
inline constexpr std::array<Category, kCategoryCount> kAllCategories = {
    Category::Appearance, Category::Situation, Category::Position, Category::Interaction,
    Category::Relation};

bool is_single_actor(Category c);
const char* category_name(Category c);
Category category_from_name(const std::string& name);

struct VocabSizes {
  int appearances = 722;
  int situations = 2902;
  int positions = 130;
  int interactions = 565;
  int relations = 230;

  int size(Category c) const;
  void validate() const;  // throws ConfigError on non-positive sizes
};

// Which ordered (subject kind, object kind) pairs each double-actor category
// applies to. The subject is the message sender S_j, the object the receiver
// S_i. Defaults follow the annotated-attribute table; fully configurable.
class ApplicabilityMask {
public:
  ApplicabilityMask();  // default table

  static ApplicabilityMask all_allowed();

  bool allows(Category c, SubjectKind subject, SubjectKind object) const;
  void set(Category c, SubjectKind subject, SubjectKind object, bool allowed);
  void validate() const;  // every double-actor category needs one true entry

private:
  // [Position, Interaction, Relation] x [subject kind] x [object kind]
  bool allowed_[3][2][2];
};

class Rng;

// Hidden trunk + per-category linear heads. The edge trunk consumes the
// concatenated [message ; receiver feature]; the node trunk the feature alone.
struct ClassifierParams {
  Parameter edge_hidden_w;  // D x 2D
  Parameter edge_hidden_b;  // D x 1
  Parameter node_hidden_w;  // D x D
  Parameter node_hidden_b;  // D x 1
  std::array<Parameter, kCategoryCount> head_w;  // vocab(c) x D
  std::array<Parameter, kCategoryCount> head_b;  // vocab(c) x 1

  static ClassifierParams create(int feature_dim, const VocabSizes& vocab, Rng* init_rng);
  std::vector<Parameter*> all();
  int feature_dim() const { return node_hidden_w.value.rows(); }
};

// Logits per double-actor category for one directed edge; categories the mask
// rules out for (subject_kind, object_kind) are excluded entirely.
std::array<std::optional<Tape::ValueId>, kCategoryCount> classify_edge(
    Tape& tape, Tape::ValueId message, Tape::ValueId receiver_feature, SubjectKind subject_kind,
    SubjectKind object_kind, ClassifierParams& params, const ApplicabilityMask& mask);

// Logits for the two single-actor categories.
std::array<std::optional<Tape::ValueId>, kCategoryCount> classify_node(Tape& tape,
                                                                       Tape::ValueId feature,
                                                                       ClassifierParams& params);

// A scored triplet. For single-actor categories `object_track` is absent.
// The span [t1, t2] is always the emitting cell's window.
struct Prediction {
  int subject_track = 0;
  std::optional<int> object_track;
  Category category = Category::Appearance;
  int predicate = 0;
  double confidence = 0.0;
  int t1 = 1;
  int t2 = 1;
  int level = 1;
};

bool operator==(const Prediction& a, const Prediction& b);

// Deterministic output order: confidence desc, then level desc, t1, t2,
// subject, object, category, predicate.
void sort_predictions(std::vector<Prediction>& preds);

// Runs the classifier over every node and edge of every cell at every level.
std::vector<Prediction> classify_all(Tape& tape, const ForwardResult& forward,
                                     ClassifierParams& params, const ApplicabilityMask& mask);

// Cross-level selection: per (pair, category, predicate) keep the predictions
// at the highest level that clears `threshold`; a (pair, category) with no
// predicate above threshold anywhere falls back to its level-1 per-frame
// predictions unchanged.
std::vector<Prediction> select_predictions(const std::vector<Prediction>& all, double threshold);

}  // namespace hig
