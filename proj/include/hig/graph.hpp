#pragma once

#include <string>
#include <vector>

#include "hig/autodiff.hpp"
#include "hig/matrix.hpp"

namespace hig {

enum class SubjectKind { Person, Object };

const char* kind_name(SubjectKind k);
SubjectKind kind_from_name(const std::string& name);

struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
  bool well_ordered() const { return x1 < x2 && y1 < y2; }
  bool normalized() const { return x1 >= 0.0 && y1 >= 0.0 && x2 <= 1.0 && y2 <= 1.0; }
};

// One tracked subject inside one graph cell. `feature` holds the cell's
// input-side features: raw D_0 features at level 1, fused previous-level
// outputs above that.
struct SubjectNode {
  int track_id = 0;
  SubjectKind kind = SubjectKind::Object;
  int category_id = 0;
  Box box;
  std::vector<double> feature;
};

// Directed edge; the message travels sender -> receiver. Indices into the
// owning cell's node list.
struct Edge {
  int sender = 0;
  int receiver = 0;
};

// Graph G_{l,t}: covers the frame window [start, start+level-1].
struct GraphCell {
  int level = 1;
  int start = 1;
  std::vector<SubjectNode> nodes;  // sorted by track_id
  std::vector<Edge> edges;         // no self edges; endpoints valid

  int window_begin() const { return start; }
  int window_end() const { return start + level - 1; }
  int index_of_track(int track_id) const;  // -1 when absent
};

enum class Nonlinearity { None, Rectify };
enum class WeightSharing { PerLevel, SharedAcrossLevels };

struct HierarchyConfig {
  int levels = 1;              // desired depth L; effective depth is min(L, T)
  std::vector<int> dims;       // D_0..D_L, levels+1 entries, all positive
  int neighbor_k = 12;
  WeightSharing weight_sharing = WeightSharing::PerLevel;
  double confidence_threshold = 0.9;
  Nonlinearity nonlinearity = Nonlinearity::Rectify;

  void validate() const;                                // throws ConfigError
  int dim_in(int level) const { return dims[static_cast<std::size_t>(level) - 1]; }
  int dim_out(int level) const { return dims[static_cast<std::size_t>(level)]; }
};

// The full pyramid: levels[l-1] holds the T-l+1 cells of level l.
struct Hierarchy {
  int frame_count = 0;
  std::vector<std::vector<GraphCell>> levels;
  int depth() const { return static_cast<int>(levels.size()); }
};

using FrameSubjects = std::vector<SubjectNode>;

// For each node, directed in-edges from its min(k, n-1) most cosine-similar
// other nodes; similarity ties break toward the lower track_id.
std::vector<Edge> select_neighbors(const std::vector<SubjectNode>& nodes, int k);

// Elementwise min of (x1,y1) and max of (x2,y2) over the constituents.
Box summarize_boxes(const std::vector<Box>& constituents);

// One level-1 cell per frame, window [t,t]; edges from select_neighbors.
std::vector<GraphCell> build_base_level(const std::vector<FrameSubjects>& frames, int k);

// Merge two consecutive level-(l-1) cells into a level-l cell: nodes fused by
// track_id (mean feature, min/max box), carry-overs unchanged, edges rebuilt
// on the fused features.
GraphCell construct_graph(const GraphCell& a, const GraphCell& b, int level, int k = 12);

// m(S_i, S_j) = W * F(S_j) for every edge (S_j -> S_i); aligned with cell.edges.
std::vector<Tape::ValueId> compute_messages(Tape& tape, const GraphCell& cell,
                                            Tape::ValueId weight,
                                            const std::vector<Tape::ValueId>& node_inputs);

// F(S_i) = sigma(sum of in-messages); isolated nodes fall back to a weighted
// self-message so features never go undefined.
std::vector<Tape::ValueId> aggregate_features(Tape& tape, const GraphCell& cell,
                                              const std::vector<Tape::ValueId>& messages,
                                              Tape::ValueId weight,
                                              const std::vector<Tape::ValueId>& node_inputs,
                                              Nonlinearity nonlinearity);

struct CellActivations {
  std::vector<Tape::ValueId> node_inputs;   // fused input features, D_{l-1} x 1
  std::vector<Tape::ValueId> node_outputs;  // F^(l)(S_i), D_l x 1
  std::vector<Tape::ValueId> messages;      // aligned with cell.edges
};

struct ForwardResult {
  Hierarchy hierarchy;
  std::vector<std::vector<CellActivations>> activations;  // [level-1][cell index]
  int depth() const { return hierarchy.depth(); }
};

// Full construction + message-passing pass: builds every level's cells and
// computes features and per-edge messages on the tape. `level_weights[l-1]`
// is W^(l) with shape (D_l x D_{l-1}); under weight sharing the same
// parameter may back several levels.
ForwardResult forward_hierarchy(Tape& tape, const std::vector<FrameSubjects>& frames,
                                const std::vector<Parameter*>& level_weights,
                                const HierarchyConfig& config);

}  // namespace hig
