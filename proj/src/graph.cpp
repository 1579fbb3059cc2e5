#include "hig/graph.hpp"

#include <algorithm>
#include <map>

#include "hig/error.hpp"

namespace hig {

const char* kind_name(SubjectKind k) { return k == SubjectKind::Person ? "person" : "object"; }

SubjectKind kind_from_name(const std::string& name) {
  if (name == "person") return SubjectKind::Person;
  if (name == "object") return SubjectKind::Object;
  throw SchemaError("unknown subject kind: " + name);
}

int GraphCell::index_of_track(int track_id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].track_id == track_id) return static_cast<int>(i);
  return -1;
}

void HierarchyConfig::validate() const {
  if (levels < 1) throw ConfigError("hierarchy levels must be >= 1");
  if (dims.size() != static_cast<std::size_t>(levels) + 1)
    throw ConfigError("dims must have levels+1 entries (D_0..D_L), got " +
                      std::to_string(dims.size()) + " for L=" + std::to_string(levels));
  for (int d : dims)
    if (d <= 0) throw ConfigError("feature dimensions must be positive");
  if (neighbor_k < 1) throw ConfigError("neighbor_k must be >= 1");
  if (confidence_threshold <= 0.0 || confidence_threshold > 1.0)
    throw ConfigError("confidence_threshold must lie in (0, 1]");
  if (weight_sharing == WeightSharing::SharedAcrossLevels) {
    for (int d : dims)
      if (d != dims[0])
        throw ConfigError("shared weights require equal dims at every level");
  }
}

std::vector<Edge> select_neighbors(const std::vector<SubjectNode>& nodes, int k) {
  std::vector<Edge> edges;
  int n = static_cast<int>(nodes.size());
  if (n < 2 || k < 1) return edges;
  int take = std::min(k, n - 1);
  struct Cand {
    double sim;
    int track_id;
    int index;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<std::size_t>(n) - 1);
  for (int i = 0; i < n; ++i) {
    cands.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double sim = cosine_similarity_or_zero(nodes[i].feature, nodes[j].feature);
      cands.push_back({sim, nodes[j].track_id, j});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.sim != b.sim) return a.sim > b.sim;
      return a.track_id < b.track_id;
    });
    for (int t = 0; t < take; ++t) edges.push_back({cands[static_cast<std::size_t>(t)].index, i});
  }
  return edges;
}

Box summarize_boxes(const std::vector<Box>& constituents) {
  if (constituents.empty()) throw EmptyInputError("summarize_boxes: no constituents");
  Box out = constituents[0];
  for (std::size_t i = 1; i < constituents.size(); ++i) {
    const Box& b = constituents[i];
    out.x1 = std::min(out.x1, b.x1);
    out.y1 = std::min(out.y1, b.y1);
    out.x2 = std::max(out.x2, b.x2);
    out.y2 = std::max(out.y2, b.y2);
  }
  return out;
}

namespace {
void sort_nodes(std::vector<SubjectNode>& nodes) {
  std::sort(nodes.begin(), nodes.end(),
            [](const SubjectNode& a, const SubjectNode& b) { return a.track_id < b.track_id; });
}
}  // namespace

std::vector<GraphCell> build_base_level(const std::vector<FrameSubjects>& frames, int k) {
  if (frames.empty()) throw EmptyInputError("empty video: no frames to build the base level");
  std::size_t feature_len = 0;
  bool have_len = false;
  std::vector<GraphCell> cells;
  cells.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    GraphCell cell;
    cell.level = 1;
    cell.start = static_cast<int>(t) + 1;
    cell.nodes = frames[t];
    sort_nodes(cell.nodes);
    for (std::size_t i = 1; i < cell.nodes.size(); ++i)
      if (cell.nodes[i].track_id == cell.nodes[i - 1].track_id)
        throw HierarchyError("duplicate track_id " + std::to_string(cell.nodes[i].track_id) +
                             " in frame " + std::to_string(cell.start));
    for (const SubjectNode& node : cell.nodes) {
      if (!have_len) {
        feature_len = node.feature.size();
        have_len = true;
      } else if (node.feature.size() != feature_len) {
        throw DimensionError("frame " + std::to_string(cell.start) + " track " +
                             std::to_string(node.track_id) + ": feature length " +
                             std::to_string(node.feature.size()) + ", expected " +
                             std::to_string(feature_len));
      }
    }
    cell.edges = select_neighbors(cell.nodes, k);
    cells.push_back(std::move(cell));
  }
  return cells;
}

GraphCell construct_graph(const GraphCell& a, const GraphCell& b, int level, int k) {
  if (b.start != a.start + 1)
    throw HierarchyError("construct_graph: parents not consecutive (starts " +
                         std::to_string(a.start) + ", " + std::to_string(b.start) + ")");
  if (a.level != b.level || a.level != level - 1)
    throw HierarchyError("construct_graph: parent levels " + std::to_string(a.level) + "/" +
                         std::to_string(b.level) + " do not feed level " + std::to_string(level));
  GraphCell out;
  out.level = level;
  out.start = a.start;

  std::map<int, const SubjectNode*> in_a, in_b;
  for (const SubjectNode& n : a.nodes) in_a[n.track_id] = &n;
  for (const SubjectNode& n : b.nodes) in_b[n.track_id] = &n;

  for (const auto& [track, na] : in_a) {
    auto it = in_b.find(track);
    if (it == in_b.end()) {
      out.nodes.push_back(*na);
      continue;
    }
    const SubjectNode* nb = it->second;
    if (na->feature.size() != nb->feature.size())
      throw DimensionError("construct_graph: track " + std::to_string(track) +
                           " feature length differs between parents");
    SubjectNode fused = *na;
    for (std::size_t i = 0; i < fused.feature.size(); ++i)
      fused.feature[i] = 0.5 * (na->feature[i] + nb->feature[i]);
    fused.box = summarize_boxes({na->box, nb->box});
    out.nodes.push_back(std::move(fused));
  }
  for (const auto& [track, nb] : in_b)
    if (!in_a.count(track)) out.nodes.push_back(*nb);

  sort_nodes(out.nodes);
  out.edges = select_neighbors(out.nodes, k);
  return out;
}

std::vector<Tape::ValueId> compute_messages(Tape& tape, const GraphCell& cell,
                                            Tape::ValueId weight,
                                            const std::vector<Tape::ValueId>& node_inputs) {
  std::vector<Tape::ValueId> messages;
  messages.reserve(cell.edges.size());
  for (const Edge& e : cell.edges)
    messages.push_back(tape.matmul(weight, node_inputs[static_cast<std::size_t>(e.sender)]));
  return messages;
}

std::vector<Tape::ValueId> aggregate_features(Tape& tape, const GraphCell& cell,
                                              const std::vector<Tape::ValueId>& messages,
                                              Tape::ValueId weight,
                                              const std::vector<Tape::ValueId>& node_inputs,
                                              Nonlinearity nonlinearity) {
  std::vector<std::vector<Tape::ValueId>> incoming(cell.nodes.size());
  for (std::size_t e = 0; e < cell.edges.size(); ++e)
    incoming[static_cast<std::size_t>(cell.edges[e].receiver)].push_back(messages[e]);

  std::vector<Tape::ValueId> outputs;
  outputs.reserve(cell.nodes.size());
  for (std::size_t i = 0; i < cell.nodes.size(); ++i) {
    Tape::ValueId agg;
    if (incoming[i].empty())
      agg = tape.matmul(weight, node_inputs[i]);  // self-message fallback
    else
      agg = tape.sum(incoming[i]);
    outputs.push_back(nonlinearity == Nonlinearity::Rectify ? tape.rectify(agg) : agg);
  }
  return outputs;
}

ForwardResult forward_hierarchy(Tape& tape, const std::vector<FrameSubjects>& frames,
                                const std::vector<Parameter*>& level_weights,
                                const HierarchyConfig& config) {
  config.validate();
  int frame_count = static_cast<int>(frames.size());
  int depth = std::min(config.levels, frame_count);
  if (static_cast<int>(level_weights.size()) < depth)
    throw ConfigError("forward_hierarchy: " + std::to_string(level_weights.size()) +
                      " level weights for depth " + std::to_string(depth));

  ForwardResult result;
  result.hierarchy.frame_count = frame_count;
  result.hierarchy.levels.resize(static_cast<std::size_t>(depth));
  result.activations.resize(static_cast<std::size_t>(depth));

  result.hierarchy.levels[0] = build_base_level(frames, config.neighbor_k);

  for (int level = 1; level <= depth; ++level) {
    auto& cells = result.hierarchy.levels[static_cast<std::size_t>(level - 1)];
    auto& acts = result.activations[static_cast<std::size_t>(level - 1)];
    acts.resize(cells.size());
    Parameter* w = level_weights[static_cast<std::size_t>(level - 1)];
    if (w->value.rows() != config.dim_out(level) || w->value.cols() != config.dim_in(level))
      throw DimensionError("level " + std::to_string(level) + " weight is " +
                           w->value.shape_str() + ", expected " +
                           std::to_string(config.dim_out(level)) + "x" +
                           std::to_string(config.dim_in(level)));

    for (std::size_t c = 0; c < cells.size(); ++c) {
      GraphCell& cell = cells[c];
      CellActivations& act = acts[c];
      try {
        if (act.node_inputs.empty()) {
          act.node_inputs.reserve(cell.nodes.size());
          for (const SubjectNode& node : cell.nodes) {
            if (static_cast<int>(node.feature.size()) != config.dim_in(level))
              throw DimensionError("node feature length " + std::to_string(node.feature.size()) +
                                   ", expected D=" + std::to_string(config.dim_in(level)));
            act.node_inputs.push_back(tape.constant(Matrix::column(node.feature)));
          }
        }
        Tape::ValueId wid = tape.parameter(w);
        act.messages = compute_messages(tape, cell, wid, act.node_inputs);
        act.node_outputs =
            aggregate_features(tape, cell, act.messages, wid, act.node_inputs,
                               config.nonlinearity);
        for (Tape::ValueId m : act.messages) ensure_finite(tape.value(m), "edge message");
        for (Tape::ValueId o : act.node_outputs) ensure_finite(tape.value(o), "node feature");
      } catch (const DimensionError& err) {
        throw DimensionError("level " + std::to_string(level) + " cell t=" +
                             std::to_string(cell.start) + ": " + err.what());
      } catch (const NumericError& err) {
        throw NumericError("level " + std::to_string(level) + " cell t=" +
                           std::to_string(cell.start) + ": " + err.what());
      }
    }

    if (level == depth) break;

    // Refresh node features with this level's outputs, then merge consecutive
    // cells into the next level and pre-register the fused inputs on the tape.
    std::vector<GraphCell> refreshed = cells;
    for (std::size_t c = 0; c < refreshed.size(); ++c)
      for (std::size_t i = 0; i < refreshed[c].nodes.size(); ++i)
        refreshed[c].nodes[i].feature = tape.value(acts[c].node_outputs[i]).values();

    auto& next_cells = result.hierarchy.levels[static_cast<std::size_t>(level)];
    auto& next_acts = result.activations[static_cast<std::size_t>(level)];
    next_cells.reserve(refreshed.size() - 1);
    next_acts.resize(refreshed.size() - 1);
    for (std::size_t c = 0; c + 1 < refreshed.size(); ++c) {
      GraphCell merged =
          construct_graph(refreshed[c], refreshed[c + 1], level + 1, config.neighbor_k);
      CellActivations& act = next_acts[c];
      act.node_inputs.reserve(merged.nodes.size());
      for (const SubjectNode& node : merged.nodes) {
        int ia = cells[c].index_of_track(node.track_id);
        int ib = cells[c + 1].index_of_track(node.track_id);
        if (ia >= 0 && ib >= 0) {
          Tape::ValueId sum = tape.add(acts[c].node_outputs[static_cast<std::size_t>(ia)],
                                       acts[c + 1].node_outputs[static_cast<std::size_t>(ib)]);
          act.node_inputs.push_back(tape.scale(sum, 0.5));
        } else if (ia >= 0) {
          act.node_inputs.push_back(acts[c].node_outputs[static_cast<std::size_t>(ia)]);
        } else {
          act.node_inputs.push_back(acts[c + 1].node_outputs[static_cast<std::size_t>(ib)]);
        }
      }
      next_cells.push_back(std::move(merged));
    }
  }
  return result;
}

}  // namespace hig
