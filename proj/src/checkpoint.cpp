#include "hig/checkpoint.hpp"

#include "hig/dataset.hpp"
#include "hig/error.hpp"

namespace hig {

using nlohmann::json;

json mask_to_json(const ApplicabilityMask& mask) {
  json out = json::object();
  for (Category c : {Category::Position, Category::Interaction, Category::Relation}) {
    json pairs = json::array();
    for (SubjectKind s : {SubjectKind::Person, SubjectKind::Object})
      for (SubjectKind o : {SubjectKind::Person, SubjectKind::Object})
        if (mask.allows(c, s, o)) pairs.push_back(json::array({kind_name(s), kind_name(o)}));
    out[category_name(c)] = std::move(pairs);
  }
  return out;
}

ApplicabilityMask mask_from_json(const json& j) {
  ApplicabilityMask mask;
  for (Category c : {Category::Position, Category::Interaction, Category::Relation})
    for (SubjectKind s : {SubjectKind::Person, SubjectKind::Object})
      for (SubjectKind o : {SubjectKind::Person, SubjectKind::Object}) mask.set(c, s, o, false);
  for (auto it = j.begin(); it != j.end(); ++it) {
    Category c = category_from_name(it.key());
    for (const json& pair : it.value()) {
      if (!pair.is_array() || pair.size() != 2)
        throw SchemaError("mask pairs must be [subject_kind, object_kind]");
      mask.set(c, kind_from_name(pair[0].get<std::string>()),
               kind_from_name(pair[1].get<std::string>()), true);
    }
  }
  mask.validate();
  return mask;
}

json model_config_to_json(const ModelConfig& config) {
  json h = json::object();
  h["levels"] = config.hierarchy.levels;
  h["dims"] = config.hierarchy.dims;
  h["neighbor_k"] = config.hierarchy.neighbor_k;
  h["weight_sharing"] = config.hierarchy.weight_sharing == WeightSharing::SharedAcrossLevels
                            ? "shared"
                            : "per_level";
  h["confidence_threshold"] = config.hierarchy.confidence_threshold;
  h["nonlinearity"] =
      config.hierarchy.nonlinearity == Nonlinearity::Rectify ? "rectify" : "none";

  json v = json::object();
  v["appearances"] = config.vocab.appearances;
  v["situations"] = config.vocab.situations;
  v["positions"] = config.vocab.positions;
  v["interactions"] = config.vocab.interactions;
  v["relations"] = config.vocab.relations;

  return json{{"hierarchy", h}, {"vocabulary", v}, {"mask", mask_to_json(config.mask)}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig config;
  const json& h = j.at("hierarchy");
  config.hierarchy.levels = h.at("levels").get<int>();
  config.hierarchy.dims = h.at("dims").get<std::vector<int>>();
  config.hierarchy.neighbor_k = h.at("neighbor_k").get<int>();
  std::string sharing = h.at("weight_sharing").get<std::string>();
  if (sharing == "shared")
    config.hierarchy.weight_sharing = WeightSharing::SharedAcrossLevels;
  else if (sharing == "per_level")
    config.hierarchy.weight_sharing = WeightSharing::PerLevel;
  else
    throw SchemaError("weight_sharing must be 'shared' or 'per_level'");
  config.hierarchy.confidence_threshold = h.at("confidence_threshold").get<double>();
  std::string nl = h.at("nonlinearity").get<std::string>();
  if (nl == "rectify")
    config.hierarchy.nonlinearity = Nonlinearity::Rectify;
  else if (nl == "none")
    config.hierarchy.nonlinearity = Nonlinearity::None;
  else
    throw SchemaError("nonlinearity must be 'rectify' or 'none'");

  const json& v = j.at("vocabulary");
  config.vocab.appearances = v.at("appearances").get<int>();
  config.vocab.situations = v.at("situations").get<int>();
  config.vocab.positions = v.at("positions").get<int>();
  config.vocab.interactions = v.at("interactions").get<int>();
  config.vocab.relations = v.at("relations").get<int>();

  config.mask = mask_from_json(j.at("mask"));
  config.validate();
  return config;
}

namespace {

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", m.values()}};
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<int>(), j.at("cols").get<int>(),
                j.at("values").get<std::vector<double>>());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model& model, const AdamW& optimizer,
                     const TrainState& state) {
  json root = json::object();
  root["schema_version"] = 1;
  root["model"] = model_config_to_json(model.config());

  json params = json::object();
  for (Parameter* p : model.all_parameters()) {
    json pj = matrix_to_json(p->value);
    pj["frozen"] = p->frozen;
    params[p->name] = std::move(pj);
  }
  root["parameters"] = std::move(params);

  json opt = json::object();
  opt["learning_rate"] = optimizer.config().learning_rate;
  opt["beta1"] = optimizer.config().beta1;
  opt["beta2"] = optimizer.config().beta2;
  opt["eps"] = optimizer.config().eps;
  opt["weight_decay"] = optimizer.config().weight_decay;
  json slots = json::object();
  for (const auto& [name, slot] : optimizer.slots()) {
    slots[name] = json{{"m", matrix_to_json(slot.m)},
                       {"v", matrix_to_json(slot.v)},
                       {"step", slot.step}};
  }
  opt["slots"] = std::move(slots);
  root["optimizer"] = std::move(opt);

  root["train_state"] = json{{"epoch", state.epoch}, {"rng", state.rng_state}};
  write_file(path, root.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  json root;
  try {
    root = json::parse(read_file(path));
  } catch (const json::parse_error& err) {
    throw ParseError("checkpoint " + path.string() + ": " + err.what(), err.byte);
  }
  ModelConfig config = model_config_from_json(root.at("model"));
  // Seed is irrelevant: every parameter is overwritten below.
  LoadedCheckpoint loaded{Model(config, 0), AdamW(), TrainState{}};

  const json& params = root.at("parameters");
  for (Parameter* p : loaded.model.all_parameters()) {
    if (!params.contains(p->name))
      throw SchemaError("checkpoint missing parameter '" + p->name + "'");
    const json& pj = params.at(p->name);
    Matrix value = matrix_from_json(pj);
    if (!value.same_shape(p->value))
      throw SchemaError("checkpoint parameter '" + p->name + "' has shape " +
                        value.shape_str() + ", expected " + p->value.shape_str());
    p->value = std::move(value);
    p->zero_grad();
    p->frozen = pj.value("frozen", false);
  }

  const json& opt = root.at("optimizer");
  AdamWConfig ocfg;
  ocfg.learning_rate = opt.at("learning_rate").get<double>();
  ocfg.beta1 = opt.at("beta1").get<double>();
  ocfg.beta2 = opt.at("beta2").get<double>();
  ocfg.eps = opt.at("eps").get<double>();
  ocfg.weight_decay = opt.at("weight_decay").get<double>();
  loaded.optimizer = AdamW(ocfg);
  std::map<std::string, AdamW::Slot> slots;
  for (auto it = opt.at("slots").begin(); it != opt.at("slots").end(); ++it) {
    AdamW::Slot slot;
    slot.m = matrix_from_json(it.value().at("m"));
    slot.v = matrix_from_json(it.value().at("v"));
    slot.step = it.value().at("step").get<std::int64_t>();
    slots[it.key()] = std::move(slot);
  }
  loaded.optimizer.restore_slots(std::move(slots));

  const json& ts = root.at("train_state");
  loaded.state.epoch = ts.at("epoch").get<int>();
  loaded.state.rng_state = ts.at("rng").get<std::string>();
  return loaded;
}

}  // namespace hig
