// Command-line front end: dataset generation, validation, training,
// evaluation and inspection of checkpoints/datasets.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hig/annotations.hpp"
#include "hig/checkpoint.hpp"
#include "hig/dataset.hpp"
#include "hig/error.hpp"
#include "hig/evaluation.hpp"
#include "hig/log.hpp"
#include "hig/model.hpp"
#include "hig/parallel.hpp"
#include "hig/synthgen.hpp"
#include "hig/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

json load_config_file(const std::string& path) {
  json root;
  try {
    root = json::parse(read_file(path));
  } catch (const json::parse_error& err) {
    throw ConfigError("config " + path + ": " + err.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(root, {"schema_version", "scenario", "hierarchy", "training", "evaluation",
                        "mask"},
                 "config root");
  if (root.value("schema_version", 1) != 1)
    throw ConfigError("config: unsupported schema_version");
  return root;
}

ScenarioConfig scenario_from_json(const json& j) {
  reject_unknown(j, {"videos", "frames", "min_subjects", "max_subjects", "person_ratio",
                     "vocab", "object_category_count", "feature_dim", "noise_sigma", "density",
                     "min_span", "max_span", "train_fraction", "seed"},
                 "scenario");
  ScenarioConfig cfg;
  cfg.videos = j.value("videos", cfg.videos);
  cfg.frames = j.value("frames", cfg.frames);
  cfg.min_subjects = j.value("min_subjects", cfg.min_subjects);
  cfg.max_subjects = j.value("max_subjects", cfg.max_subjects);
  cfg.person_ratio = j.value("person_ratio", cfg.person_ratio);
  if (j.contains("vocab")) {
    const json& v = j.at("vocab");
    reject_unknown(v, {"appearances", "situations", "positions", "interactions", "relations"},
                   "scenario.vocab");
    cfg.vocab.appearances = v.value("appearances", cfg.vocab.appearances);
    cfg.vocab.situations = v.value("situations", cfg.vocab.situations);
    cfg.vocab.positions = v.value("positions", cfg.vocab.positions);
    cfg.vocab.interactions = v.value("interactions", cfg.vocab.interactions);
    cfg.vocab.relations = v.value("relations", cfg.vocab.relations);
  }
  cfg.object_category_count = j.value("object_category_count", cfg.object_category_count);
  cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
  cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
  cfg.density = j.value("density", cfg.density);
  cfg.min_span = j.value("min_span", cfg.min_span);
  cfg.max_span = j.value("max_span", cfg.max_span);
  cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

HierarchyConfig hierarchy_from_json(const json& j) {
  reject_unknown(j, {"levels", "dims", "neighbor_k", "weight_sharing", "confidence_threshold",
                     "nonlinearity"},
                 "hierarchy");
  HierarchyConfig cfg;
  cfg.levels = j.value("levels", cfg.levels);
  if (j.contains("dims")) cfg.dims = j.at("dims").get<std::vector<int>>();
  cfg.neighbor_k = j.value("neighbor_k", cfg.neighbor_k);
  if (j.contains("weight_sharing")) {
    std::string mode = j.at("weight_sharing").get<std::string>();
    if (mode == "shared")
      cfg.weight_sharing = WeightSharing::SharedAcrossLevels;
    else if (mode == "per_level")
      cfg.weight_sharing = WeightSharing::PerLevel;
    else
      throw ConfigError("hierarchy.weight_sharing must be 'shared' or 'per_level'");
  }
  cfg.confidence_threshold = j.value("confidence_threshold", cfg.confidence_threshold);
  if (j.contains("nonlinearity")) {
    std::string nl = j.at("nonlinearity").get<std::string>();
    if (nl == "rectify")
      cfg.nonlinearity = Nonlinearity::Rectify;
    else if (nl == "none")
      cfg.nonlinearity = Nonlinearity::None;
    else
      throw ConfigError("hierarchy.nonlinearity must be 'rectify' or 'none'");
  }
  return cfg;
}

TrainConfig train_from_json(const json& j) {
  reject_unknown(j, {"epochs", "epochs_per_stage", "learning_rate", "batch_size", "focal_alpha",
                     "focal_gamma", "weight_decay", "seed", "sampling_rate"},
                 "training");
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.epochs_per_stage = j.value("epochs_per_stage", cfg.epochs_per_stage);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.focal.alpha = j.value("focal_alpha", cfg.focal.alpha);
  cfg.focal.gamma = j.value("focal_gamma", cfg.focal.gamma);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.sampling_rate = j.value("sampling_rate", cfg.sampling_rate);
  return cfg;
}

struct EvalConfig {
  MatchCriteria criteria;
  std::vector<int> ks = {20, 50, 100};
};

EvalConfig eval_from_json(const json& j) {
  reject_unknown(j, {"temporal_iou", "require_identity", "macro_average", "ks"}, "evaluation");
  EvalConfig cfg;
  cfg.criteria.temporal_iou = j.value("temporal_iou", cfg.criteria.temporal_iou);
  cfg.criteria.require_identity = j.value("require_identity", cfg.criteria.require_identity);
  cfg.criteria.macro_average = j.value("macro_average", cfg.criteria.macro_average);
  if (j.contains("ks")) cfg.ks = j.at("ks").get<std::vector<int>>();
  return cfg;
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> sampling_rate;
  std::optional<int> neighbor_k;
  std::optional<double> confidence_threshold;
  int threads = 1;
};

int cmd_generate(const CommonFlags& flags) {
  if (flags.config_path.empty()) throw ConfigError("generate needs --config");
  if (flags.out_dir.empty()) throw ConfigError("generate needs --out");
  json root = load_config_file(flags.config_path);
  ScenarioConfig scenario =
      scenario_from_json(root.contains("scenario") ? root.at("scenario") : json::object());
  if (root.contains("mask")) scenario.mask = mask_from_json(root.at("mask"));
  if (flags.seed) scenario.seed = *flags.seed;
  set_max_threads(flags.threads);

  Manifest manifest = generate_dataset(scenario, flags.out_dir);
  std::printf("wrote %zu videos to %s\n", manifest.videos.size(), flags.out_dir.c_str());
  std::printf("train split: %zu videos, val split: %zu videos\n", manifest.train_ids.size(),
              manifest.val_ids.size());
  return kExitOk;
}

int cmd_validate(const std::string& dir) {
  std::vector<fs::path> files;
  fs::path manifest_path = fs::path(dir) / "manifest.json";
  if (fs::exists(manifest_path)) {
    Manifest manifest = parse_manifest(read_file(manifest_path));
    for (const ManifestVideo& v : manifest.videos) files.push_back(fs::path(dir) / v.annotations_path);
  } else if (fs::is_directory(dir)) {
    for (const auto& entry : fs::recursive_directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().string().ends_with(".annotations.json"))
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) {
    std::fprintf(stderr, "no annotations found under %s\n", dir.c_str());
    return kExitUsage;
  }

  int bad_files = 0;
  for (const fs::path& path : files) {
    try {
      auto [file, violations] = parse_annotations_report(read_file(path));
      if (violations.empty()) {
        std::printf("%s: ok (%d frames)\n", path.c_str(), file.frame_count());
        continue;
      }
      bad_files += 1;
      std::printf("%s: %zu violation(s)\n", path.c_str(), violations.size());
      for (const Violation& v : violations)
        std::printf("  [%s] %s\n", v.code.c_str(), v.message.c_str());
    } catch (const std::exception& err) {
      bad_files += 1;
      std::printf("%s: unreadable: %s\n", path.c_str(), err.what());
    }
  }
  return bad_files == 0 ? kExitOk : kExitUsage;
}

std::vector<PreparedVideo> prepare_split(const Dataset& dataset,
                                         const std::vector<std::string>& ids, int sampling_rate) {
  std::vector<const DatasetVideo*> selected;
  if (ids.empty()) {
    for (const DatasetVideo& v : dataset.videos) selected.push_back(&v);
  } else {
    for (const std::string& id : ids) {
      const DatasetVideo* v = dataset.find(id);
      if (!v) throw ConfigError("manifest split names unknown video '" + id + "'");
      selected.push_back(v);
    }
  }
  std::vector<PreparedVideo> prepared(selected.size());
  parallel_for(selected.size(), [&](std::size_t i) {
    prepared[i] = prepare_video(*selected[i], sampling_rate);
  });
  return prepared;
}

int cmd_train(const CommonFlags& flags, const std::string& data_dir) {
  if (flags.config_path.empty()) throw ConfigError("train needs --config");
  if (flags.out_dir.empty()) throw ConfigError("train needs --out");
  json root = load_config_file(flags.config_path);
  if (!root.contains("hierarchy")) throw ConfigError("train config needs a 'hierarchy' section");
  HierarchyConfig hierarchy = hierarchy_from_json(root.at("hierarchy"));
  TrainConfig train =
      train_from_json(root.contains("training") ? root.at("training") : json::object());
  if (flags.seed) train.seed = *flags.seed;
  if (flags.sampling_rate) train.sampling_rate = *flags.sampling_rate;
  if (flags.neighbor_k) hierarchy.neighbor_k = *flags.neighbor_k;
  if (flags.confidence_threshold) hierarchy.confidence_threshold = *flags.confidence_threshold;
  set_max_threads(flags.threads);

  Dataset dataset = load_dataset(data_dir);
  ModelConfig model_config;
  model_config.hierarchy = hierarchy;
  model_config.vocab = dataset.manifest.vocabulary.sizes;
  if (root.contains("mask")) model_config.mask = mask_from_json(root.at("mask"));

  if (dataset.manifest.train_ids.empty())
    std::printf("manifest has no train split; training on all %zu videos\n",
                dataset.videos.size());
  std::vector<PreparedVideo> videos =
      prepare_split(dataset, dataset.manifest.train_ids, train.sampling_rate);
  if (videos.empty()) throw ConfigError("dataset has no training videos");
  for (const PreparedVideo& v : videos) {
    if (v.frames.empty()) throw ConfigError("video " + v.id + " has no frames after sampling");
    std::printf("video %s: frames=%zu level-1 cells=%zu\n", v.id.c_str(), v.frames.size(),
                v.frames.size());
    for (const FrameSubjects& frame : v.frames)
      for (const SubjectNode& node : frame)
        if (static_cast<int>(node.feature.size()) != hierarchy.dims.at(0))
          throw ConfigError("dataset feature dim " + std::to_string(node.feature.size()) +
                            " does not match hierarchy D_0 = " +
                            std::to_string(hierarchy.dims.at(0)));
  }

  Model model(model_config, train.seed);
  Trainer trainer(model, train);

  fs::create_directories(flags.out_dir);
  std::string loss_csv = "epoch,stage,total";
  for (int l = 1; l <= hierarchy.levels; ++l) loss_csv += ",level" + std::to_string(l);
  loss_csv += "\n";

  Rng epoch_rng(train.seed);
  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    EpochMetrics metrics = trainer.run_epoch(videos, epoch);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%d,%d,%.9g", epoch,
                  trainer.schedule().stage_index(epoch) + 1, metrics.mean_total);
    loss_csv += buf;
    for (int l = 1; l <= hierarchy.levels; ++l) {
      double value = l <= static_cast<int>(metrics.mean_per_level.size())
                         ? metrics.mean_per_level[static_cast<std::size_t>(l - 1)]
                         : 0.0;
      std::snprintf(buf, sizeof buf, ",%.9g", value);
      loss_csv += buf;
    }
    loss_csv += "\n";
    if (epoch % 25 == 0 || epoch + 1 == train.epochs)
      std::printf("epoch %4d stage %d loss %.6f\n", epoch,
                  trainer.schedule().stage_index(epoch) + 1, metrics.mean_total);
  }

  write_file(fs::path(flags.out_dir) / "loss.csv", loss_csv);
  TrainState state;
  state.epoch = train.epochs;
  state.rng_state = epoch_rng.serialize();
  save_checkpoint(fs::path(flags.out_dir) / "checkpoint.json", model, trainer.optimizer(),
                  state);
  std::printf("checkpoint: %s\n", (fs::path(flags.out_dir) / "checkpoint.json").c_str());
  return kExitOk;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& checkpoint_path,
                 const std::string& data_dir, const std::string& split) {
  if (flags.out_dir.empty()) throw ConfigError("evaluate needs --out");
  if (!fs::exists(checkpoint_path))
    throw ConfigError("checkpoint not found: " + checkpoint_path);
  EvalConfig eval;
  if (!flags.config_path.empty()) {
    json root = load_config_file(flags.config_path);
    if (root.contains("evaluation")) eval = eval_from_json(root.at("evaluation"));
  }
  set_max_threads(flags.threads);

  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  Model& model = loaded.model;
  if (flags.confidence_threshold) model.set_confidence_threshold(*flags.confidence_threshold);
  if (flags.neighbor_k) model.set_neighbor_k(*flags.neighbor_k);

  Dataset dataset = load_dataset(data_dir);
  int sampling_rate = flags.sampling_rate.value_or(1);
  std::vector<std::string> ids;
  if (split == "train")
    ids = dataset.manifest.train_ids;
  else if (split == "val")
    ids = dataset.manifest.val_ids;
  else if (split != "all")
    throw ConfigError("--split must be train, val or all");
  if (split != "all" && ids.empty())
    throw ConfigError("the dataset's '" + split + "' split is empty");
  std::vector<PreparedVideo> videos = prepare_split(dataset, ids, sampling_rate);

  long total_frames = 0;
  for (const PreparedVideo& v : videos) total_frames += static_cast<long>(v.frames.size());

  std::vector<std::vector<Prediction>> predictions(videos.size());
  auto start = std::chrono::steady_clock::now();
  parallel_for(videos.size(), [&](std::size_t i) {
    predictions[i] = infer_video(model, videos[i].frames);
  });
  auto stop = std::chrono::steady_clock::now();
  double seconds = std::chrono::duration<double>(stop - start).count();

  fs::path pred_dir = fs::path(flags.out_dir) / "predictions";
  fs::create_directories(pred_dir);
  std::vector<VideoInstance> instances(videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i) {
    write_file(pred_dir / (videos[i].id + ".predictions.json"),
               write_predictions(predictions[i]));
    instances[i] = {predictions[i], videos[i].gt};
  }

  MetricsTable table = compute_metrics(instances, eval.ks, eval.criteria);
  write_file(fs::path(flags.out_dir) / "metrics.csv", table.to_csv());
  json metrics_json = table.to_json();
  double fps = seconds > 0.0 ? total_frames / seconds : 0.0;
  metrics_json["timing"] = {{"frames", total_frames},
                            {"seconds", seconds},
                            {"frames_per_second", fps},
                            {"sampling_rate", sampling_rate}};
  write_file(fs::path(flags.out_dir) / "metrics.json", metrics_json.dump(2) + "\n");

  std::printf("inference: %ld frames in %.4f s (%.1f frames/s)\n", total_frames, seconds, fps);
  for (const MetricsRow& row : table.rows)
    std::printf("%-12s R@%-3d %.4f  mR@%-3d %.4f\n", category_name(row.category), row.k,
                row.recall, row.k, row.mean_recall);
  return kExitOk;
}

int cmd_inspect(const std::string& path) {
  if (fs::is_directory(path)) {
    Dataset dataset = load_dataset(path);
    long frames = 0, subjects = 0;
    std::array<long, kCategoryCount> triplets{};
    for (const DatasetVideo& v : dataset.videos) {
      frames += v.annotations.frame_count();
      if (!v.annotations.data.empty())
        subjects += static_cast<long>(v.annotations.data[0].segments_info.size());
      for (const GroundTruthTriplet& t : extract_ground_truth(v.annotations))
        triplets[static_cast<std::size_t>(t.category)] += 1;
    }
    double n = static_cast<double>(dataset.videos.size());
    std::printf("dataset %s: %zu videos, %.1f frames/video, %.1f subjects/video\n",
                path.c_str(), dataset.videos.size(), frames / n, subjects / n);
    for (Category c : kAllCategories)
      std::printf("  %-12s %ld spans (%.1f per video)\n", category_name(c),
                  triplets[static_cast<std::size_t>(c)],
                  triplets[static_cast<std::size_t>(c)] / n);
    std::printf("  train/val: %zu/%zu videos\n", dataset.manifest.train_ids.size(),
                dataset.manifest.val_ids.size());
    return kExitOk;
  }
  if (!fs::exists(path)) throw ConfigError("no such path: " + path);

  std::string bytes = read_file(path);
  json root = json::parse(bytes, nullptr, false);
  if (root.is_discarded()) throw ConfigError(path + " is not JSON");
  if (root.contains("parameters")) {
    LoadedCheckpoint loaded = load_checkpoint(path);
    const ModelConfig& cfg = loaded.model.config();
    std::printf("checkpoint %s\n", path.c_str());
    std::printf("  levels: %d, weight sharing: %s, k: %d, threshold: %.2f\n",
                cfg.hierarchy.levels,
                cfg.hierarchy.weight_sharing == WeightSharing::SharedAcrossLevels ? "shared"
                                                                                  : "per-level",
                cfg.hierarchy.neighbor_k, cfg.hierarchy.confidence_threshold);
    std::string dims = "  dims:";
    for (int d : cfg.hierarchy.dims) dims += " " + std::to_string(d);
    std::printf("%s\n", dims.c_str());
    long count = 0;
    for (Parameter* p : loaded.model.all_parameters()) count += p->value.size();
    std::printf("  parameters: %ld values in %zu matrices\n", count,
                loaded.model.all_parameters().size());
    std::printf("  trained epochs: %d\n", loaded.state.epoch);
    return kExitOk;
  }
  if (root.contains("data")) {
    AnnotationFile file = parse_annotations(bytes);
    auto gt = extract_ground_truth(file);
    std::printf("annotations %s: video '%s', %d frames, %zu ground-truth spans\n", path.c_str(),
                file.video_id.c_str(), file.frame_count(), gt.size());
    return kExitOk;
  }
  throw ConfigError(path + " is neither a checkpoint, dataset dir, nor annotation file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical interlacement graph engine"};
  app.require_subcommand(1);
  log::set_level(log::Level::Warn);

  CommonFlags flags;
  std::string data_dir, checkpoint_path, inspect_path, validate_dir;
  std::string split = "all";
  std::uint64_t seed_value = 0;
  int sampling_value = 1;
  int k_value = 12;
  double threshold_value = 0.9;

  auto add_common = [&](CLI::App* cmd, bool with_model_flags) {
    cmd->add_option("--seed", seed_value, "Override the config seed");
    cmd->add_option("--sampling-rate", sampling_value, "Keep every Nth frame");
    cmd->add_option("--threads", flags.threads, "Worker cap");
    if (with_model_flags) {
      cmd->add_option("--k", k_value, "Override neighbor count");
      cmd->add_option("--confidence-threshold", threshold_value,
                      "Override selection threshold");
    }
  };

  CLI::App* generate = app.add_subcommand("generate", "Generate a synthetic dataset");
  generate->add_option("--config", flags.config_path, "Run config JSON")->required();
  generate->add_option("--out", flags.out_dir, "Output dataset directory")->required();
  add_common(generate, false);

  CLI::App* validate_cmd = app.add_subcommand("validate", "Validate a dataset directory");
  validate_cmd->add_option("dir", validate_dir, "Dataset directory")->required();

  CLI::App* train = app.add_subcommand("train", "Train on a dataset");
  train->add_option("data", data_dir, "Dataset directory")->required();
  train->add_option("--config", flags.config_path, "Run config JSON")->required();
  train->add_option("--out", flags.out_dir, "Output directory")->required();
  add_common(train, true);

  CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  evaluate->add_option("data", data_dir, "Dataset directory")->required();
  evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint.json")->required();
  evaluate->add_option("--out", flags.out_dir, "Output directory")->required();
  evaluate->add_option("--config", flags.config_path, "Run config JSON (evaluation section)");
  evaluate->add_option("--split", split, "train | val | all");
  add_common(evaluate, true);

  CLI::App* inspect = app.add_subcommand("inspect", "Summarize a checkpoint or dataset");
  inspect->add_option("path", inspect_path, "checkpoint.json | dataset dir | annotations file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* active = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
  if (active) {
    auto given = [&](const char* name) {
      CLI::Option* opt = active->get_option_no_throw(name);
      return opt != nullptr && opt->count() > 0;
    };
    if (given("--seed")) flags.seed = seed_value;
    if (given("--sampling-rate")) flags.sampling_rate = sampling_value;
    if (given("--k")) flags.neighbor_k = k_value;
    if (given("--confidence-threshold")) flags.confidence_threshold = threshold_value;
  }

  try {
    if (generate->parsed()) return cmd_generate(flags);
    if (validate_cmd->parsed()) return cmd_validate(validate_dir);
    if (train->parsed()) return cmd_train(flags, data_dir);
    if (evaluate->parsed()) return cmd_evaluate(flags, checkpoint_path, data_dir, split);
    if (inspect->parsed()) return cmd_inspect(inspect_path);
  } catch (const ConfigError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const SchemaError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const ParseError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const EmptyInputError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "runtime failure: %s\n", err.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
