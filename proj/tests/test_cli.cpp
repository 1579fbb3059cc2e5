#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "hig/checkpoint.hpp"
#include "hig/dataset.hpp"
#include "hig/model.hpp"

using namespace hig;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kCli = HIG_CLI_PATH;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  fs::path out = fs::temp_directory_path() / "hig_cli_out.txt";
  std::string cmd = std::string(kCli) + " " + args + " > " + out.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(out);
  result.output.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return result;
}

fs::path fresh_dir(const char* tag) {
  fs::path dir = fs::temp_directory_path() / (std::string("hig_cli_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_config(const fs::path& dir, int videos, int frames, double lr, int epochs) {
  json cfg = {
      {"schema_version", 1},
      {"scenario",
       {{"videos", videos},
        {"frames", frames},
        {"min_subjects", 2},
        {"max_subjects", 3},
        {"vocab",
         {{"appearances", 4}, {"situations", 4}, {"positions", 4}, {"interactions", 4},
          {"relations", 4}}},
        {"object_category_count", 3},
        {"feature_dim", 8},
        {"noise_sigma", 0.05},
        {"density", 1.0},
        {"min_span", 1},
        {"max_span", 4},
        {"train_fraction", 1.0},
        {"seed", 313}}},
      {"hierarchy", {{"levels", 3}, {"dims", {8, 8, 8, 8}}, {"neighbor_k", 12}}},
      {"training",
       {{"epochs", epochs},
        {"epochs_per_stage", std::max(1, epochs / 3)},
        {"learning_rate", lr},
        {"batch_size", 1},
        {"seed", 99}}},
  };
  fs::path path = dir / "config.json";
  std::ofstream out(path);
  out << cfg.dump(2);
  return path.string();
}

}  // namespace

TEST_CASE("cli: generate is deterministic; zero videos is a usage error") {
  fs::path work = fresh_dir("gen");
  std::string config = write_config(work, 2, 6, 0.01, 3);

  RunResult a = run_cli("generate --config " + config + " --out " + (work / "ds_a").string());
  REQUIRE(a.exit_code == 0);
  RunResult b = run_cli("generate --config " + config + " --out " + (work / "ds_b").string());
  REQUIRE(b.exit_code == 0);
  CHECK(read_file(work / "ds_a" / "manifest.json") == read_file(work / "ds_b" / "manifest.json"));

  // 3 videos -> 3 annotation files
  RunResult c = run_cli("generate --config " + config + " --seed 5 --out " +
                        (work / "ds_c").string());
  REQUIRE(c.exit_code == 0);
  CHECK(fs::exists(work / "ds_c" / "videos"));
  // different seed -> different dataset
  CHECK(read_file(work / "ds_a" / "manifest.json") != read_file(work / "ds_c" / "manifest.json"));

  // parallel generation may not change the bytes
  RunResult threaded = run_cli("generate --config " + config + " --threads 4 --out " +
                               (work / "ds_t").string());
  REQUIRE(threaded.exit_code == 0);
  CHECK(read_file(work / "ds_a" / "manifest.json") == read_file(work / "ds_t" / "manifest.json"));
  CHECK(read_file(work / "ds_a" / "videos" / "video-000.annotations.json") ==
        read_file(work / "ds_t" / "videos" / "video-000.annotations.json"));
  CHECK(read_file(work / "ds_a" / "videos" / "video-001.features.json") ==
        read_file(work / "ds_t" / "videos" / "video-001.features.json"));

  json zero = json::parse(read_file(config));
  zero["scenario"]["videos"] = 0;
  std::ofstream(work / "zero.json") << zero.dump();
  RunResult z = run_cli("generate --config " + (work / "zero.json").string() + " --out " +
                        (work / "ds_z").string());
  CHECK(z.exit_code == 1);
  fs::remove_all(work);
}

TEST_CASE("cli: config files with unknown keys are rejected") {
  fs::path work = fresh_dir("badcfg");
  std::string config = write_config(work, 2, 6, 0.01, 3);
  json bad = json::parse(read_file(config));
  bad["scenario"]["fames"] = 8;  // typo
  std::ofstream(work / "bad.json") << bad.dump();
  RunResult r = run_cli("generate --config " + (work / "bad.json").string() + " --out " +
                        (work / "ds").string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("fames") != std::string::npos);
  fs::remove_all(work);
}

TEST_CASE("cli: validate reports clean datasets, corruption and empty dirs") {
  fs::path work = fresh_dir("val");
  std::string config = write_config(work, 2, 6, 0.01, 3);
  REQUIRE(run_cli("generate --config " + config + " --out " + (work / "ds").string()).exit_code ==
          0);
  CHECK(run_cli("validate " + (work / "ds").string()).exit_code == 0);

  // corrupt one annotation file: flip a kind to create a track-kind flip
  fs::path ann = work / "ds" / "videos" / "video-000.annotations.json";
  json doc = json::parse(read_file(ann));
  doc["data"][1]["segments_info"][0]["kind"] = "object";
  std::ofstream(ann) << doc.dump();
  RunResult bad = run_cli("validate " + (work / "ds").string());
  CHECK(bad.exit_code == 1);
  CHECK(bad.output.find("video-000") != std::string::npos);
  CHECK(bad.output.find("kind flip") != std::string::npos);

  fs::path empty = work / "empty";
  fs::create_directories(empty);
  RunResult none = run_cli("validate " + empty.string());
  CHECK(none.exit_code == 1);
  CHECK(none.output.find("no annotations found") != std::string::npos);
  fs::remove_all(work);
}

TEST_CASE("cli: lr=0 training leaves the checkpoint at the initial parameters") {
  fs::path work = fresh_dir("lr0");
  std::string config = write_config(work, 2, 6, 0.0, 3);
  REQUIRE(run_cli("generate --config " + config + " --out " + (work / "ds").string()).exit_code ==
          0);
  REQUIRE(run_cli("train " + (work / "ds").string() + " --config " + config + " --out " +
                  (work / "run").string())
              .exit_code == 0);

  LoadedCheckpoint loaded = load_checkpoint(work / "run" / "checkpoint.json");
  Model fresh(loaded.model.config(), 99);  // the training seed in the config
  auto pa = fresh.all_parameters();
  auto pb = loaded.model.all_parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i]->value.size() == pb[i]->value.size());
    for (int v = 0; v < pa[i]->value.size(); ++v)
      CHECK(pa[i]->value[v] == pb[i]->value[v]);
  }
  fs::remove_all(work);
}

TEST_CASE("cli: sampling rate halves level-1 cells; seeded reruns match bit-for-bit") {
  fs::path work = fresh_dir("train");
  std::string config = write_config(work, 2, 10, 0.01, 4);
  REQUIRE(run_cli("generate --config " + config + " --out " + (work / "ds").string()).exit_code ==
          0);

  RunResult half = run_cli("train " + (work / "ds").string() + " --config " + config +
                           " --sampling-rate 2 --out " + (work / "half").string());
  REQUIRE(half.exit_code == 0);
  CHECK(half.output.find("frames=5 level-1 cells=5") != std::string::npos);

  RunResult full_a = run_cli("train " + (work / "ds").string() + " --config " + config +
                             " --out " + (work / "run_a").string());
  RunResult full_b = run_cli("train " + (work / "ds").string() + " --config " + config +
                             " --out " + (work / "run_b").string());
  REQUIRE(full_a.exit_code == 0);
  REQUIRE(full_b.exit_code == 0);
  CHECK(read_file(work / "run_a" / "loss.csv") == read_file(work / "run_b" / "loss.csv"));
  CHECK(read_file(work / "run_a" / "checkpoint.json") ==
        read_file(work / "run_b" / "checkpoint.json"));
  fs::remove_all(work);
}

TEST_CASE("cli: evaluate produces metrics files; missing checkpoint exits 1") {
  fs::path work = fresh_dir("eval");
  std::string config = write_config(work, 2, 6, 0.01, 3);
  REQUIRE(run_cli("generate --config " + config + " --out " + (work / "ds").string()).exit_code ==
          0);
  REQUIRE(run_cli("train " + (work / "ds").string() + " --config " + config + " --out " +
                  (work / "run").string())
              .exit_code == 0);

  RunResult eval = run_cli("evaluate " + (work / "ds").string() + " --checkpoint " +
                           (work / "run" / "checkpoint.json").string() + " --out " +
                           (work / "eval").string());
  REQUIRE(eval.exit_code == 0);
  CHECK(eval.output.find("frames/s") != std::string::npos);
  CHECK(fs::exists(work / "eval" / "metrics.csv"));
  CHECK(fs::exists(work / "eval" / "metrics.json"));
  CHECK(fs::exists(work / "eval" / "predictions" / "video-000.predictions.json"));
  json metrics = json::parse(read_file(work / "eval" / "metrics.json"));
  CHECK(metrics.contains("timing"));
  CHECK(metrics.at("metrics").size() == 15);  // 5 categories x 3 Ks

  RunResult half = run_cli("evaluate " + (work / "ds").string() + " --checkpoint " +
                           (work / "run" / "checkpoint.json").string() +
                           " --sampling-rate 2 --out " + (work / "eval_half").string());
  REQUIRE(half.exit_code == 0);
  CHECK(half.output.find("frames/s") != std::string::npos);
  json half_metrics = json::parse(read_file(work / "eval_half" / "metrics.json"));
  CHECK(half_metrics.at("timing").at("sampling_rate") == 2);
  CHECK(half_metrics.at("timing").at("frames") == 6);  // two 6-frame videos halved (ceil)

  RunResult missing = run_cli("evaluate " + (work / "ds").string() +
                              " --checkpoint /nonexistent/checkpoint.json --out " +
                              (work / "eval2").string());
  CHECK(missing.exit_code == 1);

  // train_fraction 1.0 leaves the val split empty; asking for it is an error
  RunResult empty_split = run_cli("evaluate " + (work / "ds").string() + " --checkpoint " +
                                  (work / "run" / "checkpoint.json").string() +
                                  " --split val --out " + (work / "eval3").string());
  CHECK(empty_split.exit_code == 1);
  CHECK(empty_split.output.find("split") != std::string::npos);
  fs::remove_all(work);
}

TEST_CASE("cli: inspect summarizes datasets and checkpoints; bad paths exit 1") {
  fs::path work = fresh_dir("inspect");
  std::string config = write_config(work, 2, 6, 0.01, 3);
  REQUIRE(run_cli("generate --config " + config + " --out " + (work / "ds").string()).exit_code ==
          0);
  REQUIRE(run_cli("train " + (work / "ds").string() + " --config " + config + " --out " +
                  (work / "run").string())
              .exit_code == 0);

  RunResult ds = run_cli("inspect " + (work / "ds").string());
  CHECK(ds.exit_code == 0);
  CHECK(ds.output.find("subjects/video") != std::string::npos);

  RunResult ckpt = run_cli("inspect " + (work / "run" / "checkpoint.json").string());
  CHECK(ckpt.exit_code == 0);
  CHECK(ckpt.output.find("dims: 8 8 8 8") != std::string::npos);

  CHECK(run_cli("inspect /no/such/path").exit_code == 1);
  fs::remove_all(work);
}

TEST_CASE("cli: no subcommand is a usage error") {
  CHECK(run_cli("").exit_code == 1);
}
