#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hig/annotations.hpp"
#include "hig/graph.hpp"

namespace hig {

// Per-frame feature vectors keyed by track_id, aligned by position with the
// annotation file's data records.
struct FeatureTable {
  std::string video_id;
  int dim = 0;
  std::vector<std::map<int, std::vector<double>>> frames;
};

FeatureTable parse_features(const std::string& bytes);
std::string write_features(const FeatureTable& table);
FeatureTable subsample_features(const FeatureTable& table, int rate);

// Builds the engine's per-frame subject lists: track/kind/category from
// segments_info, normalized boxes, features from the table.
std::vector<FrameSubjects> assemble_frames(const AnnotationFile& annotations,
                                           const FeatureTable& features);

struct ManifestVideo {
  std::string id;
  std::string annotations_path;  // relative to the dataset directory
  std::string features_path;
  int frames = 0;
  int subjects = 0;
};

struct Manifest {
  int schema_version = 1;
  std::uint64_t seed = 0;
  VocabularyBlock vocabulary;
  std::vector<ManifestVideo> videos;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

std::string write_manifest(const Manifest& manifest);
Manifest parse_manifest(const std::string& bytes);

struct DatasetVideo {
  std::string id;
  AnnotationFile annotations;
  FeatureTable features;
};

struct Dataset {
  Manifest manifest;
  std::vector<DatasetVideo> videos;  // manifest order

  const DatasetVideo* find(const std::string& id) const;
};

Dataset load_dataset(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace hig
