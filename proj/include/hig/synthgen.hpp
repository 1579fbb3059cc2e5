#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hig/annotations.hpp"
#include "hig/classifier.hpp"
#include "hig/dataset.hpp"
#include "hig/rng.hpp"

namespace hig {

struct ScenarioConfig {
  int videos = 3;
  int frames = 8;
  int min_subjects = 2;
  int max_subjects = 5;
  double person_ratio = 0.6;
  VocabSizes vocab;                 // paper-scale defaults; scale down for desk runs
  int object_category_count = 8;   // category 0 is "person"
  int feature_dim = 16;            // D_0
  double noise_sigma = 0.05;
  double density = 1.0;            // expected spans per (pair | subject, category)
  int min_span = 1;
  int max_span = 0;                // 0 means "up to T"
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  ApplicabilityMask mask;

  void validate() const;
};

// Per-vocabulary embedding tables drawn once from the master seed. Features
// are planted as categoryEmbedding + sum of active predicate embeddings +
// N(0, sigma) per frame.
struct PlantedEmbeddings {
  int dim = 0;
  std::vector<std::vector<double>> category;                 // [category_id][dim]
  std::vector<std::vector<std::vector<double>>> predicate;   // [category][pred][dim]

  static PlantedEmbeddings create(const ScenarioConfig& config);
  const std::vector<double>& predicate_embedding(Category c, int pred) const;
};

struct GeneratedVideo {
  AnnotationFile annotations;
  FeatureTable features;
  std::vector<GroundTruthTriplet> planted;  // canonical (run-length merged) schedule
};

GeneratedVideo generate_video(const ScenarioConfig& config, const PlantedEmbeddings& embeddings,
                              std::uint64_t video_stream, const std::string& video_id);

// Writes manifest.json plus videos/<id>.annotations.json and
// videos/<id>.features.json under `out_dir`; returns the manifest.
Manifest generate_dataset(const ScenarioConfig& config, const std::filesystem::path& out_dir);

}  // namespace hig
