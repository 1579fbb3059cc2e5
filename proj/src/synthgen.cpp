#include "hig/synthgen.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "hig/error.hpp"
#include "hig/parallel.hpp"

namespace hig {

void ScenarioConfig::validate() const {
  if (videos < 1) throw ConfigError("scenario: videos must be >= 1");
  if (frames < 1) throw ConfigError("scenario: frames must be >= 1");
  if (min_subjects < 1) throw ConfigError("scenario: zero subjects would make empty videos");
  if (max_subjects < min_subjects) throw ConfigError("scenario: max_subjects < min_subjects");
  if (person_ratio < 0.0 || person_ratio > 1.0)
    throw ConfigError("scenario: person_ratio must lie in [0, 1]");
  vocab.validate();
  if (object_category_count < 1) throw ConfigError("scenario: need at least one object category");
  if (feature_dim < 1) throw ConfigError("scenario: feature_dim must be >= 1");
  if (noise_sigma < 0.0) throw ConfigError("scenario: noise_sigma must be >= 0");
  if (density < 0.0) throw ConfigError("scenario: density must be >= 0");
  if (min_span < 1) throw ConfigError("scenario: min_span must be >= 1");
  if (max_span != 0 && max_span < min_span) throw ConfigError("scenario: max_span < min_span");
  if (train_fraction < 0.0 || train_fraction > 1.0)
    throw ConfigError("scenario: train_fraction must lie in [0, 1]");
  mask.validate();
}

PlantedEmbeddings PlantedEmbeddings::create(const ScenarioConfig& config) {
  PlantedEmbeddings emb;
  emb.dim = config.feature_dim;
  Rng rng = Rng(config.seed).fork(0xE0);
  auto draw = [&]() {
    std::vector<double> v(static_cast<std::size_t>(config.feature_dim));
    for (double& x : v) x = rng.gaussian();
    return v;
  };
  emb.category.resize(static_cast<std::size_t>(config.object_category_count));
  for (auto& v : emb.category) v = draw();
  emb.predicate.resize(kCategoryCount);
  for (Category c : kAllCategories) {
    auto& table = emb.predicate[static_cast<std::size_t>(c)];
    table.resize(static_cast<std::size_t>(config.vocab.size(c)));
    for (auto& v : table) v = draw();
  }
  return emb;
}

const std::vector<double>& PlantedEmbeddings::predicate_embedding(Category c, int pred) const {
  return predicate[static_cast<std::size_t>(c)][static_cast<std::size_t>(pred)];
}

namespace {

struct TrackSpec {
  int track_id;
  SubjectKind kind;
  int category_id;
  double cx, cy, hw, hh;  // center and half extents
  double vx, vy;          // per-frame drift
};

Box box_at(const TrackSpec& t, int frame) {
  double cx = t.cx + t.vx * frame;
  double cy = t.cy + t.vy * frame;
  cx = std::clamp(cx, t.hw + 0.01, 0.99 - t.hw);
  cy = std::clamp(cy, t.hh + 0.01, 0.99 - t.hh);
  return {cx - t.hw, cy - t.hh, cx + t.hw, cy + t.hh};
}

// (subject, object(-1), category, predicate) -> set of active frame positions
using LabelMap = std::map<std::tuple<int, int, int, int>, std::set<int>>;

void plant_spans(LabelMap& labels, Rng& rng, int subject, int object, Category category,
                 int vocab_size, double density, int frames, int min_span, int max_span) {
  int count = rng.poisson(density);
  for (int s = 0; s < count; ++s) {
    int predicate = rng.uniform_int(0, vocab_size - 1);
    int start = rng.uniform_int(1, frames);
    int hi = max_span == 0 ? frames : max_span;
    int length = rng.uniform_int(std::min(min_span, hi), hi);
    int end = std::min(start + length - 1, frames);
    auto& active = labels[{subject, object, static_cast<int>(category), predicate}];
    for (int t = start; t <= end; ++t) active.insert(t);
  }
}

}  // namespace

GeneratedVideo generate_video(const ScenarioConfig& config, const PlantedEmbeddings& embeddings,
                              std::uint64_t video_stream, const std::string& video_id) {
  config.validate();
  Rng rng = Rng(config.seed).fork(0x100 + video_stream);

  int n = rng.uniform_int(config.min_subjects, config.max_subjects);
  int persons = static_cast<int>(std::lround(n * config.person_ratio));
  persons = std::clamp(persons, 0, n);

  std::vector<TrackSpec> tracks;
  for (int i = 0; i < n; ++i) {
    TrackSpec t;
    t.track_id = i + 1;
    t.kind = i < persons ? SubjectKind::Person : SubjectKind::Object;
    t.category_id = t.kind == SubjectKind::Person
                        ? 0
                        : (config.object_category_count > 1
                               ? rng.uniform_int(1, config.object_category_count - 1)
                               : 0);
    t.hw = rng.uniform(0.04, 0.12);
    t.hh = rng.uniform(0.04, 0.12);
    t.cx = rng.uniform(t.hw + 0.02, 0.98 - t.hw);
    t.cy = rng.uniform(t.hh + 0.02, 0.98 - t.hh);
    t.vx = rng.uniform(-0.015, 0.015);
    t.vy = rng.uniform(-0.015, 0.015);
    tracks.push_back(t);
  }

  LabelMap labels;
  for (const TrackSpec& t : tracks) {
    plant_spans(labels, rng, t.track_id, -1, Category::Appearance, config.vocab.appearances,
                config.density, config.frames, config.min_span, config.max_span);
    plant_spans(labels, rng, t.track_id, -1, Category::Situation, config.vocab.situations,
                config.density, config.frames, config.min_span, config.max_span);
  }
  for (const TrackSpec& s : tracks) {
    for (const TrackSpec& o : tracks) {
      if (s.track_id == o.track_id) continue;
      for (Category c : {Category::Position, Category::Interaction, Category::Relation}) {
        if (!config.mask.allows(c, s.kind, o.kind)) continue;
        plant_spans(labels, rng, s.track_id, o.track_id, c, config.vocab.size(c),
                    config.density, config.frames, config.min_span, config.max_span);
      }
    }
  }

  GeneratedVideo out;
  out.annotations.schema_version = 1;
  out.annotations.video_id = video_id;
  out.annotations.bbox_format = BoxFormat::Normalized;
  out.annotations.vocabulary.sizes = config.vocab;
  out.annotations.vocabulary.object_categories.push_back("person");
  for (int c = 1; c < config.object_category_count; ++c)
    out.annotations.vocabulary.object_categories.push_back("category-" + std::to_string(c));

  out.features.video_id = video_id;
  out.features.dim = config.feature_dim;

  for (int frame = 1; frame <= config.frames; ++frame) {
    FrameRecord record;
    record.frame_index = frame;
    std::map<int, std::vector<double>> frame_features;

    for (const TrackSpec& t : tracks) {
      SegmentInfo seg;
      seg.id = t.track_id;
      seg.category_id = t.category_id;
      seg.kind = t.kind;
      seg.track_id = t.track_id;
      record.segments_info.push_back(seg);

      RegionAnnotation region;
      region.segment_id = t.track_id;
      region.bbox = box_at(t, frame - 1);

      std::vector<double> feature =
          embeddings.category[static_cast<std::size_t>(t.category_id)];
      for (const auto& [key, active] : labels) {
        auto [subject, object, category, predicate] = key;
        if (subject != t.track_id || !active.count(frame)) continue;
        Category cat = static_cast<Category>(category);
        const auto& emb = embeddings.predicate_embedding(cat, predicate);
        for (std::size_t d = 0; d < feature.size(); ++d) feature[d] += emb[d];
        switch (cat) {
          case Category::Appearance: region.appearances.push_back(predicate); break;
          case Category::Situation: region.situations.push_back(predicate); break;
          case Category::Position: region.positions.push_back({object, predicate}); break;
          case Category::Interaction: region.interactions.push_back({object, predicate}); break;
          case Category::Relation: region.relations.push_back({object, predicate}); break;
        }
      }
      if (config.noise_sigma > 0.0)
        for (double& x : feature) x += rng.gaussian(0.0, config.noise_sigma);

      record.annotations.push_back(std::move(region));
      frame_features[t.track_id] = std::move(feature);
    }
    out.annotations.data.push_back(std::move(record));
    out.features.frames.push_back(std::move(frame_features));
  }

  // The canonical planted schedule is the run-length form of the per-frame
  // sets, so overlapping draws of the same key merge exactly as extraction
  // will see them.
  out.planted = extract_ground_truth(out.annotations);
  return out;
}

Manifest generate_dataset(const ScenarioConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "videos", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "videos").string() + ": " + ec.message());

  PlantedEmbeddings embeddings = PlantedEmbeddings::create(config);

  Manifest manifest;
  manifest.seed = config.seed;

  // Per-video RNG streams derive from the master seed, so parallel generation
  // cannot change the output.
  std::vector<GeneratedVideo> generated(static_cast<std::size_t>(config.videos));
  parallel_for(static_cast<std::size_t>(config.videos), [&](std::size_t v) {
    char id_buf[32];
    std::snprintf(id_buf, sizeof id_buf, "video-%03zu", v);
    generated[v] = generate_video(config, embeddings, static_cast<std::uint64_t>(v), id_buf);
  });

  for (int v = 0; v < config.videos; ++v) {
    GeneratedVideo& video = generated[static_cast<std::size_t>(v)];
    if (v == 0) manifest.vocabulary = video.annotations.vocabulary;

    ManifestVideo mv;
    mv.id = video.annotations.video_id;
    mv.annotations_path = "videos/" + mv.id + ".annotations.json";
    mv.features_path = "videos/" + mv.id + ".features.json";
    mv.frames = video.annotations.frame_count();
    mv.subjects = video.annotations.data.empty()
                      ? 0
                      : static_cast<int>(video.annotations.data[0].segments_info.size());
    write_file(out_dir / mv.annotations_path, write_annotations(video.annotations));
    write_file(out_dir / mv.features_path, write_features(video.features));
    manifest.videos.push_back(std::move(mv));
  }

  int train_count = static_cast<int>(std::lround(config.videos * config.train_fraction));
  train_count = std::clamp(train_count, 0, config.videos);
  for (int v = 0; v < config.videos; ++v) {
    const std::string& id = manifest.videos[static_cast<std::size_t>(v)].id;
    (v < train_count ? manifest.train_ids : manifest.val_ids).push_back(id);
  }

  write_file(out_dir / "manifest.json", write_manifest(manifest));
  return manifest;
}

}  // namespace hig
