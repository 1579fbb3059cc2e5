#include "hig/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hig/error.hpp"

namespace hig {

using nlohmann::json;

FeatureTable parse_features(const std::string& bytes) {
  json root;
  try {
    root = json::parse(bytes);
  } catch (const json::parse_error& err) {
    throw ParseError(std::string("feature JSON: ") + err.what(), err.byte);
  }
  if (!root.is_object() || !root.contains("frames"))
    throw SchemaError("feature file: expected object with 'frames'");
  FeatureTable table;
  table.video_id = root.value("video_id", std::string());
  table.dim = root.value("dim", 0);
  for (const json& fj : root.at("frames")) {
    if (!fj.is_object() || !fj.contains("features"))
      throw SchemaError("feature file: frame entries need a 'features' map");
    std::map<int, std::vector<double>> frame;
    for (auto it = fj.at("features").begin(); it != fj.at("features").end(); ++it) {
      int track = 0;
      try {
        track = std::stoi(it.key());
      } catch (...) {
        throw SchemaError("feature file: track keys must be integers, got '" + it.key() + "'");
      }
      if (!it.value().is_array())
        throw SchemaError("feature file: features must be arrays of numbers");
      std::vector<double> vec;
      vec.reserve(it.value().size());
      for (const json& v : it.value()) {
        if (!v.is_number()) throw SchemaError("feature file: non-numeric feature entry");
        vec.push_back(v.get<double>());
      }
      if (table.dim == 0) table.dim = static_cast<int>(vec.size());
      if (static_cast<int>(vec.size()) != table.dim)
        throw SchemaError("feature file: track " + it.key() + " has length " +
                          std::to_string(vec.size()) + ", expected " +
                          std::to_string(table.dim));
      frame[track] = std::move(vec);
    }
    table.frames.push_back(std::move(frame));
  }
  return table;
}

std::string write_features(const FeatureTable& table) {
  json root = json::object();
  root["schema_version"] = 1;
  root["video_id"] = table.video_id;
  root["dim"] = table.dim;
  json frames = json::array();
  for (std::size_t pos = 0; pos < table.frames.size(); ++pos) {
    json fj = json::object();
    fj["frame_index"] = static_cast<int>(pos) + 1;
    json feats = json::object();
    for (const auto& [track, vec] : table.frames[pos]) feats[std::to_string(track)] = vec;
    fj["features"] = std::move(feats);
    frames.push_back(std::move(fj));
  }
  root["frames"] = std::move(frames);
  return root.dump(2) + "\n";
}

FeatureTable subsample_features(const FeatureTable& table, int rate) {
  if (rate < 1) throw ConfigError("sampling rate must be >= 1");
  FeatureTable out;
  out.video_id = table.video_id;
  out.dim = table.dim;
  for (std::size_t pos = 0; pos < table.frames.size(); ++pos)
    if (pos % static_cast<std::size_t>(rate) == 0) out.frames.push_back(table.frames[pos]);
  return out;
}

std::vector<FrameSubjects> assemble_frames(const AnnotationFile& annotations,
                                           const FeatureTable& features) {
  if (features.frames.size() != annotations.data.size())
    throw SchemaError("feature table has " + std::to_string(features.frames.size()) +
                      " frames, annotations have " + std::to_string(annotations.data.size()));
  double w = annotations.width.value_or(1.0);
  double h = annotations.height.value_or(1.0);
  bool pixels = annotations.bbox_format == BoxFormat::Pixels;

  std::vector<FrameSubjects> out(annotations.data.size());
  for (std::size_t pos = 0; pos < annotations.data.size(); ++pos) {
    const FrameRecord& frame = annotations.data[pos];
    const auto& feats = features.frames[pos];
    std::map<int, const RegionAnnotation*> region_by_segment;
    for (const RegionAnnotation& region : frame.annotations)
      region_by_segment[region.segment_id] = &region;
    for (const SegmentInfo& seg : frame.segments_info) {
      SubjectNode node;
      node.track_id = seg.track_id;
      node.kind = seg.kind;
      node.category_id = seg.category_id;
      node.box = {0.0, 0.0, 1.0, 1.0};  // full frame when no region is annotated
      auto rit = region_by_segment.find(seg.id);
      if (rit != region_by_segment.end()) {
        Box b = rit->second->bbox;
        if (pixels) b = {b.x1 / w, b.y1 / h, b.x2 / w, b.y2 / h};
        node.box = b;
      }
      auto fit = feats.find(seg.track_id);
      if (fit == feats.end())
        throw SchemaError("video " + annotations.video_id + " frame " +
                          std::to_string(frame.frame_index) + ": no feature for track " +
                          std::to_string(seg.track_id));
      node.feature = fit->second;
      out[pos].push_back(std::move(node));
    }
  }
  return out;
}

std::string write_manifest(const Manifest& manifest) {
  json root = json::object();
  root["schema_version"] = manifest.schema_version;
  root["seed"] = manifest.seed;
  json vocab = json::object();
  vocab["appearances"] = manifest.vocabulary.sizes.appearances;
  vocab["situations"] = manifest.vocabulary.sizes.situations;
  vocab["positions"] = manifest.vocabulary.sizes.positions;
  vocab["interactions"] = manifest.vocabulary.sizes.interactions;
  vocab["relations"] = manifest.vocabulary.sizes.relations;
  vocab["object_categories"] = manifest.vocabulary.object_categories;
  root["vocabulary"] = std::move(vocab);
  json videos = json::array();
  for (const ManifestVideo& v : manifest.videos) {
    json vj = json::object();
    vj["id"] = v.id;
    vj["annotations"] = v.annotations_path;
    vj["features"] = v.features_path;
    vj["frames"] = v.frames;
    vj["subjects"] = v.subjects;
    videos.push_back(std::move(vj));
  }
  root["videos"] = std::move(videos);
  root["splits"] = {{"train", manifest.train_ids}, {"val", manifest.val_ids}};
  return root.dump(2) + "\n";
}

Manifest parse_manifest(const std::string& bytes) {
  json root;
  try {
    root = json::parse(bytes);
  } catch (const json::parse_error& err) {
    throw ParseError(std::string("manifest JSON: ") + err.what(), err.byte);
  }
  if (!root.is_object()) throw SchemaError("manifest: top level must be an object");
  Manifest m;
  m.schema_version = root.value("schema_version", 1);
  m.seed = root.value("seed", 0ULL);
  if (!root.contains("vocabulary")) throw SchemaError("manifest: missing vocabulary");
  const json& vocab = root.at("vocabulary");
  m.vocabulary.sizes.appearances = vocab.value("appearances", 0);
  m.vocabulary.sizes.situations = vocab.value("situations", 0);
  m.vocabulary.sizes.positions = vocab.value("positions", 0);
  m.vocabulary.sizes.interactions = vocab.value("interactions", 0);
  m.vocabulary.sizes.relations = vocab.value("relations", 0);
  if (vocab.contains("object_categories"))
    for (const json& name : vocab.at("object_categories"))
      m.vocabulary.object_categories.push_back(name.get<std::string>());
  if (!root.contains("videos")) throw SchemaError("manifest: missing videos");
  for (const json& vj : root.at("videos")) {
    ManifestVideo v;
    v.id = vj.at("id").get<std::string>();
    v.annotations_path = vj.at("annotations").get<std::string>();
    v.features_path = vj.at("features").get<std::string>();
    v.frames = vj.value("frames", 0);
    v.subjects = vj.value("subjects", 0);
    m.videos.push_back(std::move(v));
  }
  if (root.contains("splits")) {
    const json& splits = root.at("splits");
    if (splits.contains("train"))
      for (const json& id : splits.at("train")) m.train_ids.push_back(id.get<std::string>());
    if (splits.contains("val"))
      for (const json& id : splits.at("val")) m.val_ids.push_back(id.get<std::string>());
  }
  return m;
}

const DatasetVideo* Dataset::find(const std::string& id) const {
  for (const DatasetVideo& v : videos)
    if (v.id == id) return &v;
  return nullptr;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
  if (!out) throw IoError("short write to " + path.string());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::filesystem::path manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw IoError("no manifest.json under " + dir.string());
  Dataset ds;
  ds.manifest = parse_manifest(read_file(manifest_path));
  for (const ManifestVideo& mv : ds.manifest.videos) {
    DatasetVideo video;
    video.id = mv.id;
    video.annotations = parse_annotations(read_file(dir / mv.annotations_path));
    video.features = parse_features(read_file(dir / mv.features_path));
    ds.videos.push_back(std::move(video));
  }
  return ds;
}

}  // namespace hig
