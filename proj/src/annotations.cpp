#include "hig/annotations.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "hig/error.hpp"

namespace hig {

using nlohmann::json;

namespace {

// Known keys per object level; everything else is preserved in `extra`.
const std::set<std::string> kFileKeys = {"schema_version", "video_id",   "fps",
                                         "bbox_format",    "width",      "height",
                                         "vocabulary",     "data"};
const std::set<std::string> kFrameKeys = {"frame_index", "segments_info", "annotations"};
const std::set<std::string> kSegmentKeys = {"id", "category_id", "kind", "track_id"};
const std::set<std::string> kAnnotationKeys = {"segment_id",   "bbox",        "mask",
                                               "appearances",  "situations",  "positions",
                                               "interactions", "relations"};

json extra_of(const json& obj, const std::set<std::string>& known) {
  json extra = json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key())) extra[it.key()] = it.value();
  return extra;
}

[[noreturn]] void schema_fail(const std::string& where, const std::string& what) {
  throw SchemaError("annotation schema: " + where + ": " + what);
}

int require_int(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(where, "missing field '" + key + "'");
  if (!it->is_number_integer()) schema_fail(where, "field '" + key + "' must be an integer");
  return it->get<int>();
}

double require_number(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(where, "missing field '" + key + "'");
  if (!it->is_number()) schema_fail(where, "field '" + key + "' must be a number");
  return it->get<double>();
}

std::string require_string(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(where, "missing field '" + key + "'");
  if (!it->is_string()) schema_fail(where, "field '" + key + "' must be a string");
  return it->get<std::string>();
}

const json& require_array(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(where, "missing field '" + key + "'");
  if (!it->is_array()) schema_fail(where, "field '" + key + "' must be an array");
  return *it;
}

std::vector<int> int_list(const json& arr, const std::string& where) {
  std::vector<int> out;
  out.reserve(arr.size());
  for (const json& v : arr) {
    if (!v.is_number_integer()) schema_fail(where, "expected integer predicate ids");
    out.push_back(v.get<int>());
  }
  return out;
}

std::vector<RegionAnnotation::PairRef> pair_list(const json& arr, const std::string& where) {
  std::vector<RegionAnnotation::PairRef> out;
  out.reserve(arr.size());
  for (const json& v : arr) {
    if (!v.is_object()) schema_fail(where, "expected {target, predicate} objects");
    out.push_back({require_int(v, "target", where), require_int(v, "predicate", where)});
  }
  return out;
}

Box parse_box(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.size() != 4) schema_fail(where, "bbox must be [x1, y1, x2, y2]");
  for (const json& v : arr)
    if (!v.is_number()) schema_fail(where, "bbox entries must be numbers");
  return {arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(),
          arr[3].get<double>()};
}

AnnotationFile parse_structural(const std::string& bytes) {
  json root;
  try {
    root = json::parse(bytes);
  } catch (const json::parse_error& err) {
    throw ParseError(std::string("annotation JSON: ") + err.what(), err.byte);
  }
  if (!root.is_object()) throw SchemaError("annotation schema: top level must be an object");

  AnnotationFile file;
  file.extra = extra_of(root, kFileKeys);
  file.schema_version = require_int(root, "schema_version", "file header");
  file.video_id = require_string(root, "video_id", "file header");
  if (root.contains("fps")) {
    double fps = require_number(root, "fps", "file header");
    if (fps <= 0.0) schema_fail("file header", "fps must be positive");
    file.fps = fps;
  }
  std::string fmt = root.contains("bbox_format")
                        ? require_string(root, "bbox_format", "file header")
                        : "normalized";
  if (fmt == "normalized")
    file.bbox_format = BoxFormat::Normalized;
  else if (fmt == "pixels")
    file.bbox_format = BoxFormat::Pixels;
  else
    schema_fail("file header", "bbox_format must be 'normalized' or 'pixels'");
  if (root.contains("width")) file.width = require_number(root, "width", "file header");
  if (root.contains("height")) file.height = require_number(root, "height", "file header");
  if (file.bbox_format == BoxFormat::Pixels && (!file.width || !file.height))
    schema_fail("file header", "pixel boxes need width and height");

  auto vit = root.find("vocabulary");
  if (vit == root.end() || !vit->is_object())
    schema_fail("file header", "missing 'vocabulary' block");
  const json& vocab = *vit;
  file.vocabulary.sizes.appearances = require_int(vocab, "appearances", "vocabulary");
  file.vocabulary.sizes.situations = require_int(vocab, "situations", "vocabulary");
  file.vocabulary.sizes.positions = require_int(vocab, "positions", "vocabulary");
  file.vocabulary.sizes.interactions = require_int(vocab, "interactions", "vocabulary");
  file.vocabulary.sizes.relations = require_int(vocab, "relations", "vocabulary");
  for (const json& name : require_array(vocab, "object_categories", "vocabulary")) {
    if (!name.is_string()) schema_fail("vocabulary", "object_categories must be strings");
    file.vocabulary.object_categories.push_back(name.get<std::string>());
  }

  const json& data = require_array(root, "data", "file");
  int prev_index = 0;
  bool first = true;
  for (const json& frame_json : data) {
    if (!frame_json.is_object()) schema_fail("data", "frame records must be objects");
    FrameRecord frame;
    frame.extra = extra_of(frame_json, kFrameKeys);
    frame.frame_index = require_int(frame_json, "frame_index", "frame record");
    std::string where = "frame " + std::to_string(frame.frame_index);
    if (!first && frame.frame_index <= prev_index)
      schema_fail(where, "frame_index must be strictly increasing");
    first = false;
    prev_index = frame.frame_index;

    for (const json& seg : require_array(frame_json, "segments_info", where)) {
      if (!seg.is_object()) schema_fail(where, "segments_info entries must be objects");
      SegmentInfo info;
      info.extra = extra_of(seg, kSegmentKeys);
      info.id = require_int(seg, "id", where + " segments_info");
      info.category_id = require_int(seg, "category_id", where + " segments_info");
      info.track_id = require_int(seg, "track_id", where + " segments_info");
      info.kind = kind_from_name(require_string(seg, "kind", where + " segments_info"));
      frame.segments_info.push_back(std::move(info));
    }

    for (const json& ann : require_array(frame_json, "annotations", where)) {
      if (!ann.is_object()) schema_fail(where, "annotations entries must be objects");
      RegionAnnotation region;
      region.extra = extra_of(ann, kAnnotationKeys);
      region.segment_id = require_int(ann, "segment_id", where + " annotations");
      if (!ann.contains("bbox")) schema_fail(where + " annotations", "missing field 'bbox'");
      region.bbox = parse_box(ann.at("bbox"), where + " annotations");
      if (ann.contains("mask")) region.mask = ann.at("mask");
      std::string ann_where = where + " annotations";
      region.appearances = int_list(require_array(ann, "appearances", ann_where), ann_where);
      region.situations = int_list(require_array(ann, "situations", ann_where), ann_where);
      region.positions = pair_list(require_array(ann, "positions", ann_where), ann_where);
      region.interactions = pair_list(require_array(ann, "interactions", ann_where), ann_where);
      region.relations = pair_list(require_array(ann, "relations", ann_where), ann_where);
      frame.annotations.push_back(std::move(region));
    }
    file.data.push_back(std::move(frame));
  }
  return file;
}

}  // namespace

std::pair<AnnotationFile, std::vector<Violation>> parse_annotations_report(
    const std::string& bytes) {
  AnnotationFile file = parse_structural(bytes);
  return {file, validate(file)};
}

AnnotationFile parse_annotations(const std::string& bytes) {
  auto [file, violations] = parse_annotations_report(bytes);
  if (!violations.empty()) {
    const Violation& v = violations.front();
    throw SchemaError("annotation validation: [" + v.code + "] " + v.message +
                      (violations.size() > 1
                           ? " (and " + std::to_string(violations.size() - 1) + " more)"
                           : ""));
  }
  return file;
}

namespace {

json merge_extra(json obj, const json& extra) {
  if (extra.is_object())
    for (auto it = extra.begin(); it != extra.end(); ++it) obj[it.key()] = it.value();
  return obj;
}

json box_to_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

json pairs_to_json(const std::vector<RegionAnnotation::PairRef>& pairs) {
  json arr = json::array();
  for (const auto& p : pairs) arr.push_back({{"target", p.target_track}, {"predicate", p.predicate}});
  return arr;
}

}  // namespace

std::string write_annotations(const AnnotationFile& file) {
  json root = json::object();
  root["schema_version"] = file.schema_version;
  root["video_id"] = file.video_id;
  if (file.fps) root["fps"] = *file.fps;
  root["bbox_format"] = file.bbox_format == BoxFormat::Normalized ? "normalized" : "pixels";
  if (file.width) root["width"] = *file.width;
  if (file.height) root["height"] = *file.height;
  json vocab = json::object();
  vocab["appearances"] = file.vocabulary.sizes.appearances;
  vocab["situations"] = file.vocabulary.sizes.situations;
  vocab["positions"] = file.vocabulary.sizes.positions;
  vocab["interactions"] = file.vocabulary.sizes.interactions;
  vocab["relations"] = file.vocabulary.sizes.relations;
  vocab["object_categories"] = file.vocabulary.object_categories;
  root["vocabulary"] = std::move(vocab);

  json data = json::array();
  for (const FrameRecord& frame : file.data) {
    json fj = json::object();
    fj["frame_index"] = frame.frame_index;
    json segs = json::array();
    for (const SegmentInfo& seg : frame.segments_info) {
      json sj = json::object();
      sj["id"] = seg.id;
      sj["category_id"] = seg.category_id;
      sj["kind"] = kind_name(seg.kind);
      sj["track_id"] = seg.track_id;
      segs.push_back(merge_extra(std::move(sj), seg.extra));
    }
    fj["segments_info"] = std::move(segs);
    json anns = json::array();
    for (const RegionAnnotation& region : frame.annotations) {
      json aj = json::object();
      aj["segment_id"] = region.segment_id;
      aj["bbox"] = box_to_json(region.bbox);
      if (!region.mask.is_null()) aj["mask"] = region.mask;
      aj["appearances"] = region.appearances;
      aj["situations"] = region.situations;
      aj["positions"] = pairs_to_json(region.positions);
      aj["interactions"] = pairs_to_json(region.interactions);
      aj["relations"] = pairs_to_json(region.relations);
      anns.push_back(merge_extra(std::move(aj), region.extra));
    }
    fj["annotations"] = std::move(anns);
    data.push_back(merge_extra(std::move(fj), frame.extra));
  }
  root["data"] = std::move(data);
  root = merge_extra(std::move(root), file.extra);
  return root.dump(2) + "\n";
}

std::vector<Violation> validate(const AnnotationFile& file) {
  std::vector<Violation> out;
  auto report = [&](const std::string& code, int frame, const std::string& field,
                    const std::string& message) {
    out.push_back({code, message, frame, field});
  };

  // (track -> first-seen kind/category) must stay constant across the video
  std::map<int, std::pair<SubjectKind, int>> track_identity;
  const VocabSizes& sizes = file.vocabulary.sizes;
  int object_category_count = static_cast<int>(file.vocabulary.object_categories.size());

  for (const FrameRecord& frame : file.data) {
    std::string at = "frame " + std::to_string(frame.frame_index);
    std::map<int, const SegmentInfo*> segments_by_id;
    std::set<int> tracks_in_frame;
    std::set<int> segment_ids;

    for (const SegmentInfo& seg : frame.segments_info) {
      if (!segment_ids.insert(seg.id).second)
        report("duplicate segment", frame.frame_index, "segments_info",
               at + ": duplicate segment id " + std::to_string(seg.id));
      segments_by_id[seg.id] = &seg;
      if (!tracks_in_frame.insert(seg.track_id).second)
        report("duplicate track", frame.frame_index, "segments_info",
               at + ": track " + std::to_string(seg.track_id) + " appears twice");
      if (object_category_count > 0 &&
          (seg.category_id < 0 || seg.category_id >= object_category_count))
        report("out of vocabulary", frame.frame_index, "category_id",
               at + ": category_id " + std::to_string(seg.category_id) +
                   " outside object vocabulary of size " +
                   std::to_string(object_category_count));
      auto [it, inserted] =
          track_identity.try_emplace(seg.track_id, std::make_pair(seg.kind, seg.category_id));
      if (!inserted) {
        if (it->second.first != seg.kind)
          report("kind flip", frame.frame_index, "kind",
                 at + ": track " + std::to_string(seg.track_id) + " changes kind to " +
                     kind_name(seg.kind));
        if (it->second.second != seg.category_id)
          report("category flip", frame.frame_index, "category_id",
                 at + ": track " + std::to_string(seg.track_id) + " changes category to " +
                     std::to_string(seg.category_id));
      }
    }

    std::set<int> annotated_segments;
    for (const RegionAnnotation& region : frame.annotations) {
      if (!segments_by_id.count(region.segment_id)) {
        report("unknown segment", frame.frame_index, "segment_id",
               at + ": annotation references unknown segment " +
                   std::to_string(region.segment_id));
        continue;
      }
      if (!annotated_segments.insert(region.segment_id).second)
        report("duplicate annotation", frame.frame_index, "segment_id",
               at + ": segment " + std::to_string(region.segment_id) + " annotated twice");

      const Box& b = region.bbox;
      if (!b.well_ordered())
        report("box ordering", frame.frame_index, "bbox",
               at + ": bbox of segment " + std::to_string(region.segment_id) +
                   " is not well-ordered");
      else if (file.bbox_format == BoxFormat::Normalized && !b.normalized())
        report("box range", frame.frame_index, "bbox",
               at + ": normalized bbox of segment " + std::to_string(region.segment_id) +
                   " leaves [0,1]");

      auto check_preds = [&](const std::vector<int>& preds, int vocab_size,
                             const char* field) {
        for (int p : preds)
          if (p < 0 || p >= vocab_size)
            report("out of vocabulary", frame.frame_index, field,
                   at + ": " + field + " predicate " + std::to_string(p) +
                       " outside vocabulary of size " + std::to_string(vocab_size));
      };
      check_preds(region.appearances, sizes.appearances, "appearances");
      check_preds(region.situations, sizes.situations, "situations");

      auto check_pairs = [&](const std::vector<RegionAnnotation::PairRef>& pairs,
                             int vocab_size, const char* field) {
        for (const auto& pr : pairs) {
          if (pr.predicate < 0 || pr.predicate >= vocab_size)
            report("out of vocabulary", frame.frame_index, field,
                   at + ": " + field + " predicate " + std::to_string(pr.predicate) +
                       " outside vocabulary of size " + std::to_string(vocab_size));
          if (!tracks_in_frame.count(pr.target_track))
            report("unknown target track", frame.frame_index, field,
                   at + ": " + field + " targets unknown track " +
                       std::to_string(pr.target_track));
        }
      };
      check_pairs(region.positions, sizes.positions, "positions");
      check_pairs(region.interactions, sizes.interactions, "interactions");
      check_pairs(region.relations, sizes.relations, "relations");
    }
  }
  return out;
}

std::vector<GroundTruthTriplet> extract_ground_truth(const AnnotationFile& file) {
  // (subject, object(-1 for none), category, predicate) -> active positions
  using Key = std::tuple<int, int, int, int>;
  std::map<Key, std::vector<int>> active;

  for (std::size_t pos = 0; pos < file.data.size(); ++pos) {
    const FrameRecord& frame = file.data[pos];
    std::map<int, int> segment_track;
    for (const SegmentInfo& seg : frame.segments_info) segment_track[seg.id] = seg.track_id;
    int position = static_cast<int>(pos) + 1;
    for (const RegionAnnotation& region : frame.annotations) {
      auto it = segment_track.find(region.segment_id);
      if (it == segment_track.end()) continue;
      int subject = it->second;
      for (int p : region.appearances)
        active[{subject, -1, static_cast<int>(Category::Appearance), p}].push_back(position);
      for (int p : region.situations)
        active[{subject, -1, static_cast<int>(Category::Situation), p}].push_back(position);
      for (const auto& pr : region.positions)
        active[{subject, pr.target_track, static_cast<int>(Category::Position), pr.predicate}]
            .push_back(position);
      for (const auto& pr : region.interactions)
        active[{subject, pr.target_track, static_cast<int>(Category::Interaction), pr.predicate}]
            .push_back(position);
      for (const auto& pr : region.relations)
        active[{subject, pr.target_track, static_cast<int>(Category::Relation), pr.predicate}]
            .push_back(position);
    }
  }

  std::vector<GroundTruthTriplet> out;
  for (auto& [key, positions] : active) {
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    auto [subject, object, category, predicate] = key;
    int run_start = positions[0];
    int prev = positions[0];
    auto flush = [&](int end) {
      GroundTruthTriplet t;
      t.subject_track = subject;
      if (object >= 0) t.object_track = object;
      t.category = static_cast<Category>(category);
      t.predicate = predicate;
      t.t1 = run_start;
      t.t2 = end;
      out.push_back(t);
    };
    for (std::size_t i = 1; i < positions.size(); ++i) {
      if (positions[i] == prev + 1) {
        prev = positions[i];
        continue;
      }
      flush(prev);
      run_start = prev = positions[i];
    }
    flush(prev);
  }
  std::sort(out.begin(), out.end(), [](const GroundTruthTriplet& a, const GroundTruthTriplet& b) {
    return a.key() < b.key();
  });
  return out;
}

AnnotationFile subsample_frames(const AnnotationFile& file, int rate) {
  if (rate < 1) throw ConfigError("sampling rate must be >= 1");
  AnnotationFile out = file;
  out.data.clear();
  for (std::size_t pos = 0; pos < file.data.size(); ++pos) {
    if (pos % static_cast<std::size_t>(rate) != 0) continue;
    FrameRecord frame = file.data[pos];
    frame.frame_index = static_cast<int>(out.data.size()) + 1;
    out.data.push_back(std::move(frame));
  }
  return out;
}

}  // namespace hig
