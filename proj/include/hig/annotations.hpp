#pragma once

#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hig/classifier.hpp"
#include "hig/graph.hpp"

namespace hig {

struct VocabularyBlock {
  std::vector<std::string> object_categories;
  VocabSizes sizes;
};

// One subject's annotation inside one frame. Descriptor predicate ids are
// 0-based into the file's declared vocabularies; the mask payload is carried
// opaquely and never interpreted.
struct RegionAnnotation {
  int segment_id = 0;
  Box bbox;
  nlohmann::json mask;  // null when absent
  std::vector<int> appearances;
  std::vector<int> situations;
  struct PairRef {
    int target_track = 0;
    int predicate = 0;
    bool operator==(const PairRef&) const = default;
  };
  std::vector<PairRef> positions;
  std::vector<PairRef> interactions;
  std::vector<PairRef> relations;
  nlohmann::json extra;  // unknown fields, preserved for round-trip
};

struct SegmentInfo {
  int id = 0;
  int category_id = 0;
  SubjectKind kind = SubjectKind::Object;
  int track_id = 0;
  nlohmann::json extra;
};

struct FrameRecord {
  int frame_index = 0;  // raw value; strictly increasing across records
  std::vector<SegmentInfo> segments_info;
  std::vector<RegionAnnotation> annotations;
  nlohmann::json extra;
};

enum class BoxFormat { Normalized, Pixels };

struct AnnotationFile {
  int schema_version = 1;
  std::string video_id;
  std::optional<double> fps;
  BoxFormat bbox_format = BoxFormat::Normalized;
  std::optional<double> width;   // required for pixel boxes
  std::optional<double> height;
  VocabularyBlock vocabulary;
  std::vector<FrameRecord> data;
  nlohmann::json extra;

  int frame_count() const { return static_cast<int>(data.size()); }
};

struct Violation {
  std::string code;     // e.g. "kind flip", "out of vocabulary"
  std::string message;  // human-readable, names frame and field
  int frame_index = -1;
  std::string field;
};

// Strict parse: malformed JSON throws ParseError (with byte offset), shape or
// type problems throw SchemaError, and any semantic violation (see validate)
// is raised as a SchemaError naming frame and field.
AnnotationFile parse_annotations(const std::string& bytes);

// Structural parse only; semantic findings are returned, not thrown.
std::pair<AnnotationFile, std::vector<Violation>> parse_annotations_report(
    const std::string& bytes);

// Canonical JSON: sorted keys, round-trip-exact number formatting, 2-space
// indent. Output is diff-stable for identical inputs.
std::string write_annotations(const AnnotationFile& file);

// Semantic checks: track consistency, vocabulary bounds, box ordering,
// referential integrity. Violations are data, not errors.
std::vector<Violation> validate(const AnnotationFile& file);

// Span-form ground truth triplet over normalized frame positions (1-based).
struct GroundTruthTriplet {
  int subject_track = 0;
  std::optional<int> object_track;
  Category category = Category::Appearance;
  int predicate = 0;
  int t1 = 1;
  int t2 = 1;

  bool operator==(const GroundTruthTriplet&) const = default;
  auto key() const {
    return std::make_tuple(subject_track, object_track.value_or(-1),
                           static_cast<int>(category), predicate, t1, t2);
  }
};

// Per (subject, object?, category, predicate): maximal contiguous frame runs
// become spans. Sorted by key for determinism.
std::vector<GroundTruthTriplet> extract_ground_truth(const AnnotationFile& file);

// Keeps frames whose 1-based position p satisfies (p - 1) % rate == 0, then
// reindexes frame_index contiguously from 1.
AnnotationFile subsample_frames(const AnnotationFile& file, int rate);

}  // namespace hig
