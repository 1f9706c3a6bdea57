#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "axleval/errors.hpp"

namespace axleval {

/// Axis-aligned box in normalized center/size coordinates.
/// Invariants: 0 <= cx,cy <= 1 and 0 < w,h <= 1.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x_min() const noexcept { return cx - w / 2.0; }
  double x_max() const noexcept { return cx + w / 2.0; }
  double y_min() const noexcept { return cy - h / 2.0; }
  double y_max() const noexcept { return cy + h / 2.0; }
  double area() const noexcept { return w * h; }

  bool operator==(const BoundingBox&) const = default;
};

/// Clamps a box to the unit square and returns it re-expressed in
/// center/size form. Boxes already inside come back unchanged, so the
/// operation is idempotent and round-trip safe. Throws ValidationError when
/// nothing is left.
inline BoundingBox clip_to_unit_square(const BoundingBox& b) {
  if (b.w > 0.0 && b.h > 0.0 && b.x_min() >= 0.0 && b.x_max() <= 1.0 && b.y_min() >= 0.0 &&
      b.y_max() <= 1.0) {
    return b;
  }
  const double x1 = std::clamp(b.x_min(), 0.0, 1.0);
  const double x2 = std::clamp(b.x_max(), 0.0, 1.0);
  const double y1 = std::clamp(b.y_min(), 0.0, 1.0);
  const double y2 = std::clamp(b.y_max(), 0.0, 1.0);
  BoundingBox out{(x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1};
  if (out.w <= 0.0 || out.h <= 0.0) {
    throw ValidationError("box has zero area after clipping to unit square");
  }
  return out;
}

struct GroundTruthObject {
  int category_id = 0;
  BoundingBox box;

  bool operator==(const GroundTruthObject&) const = default;
};

struct Detection {
  int category_id = 0;
  double confidence = 0.0;  // in [0, 1]
  BoundingBox box;

  bool operator==(const Detection&) const = default;
};

/// Per-image ground truth plus scored detections, keyed by image id.
struct ImageRecord {
  std::string image_id;
  std::vector<GroundTruthObject> ground_truth;
  std::vector<Detection> detections;
  std::optional<int> width;   // provenance only
  std::optional<int> height;  // provenance only

  bool operator==(const ImageRecord&) const = default;
};

struct Dataset {
  std::string name;
  std::map<int, std::string> categories;  // category_id -> label
  std::vector<ImageRecord> images;        // sorted by image_id on load

  bool operator==(const Dataset&) const = default;
};

struct DatasetStats {
  std::size_t image_count = 0;
  std::map<int, std::size_t> object_count_per_category;

  std::size_t total_objects() const noexcept {
    std::size_t n = 0;
    for (const auto& [id, count] : object_count_per_category) n += count;
    return n;
  }

  bool operator==(const DatasetStats&) const = default;
};

/// TP/FP/FN tallies; the bridge between matching and the scalar metrics.
struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }

  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) noexcept {
    a += b;
    return a;
  }

  bool operator==(const ConfusionCounts&) const = default;
};

}  // namespace axleval
