#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "axleval/errors.hpp"
#include "axleval/types.hpp"

namespace axleval {

/// Intersection over union of two normalized boxes. Both must have
/// positive area.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  if (a.area() <= 0.0 || b.area() <= 0.0) {
    throw ValidationError("iou requires boxes with positive area");
  }
  const double ix = std::max(0.0, std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min()));
  const double iy = std::max(0.0, std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min()));
  const double intersection = ix * iy;
  const double uni = a.area() + b.area() - intersection;
  return intersection / uni;
}

/// One matched (detection, ground truth) pair and the IoU that linked them.
struct MatchedPair {
  std::size_t detection_index = 0;     // index into the ImageRecord's detections
  std::size_t ground_truth_index = 0;  // index into the ImageRecord's ground_truth
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;
  std::vector<std::size_t> unmatched_detections;
  std::vector<std::size_t> unmatched_ground_truth;
};

/// Greedy detection-to-ground-truth matching for one image and one category.
///
/// Detections of the category with confidence >= confidence_threshold are
/// visited in order of descending confidence (ties keep file order). Each
/// claims the still-unmatched ground-truth box of highest IoU, provided that
/// IoU >= iou_threshold; IoU ties go to the lowest ground-truth index.
/// Matched pairs count as TP, leftover detections as FP, leftover ground
/// truth as FN.
inline std::pair<MatchResult, ConfusionCounts> match_image(const ImageRecord& rec,
                                                           int category_id,
                                                           double iou_threshold,
                                                           double confidence_threshold) {
  if (iou_threshold <= 0.0 || iou_threshold > 1.0) {
    throw ValidationError("iou_threshold must be in (0, 1]");
  }
  if (confidence_threshold < 0.0 || confidence_threshold > 1.0) {
    throw ValidationError("confidence_threshold must be in [0, 1]");
  }

  std::vector<std::size_t> gt_indices;
  for (std::size_t i = 0; i < rec.ground_truth.size(); ++i) {
    if (rec.ground_truth[i].category_id == category_id) gt_indices.push_back(i);
  }
  std::vector<std::size_t> det_indices;
  for (std::size_t i = 0; i < rec.detections.size(); ++i) {
    const Detection& det = rec.detections[i];
    if (det.category_id == category_id && det.confidence >= confidence_threshold) {
      det_indices.push_back(i);
    }
  }
  std::stable_sort(det_indices.begin(), det_indices.end(),
                   [&](std::size_t a, std::size_t b) {
                     return rec.detections[a].confidence > rec.detections[b].confidence;
                   });

  MatchResult result;
  std::vector<bool> gt_taken(gt_indices.size(), false);
  for (const std::size_t det_idx : det_indices) {
    double best_iou = 0.0;
    std::size_t best_slot = gt_indices.size();
    for (std::size_t slot = 0; slot < gt_indices.size(); ++slot) {
      if (gt_taken[slot]) continue;
      const double overlap =
          iou(rec.detections[det_idx].box, rec.ground_truth[gt_indices[slot]].box);
      if (overlap > best_iou) {
        best_iou = overlap;
        best_slot = slot;
      }
    }
    if (best_slot < gt_indices.size() && best_iou >= iou_threshold) {
      gt_taken[best_slot] = true;
      result.pairs.push_back({det_idx, gt_indices[best_slot], best_iou});
    } else {
      result.unmatched_detections.push_back(det_idx);
    }
  }
  for (std::size_t slot = 0; slot < gt_indices.size(); ++slot) {
    if (!gt_taken[slot]) result.unmatched_ground_truth.push_back(gt_indices[slot]);
  }

  ConfusionCounts counts;
  counts.tp = static_cast<std::int64_t>(result.pairs.size());
  counts.fp = static_cast<std::int64_t>(result.unmatched_detections.size());
  counts.fn = static_cast<std::int64_t>(result.unmatched_ground_truth.size());
  return {std::move(result), counts};
}

/// Component-wise sum of per-image tallies.
inline ConfusionCounts accumulate_counts(std::span<const ConfusionCounts> per_image) {
  return std::accumulate(per_image.begin(), per_image.end(), ConfusionCounts{});
}

}  // namespace axleval
