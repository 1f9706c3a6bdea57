#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "axleval/errors.hpp"
#include "axleval/matching.hpp"
#include "axleval/types.hpp"

namespace axleval {

/// A ratio whose denominator may legitimately be zero (e.g. a detector that
/// produced nothing). Degenerate inputs yield 0 with the flag set instead of
/// an error.
struct MetricValue {
  double value = 0.0;
  bool degenerate = false;
};

inline MetricValue precision(const ConfusionCounts& c) {
  const std::int64_t denom = c.tp + c.fp;
  if (denom == 0) return {0.0, true};
  return {static_cast<double>(c.tp) / static_cast<double>(denom), false};
}

inline MetricValue recall(const ConfusionCounts& c) {
  const std::int64_t denom = c.tp + c.fn;
  if (denom == 0) return {0.0, true};
  return {static_cast<double>(c.tp) / static_cast<double>(denom), false};
}

/// Harmonic mean of precision and recall, from unrounded inputs.
inline double f1(double p, double r) {
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

/// Rounds half-up to two decimals; applied at presentation only.
inline double round2(double percent) {
  return std::floor(percent * 100.0 + 0.5) / 100.0;
}

/// Ranked precision-recall curve: one point per detection walked in
/// descending-confidence order, recalls non-decreasing.
struct PrCurve {
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  std::int64_t total_gt = 0;
};

/// A dataset-level detection reduced to what the curve needs: its score and
/// whether the greedy matcher made it a true positive.
struct ScoredMatch {
  double confidence = 0.0;
  bool is_tp = false;
};

/// Flattens one category's detections across the dataset into
/// descending-confidence order (ties: image order, then file order) and
/// labels each TP/FP by replaying the per-image greedy matching rule
/// incrementally.
inline std::vector<ScoredMatch> rank_dataset_detections(const Dataset& dataset,
                                                        int category_id,
                                                        double iou_threshold,
                                                        double confidence_threshold = 0.0) {
  struct Ref {
    std::size_t image = 0;
    std::size_t det = 0;
    double confidence = 0.0;
  };
  std::vector<Ref> refs;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const ImageRecord& rec = dataset.images[i];
    for (std::size_t j = 0; j < rec.detections.size(); ++j) {
      const Detection& det = rec.detections[j];
      if (det.category_id == category_id && det.confidence >= confidence_threshold) {
        refs.push_back({i, j, det.confidence});
      }
    }
  }
  std::stable_sort(refs.begin(), refs.end(),
                   [](const Ref& a, const Ref& b) { return a.confidence > b.confidence; });

  // Per-image claimed flags over that image's category ground truth.
  std::vector<std::vector<bool>> taken(dataset.images.size());
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    taken[i].assign(dataset.images[i].ground_truth.size(), false);
  }

  std::vector<ScoredMatch> ranked;
  ranked.reserve(refs.size());
  for (const Ref& ref : refs) {
    const ImageRecord& rec = dataset.images[ref.image];
    const Detection& det = rec.detections[ref.det];
    double best_iou = 0.0;
    std::size_t best_gt = rec.ground_truth.size();
    for (std::size_t g = 0; g < rec.ground_truth.size(); ++g) {
      if (taken[ref.image][g]) continue;
      if (rec.ground_truth[g].category_id != category_id) continue;
      const double overlap = iou(det.box, rec.ground_truth[g].box);
      if (overlap > best_iou) {
        best_iou = overlap;
        best_gt = g;
      }
    }
    const bool is_tp = best_gt < rec.ground_truth.size() && best_iou >= iou_threshold;
    if (is_tp) taken[ref.image][best_gt] = true;
    ranked.push_back({det.confidence, is_tp});
  }
  return ranked;
}

/// Cumulative precision/recall walk over an already-ranked detection list.
/// gt_total must be positive; AP is undefined without ground truth.
inline PrCurve pr_curve(std::span<const ScoredMatch> ranked, std::int64_t gt_total) {
  if (gt_total <= 0) {
    throw ValidationError("pr_curve requires a positive ground-truth total");
  }
  PrCurve curve;
  curve.total_gt = gt_total;
  std::int64_t tp = 0;
  std::int64_t seen = 0;
  for (const ScoredMatch& m : ranked) {
    ++seen;
    if (m.is_tp) ++tp;
    curve.points.emplace_back(static_cast<double>(tp) / static_cast<double>(gt_total),
                              static_cast<double>(tp) / static_cast<double>(seen));
  }
  return curve;
}

enum class ApInterpolation { AllPoint, ElevenPoint };

/// Area under the interpolated precision-recall curve.
///
/// All-point: precision at each recall is replaced by the maximum precision
/// at any recall >= it, then integrated stepwise over recall. Eleven-point:
/// mean of that interpolated precision sampled at recalls 0, 0.1, ..., 1.0.
inline double average_precision(const PrCurve& curve,
                                ApInterpolation interpolation = ApInterpolation::AllPoint) {
  if (curve.points.empty()) return 0.0;

  const std::size_t n = curve.points.size();
  std::vector<double> envelope(n);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    running = std::max(running, curve.points[i].second);
    envelope[i] = running;
  }

  if (interpolation == ApInterpolation::ElevenPoint) {
    double total = 0.0;
    for (int level = 0; level <= 10; ++level) {
      const double r = level / 10.0;
      double p = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (curve.points[i].first >= r - 1e-12) {
          p = envelope[i];
          break;
        }
      }
      total += p;
    }
    return total / 11.0;
  }

  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = curve.points[i].first;
    if (r > prev_recall) {
      ap += (r - prev_recall) * envelope[i];
      prev_recall = r;
    }
  }
  return ap;
}

/// Unweighted mean of per-category APs. A single category passes through.
inline double mean_average_precision(const std::map<int, double>& per_category_ap) {
  if (per_category_ap.empty()) {
    throw ValidationError("mean_average_precision requires at least one category");
  }
  double total = 0.0;
  for (const auto& [id, ap] : per_category_ap) total += ap;
  return total / static_cast<double>(per_category_ap.size());
}

/// One row of the metric table: percentages rounded half-up to two decimals.
/// map_pct is carried through when it comes from elsewhere (a results file)
/// rather than being computed here.
struct MetricsRow {
  double recall_pct = 0.0;
  double precision_pct = 0.0;
  double f1_pct = 0.0;
  std::optional<double> map_pct;
  bool degenerate = false;

  bool operator==(const MetricsRow&) const = default;
};

inline MetricsRow metrics_row(const ConfusionCounts& c,
                              std::optional<double> map_value_pct = std::nullopt) {
  const MetricValue p = precision(c);
  const MetricValue r = recall(c);
  MetricsRow row;
  row.recall_pct = round2(r.value * 100.0);
  row.precision_pct = round2(p.value * 100.0);
  row.f1_pct = round2(f1(p.value, r.value) * 100.0);
  if (map_value_pct) row.map_pct = round2(*map_value_pct);
  row.degenerate = p.degenerate || r.degenerate;
  return row;
}

}  // namespace axleval
