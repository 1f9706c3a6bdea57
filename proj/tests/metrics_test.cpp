#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "axleval/metrics.hpp"
#include "testutil.hpp"

using namespace axleval;

TEST_CASE("precision from counts") {
  CHECK(precision({111, 11, 8}).value * 100 == Catch::Approx(90.98).margin(0.005));
  CHECK(precision({2, 153, 117}).value == Catch::Approx(2.0 / 155.0));
  const MetricValue degenerate = precision({0, 0, 5});
  CHECK(degenerate.value == 0.0);
  CHECK(degenerate.degenerate);
}

TEST_CASE("recall from counts") {
  CHECK(recall({111, 11, 8}).value == Catch::Approx(111.0 / 119.0));
  CHECK(recall({119, 1, 0}).value == Catch::Approx(1.0));
  const MetricValue degenerate = recall({0, 3, 0});
  CHECK(degenerate.value == 0.0);
  CHECK(degenerate.degenerate);
}

TEST_CASE("f1 is the harmonic mean of unrounded precision and recall") {
  const double p = precision({111, 11, 8}).value;
  const double r = recall({111, 11, 8}).value;
  CHECK(round2(f1(p, r) * 100) == Catch::Approx(92.12));
  CHECK(f1(0.73, 0.73) == Catch::Approx(0.73));
  CHECK(f1(0.0, 1.0) == 0.0);
  CHECK(f1(0.0, 0.0) == 0.0);
}

TEST_CASE("f1 lies between min and max and below the arithmetic mean") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double p = unit(rng);
    const double r = unit(rng);
    const double h = f1(p, r);
    CHECK(h >= std::min(p, r) - 1e-12);
    CHECK(h <= std::max(p, r) + 1e-12);
    CHECK(h <= (p + r) / 2.0 + 1e-12);
  }
}

TEST_CASE("rounding is half-up at two decimals") {
  CHECK(round2(85.445) == Catch::Approx(85.45).margin(1e-9));
  CHECK(round2(1.46499) == Catch::Approx(1.46).margin(1e-9));
  CHECK(round2(100.0) == 100.0);
  CHECK(round2(99.995) == Catch::Approx(100.0).margin(1e-9));
}

TEST_CASE("pr_curve walks ranked detections cumulatively") {
  const std::vector<ScoredMatch> perfect = {{0.9, true}};
  const PrCurve one = pr_curve(perfect, 1);
  REQUIRE(one.points.size() == 1);
  CHECK(one.points[0].first == Catch::Approx(1.0));
  CHECK(one.points[0].second == Catch::Approx(1.0));

  const std::vector<ScoredMatch> mixed = {{0.9, true}, {0.8, false}};
  const PrCurve two = pr_curve(mixed, 2);
  REQUIRE(two.points.size() == 2);
  CHECK(two.points[0] == std::pair<double, double>{0.5, 1.0});
  CHECK(two.points[1] == std::pair<double, double>{0.5, 0.5});

  CHECK(pr_curve(std::vector<ScoredMatch>{}, 3).points.empty());
  CHECK_THROWS_AS(pr_curve(std::vector<ScoredMatch>{}, 0), ValidationError);
}

TEST_CASE("average precision on the hand-traced curves") {
  PrCurve perfect;
  perfect.total_gt = 1;
  perfect.points = {{1.0, 1.0}};
  CHECK(average_precision(perfect, ApInterpolation::AllPoint) == Catch::Approx(1.0));
  CHECK(average_precision(perfect, ApInterpolation::ElevenPoint) == Catch::Approx(1.0));

  PrCurve half;
  half.total_gt = 2;
  half.points = {{0.5, 1.0}, {0.5, 0.5}};
  // envelope: precision 1.0 over recall [0, 0.5], nothing beyond
  CHECK(average_precision(half, ApInterpolation::AllPoint) == Catch::Approx(0.5));
  // recalls {0, 0.1, ..., 0.5} see precision 1, the rest see 0
  CHECK(average_precision(half, ApInterpolation::ElevenPoint) == Catch::Approx(6.0 / 11.0));

  PrCurve hopeless;
  hopeless.total_gt = 4;
  hopeless.points = {{0.0, 0.0}, {0.0, 0.0}};
  CHECK(average_precision(hopeless, ApInterpolation::AllPoint) == 0.0);
}

TEST_CASE("mean_average_precision averages categories") {
  CHECK(mean_average_precision({{0, 0.9826}}) == Catch::Approx(0.9826));
  CHECK(mean_average_precision({{0, 1.0}, {1, 0.0}}) == Catch::Approx(0.5));
  CHECK_THROWS_AS(mean_average_precision({}), ValidationError);
}

TEST_CASE("metrics_row assembles rounded percentages") {
  const MetricsRow a = metrics_row({88, 9, 31});
  CHECK(a.recall_pct == Catch::Approx(73.95));
  CHECK(a.precision_pct == Catch::Approx(90.72));
  CHECK(a.f1_pct == Catch::Approx(81.48));
  CHECK_FALSE(a.map_pct.has_value());

  const MetricsRow b = metrics_row({91, 4, 28}, 89.98);
  CHECK(b.recall_pct == Catch::Approx(76.47));
  CHECK(b.precision_pct == Catch::Approx(95.79));
  CHECK(b.f1_pct == Catch::Approx(85.05));
  CHECK(b.map_pct == Catch::Approx(89.98));

  const MetricsRow zero = metrics_row({0, 0, 0});
  CHECK(zero.recall_pct == 0.0);
  CHECK(zero.precision_pct == 0.0);
  CHECK(zero.f1_pct == 0.0);
  CHECK(zero.degenerate);
}

namespace {

struct GoldenRow {
  ConfusionCounts counts;
  double recall_pct;
  double precision_pct;
  double f1_pct;
};

// The 27 detection-count rows and the percentages they force. One published
// F1 (fifth-from-last) circulates as 85.54, which contradicts its own
// counts: (91, 3, 28) pins f1 = 182/213 = 85.4460...%.
const GoldenRow kGoldenRows[] = {
    {{2, 153, 117}, 1.68, 1.29, 1.46},   {{111, 11, 8}, 93.28, 90.98, 92.12},
    {{117, 2, 2}, 98.32, 98.32, 98.32},  {{88, 9, 31}, 73.95, 90.72, 81.48},
    {{112, 6, 7}, 94.12, 94.92, 94.51},  {{118, 2, 1}, 99.16, 98.33, 98.74},
    {{91, 4, 28}, 76.47, 95.79, 85.05},  {{111, 1, 8}, 93.28, 99.11, 96.10},
    {{118, 1, 1}, 99.16, 99.16, 99.16},  {{6, 36, 113}, 5.04, 14.29, 7.45},
    {{118, 3, 1}, 99.16, 97.52, 98.33},  {{117, 1, 2}, 98.32, 99.15, 98.73},
    {{92, 9, 27}, 77.31, 91.09, 83.64},  {{112, 5, 7}, 94.12, 95.73, 94.92},
    {{118, 1, 1}, 99.16, 99.16, 99.16},  {{92, 3, 27}, 77.31, 96.84, 85.98},
    {{113, 1, 6}, 94.96, 99.12, 97.00},  {{118, 1, 1}, 99.16, 99.16, 99.16},
    {{92, 9, 27}, 77.31, 91.09, 83.64},  {{116, 2, 3}, 97.48, 98.31, 97.89},
    {{117, 2, 2}, 98.32, 98.32, 98.32},  {{99, 7, 20}, 83.19, 93.40, 88.00},
    {{115, 2, 4}, 96.64, 98.29, 97.46},  {{119, 1, 0}, 100.00, 99.17, 99.58},
    {{91, 3, 28}, 76.47, 96.81, 85.45},  {{114, 1, 5}, 95.80, 99.13, 97.44},
    {{119, 1, 0}, 100.00, 99.17, 99.58},
};

}  // namespace

TEST_CASE("all 27 metric triples recompute from their counts") {
  for (const GoldenRow& row : kGoldenRows) {
    CAPTURE(row.counts.tp, row.counts.fp, row.counts.fn);
    const MetricsRow metrics = metrics_row(row.counts);
    CHECK(std::abs(metrics.recall_pct - row.recall_pct) <= 0.01);
    CHECK(std::abs(metrics.precision_pct - row.precision_pct) <= 0.01);
    CHECK(std::abs(metrics.f1_pct - row.f1_pct) <= 0.01);
  }
}

namespace {

std::vector<ScoredMatch> random_ranked(std::mt19937& rng, int max_det, int gt_total) {
  std::uniform_int_distribution<int> det_count(0, max_det);
  std::uniform_real_distribution<double> confidence(0.0, 1.0);
  const int dets = det_count(rng);
  std::vector<ScoredMatch> ranked;
  int tp_budget = gt_total;
  for (int i = 0; i < dets; ++i) {
    const bool tp = tp_budget > 0 && rng() % 2 == 0;
    if (tp) --tp_budget;
    ranked.push_back({confidence(rng), tp});
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const ScoredMatch& a, const ScoredMatch& b) { return a.confidence > b.confidence; });
  return ranked;
}

/// Envelope enumerated directly: max precision over every point at recall
/// >= r, integrated over the distinct recall steps.
double brute_force_all_point_ap(const PrCurve& curve) {
  double ap = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const double r = curve.points[i].first;
    if (r <= prev) continue;
    double envelope = 0.0;
    for (std::size_t j = 0; j < curve.points.size(); ++j) {
      if (curve.points[j].first >= r) envelope = std::max(envelope, curve.points[j].second);
    }
    ap += (r - prev) * envelope;
    prev = r;
  }
  return ap;
}

}  // namespace

TEST_CASE("all-point AP equals brute-force envelope integration") {
  std::mt19937 rng(555);
  for (int i = 0; i < 1000; ++i) {
    const int gt_total = 1 + static_cast<int>(rng() % 5);
    const auto ranked = random_ranked(rng, 10, gt_total);
    const PrCurve curve = pr_curve(ranked, gt_total);
    CHECK(average_precision(curve, ApInterpolation::AllPoint) ==
          Catch::Approx(brute_force_all_point_ap(curve)).margin(1e-12));
  }
}

TEST_CASE("AP depends on ranking only, not on confidence scale") {
  std::mt19937 rng(808);
  for (int i = 0; i < 200; ++i) {
    const int gt_total = 1 + static_cast<int>(rng() % 5);
    auto ranked = random_ranked(rng, 10, gt_total);
    const double before = average_precision(pr_curve(ranked, gt_total));
    for (auto& m : ranked) m.confidence = 0.1 + 0.8 * m.confidence * m.confidence;
    const double after = average_precision(pr_curve(ranked, gt_total));
    CHECK(before == Catch::Approx(after).margin(1e-12));
  }
}

TEST_CASE("a trailing false positive never raises AP") {
  std::mt19937 rng(909);
  for (int i = 0; i < 200; ++i) {
    const int gt_total = 1 + static_cast<int>(rng() % 5);
    auto ranked = random_ranked(rng, 8, gt_total);
    const double before = average_precision(pr_curve(ranked, gt_total));
    double lowest = 1.0;
    for (const auto& m : ranked) lowest = std::min(lowest, m.confidence);
    ranked.push_back({lowest / 2.0, false});
    const double after = average_precision(pr_curve(ranked, gt_total));
    CHECK(after <= before + 1e-12);
  }
}

TEST_CASE("dataset-level ranking agrees with per-image matching totals") {
  std::mt19937 rng(1234);
  for (int iter = 0; iter < 200; ++iter) {
    Dataset d;
    d.name = "prop";
    d.categories = {{0, "axle"}};
    const int images = 1 + static_cast<int>(rng() % 5);
    std::uniform_real_distribution<double> confidence(0.0, 1.0);
    for (int i = 0; i < images; ++i) {
      ImageRecord rec;
      rec.image_id = "i" + std::to_string(i);
      const int gts = static_cast<int>(rng() % 4);
      for (int g = 0; g < gts; ++g) rec.ground_truth.push_back({0, testutil::random_box(rng)});
      const int dets = static_cast<int>(rng() % 4);
      for (int k = 0; k < dets; ++k) {
        if (!rec.ground_truth.empty() && rng() % 2 == 0) {
          rec.detections.push_back(
              {0, confidence(rng), rec.ground_truth[rng() % rec.ground_truth.size()].box});
        } else {
          rec.detections.push_back({0, confidence(rng), testutil::random_box(rng)});
        }
      }
      d.images.push_back(std::move(rec));
    }

    const auto ranked = rank_dataset_detections(d, 0, 0.5, 0.25);
    std::int64_t ranked_tp = 0;
    for (const auto& m : ranked) ranked_tp += m.is_tp ? 1 : 0;

    ConfusionCounts total;
    for (const auto& rec : d.images) {
      total += match_image(rec, 0, 0.5, 0.25).second;
    }
    CHECK(ranked_tp == total.tp);
    CHECK(static_cast<std::int64_t>(ranked.size()) == total.tp + total.fp);
  }
}
