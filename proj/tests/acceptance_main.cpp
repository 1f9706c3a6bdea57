// Acceptance suite: runs each shipped-fixture criterion at its stated
// tolerance and prints one PASS/FAIL line per criterion. Exits nonzero if
// any criterion fails.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "axleval/axleval.hpp"

namespace {

using Clock = std::chrono::steady_clock;

std::filesystem::path fixture_dir() { return AXLEVAL_FIXTURE_DIR; }

struct CriterionResult {
  bool passed = true;
  std::vector<std::string> diagnostics;

  void require(bool condition, const std::string& message) {
    if (!condition) {
      passed = false;
      diagnostics.push_back(message);
    }
  }
};

int g_failures = 0;

void run_criterion(int id, const std::string& title,
                   const std::function<void(CriterionResult&)>& body) {
  CriterionResult result;
  const auto start = Clock::now();
  try {
    body(result);
  } catch (const std::exception& e) {
    result.require(false, std::string("unexpected exception: ") + e.what());
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  char timing[32];
  std::snprintf(timing, sizeof(timing), "%.2fs", seconds);
  std::cout << (result.passed ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " ["
            << timing << "]\n";
  for (const std::string& d : result.diagnostics) {
    std::cout << "    - " << d << "\n";
  }
  if (!result.passed) ++g_failures;
}

axleval::ExperimentMatrix fixture_matrix() {
  return axleval::load_matrix(fixture_dir() / "matrix" / "experiment_matrix.csv");
}

struct ReferenceRow {
  const char* database;
  const char* model;
  double recall_pct;
  double precision_pct;
  double f1_pct;
};

// The published metric table this toolchain is expected to reproduce from
// the shipped counts, verbatim.
const ReferenceRow kReferenceTable[27] = {
    {"real", "YOLOv3-tiny", 1.68, 1.29, 1.46},
    {"real", "YOLOv3", 93.28, 90.98, 92.12},
    {"real", "YOLOv3-spp", 98.32, 98.32, 98.32},
    {"real", "YOLOv8n", 73.95, 90.72, 81.48},
    {"real", "YOLOv8l", 94.12, 94.92, 94.51},
    {"real", "YOLOv8x", 99.16, 98.33, 98.74},
    {"real", "YOLOv11n", 76.47, 95.79, 85.05},
    {"real", "YOLOv11l", 93.28, 99.11, 96.10},
    {"real", "YOLOv11x", 99.16, 99.16, 99.16},
    {"synthetic", "YOLOv3-tiny", 5.04, 14.29, 7.45},
    {"synthetic", "YOLOv3", 99.16, 97.52, 98.33},
    {"synthetic", "YOLOv3-spp", 98.32, 99.15, 98.73},
    {"synthetic", "YOLOv8n", 77.31, 91.09, 83.64},
    {"synthetic", "YOLOv8l", 94.12, 95.73, 94.92},
    {"synthetic", "YOLOv8x", 99.16, 99.16, 99.16},
    {"synthetic", "YOLOv11n", 77.31, 96.84, 85.98},
    {"synthetic", "YOLOv11l", 94.96, 99.12, 97.00},
    {"synthetic", "YOLOv11x", 99.16, 99.16, 99.16},
    {"mixed", "YOLOv3-tiny", 77.31, 91.09, 83.64},
    {"mixed", "YOLOv3", 97.48, 98.31, 97.89},
    {"mixed", "YOLOv3-spp", 98.32, 98.32, 98.32},
    {"mixed", "YOLOv8n", 83.19, 93.40, 88.00},
    {"mixed", "YOLOv8l", 96.64, 98.29, 97.46},
    {"mixed", "YOLOv8x", 100.00, 99.17, 99.58},
    {"mixed", "YOLOv11n", 76.47, 96.81, 85.54},
    {"mixed", "YOLOv11l", 95.80, 99.13, 97.44},
    {"mixed", "YOLOv11x", 100.00, 99.17, 99.58},
};

void criterion_metric_chain(CriterionResult& r) {
  const auto start = Clock::now();
  const axleval::ExperimentMatrix matrix = fixture_matrix();
  const auto table = axleval::derive_metric_table(matrix);
  r.require(table.size() == 27, "expected 27 derived rows");

  for (const ReferenceRow& ref : kReferenceTable) {
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& row) {
      return row.database == ref.database && row.model == ref.model;
    });
    if (it == table.end()) {
      r.require(false, std::string("missing row ") + ref.database + "/" + ref.model);
      continue;
    }
    const auto check_cell = [&](const char* metric, double actual, double expected) {
      if (std::abs(actual - expected) > 0.01) {
        char message[256];
        std::snprintf(message, sizeof(message),
                      "%s/%s %s: recomputed %.4f vs reference %.2f (|diff| %.4f > 0.01)",
                      ref.database, ref.model, metric, actual, expected,
                      std::abs(actual - expected));
        r.require(false, message);
      }
    };
    check_cell("recall", it->metrics.recall_pct, ref.recall_pct);
    check_cell("precision", it->metrics.precision_pct, ref.precision_pct);
    check_cell("f1", it->metrics.f1_pct, ref.f1_pct);
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  r.require(seconds < 1.0, "metric chain took " + std::to_string(seconds) + "s (limit 1s)");
}

void criterion_database_battery(CriterionResult& r) {
  const auto battery = axleval::database_hypothesis_battery(fixture_matrix(), 0.05);
  const double expected_u[3] = {31.0, 34.0, 44.0};
  for (int i = 0; i < 3; ++i) {
    const auto& c = battery[static_cast<std::size_t>(i)];
    r.require(c.test.u1 == expected_u[i],
              c.first + " x " + c.second + ": U=" + std::to_string(c.test.u1) + ", expected " +
                  std::to_string(expected_u[i]));
    r.require(c.test.critical_value && *c.test.critical_value == 17,
              c.first + " x " + c.second + ": critical value must be 17");
    r.require(c.test.decision == axleval::Decision::FailToReject,
              c.first + " x " + c.second + ": expected Fail to Reject");
  }
}

void criterion_version_battery(CriterionResult& r) {
  const auto battery = axleval::version_hypothesis_battery(fixture_matrix(), 0.05);
  const double expected_u[3] = {39.0, 33.0, 24.0};
  for (int i = 0; i < 3; ++i) {
    const auto& c = battery[static_cast<std::size_t>(i)];
    r.require(c.test.u1 == expected_u[i],
              c.first + " x " + c.second + ": U=" + std::to_string(c.test.u1) + ", expected " +
                  std::to_string(expected_u[i]));
    r.require(c.test.decision == axleval::Decision::FailToReject,
              c.first + " x " + c.second + ": expected Fail to Reject");
  }
}

void criterion_p_values(CriterionResult& r) {
  const auto battery = axleval::database_hypothesis_battery(fixture_matrix(), 0.05);
  double min_p = 1.0;
  for (const auto& c : battery) min_p = std::min(min_p, c.test.p_two_tailed);
  r.require(min_p >= 0.42,
            "database battery min p = " + std::to_string(min_p) + ", expected >= 0.42");

  const double exact = axleval::exact_p_value(24, 9, 9);
  r.require(std::abs(exact - 0.16) <= 0.01,
            "v8 x v11 exact p = " + std::to_string(exact) + ", expected 0.16 +- 0.01");
  const double approx = axleval::approx_p_value(24, 9, 9);
  r.require(std::abs(approx - 0.16) <= 0.02,
            "v8 x v11 approximate p = " + std::to_string(approx) + ", expected 0.16 +- 0.02");
}

std::vector<std::int64_t> enumerate_u_distribution(int n1, int n2) {
  const int n = n1 + n2;
  std::vector<std::int64_t> counts(static_cast<std::size_t>(n1) * n2 + 1, 0);
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != n1) continue;
    int u = 0, b_below = 0;
    for (int pos = 0; pos < n; ++pos) {
      if (mask & (1u << pos)) {
        u += b_below;
      } else {
        ++b_below;
      }
    }
    ++counts[static_cast<std::size_t>(u)];
  }
  return counts;
}

void criterion_exact_oracle(CriterionResult& r) {
  const auto start = Clock::now();
  for (int n1 = 1; n1 <= 11; ++n1) {
    for (int n2 = 1; n1 + n2 <= 12; ++n2) {
      const auto enumerated = enumerate_u_distribution(n1, n2);
      std::int64_t total = 0;
      for (std::int64_t c : enumerated) total += c;
      for (int u = 0; u <= n1 * n2; ++u) {
        const int u_low = std::min(u, n1 * n2 - u);
        std::int64_t cum = 0;
        for (int k = 0; k <= u_low; ++k) cum += enumerated[static_cast<std::size_t>(k)];
        const double expected = std::min(1.0, 2.0 * static_cast<double>(cum) / total);
        const double actual = axleval::exact_p_value(u, n1, n2);
        if (std::abs(actual - expected) > 1e-12) {
          r.require(false, "exact p mismatch at n1=" + std::to_string(n1) +
                               " n2=" + std::to_string(n2) + " u=" + std::to_string(u));
          return;
        }
      }
    }
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  r.require(seconds < 10.0, "oracle sweep took " + std::to_string(seconds) + "s (limit 10s)");
}

axleval::BoundingBox random_box(std::mt19937& rng) {
  std::uniform_real_distribution<double> size(0.05, 0.4);
  const double w = size(rng);
  const double h = size(rng);
  std::uniform_real_distribution<double> cx(w / 2, 1.0 - w / 2);
  std::uniform_real_distribution<double> cy(h / 2, 1.0 - h / 2);
  return {cx(rng), cy(rng), w, h};
}

double brute_force_all_point_ap(const axleval::PrCurve& curve) {
  double ap = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const double recall = curve.points[i].first;
    if (recall <= prev) continue;
    double envelope = 0.0;
    for (std::size_t j = 0; j < curve.points.size(); ++j) {
      if (curve.points[j].first >= recall) envelope = std::max(envelope, curve.points[j].second);
    }
    ap += (recall - prev) * envelope;
    prev = recall;
  }
  return ap;
}

void criterion_property_suite(CriterionResult& r) {
  const auto start = Clock::now();
  std::mt19937 rng(0xACCE97);

  // u1 + u2 == n1*n2 and min-U invariance under monotone transforms
  std::uniform_int_distribution<int> sample_size(1, 12);
  std::uniform_real_distribution<double> value(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    axleval::Sample a{"a", {}}, b{"b", {}};
    const int n1 = sample_size(rng), n2 = sample_size(rng);
    for (int k = 0; k < n1; ++k) a.values.push_back(value(rng));
    for (int k = 0; k < n2; ++k) b.values.push_back(value(rng));
    const auto s = axleval::u_statistic(a, b);
    if (s.u1 + s.u2 != static_cast<double>(n1) * n2) {
      r.require(false, "u1 + u2 != n1*n2");
      return;
    }
    axleval::Sample ta = a, tb = b;
    for (double& v : ta.values) v = std::atan(2.0 * v + 1.0);
    for (double& v : tb.values) v = std::atan(2.0 * v + 1.0);
    const auto t = axleval::u_statistic(ta, tb);
    if (std::abs(std::min(t.u1, t.u2) - std::min(s.u1, s.u2)) > 1e-9) {
      r.require(false, "min-U changed under a monotone transform");
      return;
    }
  }

  // IoU symmetry and bounds
  for (int i = 0; i < 1000; ++i) {
    const axleval::BoundingBox a = random_box(rng);
    const axleval::BoundingBox b = random_box(rng);
    const double ab = axleval::iou(a, b);
    const double ba = axleval::iou(b, a);
    if (std::abs(ab - ba) > 1e-12 || ab < 0.0 || ab > 1.0 + 1e-12 ||
        std::abs(axleval::iou(a, a) - 1.0) > 1e-12) {
      r.require(false, "IoU symmetry/bounds violated");
      return;
    }
  }

  // matching conservation on random instances
  std::uniform_real_distribution<double> confidence(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    axleval::ImageRecord rec;
    rec.image_id = "x";
    const int gts = static_cast<int>(rng() % 6);
    for (int g = 0; g < gts; ++g) rec.ground_truth.push_back({0, random_box(rng)});
    const int dets = static_cast<int>(rng() % 6);
    for (int k = 0; k < dets; ++k) {
      if (!rec.ground_truth.empty() && rng() % 2 == 0) {
        rec.detections.push_back(
            {0, confidence(rng), rec.ground_truth[rng() % rec.ground_truth.size()].box});
      } else {
        rec.detections.push_back({0, confidence(rng), random_box(rng)});
      }
    }
    const double conf_thr = (rng() % 100) / 100.0;
    const auto [match, counts] = axleval::match_image(rec, 0, 0.5, conf_thr);
    std::int64_t eligible = 0;
    for (const auto& det : rec.detections) {
      if (det.confidence >= conf_thr) ++eligible;
    }
    if (counts.tp + counts.fn != static_cast<std::int64_t>(rec.ground_truth.size()) ||
        counts.tp + counts.fp != eligible) {
      r.require(false, "matching conservation violated");
      return;
    }
  }

  // AP against brute-force envelope integration
  for (int i = 0; i < 1000; ++i) {
    const int gt_total = 1 + static_cast<int>(rng() % 5);
    std::vector<axleval::ScoredMatch> ranked;
    int budget = gt_total;
    const int dets = static_cast<int>(rng() % 11);
    for (int k = 0; k < dets; ++k) {
      const bool tp = budget > 0 && rng() % 2 == 0;
      if (tp) --budget;
      ranked.push_back({confidence(rng), tp});
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& x, const auto& y) { return x.confidence > y.confidence; });
    const axleval::PrCurve curve = axleval::pr_curve(ranked, gt_total);
    const double fast = axleval::average_precision(curve, axleval::ApInterpolation::AllPoint);
    const double slow = brute_force_all_point_ap(curve);
    if (std::abs(fast - slow) > 1e-12) {
      r.require(false, "AP disagrees with brute-force envelope integration");
      return;
    }
  }

  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  r.require(seconds < 30.0, "property suite took " + std::to_string(seconds) + "s (limit 30s)");
}

void criterion_composition(CriterionResult& r) {
  const axleval::Dataset real =
      axleval::load_dataset(fixture_dir() / "datasets" / "real" / "manifest.json");
  const axleval::Dataset synthetic =
      axleval::load_dataset(fixture_dir() / "datasets" / "synthetic" / "manifest.json");

  axleval::CompositionSpec spec;
  spec.per_source_image_quota = {{"real", 175}, {"synthetic", 175}};
  spec.target_object_count = 1176;
  spec.balance_tolerance = 11;  // 1% of 1176, rounded down

  const axleval::Dataset mixed = axleval::compose_mixed(real, synthetic, spec, 7);
  r.require(mixed.images.size() == 350,
            "expected 350 images, got " + std::to_string(mixed.images.size()));
  std::int64_t objects = 0;
  for (const auto& rec : mixed.images) {
    objects += static_cast<std::int64_t>(rec.ground_truth.size());
  }
  r.require(std::abs(static_cast<double>(objects) - 1176.0) <= 0.01 * 1176.0,
            "object count " + std::to_string(objects) + " not within 1% of 1176");

  const axleval::Dataset again = axleval::compose_mixed(real, synthetic, spec, 7);
  r.require(mixed == again, "same seed must reproduce the identical dataset");
  const axleval::Dataset other = axleval::compose_mixed(real, synthetic, spec, 8);
  std::int64_t other_objects = 0;
  for (const auto& rec : other.images) {
    other_objects += static_cast<std::int64_t>(rec.ground_truth.size());
  }
  r.require(std::abs(static_cast<double>(other_objects) - 1176.0) <= 0.01 * 1176.0,
            "a different seed must still satisfy the balance");
}

}  // namespace

int main() {
  run_criterion(1, "metric chain reproduces all 81 reference percentages within 0.01pp",
                criterion_metric_chain);
  run_criterion(2, "database battery: U = {31, 34, 44} vs critical 17, all Fail to Reject",
                criterion_database_battery);
  run_criterion(3, "version battery: U = {39, 33, 24}, all Fail to Reject",
                criterion_version_battery);
  run_criterion(4, "p-values: database battery min p >= 0.42; v8 x v11 p = 0.16 +- 0.01/0.02",
                criterion_p_values);
  run_criterion(5, "exact U distribution equals full enumeration for n1+n2 <= 12",
                criterion_exact_oracle);
  run_criterion(6, "matching/metrics/stats property suite (1000 random cases each)",
                criterion_property_suite);
  run_criterion(7, "composition: quotas 175/175 give 350 images within 1% of 1176 objects",
                criterion_composition);
  std::cout << "NOTE criterion 8: raw detection counts and mAP values enter as shipped fixtures "
               "(they require GPU training on unpublished images); everything downstream is "
               "recomputed and checked above.\n";

  if (g_failures > 0) {
    std::cout << g_failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
