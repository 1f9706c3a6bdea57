// axle-eval: evaluate detection outputs against ground truth, compose
// balanced training sets, and compare experiment results.
//
// Subcommands mirror the experiment pipeline, minus training (external by
// design): stats -> compose -> eval -> compare/report.
//
// Exit codes: 0 success, 1 internal error, 2 bad input or usage.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "axleval/axleval.hpp"

namespace {

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("AXLE_EVAL_LOG");
    if (env == nullptr) return LogLevel::Warn;
    const std::string value = env;
    if (value == "quiet" || value == "0") return LogLevel::Quiet;
    if (value == "info") return LogLevel::Info;
    if (value == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}

void log_warn(const std::string& message) {
  if (log_level() >= LogLevel::Warn) std::cerr << "warning: " << message << "\n";
}

void log_info(const std::string& message) {
  if (log_level() >= LogLevel::Info) std::cerr << message << "\n";
}

std::string fmt2(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

std::string fmt4(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

std::string plural(const std::string& label) {
  if (!label.empty() && label.back() == 's') return label;
  return label + "s";
}

axleval::OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return axleval::OutputFormat::Csv;
  if (name == "json") return axleval::OutputFormat::Json;
  return axleval::OutputFormat::Markdown;
}

void write_output(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw axleval::LoadError("cannot write output file: " + path.string());
  out << content;
}

int run_stats(const std::string& manifest) {
  std::vector<std::string> warnings;
  axleval::LoadOptions options;
  options.warnings = &warnings;
  const axleval::Dataset dataset = axleval::load_dataset(manifest, options);
  for (const std::string& w : warnings) log_warn(w);

  const axleval::DatasetStats stats = axleval::dataset_stats(dataset);
  std::string line = "images: " + std::to_string(stats.image_count);
  for (const auto& [id, label] : dataset.categories) {
    const auto it = stats.object_count_per_category.find(id);
    const std::size_t count = it == stats.object_count_per_category.end() ? 0 : it->second;
    line += ", " + plural(label) + ": " + std::to_string(count);
  }
  std::cout << line << "\n";
  return 0;
}

int run_compose(const std::string& manifest_a, const std::string& manifest_b,
                std::size_t quota_a, std::size_t quota_b, std::optional<std::int64_t> target,
                std::optional<std::int64_t> tolerance, std::uint64_t seed,
                const std::string& out_path) {
  const axleval::Dataset a = axleval::load_dataset(manifest_a);
  const axleval::Dataset b = axleval::load_dataset(manifest_b);

  axleval::CompositionSpec spec;
  spec.per_source_image_quota[a.name] = quota_a;
  spec.per_source_image_quota[b.name] = quota_b;
  spec.target_object_count = target;
  if (tolerance) {
    spec.balance_tolerance = *tolerance;
  } else if (target) {
    // default tolerance: 1% of the target
    spec.balance_tolerance = static_cast<std::int64_t>(*target / 100);
  }

  const axleval::Dataset mixed = axleval::compose_mixed(a, b, spec, seed);
  axleval::save_dataset(mixed, out_path);

  std::int64_t objects = 0;
  std::size_t from_a = 0;
  std::set<std::string> a_ids;
  for (const auto& rec : a.images) a_ids.insert(rec.image_id);
  for (const auto& rec : mixed.images) {
    objects += static_cast<std::int64_t>(rec.ground_truth.size());
    if (a_ids.count(rec.image_id)) ++from_a;
  }
  std::cout << "composed: " << mixed.name << "\n";
  std::cout << "images: " << mixed.images.size() << " (" << a.name << ": " << from_a << ", "
            << b.name << ": " << (mixed.images.size() - from_a) << ")\n";
  std::cout << "objects: " << objects;
  if (target) {
    std::cout << " (target: " << *target << ", tolerance: " << spec.balance_tolerance << ")";
  }
  std::cout << "\n";
  std::cout << "manifest: " << out_path << "\n";
  return 0;
}

int run_eval(const std::string& manifest, double iou_threshold, double confidence_threshold,
             const std::string& interp_name, const std::string& format_name,
             const std::string& out_path) {
  std::vector<std::string> warnings;
  axleval::LoadOptions options;
  options.warnings = &warnings;
  const axleval::Dataset dataset = axleval::load_dataset(manifest, options);
  for (const std::string& w : warnings) log_warn(w);

  const axleval::ApInterpolation interpolation = interp_name == "11-point"
                                                     ? axleval::ApInterpolation::ElevenPoint
                                                     : axleval::ApInterpolation::AllPoint;

  axleval::ConfusionCounts total;
  for (const auto& [category_id, label] : dataset.categories) {
    for (const auto& rec : dataset.images) {
      total += axleval::match_image(rec, category_id, iou_threshold, confidence_threshold).second;
    }
  }

  // Per-category AP over the ranked dataset-level detections.
  std::map<int, double> ap_per_category;
  const axleval::DatasetStats stats = axleval::dataset_stats(dataset);
  for (const auto& [category_id, label] : dataset.categories) {
    const auto it = stats.object_count_per_category.find(category_id);
    if (it == stats.object_count_per_category.end() || it->second == 0) {
      log_info("category '" + label + "' has no ground truth; AP skipped");
      continue;
    }
    const auto ranked = axleval::rank_dataset_detections(dataset, category_id, iou_threshold,
                                                         confidence_threshold);
    const axleval::PrCurve curve =
        axleval::pr_curve(ranked, static_cast<std::int64_t>(it->second));
    ap_per_category[category_id] = axleval::average_precision(curve, interpolation);
  }
  std::optional<double> map_pct;
  if (!ap_per_category.empty()) {
    map_pct = axleval::mean_average_precision(ap_per_category) * 100.0;
  }

  const axleval::MetricsRow row = axleval::metrics_row(total, map_pct);
  std::cout << "images: " << dataset.images.size() << "\n";
  std::cout << "tp: " << total.tp << ", fp: " << total.fp << ", fn: " << total.fn << "\n";
  std::cout << "recall: " << fmt2(row.recall_pct) << ", precision: " << fmt2(row.precision_pct)
            << ", f1: " << fmt2(row.f1_pct) << (row.degenerate ? " (degenerate)" : "") << "\n";
  for (const auto& [category_id, ap] : ap_per_category) {
    std::cout << "ap[" << dataset.categories.at(category_id) << "]: " << fmt4(ap) << "\n";
  }
  if (row.map_pct) std::cout << "map_pct: " << fmt2(*row.map_pct) << "\n";

  if (!out_path.empty()) {
    const axleval::OutputFormat format = parse_format(format_name);
    if (format == axleval::OutputFormat::Json) {
      nlohmann::json doc;
      doc["images"] = dataset.images.size();
      doc["counts"] = {{"tp", total.tp}, {"fp", total.fp}, {"fn", total.fn}};
      doc["recall_pct"] = row.recall_pct;
      doc["precision_pct"] = row.precision_pct;
      doc["f1_pct"] = row.f1_pct;
      if (row.map_pct) doc["map_pct"] = *row.map_pct;
      doc["degenerate"] = row.degenerate;
      nlohmann::json ap = nlohmann::json::object();
      for (const auto& [category_id, value] : ap_per_category) {
        ap[dataset.categories.at(category_id)] = value;
      }
      doc["ap"] = ap;
      write_output(out_path, doc.dump(2) + "\n");
    } else if (format == axleval::OutputFormat::Csv) {
      std::string csv = "tp,fp,fn,recall_pct,precision_pct,f1_pct,map_pct\n";
      csv += std::to_string(total.tp) + ',' + std::to_string(total.fp) + ',' +
             std::to_string(total.fn) + ',' + fmt2(row.recall_pct) + ',' +
             fmt2(row.precision_pct) + ',' + fmt2(row.f1_pct) + ',';
      if (row.map_pct) csv += fmt2(*row.map_pct);
      csv += '\n';
      write_output(out_path, csv);
    } else {
      std::string md = "| TP | FP | FN | Recall (%) | Precision (%) | F1-score (%) | mAP (%) |\n";
      md += "|---|---|---|---|---|---|---|\n";
      md += "| " + std::to_string(total.tp) + " | " + std::to_string(total.fp) + " | " +
            std::to_string(total.fn) + " | " + fmt2(row.recall_pct) + " | " +
            fmt2(row.precision_pct) + " | " + fmt2(row.f1_pct) + " | " +
            (row.map_pct ? fmt2(*row.map_pct) : std::string("-")) + " |\n";
      write_output(out_path, md);
    }
  }
  return 0;
}

std::string comparison_line(const axleval::BatteryComparison& c) {
  std::string u = axleval::detail::fmt_u(c.test.u1);
  std::string line = c.first + " x " + c.second + ": U=" + u + ", critical=";
  line += c.test.critical_value ? std::to_string(*c.test.critical_value) : std::string("-");
  line += ", p=" + fmt4(c.test.p_two_tailed) + " (" +
          axleval::detail::method_name(c.test.p_method) + "), ";
  line += c.test.decision == axleval::Decision::Reject ? "Reject" : "Fail to Reject";
  return line;
}

axleval::ExperimentReport build_report(const axleval::ExperimentMatrix& matrix, double alpha,
                                       bool require_map) {
  axleval::ExperimentReport report;
  report.metrics = axleval::derive_metric_table(matrix);
  if (matrix.has_map()) {
    const auto db = axleval::database_hypothesis_battery(matrix, alpha);
    const auto ver = axleval::version_hypothesis_battery(matrix, alpha);
    report.database_tests.assign(db.begin(), db.end());
    report.version_tests.assign(ver.begin(), ver.end());
  } else if (require_map) {
    throw axleval::ValidationError("mAP column required for hypothesis tests");
  } else {
    log_warn("mAP column absent; hypothesis tests omitted");
  }
  return report;
}

int run_compare(const std::string& matrix_path, double alpha, const std::string& format_name,
                const std::string& out_path) {
  const axleval::ExperimentMatrix matrix = axleval::load_matrix(matrix_path);
  const axleval::ExperimentReport report = build_report(matrix, alpha, /*require_map=*/true);
  for (const auto& comparison : report.database_tests) {
    std::cout << comparison_line(comparison) << "\n";
  }
  for (const auto& comparison : report.version_tests) {
    std::cout << comparison_line(comparison) << "\n";
  }
  if (!out_path.empty()) {
    write_output(out_path, axleval::render(report, parse_format(format_name)));
    log_info("report written to " + out_path);
  }
  return 0;
}

int run_report(const std::string& matrix_path, double alpha, const std::string& format_name,
               const std::string& out_path) {
  const axleval::ExperimentMatrix matrix = axleval::load_matrix(matrix_path);
  const axleval::ExperimentReport report = build_report(matrix, alpha, /*require_map=*/false);
  const std::string content = axleval::render(report, parse_format(format_name));
  if (out_path.empty()) {
    std::cout << content;
  } else {
    write_output(out_path, content);
    std::cout << "report: " << out_path << " (" << report.metrics.size() << " rows, "
              << report.database_tests.size() + report.version_tests.size() << " tests)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection evaluation and experiment statistics toolkit"};
  app.require_subcommand(1);

  // stats
  std::string stats_manifest;
  CLI::App* stats = app.add_subcommand("stats", "Image and object totals for a dataset");
  stats->add_option("manifest", stats_manifest, "dataset manifest (JSON)")->required();

  // compose
  std::string compose_a, compose_b, compose_out;
  std::size_t quota_a = 0, quota_b = 0;
  std::optional<std::int64_t> compose_target;
  std::optional<std::int64_t> compose_tolerance;
  std::uint64_t compose_seed = 0;
  CLI::App* compose =
      app.add_subcommand("compose", "Draw a balanced mixed dataset from two sources");
  compose->add_option("manifest_a", compose_a, "first source manifest")->required();
  compose->add_option("manifest_b", compose_b, "second source manifest")->required();
  compose->add_option("--quota-a", quota_a, "images to take from the first source")->required();
  compose->add_option("--quota-b", quota_b, "images to take from the second source")->required();
  compose->add_option("--target", compose_target, "object-count target for the composed set");
  compose->add_option("--tolerance", compose_tolerance,
                      "allowed |objects - target| (default: 1% of target)");
  compose->add_option("--seed", compose_seed, "selection seed (default 0)");
  compose->add_option("--out", compose_out, "output manifest path")->required();

  // eval
  std::string eval_manifest, eval_out;
  double iou_threshold = 0.5;
  double confidence_threshold = 0.25;
  std::string ap_interp = "all-point";
  std::string eval_format = "json";
  CLI::App* eval = app.add_subcommand("eval", "Match detections and compute metrics");
  eval->add_option("manifest", eval_manifest, "dataset manifest with detections")->required();
  eval->add_option("--iou-thresh", iou_threshold, "IoU threshold for a match (default 0.5)")
      ->check(CLI::Range(1e-9, 1.0));
  eval->add_option("--conf-thresh", confidence_threshold,
                   "confidence cutoff for detections (default 0.25)")
      ->check(CLI::Range(0.0, 1.0));
  eval->add_option("--ap-interp", ap_interp, "AP interpolation (default all-point)")
      ->check(CLI::IsMember({"all-point", "11-point"}));
  eval->add_option("--format", eval_format, "output file format (default json)")
      ->check(CLI::IsMember({"csv", "json", "markdown"}));
  eval->add_option("--out", eval_out, "write the result row to this file");

  // compare
  std::string compare_matrix, compare_out;
  double compare_alpha = 0.05;
  std::string compare_format = "json";
  CLI::App* compare =
      app.add_subcommand("compare", "Run both hypothesis-test batteries on a results matrix");
  compare->add_option("matrix", compare_matrix, "experiment matrix CSV")->required();
  compare->add_option("--alpha", compare_alpha, "significance level (default 0.05)")
      ->check(CLI::Range(1e-9, 1.0 - 1e-9));
  compare->add_option("--format", compare_format, "report format (default json)")
      ->check(CLI::IsMember({"csv", "json", "markdown"}));
  compare->add_option("--out", compare_out, "write the full report to this file");

  // report
  std::string report_matrix, report_out;
  double report_alpha = 0.05;
  std::string report_format = "markdown";
  CLI::App* report =
      app.add_subcommand("report", "Render metric tables (and tests when mAP is present)");
  report->add_option("matrix", report_matrix, "experiment matrix CSV")->required();
  report->add_option("--alpha", report_alpha, "significance level (default 0.05)")
      ->check(CLI::Range(1e-9, 1.0 - 1e-9));
  report->add_option("--format", report_format, "report format (default markdown)")
      ->check(CLI::IsMember({"csv", "json", "markdown"}));
  report->add_option("--out", report_out, "write the report to this file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*stats) return run_stats(stats_manifest);
    if (*compose) {
      return run_compose(compose_a, compose_b, quota_a, quota_b, compose_target,
                         compose_tolerance, compose_seed, compose_out);
    }
    if (*eval) {
      return run_eval(eval_manifest, iou_threshold, confidence_threshold, ap_interp, eval_format,
                      eval_out);
    }
    if (*compare) return run_compare(compare_matrix, compare_alpha, compare_format, compare_out);
    if (*report) return run_report(report_matrix, report_alpha, report_format, report_out);
  } catch (const axleval::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
