#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "axleval/annotations.hpp"
#include "axleval/errors.hpp"
#include "axleval/metrics.hpp"
#include "axleval/stats.hpp"
#include "axleval/types.hpp"

namespace axleval {

/// One trained model evaluated on the fixed test set: its confusion counts
/// and, when known, its mAP percentage.
struct MatrixRow {
  std::string model;
  std::string version;
  std::string database;
  ConfusionCounts counts;
  std::optional<double> map_pct;
};

/// The model x training-database experiment grid. Group orders follow first
/// appearance in the source CSV so reports keep the authoring layout.
struct ExperimentMatrix {
  std::vector<MatrixRow> rows;
  std::vector<std::string> databases;
  std::vector<std::string> models;
  std::vector<std::string> versions;
  std::map<std::string, std::string> model_version;

  bool has_map() const {
    return !rows.empty() &&
           std::all_of(rows.begin(), rows.end(),
                       [](const MatrixRow& r) { return r.map_pct.has_value(); });
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(pos)));
      break;
    }
    fields.push_back(trim(line.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return fields;
}

inline std::int64_t parse_count_field(const std::string& field, const std::string& source,
                                      std::size_t line_no) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || value < 0) {
    throw ParseError(source, line_no,
                     "expected a non-negative integer count, got '" + field + "'");
  }
  return value;
}

inline void push_unique(std::vector<std::string>& seq, const std::string& value) {
  if (std::find(seq.begin(), seq.end(), value) == seq.end()) seq.push_back(value);
}

inline std::string fmt_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string fmt_p(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

/// U values print as integers when integral; ties can produce halves.
inline std::string fmt_u(double u) {
  char buf[32];
  if (u == std::floor(u)) {
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(u));
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f", u);
  }
  return buf;
}

inline const char* method_name(PMethod m) {
  return m == PMethod::Exact ? "exact" : "normal-approximation";
}

inline const char* decision_name(Decision d) {
  return d == Decision::Reject ? "Reject" : "FailToReject";
}

inline const char* decision_text(Decision d) {
  return d == Decision::Reject ? "Reject" : "Fail to Reject";
}

}  // namespace detail

/// Parses the experiment-matrix CSV. Header must be
/// "model,version,database,tp,fp,fn,map_pct" (map_pct column optional, and
/// blank per-row values are allowed). Duplicate (model, database) pairs and
/// conflicting version tags are rejected.
inline ExperimentMatrix parse_matrix_csv(std::string_view text, const std::string& source) {
  ExperimentMatrix matrix;
  bool saw_header = false;
  bool has_map_column = false;
  std::set<std::pair<std::string, std::string>> seen;

  axleval::detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (detail::trim(line).empty()) return;
    const auto fields = detail::split_csv_line(line);
    if (!saw_header) {
      if (fields.size() == 7 && fields[6] == "map_pct") {
        has_map_column = true;
      } else if (fields.size() != 6) {
        throw ParseError(source, line_no,
                         "expected header model,version,database,tp,fp,fn[,map_pct]");
      }
      const std::array<const char*, 6> expected = {"model", "version", "database",
                                                   "tp",    "fp",      "fn"};
      for (std::size_t i = 0; i < expected.size(); ++i) {
        if (fields[i] != expected[i]) {
          throw ParseError(source, line_no,
                           "unexpected header column '" + fields[i] + "', wanted '" +
                               expected[i] + "'");
        }
      }
      saw_header = true;
      return;
    }

    const std::size_t want = has_map_column ? 7 : 6;
    if (fields.size() != want) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(want) + " fields, got " +
                           std::to_string(fields.size()));
    }
    MatrixRow row;
    row.model = fields[0];
    row.version = fields[1];
    row.database = fields[2];
    if (row.model.empty() || row.version.empty() || row.database.empty()) {
      throw ParseError(source, line_no, "model, version and database must be non-empty");
    }
    row.counts.tp = detail::parse_count_field(fields[3], source, line_no);
    row.counts.fp = detail::parse_count_field(fields[4], source, line_no);
    row.counts.fn = detail::parse_count_field(fields[5], source, line_no);
    if (has_map_column && !fields[6].empty()) {
      const double value = axleval::detail::parse_decimal(fields[6], source, line_no);
      if (value < 0.0 || value > 100.0) {
        throw ParseError(source, line_no, "map_pct must lie in [0, 100]");
      }
      row.map_pct = value;
    }

    if (!seen.insert({row.model, row.database}).second) {
      throw ParseError(source, line_no,
                       "duplicate row for model '" + row.model + "' on database '" +
                           row.database + "'");
    }
    const auto it = matrix.model_version.find(row.model);
    if (it == matrix.model_version.end()) {
      matrix.model_version[row.model] = row.version;
    } else if (it->second != row.version) {
      throw ParseError(source, line_no,
                       "model '" + row.model + "' tagged with conflicting versions '" +
                           it->second + "' and '" + row.version + "'");
    }
    detail::push_unique(matrix.databases, row.database);
    detail::push_unique(matrix.models, row.model);
    detail::push_unique(matrix.versions, row.version);
    matrix.rows.push_back(std::move(row));
  });

  if (!saw_header) {
    throw ParseError(source, 1, "empty matrix CSV: header line required");
  }
  return matrix;
}

inline ExperimentMatrix load_matrix(const std::filesystem::path& path) {
  return parse_matrix_csv(axleval::detail::read_text_file(path), path.string());
}

struct MetricTableRow {
  std::string model;
  std::string version;
  std::string database;
  MetricsRow metrics;
};

/// Recomputes recall/precision/F1 from the counts; mAP passes through.
/// Rows come out grouped by database, then model (first-appearance order).
inline std::vector<MetricTableRow> derive_metric_table(const ExperimentMatrix& matrix) {
  auto rank_of = [](const std::vector<std::string>& seq, const std::string& value) {
    return static_cast<std::size_t>(
        std::find(seq.begin(), seq.end(), value) - seq.begin());
  };
  std::vector<MetricTableRow> table;
  table.reserve(matrix.rows.size());
  for (const MatrixRow& row : matrix.rows) {
    table.push_back({row.model, row.version, row.database,
                     metrics_row(row.counts, row.map_pct)});
  }
  std::sort(table.begin(), table.end(), [&](const MetricTableRow& a, const MetricTableRow& b) {
    const auto ka = std::make_pair(rank_of(matrix.databases, a.database),
                                   rank_of(matrix.models, a.model));
    const auto kb = std::make_pair(rank_of(matrix.databases, b.database),
                                   rank_of(matrix.models, b.model));
    return ka < kb;
  });
  return table;
}

/// One pairwise comparison: the first-named group's U1 is the headline "U
/// value" reports print; the outcome's min-U drives the decision.
struct BatteryComparison {
  std::string first;
  std::string second;
  UTestOutcome test;
};

namespace detail {

inline std::vector<double> group_map_values(const ExperimentMatrix& matrix,
                                            const std::function<bool(const MatrixRow&)>& in_group,
                                            const std::string& what) {
  std::vector<double> values;
  for (const MatrixRow& row : matrix.rows) {
    if (!in_group(row)) continue;
    if (!row.map_pct) {
      throw ValidationError("mAP column required: row (" + row.model + ", " + row.database +
                            ") has no map_pct value");
    }
    values.push_back(*row.map_pct);
  }
  if (values.empty()) {
    throw ValidationError("no rows found for " + what);
  }
  return values;
}

}  // namespace detail

/// Tests mAP distributions between the three training databases:
/// (d1 x d2), (d1 x d3), (d2 x d3) in first-appearance order.
inline std::array<BatteryComparison, 3> database_hypothesis_battery(
    const ExperimentMatrix& matrix, double alpha = 0.05) {
  if (matrix.databases.size() != 3) {
    throw ValidationError("database battery requires exactly 3 databases, got " +
                          std::to_string(matrix.databases.size()));
  }
  // Every database must carry the same model set.
  std::set<std::string> reference;
  for (const MatrixRow& row : matrix.rows) {
    if (row.database == matrix.databases.front()) reference.insert(row.model);
  }
  for (const std::string& db : matrix.databases) {
    std::set<std::string> models;
    for (const MatrixRow& row : matrix.rows) {
      if (row.database == db) models.insert(row.model);
    }
    if (models != reference) {
      throw ValidationError("unbalanced matrix: database '" + db +
                            "' does not cover the same model set");
    }
  }

  std::array<Sample, 3> samples;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string& db = matrix.databases[i];
    samples[i].label = db;
    samples[i].values = detail::group_map_values(
        matrix, [&](const MatrixRow& r) { return r.database == db; }, "database '" + db + "'");
  }
  const std::array<std::pair<std::size_t, std::size_t>, 3> pairs = {{{0, 1}, {0, 2}, {1, 2}}};
  std::array<BatteryComparison, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& [a, b] = pairs[i];
    out[i] = {samples[a].label, samples[b].label,
              mann_whitney_test(samples[a], samples[b], alpha)};
  }
  return out;
}

/// Tests mAP distributions between the three architecture versions, each
/// sample pooling a version's models across all databases.
inline std::array<BatteryComparison, 3> version_hypothesis_battery(
    const ExperimentMatrix& matrix, double alpha = 0.05) {
  if (matrix.versions.size() != 3) {
    throw ValidationError("version battery requires exactly 3 versions, got " +
                          std::to_string(matrix.versions.size()));
  }
  std::array<Sample, 3> samples;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string& version = matrix.versions[i];
    samples[i].label = version;
    samples[i].values = detail::group_map_values(
        matrix, [&](const MatrixRow& r) { return r.version == version; },
        "version '" + version + "'");
  }
  if (samples[0].values.size() != samples[1].values.size() ||
      samples[0].values.size() != samples[2].values.size()) {
    throw ValidationError("unbalanced matrix: versions contribute unequal sample sizes");
  }
  const std::array<std::pair<std::size_t, std::size_t>, 3> pairs = {{{0, 1}, {0, 2}, {1, 2}}};
  std::array<BatteryComparison, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& [a, b] = pairs[i];
    out[i] = {samples[a].label, samples[b].label,
              mann_whitney_test(samples[a], samples[b], alpha)};
  }
  return out;
}

enum class OutputFormat { Csv, Json, Markdown };

/// Everything a rendered report carries. Test sections may be empty when
/// the matrix has no mAP data.
struct ExperimentReport {
  std::vector<MetricTableRow> metrics;
  std::vector<BatteryComparison> database_tests;
  std::vector<BatteryComparison> version_tests;
};

namespace detail {

inline void render_tests_csv(std::string& out, const char* kind,
                             const std::vector<BatteryComparison>& tests) {
  if (tests.empty()) return;
  out += '\n';
  out += std::string(kind) + ",u1,u2,u,p_two_tailed,p_method,critical_value,decision\n";
  for (const BatteryComparison& c : tests) {
    out += c.first + " x " + c.second + ',' + fmt_u(c.test.u1) + ',' + fmt_u(c.test.u2) + ',' +
           fmt_u(c.test.u) + ',' + fmt_p(c.test.p_two_tailed) + ',' +
           method_name(c.test.p_method) + ',';
    if (c.test.critical_value) out += std::to_string(*c.test.critical_value);
    out += ',';
    out += decision_name(c.test.decision);
    out += '\n';
  }
}

inline void render_tests_markdown(std::string& out, const char* title,
                                  const std::vector<BatteryComparison>& tests) {
  if (tests.empty()) return;
  out += "\n## ";
  out += title;
  out += "\n\n| Comparison | U | Critical value | p (two-tailed) | Method | Decision |\n";
  out += "|---|---|---|---|---|---|\n";
  for (const BatteryComparison& c : tests) {
    out += "| " + c.first + " x " + c.second + " | " + fmt_u(c.test.u1) + " | " +
           (c.test.critical_value ? std::to_string(*c.test.critical_value) : std::string("-")) +
           " | " + fmt_p(c.test.p_two_tailed) + " | " + method_name(c.test.p_method) + " | " +
           decision_text(c.test.decision) + " |\n";
  }
}

inline nlohmann::json test_to_json(const BatteryComparison& c) {
  nlohmann::json j;
  j["first"] = c.first;
  j["second"] = c.second;
  j["u1"] = c.test.u1;
  j["u2"] = c.test.u2;
  j["u"] = c.test.u;
  j["p_two_tailed"] = c.test.p_two_tailed;
  j["p_method"] = method_name(c.test.p_method);
  if (c.test.critical_value) j["critical_value"] = *c.test.critical_value;
  j["decision"] = decision_name(c.test.decision);
  j["alpha"] = c.test.alpha;
  return j;
}

}  // namespace detail

/// Serializes a report. Output is a pure function of the input: fixed row
/// order, fixed formatting, no timestamps.
inline std::string render(const ExperimentReport& report, OutputFormat format) {
  using detail::fmt_pct;
  if (format == OutputFormat::Csv) {
    std::string out = "model,version,database,recall_pct,precision_pct,f1_pct,map_pct\n";
    for (const MetricTableRow& row : report.metrics) {
      out += row.model + ',' + row.version + ',' + row.database + ',' +
             fmt_pct(row.metrics.recall_pct) + ',' + fmt_pct(row.metrics.precision_pct) + ',' +
             fmt_pct(row.metrics.f1_pct) + ',';
      if (row.metrics.map_pct) out += fmt_pct(*row.metrics.map_pct);
      out += '\n';
    }
    detail::render_tests_csv(out, "database_comparison", report.database_tests);
    detail::render_tests_csv(out, "version_comparison", report.version_tests);
    return out;
  }

  if (format == OutputFormat::Markdown) {
    std::string out = "# Experiment report\n\n## Metrics\n\n";
    out += "| Database | Model | Recall (%) | Precision (%) | F1-score (%) | mAP (%) |\n";
    out += "|---|---|---|---|---|---|\n";
    for (const MetricTableRow& row : report.metrics) {
      out += "| " + row.database + " | " + row.model + " | " + fmt_pct(row.metrics.recall_pct) +
             " | " + fmt_pct(row.metrics.precision_pct) + " | " + fmt_pct(row.metrics.f1_pct) +
             " | " + (row.metrics.map_pct ? fmt_pct(*row.metrics.map_pct) : std::string("-")) +
             " |\n";
    }
    detail::render_tests_markdown(out, "Database comparisons (Mann-Whitney U)",
                                  report.database_tests);
    detail::render_tests_markdown(out, "Version comparisons (Mann-Whitney U)",
                                  report.version_tests);
    return out;
  }

  nlohmann::json doc;
  doc["metrics"] = nlohmann::json::array();
  for (const MetricTableRow& row : report.metrics) {
    nlohmann::json j;
    j["model"] = row.model;
    j["version"] = row.version;
    j["database"] = row.database;
    j["recall_pct"] = row.metrics.recall_pct;
    j["precision_pct"] = row.metrics.precision_pct;
    j["f1_pct"] = row.metrics.f1_pct;
    if (row.metrics.map_pct) j["map_pct"] = *row.metrics.map_pct;
    j["degenerate"] = row.metrics.degenerate;
    doc["metrics"].push_back(j);
  }
  doc["database_tests"] = nlohmann::json::array();
  for (const BatteryComparison& c : report.database_tests) {
    doc["database_tests"].push_back(detail::test_to_json(c));
  }
  doc["version_tests"] = nlohmann::json::array();
  for (const BatteryComparison& c : report.version_tests) {
    doc["version_tests"].push_back(detail::test_to_json(c));
  }
  // Plot-ready (label, value) series per metric, for bar charts.
  nlohmann::json series;
  const std::array<const char*, 4> metric_names = {"recall_pct", "precision_pct", "f1_pct",
                                                   "map_pct"};
  for (const char* name : metric_names) {
    nlohmann::json list = nlohmann::json::array();
    for (const MetricTableRow& row : report.metrics) {
      std::optional<double> value;
      if (std::string_view(name) == "recall_pct") value = row.metrics.recall_pct;
      if (std::string_view(name) == "precision_pct") value = row.metrics.precision_pct;
      if (std::string_view(name) == "f1_pct") value = row.metrics.f1_pct;
      if (std::string_view(name) == "map_pct") value = row.metrics.map_pct;
      if (!value) continue;
      nlohmann::json point;
      point["label"] = row.database + "/" + row.model;
      point["value"] = *value;
      list.push_back(point);
    }
    series[name] = list;
  }
  doc["series"] = series;
  return doc.dump(2) + "\n";
}

}  // namespace axleval
