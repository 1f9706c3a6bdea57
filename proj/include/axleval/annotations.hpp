#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "axleval/errors.hpp"
#include "axleval/types.hpp"

namespace axleval {

// Annotation text formats, one file per image:
//   ground truth:  "category_id cx cy w h"
//   detections :   "category_id confidence cx cy w h"
// Coordinates are normalized center/size decimals. Values within +-0.05 of
// the unit interval are clipped on load; anything further out is rejected.

namespace detail {

inline constexpr double kCoordinateSlack = 0.05;

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

inline double parse_decimal(std::string_view token, const std::string& source,
                            std::size_t line_no) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(source, line_no,
                     "expected a decimal number, got '" + std::string(token) + "'");
  }
  return value;
}

inline int parse_category(std::string_view token, const std::string& source,
                          std::size_t line_no) {
  int value = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(source, line_no,
                     "expected an integer category id, got '" + std::string(token) + "'");
  }
  if (value < 0) {
    throw ParseError(source, line_no,
                     "category id must be non-negative, got '" + std::string(token) + "'");
  }
  return value;
}

inline double parse_coordinate(std::string_view token, const std::string& source,
                               std::size_t line_no) {
  const double value = parse_decimal(token, source, line_no);
  if (value < -kCoordinateSlack || value > 1.0 + kCoordinateSlack) {
    throw ParseError(source, line_no,
                     "coordinate '" + std::string(token) + "' outside [-0.05, 1.05]");
  }
  return value;
}

inline BoundingBox parse_box(const std::vector<std::string_view>& fields,
                             std::size_t offset, const std::string& source,
                             std::size_t line_no) {
  BoundingBox raw{parse_coordinate(fields[offset], source, line_no),
                  parse_coordinate(fields[offset + 1], source, line_no),
                  parse_coordinate(fields[offset + 2], source, line_no),
                  parse_coordinate(fields[offset + 3], source, line_no)};
  try {
    return clip_to_unit_square(raw);
  } catch (const ValidationError& e) {
    throw ParseError(source, line_no, e.what());
  }
}

inline void for_each_line(std::string_view text,
                          const std::function<void(std::string_view, std::size_t)>& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = (eol == std::string_view::npos)
                                ? text.substr(pos)
                                : text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    fn(line, line_no);
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
}

inline std::string format_decimal(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError("cannot open file: " + path.string());
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace detail

/// Parses a ground-truth annotation file: one "category_id cx cy w h" line
/// per object. `source` names the file (or image id) in error messages.
inline std::vector<GroundTruthObject> parse_ground_truth(std::string_view text,
                                                         const std::string& source) {
  std::vector<GroundTruthObject> objects;
  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto fields = detail::split_fields(line);
    if (fields.empty()) return;
    if (fields.size() != 5) {
      throw ParseError(source, line_no,
                       "expected 5 fields (category cx cy w h), got " +
                           std::to_string(fields.size()));
    }
    GroundTruthObject obj;
    obj.category_id = detail::parse_category(fields[0], source, line_no);
    obj.box = detail::parse_box(fields, 1, source, line_no);
    objects.push_back(obj);
  });
  return objects;
}

/// Parses a detection file: one "category_id confidence cx cy w h" line per
/// detection, preserving file order.
inline std::vector<Detection> parse_detections(std::string_view text,
                                               const std::string& source) {
  std::vector<Detection> detections;
  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto fields = detail::split_fields(line);
    if (fields.empty()) return;
    if (fields.size() != 6) {
      throw ParseError(source, line_no,
                       "expected 6 fields (category confidence cx cy w h), got " +
                           std::to_string(fields.size()));
    }
    Detection det;
    det.category_id = detail::parse_category(fields[0], source, line_no);
    det.confidence = detail::parse_decimal(fields[1], source, line_no);
    if (det.confidence < 0.0 || det.confidence > 1.0) {
      throw ParseError(source, line_no,
                       "confidence " + std::string(fields[1]) + " outside [0, 1]");
    }
    det.box = detail::parse_box(fields, 2, source, line_no);
    detections.push_back(det);
  });
  return detections;
}

/// What load_dataset does when an image's detection file is listed in the
/// manifest but absent on disk. Ground-truth files are always required.
enum class MissingDetectionPolicy { WarnAndTreatEmpty, Error };

struct LoadOptions {
  MissingDetectionPolicy missing_detections = MissingDetectionPolicy::WarnAndTreatEmpty;
  std::vector<std::string>* warnings = nullptr;  // optional sink
};

/// Loads a dataset from a JSON manifest:
///   { "name": ..., "categories": {"0": "axle"},
///     "images": [ {"id": ..., "gt": path, "det": path?, "width"?, "height"?} ] }
/// Annotation paths are resolved relative to the manifest's directory.
/// Images come back sorted by id; duplicate ids and categories missing from
/// the table are load errors.
inline Dataset load_dataset(const std::filesystem::path& manifest_path,
                            const LoadOptions& options = {}) {
  namespace fs = std::filesystem;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("invalid manifest JSON in " + manifest_path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("name") || !doc.contains("categories") ||
      !doc.contains("images")) {
    throw LoadError("manifest " + manifest_path.string() +
                    " must be an object with name, categories and images");
  }

  Dataset dataset;
  dataset.name = doc.at("name").get<std::string>();
  for (const auto& [key, label] : doc.at("categories").items()) {
    int id = 0;
    auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
    if (ec != std::errc{} || ptr != key.data() + key.size() || id < 0) {
      throw LoadError("manifest " + manifest_path.string() +
                      ": category key '" + key + "' is not a non-negative integer");
    }
    dataset.categories[id] = label.get<std::string>();
  }

  const fs::path base = manifest_path.has_parent_path() ? manifest_path.parent_path()
                                                        : fs::path(".");
  std::set<std::string> seen_ids;
  for (const auto& entry : doc.at("images")) {
    ImageRecord rec;
    rec.image_id = entry.at("id").get<std::string>();
    if (rec.image_id.empty()) {
      throw LoadError("manifest " + manifest_path.string() + ": empty image id");
    }
    if (!seen_ids.insert(rec.image_id).second) {
      throw LoadError("manifest " + manifest_path.string() + ": duplicate image id '" +
                      rec.image_id + "'");
    }
    if (entry.contains("width")) rec.width = entry.at("width").get<int>();
    if (entry.contains("height")) rec.height = entry.at("height").get<int>();

    const fs::path gt_path = base / entry.at("gt").get<std::string>();
    if (!fs::exists(gt_path)) {
      throw LoadError("ground-truth file not found: " + gt_path.string() +
                      " (image '" + rec.image_id + "')");
    }
    rec.ground_truth = parse_ground_truth(detail::read_text_file(gt_path), gt_path.string());

    if (entry.contains("det")) {
      const fs::path det_path = base / entry.at("det").get<std::string>();
      if (fs::exists(det_path)) {
        rec.detections = parse_detections(detail::read_text_file(det_path), det_path.string());
      } else if (options.missing_detections == MissingDetectionPolicy::Error) {
        throw LoadError("detection file not found: " + det_path.string() +
                        " (image '" + rec.image_id + "')");
      } else if (options.warnings != nullptr) {
        options.warnings->push_back("detection file missing, counting zero detections: " +
                                    det_path.string());
      }
    }

    for (const auto& obj : rec.ground_truth) {
      if (dataset.categories.find(obj.category_id) == dataset.categories.end()) {
        throw LoadError("image '" + rec.image_id + "' references category " +
                        std::to_string(obj.category_id) + " missing from the manifest table");
      }
    }
    for (const auto& det : rec.detections) {
      if (dataset.categories.find(det.category_id) == dataset.categories.end()) {
        throw LoadError("image '" + rec.image_id + "' has a detection with category " +
                        std::to_string(det.category_id) + " missing from the manifest table");
      }
    }
    dataset.images.push_back(std::move(rec));
  }

  std::sort(dataset.images.begin(), dataset.images.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
  return dataset;
}

/// Materializes a dataset on disk: labels/<id>.txt, detections/<id>.txt for
/// images that have any, and the manifest itself. Returns the manifest path.
inline std::filesystem::path save_dataset(const Dataset& dataset,
                                          const std::filesystem::path& manifest_path) {
  namespace fs = std::filesystem;
  const fs::path base = manifest_path.has_parent_path() ? manifest_path.parent_path()
                                                        : fs::path(".");
  std::error_code ec;
  fs::create_directories(base / "labels", ec);
  if (ec) throw LoadError("cannot create directory: " + (base / "labels").string());

  nlohmann::json doc;
  doc["name"] = dataset.name;
  nlohmann::json categories = nlohmann::json::object();
  for (const auto& [id, label] : dataset.categories) {
    categories[std::to_string(id)] = label;
  }
  doc["categories"] = categories;

  nlohmann::json images = nlohmann::json::array();
  for (const auto& rec : dataset.images) {
    const std::string gt_rel = "labels/" + rec.image_id + ".txt";
    std::ofstream gt_out(base / gt_rel, std::ios::binary);
    if (!gt_out) throw LoadError("cannot write file: " + (base / gt_rel).string());
    for (const auto& obj : rec.ground_truth) {
      gt_out << obj.category_id << ' ' << detail::format_decimal(obj.box.cx) << ' '
             << detail::format_decimal(obj.box.cy) << ' '
             << detail::format_decimal(obj.box.w) << ' '
             << detail::format_decimal(obj.box.h) << '\n';
    }
    nlohmann::json entry;
    entry["id"] = rec.image_id;
    entry["gt"] = gt_rel;
    if (!rec.detections.empty()) {
      fs::create_directories(base / "detections", ec);
      if (ec) throw LoadError("cannot create directory: " + (base / "detections").string());
      const std::string det_rel = "detections/" + rec.image_id + ".txt";
      std::ofstream det_out(base / det_rel, std::ios::binary);
      if (!det_out) throw LoadError("cannot write file: " + (base / det_rel).string());
      for (const auto& det : rec.detections) {
        det_out << det.category_id << ' ' << detail::format_decimal(det.confidence) << ' '
                << detail::format_decimal(det.box.cx) << ' '
                << detail::format_decimal(det.box.cy) << ' '
                << detail::format_decimal(det.box.w) << ' '
                << detail::format_decimal(det.box.h) << '\n';
      }
      entry["det"] = det_rel;
    }
    if (rec.width) entry["width"] = *rec.width;
    if (rec.height) entry["height"] = *rec.height;
    images.push_back(entry);
  }
  doc["images"] = images;

  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw LoadError("cannot write manifest: " + manifest_path.string());
  out << doc.dump(2) << '\n';
  return manifest_path;
}

/// Image and per-category object totals (the shape of a databases table).
inline DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats stats;
  stats.image_count = dataset.images.size();
  for (const auto& rec : dataset.images) {
    for (const auto& obj : rec.ground_truth) {
      ++stats.object_count_per_category[obj.category_id];
    }
  }
  return stats;
}

}  // namespace axleval
