// Copyright 2026 The dvscell Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// File formats: detection JSON (RLE masks as integer arrays), labelme-style
// polygon annotations, 8-bit PNG rasters, scorer sidecars, external score
// maps, evaluation reports and flat key=value run configuration.
//
// Writers are deterministic: JSON objects are emitted with sorted keys and
// list elements one per line, doubles in shortest round-trip form.

#include <png.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvscell/detection.hpp"
#include "dvscell/dvs.hpp"
#include "dvscell/error.hpp"
#include "dvscell/eval.hpp"
#include "dvscell/geometry.hpp"
#include "dvscell/mask.hpp"
#include "dvscell/polygon.hpp"
#include "dvscell/select.hpp"

namespace dvscell {

using json = nlohmann::json;

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::kIoError, "short write to " + path.string());
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::kParseError, what + ": " + e.what());
  }
}

// Top-level object with each array element on its own line.
inline std::string dump_json_lines(const json& doc) {
  if (!doc.is_object()) return doc.dump() + "\n";
  std::string out = "{\n";
  bool first_key = true;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!first_key) out += ",\n";
    first_key = false;
    out += json(it.key()).dump() + ": ";
    if (it->is_array() && !it->empty()) {
      out += "[\n";
      for (std::size_t i = 0; i < it->size(); ++i) {
        out += "  " + (*it)[i].dump() + (i + 1 < it->size() ? ",\n" : "\n");
      }
      out += "]";
    } else {
      out += it->dump();
    }
  }
  out += "\n}\n";
  return out;
}

struct ImageInfo {
  std::int64_t image_id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;

  bool operator==(const ImageInfo&) const = default;
};

struct DetectionFile {
  int schema_version = 1;
  std::vector<ImageInfo> images;
  std::vector<Detection> detections;
  json extra = json::object();                  // unknown top-level fields
  std::map<std::int64_t, json> detection_extra; // unknown per-detection fields

  const ImageInfo* find_image(std::int64_t id) const {
    for (const auto& im : images) {
      if (im.image_id == id) return &im;
    }
    return nullptr;
  }
};

namespace detail {

template <typename T>
T get_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw Error(Errc::kParseError, where + ": missing '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::kParseError, where + ": field '" + key + "': " + e.what());
  }
}

inline View parse_view(const std::string& s, const std::string& where) {
  if (s == "original") return View::kOriginal;
  if (s == "rotated") return View::kRotated;
  throw Error(Errc::kParseError, where + ": unknown view '" + s + "'");
}

}  // namespace detail

inline json rle_to_json(const RleMask& rle) {
  return json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

inline RleMask rle_from_json(const json& seg, const std::string& where) {
  const auto size = detail::get_field<std::vector<int>>(seg, "size", where);
  if (size.size() != 2) throw Error(Errc::kParseError, where + ": size must be [h, w]");
  RleMask rle;
  rle.height = size[0];
  rle.width = size[1];
  rle.counts = detail::get_field<std::vector<std::uint32_t>>(seg, "counts", where);
  validate_rle(rle);
  return rle;
}

inline json detection_to_json(const Detection& d) {
  return json{{"det_id", d.det_id},
              {"image_id", d.image_id},
              {"class_id", d.class_id},
              {"score", d.score},
              {"bbox", {d.box.x, d.box.y, d.box.w, d.box.h}},
              {"segmentation", rle_to_json(d.mask)},
              {"view", std::string(view_name(d.view))}};
}

inline Detection detection_from_json(const json& j) {
  Detection d;
  const std::string where = "detection";
  if (!j.is_object()) throw Error(Errc::kParseError, "detection entry is not an object");
  d.det_id = detail::get_field<std::int64_t>(j, "det_id", where);
  const std::string w2 = where + " " + std::to_string(d.det_id);
  d.image_id = detail::get_field<std::int64_t>(j, "image_id", w2);
  d.class_id = detail::get_field<int>(j, "class_id", w2);
  d.score = detail::get_field<double>(j, "score", w2);
  const auto box = detail::get_field<std::vector<double>>(j, "bbox", w2);
  if (box.size() != 4) throw Error(Errc::kParseError, w2 + ": bbox must have 4 numbers");
  d.box = {box[0], box[1], box[2], box[3]};
  if (!j.contains("segmentation")) throw Error(Errc::kParseError, w2 + ": missing segmentation");
  d.mask = rle_from_json(j.at("segmentation"), w2);
  d.view = j.contains("view") ? detail::parse_view(detail::get_field<std::string>(j, "view", w2), w2)
                              : View::kOriginal;
  if (!(d.score >= 0.0 && d.score <= 1.0)) {
    throw Error(Errc::kParseError, w2 + ": score outside [0, 1]");
  }
  if (d.class_id < 1) throw Error(Errc::kParseError, w2 + ": class_id must be >= 1");
  return d;
}

inline json detection_file_to_json(const DetectionFile& f) {
  json doc = f.extra.is_object() ? f.extra : json::object();
  doc["schema_version"] = f.schema_version;
  json images = json::array();
  for (const auto& im : f.images) {
    images.push_back({{"image_id", im.image_id},
                      {"width", im.width},
                      {"height", im.height},
                      {"file_name", im.file_name}});
  }
  doc["images"] = images;
  json dets = json::array();
  for (const auto& d : f.detections) {
    json j = detection_to_json(d);
    if (auto it = f.detection_extra.find(d.det_id); it != f.detection_extra.end()) {
      for (auto e = it->second.begin(); e != it->second.end(); ++e) {
        if (!j.contains(e.key())) j[e.key()] = e.value();
      }
    }
    dets.push_back(std::move(j));
  }
  doc["detections"] = dets;
  return doc;
}

inline DetectionFile detection_file_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(Errc::kParseError, "detection file must be an object");
  DetectionFile f;
  static const char* kKnownTop[] = {"schema_version", "images", "detections"};
  static const char* kKnownDet[] = {"det_id", "image_id", "class_id", "score",
                                    "bbox",   "segmentation", "view"};
  f.schema_version = doc.contains("schema_version")
                         ? detail::get_field<int>(doc, "schema_version", "file")
                         : 1;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find_if(std::begin(kKnownTop), std::end(kKnownTop),
                     [&](const char* k) { return it.key() == k; }) == std::end(kKnownTop)) {
      f.extra[it.key()] = it.value();
    }
  }
  if (doc.contains("images")) {
    for (const auto& im : doc.at("images")) {
      ImageInfo info;
      info.image_id = detail::get_field<std::int64_t>(im, "image_id", "image");
      info.width = detail::get_field<int>(im, "width", "image");
      info.height = detail::get_field<int>(im, "height", "image");
      info.file_name = im.contains("file_name") ? detail::get_field<std::string>(im, "file_name", "image")
                                                : std::string();
      f.images.push_back(info);
    }
  }
  if (doc.contains("detections")) {
    for (const auto& j : doc.at("detections")) {
      Detection d = detection_from_json(j);
      if (!f.find_image(d.image_id)) {
        throw Error(Errc::kParseError, "detection " + std::to_string(d.det_id) +
                                           " references unknown image " +
                                           std::to_string(d.image_id));
      }
      json extra = json::object();
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find_if(std::begin(kKnownDet), std::end(kKnownDet),
                         [&](const char* k) { return it.key() == k; }) == std::end(kKnownDet)) {
          extra[it.key()] = it.value();
        }
      }
      if (!extra.empty()) f.detection_extra[d.det_id] = std::move(extra);
      f.detections.push_back(std::move(d));
    }
  }
  return f;
}

inline DetectionFile read_detections(const std::filesystem::path& path) {
  return detection_file_from_json(parse_json(read_text_file(path), path.string()));
}

inline void write_detections(const DetectionFile& f, const std::filesystem::path& path) {
  write_text_file(path, dump_json_lines(detection_file_to_json(f)));
}

// Ground truth stored in detection format: each entry becomes a GtInstance
// (score and view ignored, optional boolean "ignore" honored).
inline std::vector<GtInstance> gts_from_detection_file(const DetectionFile& f) {
  std::vector<GtInstance> gts;
  for (const auto& d : f.detections) {
    GtInstance g;
    g.image_id = d.image_id;
    g.gt_id = d.det_id;
    g.class_id = d.class_id;
    g.mask = d.mask;
    g.box = bbox_of_mask(d.mask);
    if (auto it = f.detection_extra.find(d.det_id);
        it != f.detection_extra.end() && it->second.contains("ignore")) {
      g.ignore = it->second.at("ignore").get<bool>();
    }
    gts.push_back(std::move(g));
  }
  return gts;
}

// ---------------------------------------------------------------------------
// Labelme-style annotations.

struct AnnotationShape {
  std::string label;
  Polygon points;
};

struct Annotation {
  int image_width = 0;
  int image_height = 0;
  std::string image_path;
  std::vector<AnnotationShape> shapes;
};

inline json annotation_to_json(const Annotation& a) {
  json shapes = json::array();
  for (const auto& s : a.shapes) {
    json pts = json::array();
    for (const auto& p : s.points) pts.push_back({p.x, p.y});
    shapes.push_back({{"label", s.label},
                      {"points", pts},
                      {"group_id", nullptr},
                      {"shape_type", "polygon"},
                      {"flags", json::object()}});
  }
  return json{{"version", "5.0.1"},
              {"flags", json::object()},
              {"shapes", shapes},
              {"imagePath", a.image_path},
              {"imageData", nullptr},
              {"imageHeight", a.image_height},
              {"imageWidth", a.image_width}};
}

inline Annotation annotation_from_json(const json& doc, const std::string& where) {
  if (!doc.is_object()) throw Error(Errc::kParseError, where + ": not an object");
  Annotation a;
  a.image_height = detail::get_field<int>(doc, "imageHeight", where);
  a.image_width = detail::get_field<int>(doc, "imageWidth", where);
  if (doc.contains("imagePath") && doc.at("imagePath").is_string()) {
    a.image_path = doc.at("imagePath").get<std::string>();
  }
  if (doc.contains("shapes")) {
    for (const auto& s : doc.at("shapes")) {
      AnnotationShape shape;
      shape.label = detail::get_field<std::string>(s, "label", where);
      if (s.contains("shape_type") && s.at("shape_type") != "polygon") {
        throw Error(Errc::kParseError, where + ": unsupported shape_type " +
                                           s.at("shape_type").dump());
      }
      for (const auto& p : detail::get_field<std::vector<std::vector<double>>>(s, "points", where)) {
        if (p.size() != 2) throw Error(Errc::kParseError, where + ": point must be [x, y]");
        shape.points.push_back({p[0], p[1]});
      }
      a.shapes.push_back(std::move(shape));
    }
  }
  return a;
}

inline void write_annotation(const Annotation& a, const std::filesystem::path& path) {
  write_text_file(path, annotation_to_json(a).dump(1) + "\n");
}

using LabelMap = std::map<std::string, int>;

inline std::vector<GtInstance> annotation_to_gts(const Annotation& a, const LabelMap& labels,
                                                 std::int64_t image_id,
                                                 std::int64_t first_gt_id = 0) {
  if (a.image_width < 1 || a.image_height < 1) {
    throw Error(Errc::kParseError, "annotation image size must be positive");
  }
  std::vector<GtInstance> gts;
  std::int64_t next = first_gt_id;
  for (const auto& s : a.shapes) {
    const auto it = labels.find(s.label);
    if (it == labels.end()) throw Error(Errc::kUnknownLabel, "label '" + s.label + "'");
    GtInstance g;
    g.image_id = image_id;
    g.gt_id = next++;
    g.class_id = it->second;
    g.mask = to_rle(rasterize_polygon(s.points, {a.image_width, a.image_height}));
    g.box = bbox_of_mask(g.mask);
    gts.push_back(std::move(g));
  }
  return gts;
}

inline std::vector<GtInstance> read_annotations(const std::filesystem::path& path,
                                                const LabelMap& labels,
                                                std::int64_t image_id = 0,
                                                std::int64_t first_gt_id = 0) {
  const Annotation a =
      annotation_from_json(parse_json(read_text_file(path), path.string()), path.string());
  return annotation_to_gts(a, labels, image_id, first_gt_id);
}

inline LabelMap label_map_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(Errc::kParseError, "label map must be an object");
  LabelMap m;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it->is_number_integer() || it->get<int>() < 1) {
      throw Error(Errc::kParseError, "label '" + it.key() + "' needs a class id >= 1");
    }
    m[it.key()] = it->get<int>();
  }
  return m;
}

inline LabelMap read_label_map(const std::filesystem::path& path) {
  return label_map_from_json(parse_json(read_text_file(path), path.string()));
}

// ---------------------------------------------------------------------------
// PNG rasters, 8-bit gray or RGB.

inline Raster read_raster(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    const std::string msg = image.message;
    png_image_free(&image);
    if (!std::filesystem::exists(path)) throw Error(Errc::kIoError, "cannot open " + path.string());
    throw Error(Errc::kUnsupportedFormat, path.string() + ": " + msg);
  }
  if (image.format & (PNG_FORMAT_FLAG_LINEAR | PNG_FORMAT_FLAG_ALPHA)) {
    png_image_free(&image);
    throw Error(Errc::kUnsupportedFormat,
                path.string() + ": only 8-bit gray or RGB without alpha is supported");
  }
  const int channels = (image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> samples(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, samples.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::kUnsupportedFormat, path.string() + ": " + msg);
  }
  return Raster(static_cast<int>(image.width), static_cast<int>(image.height), channels,
                std::move(samples));
}

inline void write_raster(const Raster& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.samples().data(), 0,
                               nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::kIoError, path.string() + ": " + msg);
  }
}

// ---------------------------------------------------------------------------
// Scorers and scores.

inline json logistic_model_to_json(const LogisticModel& m) {
  return json{{"kind", "logistic_geom"}, {"weights", m.weights}, {"bias", m.bias},
              {"mean", m.mean},          {"scale", m.scale},     {"degenerate", m.degenerate}};
}

inline LogisticModel logistic_model_from_json(const json& j) {
  const std::string where = "scorer";
  if (detail::get_field<std::string>(j, "kind", where) != "logistic_geom") {
    throw Error(Errc::kParseError, "scorer kind must be logistic_geom");
  }
  LogisticModel m;
  m.weights = detail::get_field<std::vector<double>>(j, "weights", where);
  m.bias = detail::get_field<double>(j, "bias", where);
  m.mean = detail::get_field<std::vector<double>>(j, "mean", where);
  m.scale = detail::get_field<std::vector<double>>(j, "scale", where);
  m.degenerate = j.value("degenerate", false);
  if (!m.trained()) throw Error(Errc::kScorerNotTrained, "scorer sidecar has wrong feature count");
  return m;
}

inline ExternalScores external_scores_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(Errc::kParseError, "scores file must be an object");
  ExternalScores s;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    std::int64_t id = 0;
    try {
      std::size_t used = 0;
      id = std::stoll(it.key(), &used);
      if (used != it.key().size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(Errc::kParseError, "score key '" + it.key() + "' is not a det_id");
    }
    if (!it->is_number()) throw Error(Errc::kParseError, "score for " + it.key() + " not a number");
    s.by_det_id[id] = it->get<double>();
  }
  return s;
}

inline json external_scores_to_json(const ExternalScores& s) {
  json doc = json::object();
  for (const auto& [id, v] : s.by_det_id) doc[std::to_string(id)] = v;
  return doc;
}

// ---------------------------------------------------------------------------
// Reports.

inline json ap_report_to_json(const ApReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json per_class = json::array();
  for (const auto& c : r.per_class) {
    json per_t = json::array();
    for (const auto& v : c.per_threshold) per_t.push_back(opt(v));
    per_class.push_back(
        {{"class_id", c.class_id}, {"n_gt", c.n_gt}, {"ap", opt(c.ap)}, {"per_threshold", per_t}});
  }
  json counts = json::array();
  for (const auto& c : r.counts) {
    counts.push_back({{"iou", c.iou_thresh}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}});
  }
  return json{{"iou_type", std::string(iou_type_name(r.iou_type))},
              {"ap", r.ap},
              {"ap50", opt(r.ap50)},
              {"ap75", opt(r.ap75)},
              {"thresholds", r.thresholds},
              {"per_threshold", r.per_threshold},
              {"per_class", per_class},
              {"counts", counts},
              {"valid_classes", r.valid_classes}};
}

inline json eval_summary_to_json(const EvalSummary& s) {
  return json{{"bbox", ap_report_to_json(s.bbox)}, {"segm", ap_report_to_json(s.segm)}};
}

// ---------------------------------------------------------------------------
// Flat key=value configuration. '#' starts a comment; blank lines ignored.

using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::kParseError, "config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(Errc::kParseError, "config line " + std::to_string(lineno) + ": empty key");
    m[key] = trim(line.substr(eq + 1));
  }
  return m;
}

inline ConfigMap read_config(const std::filesystem::path& path) {
  return parse_config_text(read_text_file(path));
}

}  // namespace dvscell
