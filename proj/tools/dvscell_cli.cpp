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

// dvscell command-line frontend.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure.
// Every command that writes files also writes a manifest listing the
// effective configuration and SHA-256 digests of inputs and outputs.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dvscell/dvscell.hpp"

namespace fs = std::filesystem;
using namespace dvscell;

namespace {

std::string sha256_file(const fs::path& path) {
  const std::string data = read_text_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::kIoError, "sha256 failed for " + path.string());
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}

  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void config(ConfigMap c) { config_ = std::move(c); }
  void param(const std::string& k, json v) { params_[k] = std::move(v); }

  template <typename Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timings_.emplace_back(name, elapsed_ms(t0));
    } else {
      auto r = fn();
      timings_.emplace_back(name, elapsed_ms(t0));
      return r;
    }
  }

  void write(const fs::path& path, bool with_timings) const {
    json doc;
    doc["tool"] = "dvscell";
    doc["version"] = kVersion;
    doc["command"] = command_;
    doc["config"] = config_;
    doc["parameters"] = params_;
    auto files = [](const std::vector<fs::path>& paths) {
      json arr = json::array();
      for (const auto& p : paths) {
        arr.push_back({{"path", p.generic_string()}, {"sha256", sha256_file(p)}});
      }
      return arr;
    };
    doc["inputs"] = files(inputs_);
    doc["outputs"] = files(outputs_);
    if (with_timings) {
      json t = json::object();
      for (const auto& [name, ms] : timings_) t[name] = ms;
      doc["timings_ms"] = t;
    }
    write_text_file(path, doc.dump(2) + "\n");
  }

 private:
  static double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }

  std::string command_;
  std::vector<fs::path> inputs_, outputs_;
  ConfigMap config_;
  json params_ = json::object();
  std::vector<std::pair<std::string, double>> timings_;
};

// Options shared by every subcommand.
struct Common {
  std::string config_file;
  int jobs = 1;
  bool timings = false;
  std::string manifest;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::vector<CLI::Option*>> flag_opts;  // per subcommand
};

void add_common(CLI::App* sub, Common& c, bool config_keys) {
  sub->add_option("--jobs", c.jobs, "Worker threads for per-image work")->check(CLI::PositiveNumber);
  sub->add_flag("--timings", c.timings, "Record per-stage wall-clock times in the manifest");
  sub->add_option("--manifest", c.manifest, "Manifest path (default: next to the outputs)");
  if (!config_keys) return;
  sub->add_option("--config", c.config_file, "key=value file; flags override it");
  for (const auto& key : config_key_names()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    c.flag_opts[key].push_back(sub->add_option("--" + flag, c.flags[key], "Config key " + key));
  }
}

RunConfig resolve_config(const Common& c, Manifest* m) {
  ConfigMap values;
  if (!c.config_file.empty()) {
    values = read_config(c.config_file);
    if (m) m->input(c.config_file);
  }
  for (const auto& [key, opts] : c.flag_opts) {
    for (const CLI::Option* opt : opts) {
      if (opt->count() > 0) values[key] = c.flags.at(key);
    }
  }
  RunConfig cfg;
  apply_config(values, cfg);
  if (m) m->config(config_snapshot(cfg));
  return cfg;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIoError, "cannot create " + dir.string() + ": " + ec.message());
}

fs::path manifest_path(const Common& c, const fs::path& default_path) {
  return c.manifest.empty() ? default_path : fs::path(c.manifest);
}

std::string pad(std::int64_t v, int width) {
  std::string s = std::to_string(v);
  return std::string(std::max(0, width - static_cast<int>(s.size())), '0') + s;
}

std::map<std::int64_t, std::vector<Detection>> by_image(const std::vector<Detection>& dets) {
  std::map<std::int64_t, std::vector<Detection>> m;
  for (const auto& d : dets) m[d.image_id].push_back(d);
  return m;
}

// Ground truth from a detection-format file or a directory of labelme files.
// Labelme files are matched to prediction images by file stem.
std::vector<GtInstance> load_gts(const fs::path& path, const std::string& label_map,
                                 const DetectionFile* preds, std::vector<ImageInfo>* images,
                                 Manifest& m) {
  if (!fs::exists(path)) throw Error(Errc::kIoError, "no such file or directory: " + path.string());
  if (!fs::is_directory(path)) {
    m.input(path);
    DetectionFile f = read_detections(path);
    if (images) *images = f.images;
    return gts_from_detection_file(f);
  }
  if (label_map.empty()) throw Error(Errc::kInvalidConfig, "--label-map is required for labelme input");
  m.input(label_map);
  const LabelMap labels = read_label_map(label_map);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::int64_t next_free = 0;
  if (preds) {
    for (const auto& im : preds->images) next_free = std::max(next_free, im.image_id + 1);
  }
  std::vector<GtInstance> gts;
  std::int64_t next_gt = 0;
  for (const auto& file : files) {
    m.input(file);
    const Annotation a = annotation_from_json(parse_json(read_text_file(file), file.string()), file.string());
    std::optional<std::int64_t> id;
    if (preds) {
      for (const auto& im : preds->images) {
        if (fs::path(im.file_name).stem() == file.stem()) id = im.image_id;
      }
    }
    if (!id) id = next_free++;
    if (images) images->push_back({*id, a.image_width, a.image_height, file.filename().string()});
    for (auto& g : annotation_to_gts(a, labels, *id, next_gt)) {
      next_gt = g.gt_id + 1;
      gts.push_back(std::move(g));
    }
  }
  return gts;
}

json metrics_json(const EvalSummary& s) {
  auto v = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  return json{{"AP_bbox", s.bbox.ap},           {"AP50_bbox", v(s.bbox.ap50)},
              {"AP75_bbox", v(s.bbox.ap75)},     {"AP_segm", s.segm.ap},
              {"AP50_segm", v(s.segm.ap50)},     {"AP75_segm", v(s.segm.ap75)}};
}

// ---------------------------------------------------------------------------

int cmd_rotate_views(const Common& c, const std::string& image, const std::string& out_dir) {
  Manifest m("rotate-views");
  const RunConfig cfg = resolve_config(c, &m);
  m.input(image);
  const Raster img = m.stage("read", [&] { return read_raster(image); });
  const auto views = m.stage("warp", [&] { return generate_views(img, cfg.dvs); });
  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  write_raster(views[0].raster, dir / "original.png");
  write_raster(views[1].raster, dir / "rotated.png");
  const AffineTransform& t = views[1].transform;
  const json info{{"theta", cfg.dvs.theta},
                  {"original", {{"width", img.width()}, {"height", img.height()}}},
                  {"rotated", {{"width", views[1].raster.width()}, {"height", views[1].raster.height()}}},
                  {"transform", {t.a, t.b, t.tx, t.c, t.d, t.ty}}};
  write_text_file(dir / "views.json", info.dump(2) + "\n");
  for (const char* f : {"original.png", "rotated.png", "views.json"}) m.output(dir / f);
  m.write(manifest_path(c, dir / "manifest.json"), c.timings);
  return 0;
}

int cmd_fuse(const Common& c, const std::string& orig_path, const std::string& rot_path,
             const std::string& out) {
  Manifest m("fuse");
  const RunConfig cfg = resolve_config(c, &m);
  m.input(orig_path);
  m.input(rot_path);
  const DetectionFile orig = read_detections(orig_path);
  const DetectionFile rot = read_detections(rot_path);
  const auto orig_by = by_image(orig.detections);
  const auto rot_by = by_image(rot.detections);
  std::vector<ImageInfo> images = orig.images;
  std::vector<std::vector<Detection>> fused(images.size());
  m.stage("fuse", [&] {
    parallel_for(images.size(), c.jobs, [&](std::size_t i) {
      const ImageInfo& im = images[i];
      const RotatedFrame frame = rotation_transform(im.width, im.height, cfg.dvs.theta);
      static const std::vector<Detection> kNone;
      const auto o = orig_by.find(im.image_id);
      const auto r = rot_by.find(im.image_id);
      fused[i] = dvs_fuse(o == orig_by.end() ? kNone : o->second,
                          r == rot_by.end() ? kNone : r->second, frame.transform,
                          {im.width, im.height}, cfg.dvs);
    });
  });
  DetectionFile outf;
  outf.images = images;
  for (auto& v : fused) {
    for (auto& d : v) outf.detections.push_back(std::move(d));
  }
  write_detections(outf, out);
  m.output(out);
  m.param("fused", outf.detections.size());
  m.write(manifest_path(c, out + ".manifest.json"), c.timings);
  std::cout << "fused " << orig.detections.size() << " + " << rot.detections.size() << " -> "
            << outf.detections.size() << " detections\n";
  return 0;
}

struct ScorerArgs {
  std::string kind = "logistic_geom";
  std::string scores, model, gt, label_map;
};

int cmd_train_scorer(const Common& c, const std::string& cands_path, const ScorerArgs& a,
                     const std::string& out) {
  Manifest m("train-scorer");
  const RunConfig cfg = resolve_config(c, &m);
  m.input(cands_path);
  const DetectionFile cands = read_detections(cands_path);
  if (a.gt.empty()) throw Error(Errc::kInvalidConfig, "--gt is required");
  const std::vector<GtInstance> gts = load_gts(a.gt, a.label_map, &cands, nullptr, m);
  const auto cand_by = by_image(cands.detections);
  std::map<std::int64_t, std::vector<GtInstance>> gt_by;
  for (const auto& g : gts) gt_by[g.image_id].push_back(g);
  std::vector<FeatureVector> features;
  std::vector<MsLabel> labels;
  for (const auto& [id, v] : cand_by) {
    for (const auto& f : candidate_features(v)) features.push_back(f);
    for (const auto& l : build_ms_labels(v, gt_by[id])) labels.push_back(l);
  }
  const TrainResult tr = m.stage("train", [&] { return train_logistic_scorer(features, labels, cfg.ms.hyper); });
  if (tr.degenerate) std::cerr << "warning: all labels identical, scorer is constant\n";
  write_text_file(out, logistic_model_to_json(tr.model).dump(2) + "\n");
  m.output(out);
  m.param("samples", features.size());
  m.param("final_loss", tr.loss_trace.back());
  m.write(manifest_path(c, out + ".manifest.json"), c.timings);
  std::cout << "trained on " << features.size() << " candidates, loss "
            << format_double(tr.loss_trace.front()) << " -> " << format_double(tr.loss_trace.back())
            << "\n";
  return 0;
}

int cmd_select(const Common& c, const std::string& cands_path, const ScorerArgs& a, bool skip_dedup,
               const std::string& out, const std::string& scores_out) {
  Manifest m("select");
  const RunConfig cfg = resolve_config(c, &m);
  m.input(cands_path);
  const DetectionFile cands = read_detections(cands_path);
  Scorer scorer;
  if (a.kind == "external") {
    if (a.scores.empty()) throw Error(Errc::kInvalidConfig, "--scores is required for external");
    m.input(a.scores);
    scorer = external_scores_from_json(parse_json(read_text_file(a.scores), a.scores));
  } else if (a.kind == "iou_oracle") {
    if (a.gt.empty()) throw Error(Errc::kInvalidConfig, "--gt is required for iou_oracle");
    scorer = IouOracle{load_gts(a.gt, a.label_map, &cands, nullptr, m)};
  } else if (a.kind == "logistic_geom") {
    if (a.model.empty()) throw Error(Errc::kScorerNotTrained, "--model is required for logistic_geom");
    m.input(a.model);
    scorer = logistic_model_from_json(parse_json(read_text_file(a.model), a.model));
  } else {
    throw Error(Errc::kInvalidConfig, "unknown scorer '" + a.kind + "'");
  }
  m.param("scorer", a.kind);
  m.param("dedup", !skip_dedup);

  const auto cand_by = by_image(cands.detections);
  std::vector<std::pair<std::int64_t, std::vector<Detection>>> groups(cand_by.begin(), cand_by.end());
  std::vector<std::vector<Detection>> kept(groups.size());
  std::vector<std::vector<double>> scores(groups.size());
  m.stage("select", [&] {
    parallel_for(groups.size(), c.jobs, [&](std::size_t i) {
      scores[i] = score_candidates(scorer, nullptr, groups[i].second);
      if (skip_dedup) {
        kept[i] = select(groups[i].second, scores[i], cfg.ms.keep_thresh);
      } else {
        kept[i] = mask_select(groups[i].second, scores[i], cfg.ms);
      }
    });
  });
  DetectionFile outf;
  outf.images = cands.images;
  ExternalScores all_scores;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (auto& d : kept[i]) outf.detections.push_back(std::move(d));
    for (std::size_t j = 0; j < groups[i].second.size(); ++j) {
      all_scores.by_det_id[groups[i].second[j].det_id] = scores[i][j];
    }
  }
  write_detections(outf, out);
  m.output(out);
  if (!scores_out.empty()) {
    write_text_file(scores_out, external_scores_to_json(all_scores).dump(1) + "\n");
    m.output(scores_out);
  }
  m.param("kept", outf.detections.size());
  m.write(manifest_path(c, out + ".manifest.json"), c.timings);
  std::cout << "kept " << outf.detections.size() << " of " << cands.detections.size()
            << " candidates\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& pred_path, const std::string& gt_path,
             const std::string& label_map, const std::string& out, const std::string& overlay_dir,
             const std::string& image_dir) {
  Manifest m("eval");
  const RunConfig cfg = resolve_config(c, &m);
  m.input(pred_path);
  const DetectionFile preds = read_detections(pred_path);
  std::vector<ImageInfo> gt_images;
  const std::vector<GtInstance> gts = load_gts(gt_path, label_map, &preds, &gt_images, m);
  std::set<std::int64_t> ids;
  for (const auto& im : preds.images) ids.insert(im.image_id);
  for (const auto& im : gt_images) ids.insert(im.image_id);
  for (const auto& g : gts) ids.insert(g.image_id);
  const std::vector<std::int64_t> id_list(ids.begin(), ids.end());
  const EvalSummary summary =
      m.stage("evaluate", [&] { return evaluate_both(preds.detections, gts, id_list, cfg.eval); });
  std::cout << format_metrics_table(summary);

  if (!out.empty()) {
    json doc = eval_summary_to_json(summary);
    doc["metrics"] = metrics_json(summary);
    write_text_file(out, doc.dump(1) + "\n");
    m.output(out);
  }
  if (!overlay_dir.empty()) {
    ensure_dir(overlay_dir);
    const auto pred_by = by_image(preds.detections);
    std::map<std::int64_t, std::vector<GtInstance>> gt_by;
    for (const auto& g : gts) gt_by[g.image_id].push_back(g);
    std::map<std::int64_t, ImageInfo> info;
    for (const auto& im : gt_images) info[im.image_id] = im;
    for (const auto& im : preds.images) info[im.image_id] = im;
    std::vector<fs::path> written(id_list.size());
    m.stage("overlay", [&] {
      parallel_for(id_list.size(), c.jobs, [&](std::size_t i) {
        const std::int64_t id = id_list[i];
        Dims dims{0, 0};
        std::string file_name;
        if (auto it = info.find(id); it != info.end()) {
          dims = {it->second.width, it->second.height};
          file_name = it->second.file_name;
        } else if (!gt_by[id].empty()) {
          dims = {gt_by[id].front().mask.width, gt_by[id].front().mask.height};
        }
        if (dims.width < 1 || dims.height < 1) return;
        Raster base(dims.width, dims.height, 1);
        if (!image_dir.empty() && !file_name.empty() && fs::exists(fs::path(image_dir) / file_name)) {
          base = read_raster(fs::path(image_dir) / file_name);
        }
        static const std::vector<Detection> kNone;
        const auto p = pred_by.find(id);
        const Raster img = render_overlay(base, p == pred_by.end() ? kNone : p->second, gt_by[id]);
        written[i] = fs::path(overlay_dir) / ("overlay_" + pad(id, 4) + ".png");
        write_raster(img, written[i]);
      });
    });
    for (const auto& p : written) {
      if (!p.empty()) m.output(p);
    }
  }
  if (!out.empty() || !overlay_dir.empty() || !c.manifest.empty()) {
    const fs::path def = !out.empty() ? fs::path(out + ".manifest.json")
                                      : fs::path(overlay_dir) / "manifest.json";
    m.write(manifest_path(c, def), c.timings);
  }
  return 0;
}

struct SynthArgs {
  std::string suite = "fixed";
  std::string out_dir;
  int images = -1;
  std::optional<std::uint64_t> seed;
  int n_cells = -1;
};

int cmd_synth(const Common& c, const SynthArgs& a) {
  Manifest m("synth");
  const RunConfig cfg = resolve_config(c, &m);
  SuiteSpec suite = suite_by_name(a.suite);
  if (a.seed) suite.seeds = {*a.seed};
  if (a.n_cells >= 0) suite.scene.n_cells = a.n_cells;
  std::size_t n = suite.image_count();
  if (a.images >= 0) {
    n = static_cast<std::size_t>(a.images);
    const auto per_seed = static_cast<int>((n + suite.seeds.size() - 1) / suite.seeds.size());
    suite.images_per_seed = std::max(suite.images_per_seed, per_seed);
  }
  m.param("suite", suite.name);
  m.param("images", n);
  m.param("n_cells", suite.scene.n_cells);
  const fs::path dir(a.out_dir);
  ensure_dir(dir / "images");
  ensure_dir(dir / "annotations");

  std::vector<ImageRun> runs(n);
  std::vector<std::string> names(n);
  m.stage("generate", [&] {
    parallel_for(n, c.jobs, [&](std::size_t i) {
      const auto id = static_cast<std::int64_t>(i);
      runs[i] = simulate_image(suite.scene, suite.oracle, cfg.dvs, suite.image_seed(i), id);
      names[i] = "scene_" + pad(id, 4);
      write_raster(render_scene(runs[i].scene), dir / "images" / (names[i] + ".png"));
      Annotation ann;
      ann.image_width = runs[i].scene.dims.width;
      ann.image_height = runs[i].scene.dims.height;
      ann.image_path = "../images/" + names[i] + ".png";
      for (const Cell& cell : runs[i].scene.cells) {
        ann.shapes.push_back({cell.class_id == 2 ? "unhealthy" : "healthy", cell_polygon(cell)});
      }
      write_annotation(ann, dir / "annotations" / (names[i] + ".json"));
    });
  });
  DetectionFile gt, orig, rot;
  for (std::size_t i = 0; i < n; ++i) {
    const ImageRun& r = runs[i];
    const auto id = static_cast<std::int64_t>(i);
    const ImageInfo info{id, r.scene.dims.width, r.scene.dims.height, names[i] + ".png"};
    const RotatedFrame frame = rotation_transform(info.width, info.height, cfg.dvs.theta);
    gt.images.push_back(info);
    orig.images.push_back(info);
    rot.images.push_back({id, frame.out.width, frame.out.height, names[i] + ".png"});
    for (const auto& g : r.scene.gts) {
      Detection d;
      d.image_id = g.image_id;
      d.det_id = g.gt_id;
      d.class_id = g.class_id;
      d.score = 1.0;
      d.box = g.box;
      d.mask = g.mask;
      gt.detections.push_back(std::move(d));
    }
    orig.detections.insert(orig.detections.end(), r.original.begin(), r.original.end());
    rot.detections.insert(rot.detections.end(), r.rotated.begin(), r.rotated.end());
  }
  write_detections(gt, dir / "gt.json");
  write_detections(orig, dir / "detections_original.json");
  write_detections(rot, dir / "detections_rotated.json");
  write_text_file(dir / "label_map.json", json{{"healthy", 1}, {"unhealthy", 2}}.dump(1) + "\n");
  for (const auto& name : names) {
    m.output(dir / "images" / (name + ".png"));
    m.output(dir / "annotations" / (name + ".json"));
  }
  for (const char* f : {"gt.json", "detections_original.json", "detections_rotated.json", "label_map.json"}) {
    m.output(dir / f);
  }
  m.write(manifest_path(c, dir / "manifest.json"), c.timings);
  std::cout << "wrote " << n << " scenes to " << dir.generic_string() << "\n";
  return 0;
}

int cmd_split(const Common& c, std::size_t n, const std::string& sizes_arg, std::uint64_t seed,
              const std::string& out_dir) {
  Manifest m("split");
  std::vector<std::size_t> sizes;
  std::stringstream ss(sizes_arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      sizes.push_back(std::stoul(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(Errc::kInvalidConfig, "--sizes expects three comma-separated counts");
    }
  }
  if (sizes.size() != 3) throw Error(Errc::kInvalidConfig, "--sizes expects three comma-separated counts");
  const auto parts = dataset_split(n, {sizes[0], sizes[1], sizes[2]}, seed);
  m.param("n", n);
  m.param("sizes", sizes);
  m.param("seed", seed);
  ensure_dir(out_dir);
  const char* names[] = {"train.txt", "val.txt", "test.txt"};
  for (int p = 0; p < 3; ++p) {
    std::string text;
    for (std::size_t i : parts[p]) text += std::to_string(i) + "\n";
    const fs::path path = fs::path(out_dir) / names[p];
    write_text_file(path, text);
    m.output(path);
    std::cout << names[p] << ": " << parts[p].size() << "\n";
  }
  m.write(manifest_path(c, fs::path(out_dir) / "manifest.json"), c.timings);
  return 0;
}

int cmd_losses_check(const Common& c, int samples, std::uint64_t seed, const std::string& out) {
  Manifest m("losses-check");
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  json rows = json::array();
  std::cout << "smooth_l1\n";
  for (const auto& [x, expected] : std::vector<std::pair<double, double>>{{0.0, 0.0}, {0.5, 0.125}, {2.0, 1.5}}) {
    const double v = smooth_l1(x);
    const bool pass = v == expected;
    ok = ok && pass;
    std::printf("  x=%-4s value=%-6s expected=%-6s %s\n", format_double(x).c_str(),
                format_double(v).c_str(), format_double(expected).c_str(), pass ? "ok" : "FAIL");
    rows.push_back({{"x", x}, {"value", v}, {"expected", expected}, {"pass", pass}});
  }
  const GradCheckReport report = run_loss_gradcheck(samples, seed);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("gradient check: %d samples, step %s, tolerance %s\n", report.samples,
              format_double(report.step).c_str(), format_double(report.tolerance).c_str());
  json grad = json::array();
  for (const auto& r : report.rows) {
    std::printf("  %-16s checked=%-6lld max_rel_err=%.3e %s\n", r.name.c_str(),
                static_cast<long long>(r.checked), r.max_rel_error, r.pass ? "ok" : "FAIL");
    grad.push_back({{"name", r.name}, {"checked", r.checked}, {"max_rel_error", r.max_rel_error},
                    {"pass", r.pass}});
  }
  ok = ok && report.pass();
  if (c.timings) std::printf("elapsed %.3f s\n", secs);
  if (!out.empty()) {
    const json doc{{"smooth_l1", rows}, {"gradcheck", grad}, {"samples", samples},
                   {"seed", seed}, {"pass", ok}};
    write_text_file(out, doc.dump(1) + "\n");
    m.output(out);
    m.param("samples", samples);
    m.param("seed", seed);
    m.write(manifest_path(c, out + ".manifest.json"), c.timings);
  }
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

int cmd_end_to_end(const Common& c, const std::string& suite_name, const std::string& mode_arg,
                   const std::string& out, const std::string& dets_out) {
  Manifest m("end-to-end");
  const RunConfig cfg = resolve_config(c, &m);
  const SuiteSpec suite = suite_by_name(suite_name);
  const PipelineMode mode = parse_mode(mode_arg);
  m.param("suite", suite.name);
  m.param("mode", std::string(mode_name(mode)));
  const EndToEndResult r =
      m.stage("run", [&] { return run_end_to_end(suite, cfg.dvs, cfg.ms, cfg.eval, mode, c.jobs); });
  std::cout << "suite " << suite.name << ", mode " << mode_name(mode) << ", " << suite.image_count()
            << " images, " << r.gts.size() << " cells\n";
  std::cout << format_metrics_table(r.summary);
  if (!out.empty()) {
    json doc = eval_summary_to_json(r.summary);
    doc["metrics"] = metrics_json(r.summary);
    doc["suite"] = suite.name;
    doc["mode"] = std::string(mode_name(mode));
    doc["images"] = suite.image_count();
    doc["detections"] = r.detections.size();
    doc["keep_thresh"] = r.keep_thresh ? json(*r.keep_thresh) : json(nullptr);
    doc["scorer"] = r.scorer ? logistic_model_to_json(*r.scorer) : json(nullptr);
    write_text_file(out, doc.dump(1) + "\n");
    m.output(out);
  }
  if (!dets_out.empty()) {
    DetectionFile f;
    for (std::size_t i = 0; i < suite.image_count(); ++i) {
      f.images.push_back({static_cast<std::int64_t>(i), suite.scene.width, suite.scene.height, ""});
    }
    f.detections = r.detections;
    write_detections(f, dets_out);
    m.output(dets_out);
  }
  if (!out.empty() || !dets_out.empty() || !c.manifest.empty()) {
    m.write(manifest_path(c, (out.empty() ? dets_out : out) + ".manifest.json"), c.timings);
  }
  return 0;
}

int exit_code_for(const Error& e) { return e.code() == Errc::kIoError ? 2 : 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-view instance segmentation post-processing and evaluation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;

  std::string image, out_dir;
  auto* rotate = app.add_subcommand("rotate-views", "Write the original and rotated views of an image");
  rotate->add_option("--image", image, "Input PNG")->required();
  rotate->add_option("--out-dir", out_dir, "Output directory")->required();
  add_common(rotate, common, true);

  std::string original, rotated, out;
  auto* fuse = app.add_subcommand("fuse", "Fuse original and rotated view detections");
  fuse->add_option("--original", original, "Original-view detections")->required();
  fuse->add_option("--rotated", rotated, "Rotated-view detections")->required();
  fuse->add_option("--out", out, "Fused detections")->required();
  add_common(fuse, common, true);

  std::string candidates, scores_out;
  ScorerArgs scorer_args;
  bool skip_dedup = false;
  auto* sel = app.add_subcommand("select", "Score candidates, keep by threshold, dedup per spot");
  sel->add_option("--candidates", candidates, "Candidate detections")->required();
  sel->add_option("--scorer", scorer_args.kind, "external | iou_oracle | logistic_geom");
  sel->add_option("--scores", scorer_args.scores, "External scores JSON (det_id -> score)");
  sel->add_option("--model", scorer_args.model, "Logistic scorer JSON");
  sel->add_option("--gt", scorer_args.gt, "Ground truth for iou_oracle");
  sel->add_option("--label-map", scorer_args.label_map, "Label map for labelme ground truth");
  sel->add_flag("--skip-dedup", skip_dedup, "Only apply the keep threshold");
  sel->add_option("--out", out, "Selected detections")->required();
  sel->add_option("--scores-out", scores_out, "Write every candidate's score");
  add_common(sel, common, true);

  auto* train = app.add_subcommand("train-scorer", "Train the logistic mask-selection scorer");
  train->add_option("--candidates", candidates, "Candidate detections")->required();
  train->add_option("--gt", scorer_args.gt, "Ground truth file or labelme directory")->required();
  train->add_option("--label-map", scorer_args.label_map, "Label map for labelme ground truth");
  train->add_option("--out", out, "Scorer JSON")->required();
  add_common(train, common, true);

  std::string pred, gt, label_map, overlay, images;
  auto* ev = app.add_subcommand("eval", "Evaluate detections against ground truth");
  ev->add_option("--pred", pred, "Predicted detections")->required();
  ev->add_option("--gt", gt, "Ground truth file or labelme directory")->required();
  ev->add_option("--label-map", label_map, "Label map for labelme ground truth");
  ev->add_option("--out", out, "Report JSON");
  ev->add_option("--overlay", overlay, "Directory for overlay PNGs");
  ev->add_option("--images", images, "Directory with the source images for overlays");
  add_common(ev, common, true);

  SynthArgs synth_args;
  std::uint64_t synth_seed = 0;
  auto* syn = app.add_subcommand("synth", "Write synthetic scenes, annotations and view detections");
  syn->add_option("--out-dir", synth_args.out_dir, "Output directory")->required();
  syn->add_option("--suite", synth_args.suite, "fixed | zero-noise");
  syn->add_option("--images", synth_args.images, "Number of scenes");
  auto* seed_opt = syn->add_option("--seed", synth_seed, "Single suite seed");
  syn->add_option("--n-cells", synth_args.n_cells, "Cells per scene");
  add_common(syn, common, true);

  std::size_t split_n = 0;
  std::string sizes;
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "Seeded train/val/test split of image indices");
  split->add_option("--n", split_n, "Number of images")->required();
  split->add_option("--sizes", sizes, "train,val,test sizes")->required();
  split->add_option("--seed", split_seed, "Shuffle seed");
  split->add_option("--out-dir", out_dir, "Output directory")->required();
  add_common(split, common, false);

  int samples = 100;
  std::uint64_t check_seed = 0;
  auto* losses = app.add_subcommand("losses-check", "Check loss values and gradients");
  losses->add_option("--samples", samples, "Random samples")->check(CLI::PositiveNumber);
  losses->add_option("--seed", check_seed, "Sample seed");
  losses->add_option("--out", out, "Report JSON");
  add_common(losses, common, false);

  std::string suite = "fixed", mode = "full", dets_out;
  auto* e2e = app.add_subcommand("end-to-end", "Run a synthetic suite through one pipeline mode");
  e2e->add_option("--suite", suite, "fixed | zero-noise");
  e2e->add_option("--mode", mode, "baseline | dvs_only | ms_only | full");
  e2e->add_option("--out", out, "Report JSON");
  e2e->add_option("--detections", dets_out, "Final detections");
  add_common(e2e, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*rotate) return cmd_rotate_views(common, image, out_dir);
    if (*fuse) return cmd_fuse(common, original, rotated, out);
    if (*sel) return cmd_select(common, candidates, scorer_args, skip_dedup, out, scores_out);
    if (*train) return cmd_train_scorer(common, candidates, scorer_args, out);
    if (*ev) return cmd_eval(common, pred, gt, label_map, out, overlay, images);
    if (*syn) {
      if (seed_opt->count() > 0) synth_args.seed = synth_seed;
      return cmd_synth(common, synth_args);
    }
    if (*split) return cmd_split(common, split_n, sizes, split_seed, out_dir);
    if (*losses) return cmd_losses_check(common, samples, check_seed, out);
    if (*e2e) return cmd_end_to_end(common, suite, mode, out, dets_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoError: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
