#include "pclv/pipeline.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "pclv/descriptors.hpp"
#include "pclv/error.hpp"

namespace pclv {
namespace {

using Clock = std::chrono::steady_clock;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  fail(ErrorCode::kInvalidArgument, "invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) bad_value(key, value, "a finite number");
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "a non-negative integer");
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  std::int64_t out = 0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "true or false");
}

bool is_unset(const std::string& value) { return value.empty() || value == "none" || value == "auto"; }

std::optional<std::filesystem::path> parse_path(const std::string& value) {
  if (value.empty() || value == "none") return std::nullopt;
  return std::filesystem::path(value);
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string path_or_none(const std::optional<std::filesystem::path>& p) { return p ? p->string() : "none"; }

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"ply", [](RunConfig& c, const std::string&, const std::string& v) { c.ply = parse_path(v); }},
      {"depth", [](RunConfig& c, const std::string&, const std::string& v) { c.depth = parse_path(v); }},
      {"rgb", [](RunConfig& c, const std::string&, const std::string& v) { c.rgb = parse_path(v); }},
      {"intrinsics", [](RunConfig& c, const std::string&, const std::string& v) { c.intrinsics = v; }},
      {"graph",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") {
           c.graph.reset();
           return;
         }
         const auto m = parse_graph_method(v);
         if (!m) bad_value(k, v, "auto, grid8, knn, radius or delaunay");
         c.graph = *m;
       }},
      {"k", [](RunConfig& c, const std::string& k, const std::string& v) { c.k = parse_count(k, v); }},
      {"radius", [](RunConfig& c, const std::string& k, const std::string& v) { c.radius = parse_double(k, v); }},
      {"preset",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "outdoor") {
           c.modalities = *ModalitySet::preset("pclv");
           c.graph = GraphMethod::kKnn;
           c.k = 8;
           c.unsigned_normals = true;
           return;
         }
         const auto m = ModalitySet::preset(v);
         if (!m) bad_value(k, v, "lv, lv_d, lv_n, dn, lv_fpfh, pclv or outdoor");
         c.modalities = *m;
       }},
      {"modalities",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const auto m = ModalitySet::parse(v);
         if (!m) bad_value(k, v, "a preset name or a comma list of color, distance, normal, fpfh");
         c.modalities = *m;
       }},
      {"mode",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const auto m = parse_merge_mode(v);
         if (!m) bad_value(k, v, "multi or linear");
         c.mode = *m;
       }},
      {"kc", [](RunConfig& c, const std::string& k, const std::string& v) { c.coefficients.color = parse_double(k, v); }},
      {"kd",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.coefficients.distance = parse_double(k, v); }},
      {"kn",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.coefficients.normal = parse_double(k, v); }},
      {"sort_modality",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") {
           c.sort_modality.reset();
           return;
         }
         const auto m = parse_modality(v);
         if (!m) bad_value(k, v, "auto, color, distance, normal or fpfh");
         c.sort_modality = *m;
       }},
      {"delta",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (is_unset(v)) {
           c.delta.reset();
           return;
         }
         c.delta = parse_double(k, v);
         c.target_segments.reset();
       }},
      {"target_segments",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (is_unset(v)) {
           c.target_segments.reset();
           return;
         }
         c.target_segments = parse_count(k, v);
         c.delta.reset();
       }},
      {"postprocess",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.postprocess = parse_bool(k, v); }},
      {"postprocess_segments",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (is_unset(v)) {
           c.postprocess_segments.reset();
         } else {
           c.postprocess_segments = parse_count(k, v);
         }
       }},
      {"normal_k", [](RunConfig& c, const std::string& k, const std::string& v) { c.normal_k = parse_count(k, v); }},
      {"fpfh_k", [](RunConfig& c, const std::string& k, const std::string& v) { c.fpfh_k = parse_count(k, v); }},
      {"estimate_normals",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.estimate_normals = parse_bool(k, v); }},
      {"unsigned_normals",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") {
           c.unsigned_normals.reset();
         } else {
           c.unsigned_normals = parse_bool(k, v);
         }
       }},
      {"normals_file", [](RunConfig& c, const std::string&, const std::string& v) { c.normals_file = parse_path(v); }},
      {"fpfh_file", [](RunConfig& c, const std::string&, const std::string& v) { c.fpfh_file = parse_path(v); }},
      {"gt", [](RunConfig& c, const std::string&, const std::string& v) { c.gt = parse_path(v); }},
      {"gt_ignore",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "none") {
           c.gt_ignore.reset();
         } else {
           c.gt_ignore = parse_int(k, v);
         }
       }},
      {"d", [](RunConfig& c, const std::string& k, const std::string& v) { c.boundary_distance = parse_double(k, v); }},
      {"out_labels", [](RunConfig& c, const std::string&, const std::string& v) { c.out_labels = parse_path(v); }},
      {"out_ply", [](RunConfig& c, const std::string&, const std::string& v) { c.out_ply = parse_path(v); }},
      {"out_meta", [](RunConfig& c, const std::string&, const std::string& v) { c.out_meta = parse_path(v); }},
      {"out_label_image",
       [](RunConfig& c, const std::string&, const std::string& v) { c.out_label_image = parse_path(v); }},
      {"out_csv", [](RunConfig& c, const std::string&, const std::string& v) { c.out_csv = parse_path(v); }},
      {"out_edges", [](RunConfig& c, const std::string&, const std::string& v) { c.out_edges = parse_path(v); }},
      {"out_weights", [](RunConfig& c, const std::string&, const std::string& v) { c.out_weights = parse_path(v); }},
  };
  return table;
}

bool needs_normals(const ModalitySet& m) { return m.contains(Modality::kNormal) || m.contains(Modality::kFpfh); }

std::string join(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const Diagnostic& d : diags) {
    if (!out.empty()) out += "; ";
    out += d.field + ": " + d.message;
  }
  return out;
}

// Runs one stage, tagging any failure with the stage name and recording its
// wall time.
template <typename Fn>
void stage(RunStats& stats, const char* name, Fn&& fn) {
  const auto start = Clock::now();
  try {
    fn();
  } catch (const Error& e) {
    throw e.stage().empty() ? e.with_stage(name) : e;
  } catch (const std::bad_alloc&) {
    throw Error(ErrorCode::kInternal, "out of memory").with_stage(name);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kInternal, e.what()).with_stage(name);
  }
  stats.timings.push_back({name, std::chrono::duration<double>(Clock::now() - start).count()});
}

LabelImage load_gt(const RunConfig& cfg) {
  LabelImage gt = load_label_image(*cfg.gt);
  if (cfg.gt_ignore) gt = mask_label(gt, *cfg.gt_ignore);
  return gt;
}

// Normals and FPFH the modality set needs, from cache files or estimation.
void attach_descriptors(const RunConfig& cfg, PointCloud& cloud, RunStats& stats) {
  if (!needs_normals(cfg.modalities)) return;
  const std::size_t n = cloud.size();
  std::optional<std::vector<NormalEstimate>> normals;
  if (cfg.normals_file && std::filesystem::exists(*cfg.normals_file)) {
    normals = load_normals_cache(*cfg.normals_file, n, cfg.normal_k);
    if (normals) ++stats.normals_loaded;
  }
  if (!normals) {
    if (!cfg.estimate_normals) {
      fail(ErrorCode::kPrecondition, "normals_file '" + path_or_none(cfg.normals_file) +
                                         "' is missing or does not match this cloud and normal_k, and "
                                         "estimate_normals is off");
    }
    normals = estimate_normals(cloud, cfg.normal_k, cloud.viewpoint);
    ++stats.normals_estimated;
    if (cfg.normals_file) save_normals_cache(*cfg.normals_file, cfg.normal_k, *normals);
  }
  std::vector<Vec3> dirs(n);
  for (std::size_t i = 0; i < n; ++i) dirs[i] = (*normals)[i].direction;
  cloud.normals = std::move(dirs);

  if (!cfg.modalities.contains(Modality::kFpfh)) return;
  std::optional<std::vector<Fpfh>> fpfh;
  if (cfg.fpfh_file && std::filesystem::exists(*cfg.fpfh_file)) {
    fpfh = load_fpfh_cache(*cfg.fpfh_file, n, cfg.fpfh_k);
    if (fpfh) ++stats.fpfh_loaded;
  }
  if (!fpfh) {
    fpfh = compute_fpfh(cloud, *normals, cfg.fpfh_k);
    ++stats.fpfh_computed;
    if (cfg.fpfh_file) save_fpfh_cache(*cfg.fpfh_file, cfg.fpfh_k, *fpfh);
  }
  cloud.fpfh = std::move(*fpfh);
}

ConnectivityGraph build_graph(const RunConfig& cfg, const PointCloud& cloud) {
  const GraphMethod method = cfg.graph.value_or(cloud.grid ? GraphMethod::kGrid8 : GraphMethod::kKnn);
  switch (method) {
    case GraphMethod::kGrid8:
      if (!cloud.grid) fail(ErrorCode::kPrecondition, "grid8 needs a cloud back-projected from a depth image");
      return build_grid8(*cloud.grid);
    case GraphMethod::kKnn:
      return build_knn(cloud, cfg.k);
    case GraphMethod::kRadius:
      return build_radius(cloud, cfg.radius);
    case GraphMethod::kDelaunay:
      return build_delaunay(cloud);
  }
  fail(ErrorCode::kInternal, "unknown graph method");
}

MergeConfig merge_config(const RunConfig& cfg) {
  MergeConfig mc;
  mc.mode = cfg.mode;
  mc.coefficients = cfg.coefficients;
  mc.modalities = cfg.modalities;
  mc.sort_modality = cfg.sort_modality;
  return mc;
}

bool effective_unsigned(const RunConfig& cfg, const PointCloud& cloud) {
  return cfg.unsigned_normals.value_or(!cloud.viewpoint.has_value());
}

void write_metrics_csv(const MetricsRecord& rec, const std::filesystem::path& path) {
  write_sweep_csv({rec}, path);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
  it->second(*this, key, trim(value));
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kInvalidArgument,
           path.string() + ":" + std::to_string(lineno) + ": expected key = value, got '" + t + "'");
    }
    try {
      set(trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const Error& e) {
      fail(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> m;
  m["ply"] = path_or_none(ply);
  m["depth"] = path_or_none(depth);
  m["rgb"] = path_or_none(rgb);
  m["intrinsics"] = intrinsics;
  m["graph"] = graph ? std::string(to_string(*graph)) : "auto";
  m["k"] = std::to_string(k);
  m["radius"] = format_double(radius);
  m["modalities"] = modalities.to_string();
  m["mode"] = std::string(to_string(mode));
  m["kc"] = format_double(coefficients.color);
  m["kd"] = format_double(coefficients.distance);
  m["kn"] = format_double(coefficients.normal);
  m["sort_modality"] = sort_modality ? std::string(to_string(*sort_modality)) : "auto";
  m["delta"] = delta ? format_double(*delta) : "none";
  m["target_segments"] = target_segments ? std::to_string(*target_segments) : "none";
  m["postprocess"] = postprocess ? "true" : "false";
  m["postprocess_segments"] = postprocess_segments ? std::to_string(*postprocess_segments) : "auto";
  m["normal_k"] = std::to_string(normal_k);
  m["fpfh_k"] = std::to_string(fpfh_k);
  m["estimate_normals"] = estimate_normals ? "true" : "false";
  m["unsigned_normals"] = unsigned_normals ? (*unsigned_normals ? "true" : "false") : "auto";
  m["normals_file"] = path_or_none(normals_file);
  m["fpfh_file"] = path_or_none(fpfh_file);
  m["gt"] = path_or_none(gt);
  m["gt_ignore"] = gt_ignore ? std::to_string(*gt_ignore) : "none";
  m["d"] = format_double(boundary_distance);
  m["out_labels"] = path_or_none(out_labels);
  m["out_ply"] = path_or_none(out_ply);
  m["out_meta"] = path_or_none(out_meta);
  m["out_label_image"] = path_or_none(out_label_image);
  m["out_csv"] = path_or_none(out_csv);
  m["out_edges"] = path_or_none(out_edges);
  m["out_weights"] = path_or_none(out_weights);
  return m;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& [name, fn] : setters()) k.push_back(name);
    return k;
  }();
  return out;
}

std::vector<Diagnostic> validate(const RunConfig& cfg) {
  std::vector<Diagnostic> out;
  auto add = [&](std::string field, std::string msg) { out.push_back({std::move(field), std::move(msg)}); };

  const bool rgbd = cfg.depth || cfg.rgb;
  if (cfg.ply && rgbd) {
    add("ply", "give either ply or depth+rgb, not both");
  } else if (!cfg.ply && !rgbd) {
    add("ply", "no input: set ply, or depth and rgb");
  } else if (rgbd) {
    if (!cfg.depth) add("depth", "rgb given without depth");
    if (!cfg.rgb) add("rgb", "depth given without rgb");
    if (cfg.intrinsics.empty()) add("intrinsics", "empty; use a file path or nyu");
  }

  const GraphMethod method = cfg.graph.value_or(cfg.ply ? GraphMethod::kKnn : GraphMethod::kGrid8);
  if (method == GraphMethod::kGrid8 && cfg.ply) add("graph", "grid8 needs depth-image input; use knn, radius or delaunay");
  if (method == GraphMethod::kKnn && cfg.k == 0) add("k", "must be >= 1");
  if (method == GraphMethod::kRadius && !(cfg.radius > 0.0 && std::isfinite(cfg.radius))) {
    add("radius", "must be a positive distance");
  }

  if (cfg.modalities.empty()) add("modalities", "empty modality set");
  if (cfg.mode == MergeMode::kLinearScalar && cfg.modalities.contains(Modality::kFpfh)) {
    add("mode", "linear mode combines color, distance and normal only; fpfh needs multi");
  }
  if (cfg.mode == MergeMode::kLinearScalar) {
    const LinearCoefficients& c = cfg.coefficients;
    for (auto [name, v] : {std::pair{"kc", c.color}, std::pair{"kd", c.distance}, std::pair{"kn", c.normal}}) {
      if (!(v >= 0.0 && std::isfinite(v))) add(name, "coefficient must be finite and >= 0");
    }
    if (c.color + c.distance + c.normal <= 0.0) add("kc", "coefficients are all zero");
  }
  if (cfg.sort_modality && !cfg.modalities.contains(*cfg.sort_modality)) {
    add("sort_modality", std::string(to_string(*cfg.sort_modality)) + " is not in the modality set");
  }

  if (cfg.delta && cfg.target_segments) {
    add("delta", "give either delta or target_segments, not both");
  } else if (!cfg.delta && !cfg.target_segments) {
    add("delta", "set delta or target_segments");
  }
  if (cfg.delta && !(*cfg.delta >= 0.0 && std::isfinite(*cfg.delta))) add("delta", "must be finite and >= 0");
  if (cfg.target_segments && *cfg.target_segments == 0) add("target_segments", "must be >= 1");
  if (cfg.postprocess_segments && *cfg.postprocess_segments == 0) add("postprocess_segments", "must be >= 1");

  if (needs_normals(cfg.modalities)) {
    if (!cfg.estimate_normals && !cfg.normals_file) {
      add("normals_file", "normal and fpfh modalities need normals: set normals_file or estimate_normals=true");
    }
    if (cfg.normal_k < 3) add("normal_k", "must be >= 3");
  }
  if (cfg.modalities.contains(Modality::kFpfh) && cfg.fpfh_k < 2) add("fpfh_k", "must be >= 2");

  if (cfg.gt && cfg.ply) add("gt", "metrics need depth-image input to project labels");
  if (!(cfg.boundary_distance >= 0.0 && std::isfinite(cfg.boundary_distance))) add("d", "must be finite and >= 0");
  if (cfg.out_label_image && cfg.ply) add("out_label_image", "label images need depth-image input");
  return out;
}

double RunStats::total_seconds() const {
  double t = 0.0;
  for (const StageTiming& s : timings) t += s.seconds;
  return t;
}

PointCloud load_input(const RunConfig& cfg) {
  if (cfg.ply) return load_ply(*cfg.ply);
  if (!cfg.depth || !cfg.rgb) fail(ErrorCode::kInvalidArgument, "no input cloud configured");
  const CameraIntrinsics intr =
      cfg.intrinsics == "nyu" ? CameraIntrinsics::nyu() : load_intrinsics(cfg.intrinsics);
  return backproject_depth(read_depth_image(*cfg.depth), read_rgb_image(*cfg.rgb), intr);
}

void write_labels(const Segmentation& seg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  std::string buf;
  buf.reserve(seg.num_points() * 12);
  for (std::size_t i = 0; i < seg.num_points(); ++i) {
    buf += std::to_string(i);
    buf += ' ';
    buf += std::to_string(seg.labels[i]);
    buf += '\n';
  }
  out << buf;
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

std::vector<std::uint32_t> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open labels '" + path.string() + "'");
  std::vector<std::uint32_t> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::uint64_t index = 0, label = 0;
    std::string extra;
    if (!(fields >> index >> label) || (fields >> extra) || label > 0xffffffffu) {
      fail(ErrorCode::kFormat, path.string() + ":" + std::to_string(lineno) + ": expected 'index label'");
    }
    if (index != labels.size()) {
      fail(ErrorCode::kFormat, path.string() + ":" + std::to_string(lineno) + ": expected index " +
                                   std::to_string(labels.size()) + ", got " + std::to_string(index));
    }
    labels.push_back(static_cast<std::uint32_t>(label));
  }
  return labels;
}

std::string RunResult::metadata_json() const {
  nlohmann::ordered_json j;
  j["config"] = config.to_map();
  j["n_points"] = stats.n_points;
  j["n_edges"] = stats.n_edges;
  j["graph"] = std::string(to_string(segmentation.graph));
  j["n_segments"] = segmentation.num_segments();
  j["delta"] = delta;
  j["target_segments"] = target_segments ? nlohmann::ordered_json(*target_segments) : nlohmann::ordered_json();
  j["within_tolerance"] = within_tolerance;
  j["postprocess_segments"] =
      postprocess_segments ? nlohmann::ordered_json(*postprocess_segments) : nlohmann::ordered_json();
  j["small_segments_merged"] = segmentation.small_segments_merged;
  j["descriptors"] = {{"normals_estimated", stats.normals_estimated},
                      {"normals_loaded", stats.normals_loaded},
                      {"fpfh_computed", stats.fpfh_computed},
                      {"fpfh_loaded", stats.fpfh_loaded}};
  nlohmann::ordered_json timing;
  for (const StageTiming& t : stats.timings) timing[t.stage] = t.seconds;
  timing["total"] = stats.total_seconds();
  j["timing"] = timing;
  if (metrics) {
    j["metrics"] = {{"boundary_recall", metrics->boundary_recall},
                    {"under_seg_error", metrics->under_seg_error},
                    {"gt_segments", metrics->gt_segments},
                    {"d", config.boundary_distance}};
  }
  return j.dump(2);
}

RunResult run(const RunConfig& cfg) {
  if (const auto diags = validate(cfg); !diags.empty()) {
    throw Error(ErrorCode::kInvalidArgument, join(diags)).with_stage("config");
  }
  RunResult res;
  res.config = cfg;
  RunStats& stats = res.stats;
  std::optional<LabelImage> gt;
  ConnectivityGraph graph;
  std::optional<WeightedGraph> wg;

  stage(stats, "ingest", [&] {
    res.cloud = load_input(cfg);
    if (cfg.gt) gt = load_gt(cfg);
  });
  stats.n_points = res.cloud.size();
  stage(stats, "graph", [&] {
    graph = build_graph(cfg, res.cloud);
    stats.n_edges = graph.edges.size();
  });
  stage(stats, "descriptors", [&] { attach_descriptors(cfg, res.cloud, stats); });
  stage(stats, "weights", [&] {
    wg = assign_weights(graph, res.cloud, cfg.modalities, effective_unsigned(cfg, res.cloud));
  });

  std::optional<Segmenter> segmenter;
  stage(stats, "merge", [&] {
    segmenter.emplace(*wg, merge_config(cfg));
    if (cfg.delta) {
      res.delta = *cfg.delta;
      res.segmentation = segmenter->run(res.delta);
    } else {
      res.target_segments = cfg.target_segments;
      DeltaSearch found = search_delta(*segmenter, *cfg.target_segments, cfg.postprocess);
      res.delta = found.delta;
      res.within_tolerance = found.within_tolerance;
      res.segmentation = std::move(found.segmentation);
      if (cfg.postprocess) res.postprocess_segments = cfg.target_segments;
    }
  });
  stage(stats, "postprocess", [&] {
    if (!cfg.delta || !cfg.postprocess) return;
    const std::size_t desired = cfg.postprocess_segments.value_or(res.segmentation.num_segments());
    res.segmentation = merge_small_segments(res.segmentation, *segmenter, desired);
    res.postprocess_segments = desired;
  });
  if (gt) {
    stage(stats, "eval", [&] {
      if (!res.cloud.grid) fail(ErrorCode::kPrecondition, "metrics need a cloud with an image grid");
      MetricsRecord rec = evaluate_segmentation(res.segmentation, *res.cloud.grid, *gt, cfg.boundary_distance);
      rec.target_segments = cfg.target_segments.value_or(0);
      res.metrics = std::move(rec);
    });
  }
  stage(stats, "output", [&] {
    if (cfg.out_labels) write_labels(res.segmentation, *cfg.out_labels);
    if (cfg.out_ply) write_segmented_ply(res.cloud, res.segmentation.labels, *cfg.out_ply);
    if (cfg.out_label_image) {
      if (!res.cloud.grid) fail(ErrorCode::kPrecondition, "label images need a cloud with an image grid");
      write_label_image(*cfg.out_label_image, project_labels(res.segmentation, *res.cloud.grid), 1);
    }
    if (cfg.out_csv) {
      if (!res.metrics) fail(ErrorCode::kPrecondition, "out_csv needs gt for metrics");
      write_metrics_csv(*res.metrics, *cfg.out_csv);
    }
    if (cfg.out_edges) write_edges_csv(graph, *cfg.out_edges);
    if (cfg.out_weights) write_weights_csv(*wg, *cfg.out_weights);
  });

  std::optional<std::filesystem::path> meta = cfg.out_meta;
  if (!meta && cfg.out_labels) meta = std::filesystem::path(cfg.out_labels->string() + ".meta.json");
  if (meta) {
    stage(stats, "metadata", [&] {
      std::ofstream out(*meta, std::ios::binary);
      if (!out) fail(ErrorCode::kIo, "cannot write '" + meta->string() + "'");
      out << res.metadata_json() << '\n';
      if (!out) fail(ErrorCode::kIo, "write failed for '" + meta->string() + "'");
    });
  }
  return res;
}

RunConfig replay_config(const std::string& metadata_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(metadata_json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("metadata is not valid JSON: ") + e.what());
  }
  if (!j.contains("config") || !j["config"].is_object() || !j.contains("delta") || !j["delta"].is_number()) {
    fail(ErrorCode::kFormat, "metadata lacks config or delta");
  }
  RunConfig cfg;
  for (const auto& [key, value] : j["config"].items()) {
    if (!value.is_string()) fail(ErrorCode::kFormat, "metadata config value for '" + key + "' is not a string");
    cfg.set(key, value.get<std::string>());
  }
  cfg.target_segments.reset();
  cfg.delta = j["delta"].get<double>();
  if (j.contains("postprocess_segments") && j["postprocess_segments"].is_number_unsigned()) {
    cfg.postprocess_segments = j["postprocess_segments"].get<std::size_t>();
  }
  return cfg;
}

namespace {

struct SweepSetup {
  PointCloud cloud;
  LabelImage gt;
  ConnectivityGraph graph;
  std::optional<WeightedGraph> wg;
};

void prepare_sweep(const RunConfig& cfg, SweepSetup& s) {
  RunConfig probe = cfg;
  if (!probe.delta && !probe.target_segments) probe.delta = 0.0;
  if (const auto diags = validate(probe); !diags.empty()) {
    throw Error(ErrorCode::kInvalidArgument, join(diags)).with_stage("config");
  }
  if (!cfg.gt) throw Error(ErrorCode::kInvalidArgument, "gt: sweep needs ground truth").with_stage("config");
  RunStats stats;
  stage(stats, "ingest", [&] {
    s.cloud = load_input(cfg);
    s.gt = load_gt(cfg);
    if (!s.cloud.grid) fail(ErrorCode::kPrecondition, "sweep needs a cloud with an image grid");
  });
  stage(stats, "graph", [&] { s.graph = build_graph(cfg, s.cloud); });
  stage(stats, "descriptors", [&] { attach_descriptors(cfg, s.cloud, stats); });
  stage(stats, "weights", [&] {
    s.wg = assign_weights(s.graph, s.cloud, cfg.modalities, effective_unsigned(cfg, s.cloud));
  });
}

}  // namespace

std::vector<MetricsRecord> run_sweep(const RunConfig& cfg, const std::vector<std::size_t>& targets) {
  if (targets.empty()) throw Error(ErrorCode::kInvalidArgument, "empty target list").with_stage("config");
  SweepSetup s;
  prepare_sweep(cfg, s);
  std::vector<MetricsRecord> out;
  RunStats stats;
  stage(stats, "sweep", [&] {
    const Segmenter segmenter(*s.wg, merge_config(cfg));
    out = sweep_targets({&segmenter, &*s.cloud.grid, &s.gt, cfg.postprocess, cfg.boundary_distance}, targets);
    if (cfg.out_csv) write_sweep_csv(out, *cfg.out_csv);
  });
  return out;
}

std::vector<MetricsRecord> run_sweep_deltas(const RunConfig& cfg, const std::vector<double>& deltas) {
  if (deltas.empty()) throw Error(ErrorCode::kInvalidArgument, "empty delta list").with_stage("config");
  SweepSetup s;
  prepare_sweep(cfg, s);
  std::vector<MetricsRecord> out;
  RunStats stats;
  stage(stats, "sweep", [&] {
    const Segmenter segmenter(*s.wg, merge_config(cfg));
    out = sweep_deltas({&segmenter, &*s.cloud.grid, &s.gt, cfg.postprocess, cfg.boundary_distance}, deltas);
    if (cfg.out_csv) write_sweep_csv(out, *cfg.out_csv);
  });
  return out;
}

}  // namespace pclv
