#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pclv/pclv.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Failure {
  int code;
};

std::string last_error() {
  std::string msg = pclv_last_error();
  return msg.empty() ? "unknown error" : msg;
}

// Config stages other than "config" are runtime failures; bad keys, values
// and failed validation are usage errors.
[[noreturn]] void fail_status(pclv_status status, bool usage_if_config = true) {
  const std::string stage = pclv_last_error_stage();
  std::cerr << "error: " << last_error() << "\n";
  const bool usage = usage_if_config && (stage == "config" || (stage.empty() && status == PCLV_ERR_INVALID_ARGUMENT));
  throw Failure{usage ? kExitUsage : kExitRuntime};
}

void check(pclv_status status, bool usage_if_config = true) {
  if (status != PCLV_OK) fail_status(status, usage_if_config);
}

class Config {
 public:
  Config() { check(pclv_config_create(&cfg_)); }
  ~Config() { pclv_config_destroy(cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;

  void set(const std::string& key, const std::string& value) { check(pclv_config_set(cfg_, key.c_str(), value.c_str())); }
  void load(const std::string& path) {
    const pclv_status s = pclv_config_load_file(cfg_, path.c_str());
    if (s == PCLV_ERR_IO) {
      std::cerr << "error: " << last_error() << "\n";
      throw Failure{kExitRuntime};
    }
    check(s);
  }
  void validate() {
    size_t count = 0;
    const char* text = nullptr;
    check(pclv_config_validate(cfg_, &count, &text));
    if (count > 0) {
      std::cerr << "invalid configuration:\n" << text;
      throw Failure{kExitUsage};
    }
  }
  pclv_config* get() { return cfg_; }

 private:
  pclv_config* cfg_ = nullptr;
};

// Options shared by segment and sweep. Flags override the config file,
// which overrides the defaults.
struct RunOptions {
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::optional<std::string>*>> keyed;

  std::optional<std::string> preset, graph, k, radius, delta, target_segments, modalities, mode, unsigned_normals,
      gt, d, out_labels, out_ply, out_csv, out_meta, out_label_image, ply, depth, rgb, intrinsics, normal_k, fpfh_k,
      postprocess;

  void add_to(CLI::App* app, bool sweep) {
    app->add_option("--config", config, "key=value config file");
    app->add_option("--set", sets, "extra key=value override (repeatable)");
    auto opt = [&](const char* flag, const char* key, std::optional<std::string>& dst, const char* help) {
      app->add_option(flag, dst, help);
      keyed.emplace_back(key, &dst);
    };
    opt("--ply", "ply", ply, "input PLY cloud");
    opt("--depth", "depth", depth, "input depth image (16-bit PNG or PGM)");
    opt("--rgb", "rgb", rgb, "input color image (PNG or PPM)");
    opt("--intrinsics", "intrinsics", intrinsics, "intrinsics file (fx fy cx cy depth_scale) or nyu");
    // preset must be applied before graph/k/modalities so they can refine it.
    opt("--preset", "preset", preset, "lv, lv_d, lv_n, dn, lv_fpfh, pclv or outdoor");
    opt("--graph", "graph", graph, "grid8, knn, radius, delaunay or auto");
    opt("--k", "k", k, "neighbors for the knn graph");
    opt("--radius", "radius", radius, "radius for the radius graph (meters)");
    opt("--modalities", "modalities", modalities, "preset name or comma list of color,distance,normal,fpfh");
    opt("--mode", "mode", mode, "multi or linear");
    app->add_flag("--unsigned-normals{true}", unsigned_normals, "use 1-|n.n| for normal weights (=false, =auto)");
    keyed.emplace_back("unsigned_normals", &unsigned_normals);
    opt("--normal-k", "normal_k", normal_k, "neighbors for normal estimation");
    opt("--fpfh-k", "fpfh_k", fpfh_k, "neighbors for FPFH");
    opt("--postprocess", "postprocess", postprocess, "merge small segments (true/false)");
    opt("--gt", "gt", gt, "ground-truth 16-bit label PNG");
    opt("--d", "d", d, "boundary recall distance in pixels (default 2)");
    opt("--out-csv", "out_csv", out_csv, sweep ? "curve CSV" : "one-row metrics CSV");
    if (!sweep) {
      opt("--delta", "delta", delta, "merge threshold scale");
      opt("--target-segments", "target_segments", target_segments, "bisect delta for this many segments");
      opt("--out-labels", "out_labels", out_labels, "per-point labels file");
      opt("--out-ply", "out_ply", out_ply, "segment-colored PLY");
      opt("--out-meta", "out_meta", out_meta, "metadata JSON (default <out-labels>.meta.json)");
      opt("--out-label-image", "out_label_image", out_label_image, "projected 16-bit label PNG");
    }
  }

  void apply(Config& cfg) const {
    if (config) cfg.load(*config);
    for (const auto& [key, value] : keyed) {
      if (*value) cfg.set(key, **value);
    }
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
        throw Failure{kExitUsage};
      }
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int cmd_segment(const RunOptions& opts) {
  Config cfg;
  opts.apply(cfg);
  cfg.validate();
  pclv_result* res = nullptr;
  check(pclv_run(cfg.get(), &res), false);
  std::cout << "n_points=" << pclv_result_num_points(res) << "\n";
  std::cout << "n_segments=" << pclv_result_num_segments(res) << "\n";
  std::cout << "delta=" << fmt(pclv_result_delta(res)) << "\n";
  std::cout << "within_tolerance=" << pclv_result_within_tolerance(res) << "\n";
  if (pclv_result_has_metrics(res)) {
    pclv_metrics m{};
    pclv_result_metrics(res, &m);
    std::cout << "boundary_recall=" << fmt(m.boundary_recall) << "\n";
    std::cout << "under_seg_error=" << fmt(m.under_seg_error) << "\n";
    std::cout << "gt_segments=" << m.gt_segments << "\n";
  }
  for (size_t i = 0; i < pclv_result_stage_count(res); ++i) {
    const char* name = nullptr;
    double seconds = 0.0;
    pclv_result_stage(res, i, &name, &seconds);
    std::cout << "time_" << name << "=" << fmt_short(seconds) << "\n";
  }
  std::cout << "time_total=" << fmt_short(pclv_result_total_seconds(res)) << "\n";
  pclv_result_destroy(res);
  return 0;
}

int cmd_sweep(const RunOptions& opts, const std::vector<size_t>& targets, const std::vector<double>& deltas) {
  if (targets.empty() == deltas.empty()) {
    std::cerr << "error: give a non-empty --targets list or --deltas list (exactly one)\n";
    return kExitUsage;
  }
  Config cfg;
  opts.apply(cfg);
  pclv_records* recs = nullptr;
  if (!targets.empty()) {
    check(pclv_sweep_targets(cfg.get(), targets.data(), targets.size(), &recs), true);
  } else {
    check(pclv_sweep_deltas(cfg.get(), deltas.data(), deltas.size(), &recs), true);
  }
  if (!opts.out_csv) std::cout << pclv_records_csv(recs);
  for (size_t i = 0; i < pclv_records_count(recs); ++i) {
    pclv_record r{};
    pclv_records_get(recs, i, &r);
    if (r.flagged) {
      std::cerr << "warning: target " << r.target_segments << " reached " << r.n_segments << " segments\n";
    }
  }
  if (opts.out_csv) std::cout << "records=" << pclv_records_count(recs) << "\n";
  pclv_records_destroy(recs);
  return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt, double d, const std::string& ignore,
             const std::optional<std::string>& out_csv) {
  int has_ignore = 0;
  int64_t ignore_value = 0;
  if (ignore != "none") {
    try {
      std::size_t used = 0;
      ignore_value = std::stoll(ignore, &used);
      if (used != ignore.size()) throw std::invalid_argument(ignore);
    } catch (const std::exception&) {
      std::cerr << "error: --ignore expects an integer or none\n";
      return kExitUsage;
    }
    has_ignore = 1;
  }
  pclv_metrics m{};
  check(pclv_eval_label_files(pred.c_str(), gt.c_str(), d, has_ignore, ignore_value, &m), false);
  std::cout << "BR=" << fmt(m.boundary_recall) << " UE=" << fmt(m.under_seg_error) << " N=" << m.gt_segments << "\n";
  if (out_csv) {
    std::ofstream out(*out_csv);
    out << "boundary_recall,under_seg_error,n_gt_segments,d\n"
        << fmt(m.boundary_recall) << ',' << fmt(m.under_seg_error) << ',' << m.gt_segments << ',' << fmt(d) << '\n';
    if (!out) {
      std::cerr << "error: cannot write '" << *out_csv << "'\n";
      return kExitRuntime;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud over-segmentation with local variation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pclv_version()));

  RunOptions seg_opts;
  CLI::App* segment = app.add_subcommand("segment", "segment one cloud");
  seg_opts.add_to(segment, false);

  RunOptions sweep_opts;
  std::vector<size_t> targets;
  std::vector<double> deltas;
  CLI::App* sweep = app.add_subcommand("sweep", "metrics over a list of target counts or deltas");
  sweep_opts.add_to(sweep, true);
  sweep->add_option("--targets", targets, "comma list of target segment counts")->delimiter(',');
  sweep->add_option("--deltas", deltas, "comma list of delta values")->delimiter(',');

  std::string pred, gt;
  double d = 2.0;
  std::string ignore = "0";
  std::optional<std::string> eval_csv;
  CLI::App* eval = app.add_subcommand("eval", "compare a predicted label image with ground truth");
  eval->add_option("--pred", pred, "predicted 16-bit label PNG")->required();
  eval->add_option("--gt", gt, "ground-truth 16-bit label PNG")->required();
  eval->add_option("--d", d, "boundary distance in pixels")->capture_default_str();
  eval->add_option("--ignore", ignore, "label treated as unlabeled in both images, or none")->capture_default_str();
  eval->add_option("--out-csv", eval_csv, "one-row CSV");

  std::optional<std::string> c_depth, c_rgb, c_ply, c_labels, c_config;
  std::string c_intrinsics = "nyu", c_out;
  bool c_ascii = false;
  CLI::App* convert = app.add_subcommand("convert", "RGB-D to PLY, or labels to a colored PLY");
  convert->add_option("--depth", c_depth, "depth image");
  convert->add_option("--rgb", c_rgb, "color image");
  convert->add_option("--intrinsics", c_intrinsics, "intrinsics file or nyu")->capture_default_str();
  convert->add_option("--ply", c_ply, "input PLY (with --labels)");
  convert->add_option("--labels", c_labels, "labels file from segment --out-labels");
  convert->add_option("--config", c_config, "config naming the input (with --labels)");
  convert->add_option("--out-ply", c_out, "output PLY")->required();
  convert->add_flag("--ascii", c_ascii, "write ASCII PLY");

  std::string s_kind = "room", s_out;
  uint64_t s_seed = 1;
  size_t s_width = 160, s_height = 120;
  CLI::App* synth = app.add_subcommand("synth", "render a synthetic RGB-D frame with ground truth");
  synth->add_option("--scene", s_kind, "corner or room")->capture_default_str();
  synth->add_option("--seed", s_seed, "random seed")->capture_default_str();
  synth->add_option("--width", s_width, "image width")->capture_default_str();
  synth->add_option("--height", s_height, "image height")->capture_default_str();
  synth->add_option("--out-dir", s_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*segment) return cmd_segment(seg_opts);
    if (*sweep) return cmd_sweep(sweep_opts, targets, deltas);
    if (*eval) return cmd_eval(pred, gt, d, ignore, eval_csv);
    if (*convert) {
      if (c_labels) {
        Config cfg;
        if (c_config) cfg.load(*c_config);
        if (c_ply) cfg.set("ply", *c_ply);
        if (c_depth) cfg.set("depth", *c_depth);
        if (c_rgb) cfg.set("rgb", *c_rgb);
        if (c_depth || c_rgb) cfg.set("intrinsics", c_intrinsics);
        check(pclv_colorize_labels(cfg.get(), c_labels->c_str(), c_out.c_str()), false);
      } else {
        if (!c_depth || !c_rgb) {
          std::cerr << "error: convert needs --depth and --rgb, or --labels with an input cloud\n";
          return kExitUsage;
        }
        check(pclv_convert_rgbd(c_depth->c_str(), c_rgb->c_str(), c_intrinsics.c_str(), c_out.c_str(), c_ascii),
              false);
      }
      std::cout << "written=" << c_out << "\n";
      return 0;
    }
    if (*synth) {
      check(pclv_synth_scene(s_kind.c_str(), s_seed, s_width, s_height, s_out.c_str()), false);
      std::cout << "written=" << s_out << "\n";
      return 0;
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return kExitUsage;
}
