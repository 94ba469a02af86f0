#include "pclv/pclv.h"

#include <algorithm>
#include <cstring>
#include <new>
#include <string>

#include "pclv/error.hpp"
#include "pclv/eval.hpp"
#include "pclv/pipeline.hpp"
#include "pclv/synthetic.hpp"

struct pclv_config {
  pclv::RunConfig cfg;
  std::string scratch;
};

struct pclv_result {
  pclv::RunResult result;
  std::string metadata;
};

struct pclv_records {
  std::vector<pclv::MetricsRecord> records;
  std::string csv;
};

struct pclv_cloud {
  pclv::PointCloud cloud;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_stage;

pclv_status set_error(pclv_status status, std::string message, std::string stage = {}) {
  g_error = std::move(message);
  g_stage = std::move(stage);
  return status;
}

pclv_status to_status(pclv::ErrorCode code) {
  switch (code) {
    case pclv::ErrorCode::kInvalidArgument:
      return PCLV_ERR_INVALID_ARGUMENT;
    case pclv::ErrorCode::kIo:
      return PCLV_ERR_IO;
    case pclv::ErrorCode::kFormat:
      return PCLV_ERR_FORMAT;
    case pclv::ErrorCode::kPrecondition:
      return PCLV_ERR_PRECONDITION;
    case pclv::ErrorCode::kDegenerate:
      return PCLV_ERR_DEGENERATE;
    case pclv::ErrorCode::kInternal:
      return PCLV_ERR_INTERNAL;
  }
  return PCLV_ERR_INTERNAL;
}

template <typename Fn>
pclv_status guarded(Fn&& fn) {
  g_error.clear();
  g_stage.clear();
  try {
    fn();
    return PCLV_OK;
  } catch (const pclv::Error& e) {
    return set_error(to_status(e.code()), e.what(), e.stage());
  } catch (const std::bad_alloc&) {
    return set_error(PCLV_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(PCLV_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(PCLV_ERR_INTERNAL, "unknown error");
  }
}

#define PCLV_REQUIRE(cond, what) \
  if (!(cond)) return set_error(PCLV_ERR_INVALID_ARGUMENT, what)

pclv_metrics to_metrics(const pclv::MetricsRecord& r) {
  return {r.boundary_recall, r.under_seg_error, r.gt_segments, r.n_segments, r.delta};
}

pclv_status make_records(std::vector<pclv::MetricsRecord>&& recs, pclv_records** out) {
  auto* h = new pclv_records{std::move(recs), {}};
  h->csv = pclv::sweep_csv(h->records);
  *out = h;
  return PCLV_OK;
}

}  // namespace

extern "C" {

const char* pclv_last_error(void) { return g_error.c_str(); }
const char* pclv_last_error_stage(void) { return g_stage.c_str(); }
const char* pclv_version(void) { return "1.0.0"; }

pclv_status pclv_config_create(pclv_config** out) {
  PCLV_REQUIRE(out, "out is NULL");
  return guarded([&] { *out = new pclv_config(); });
}

void pclv_config_destroy(pclv_config* cfg) { delete cfg; }

pclv_status pclv_config_set(pclv_config* cfg, const char* key, const char* value) {
  PCLV_REQUIRE(cfg && key && value, "NULL argument");
  return guarded([&] { cfg->cfg.set(key, value); });
}

pclv_status pclv_config_load_file(pclv_config* cfg, const char* path) {
  PCLV_REQUIRE(cfg && path, "NULL argument");
  return guarded([&] { cfg->cfg.load_file(path); });
}

pclv_status pclv_config_get(pclv_config* cfg, const char* key, const char** value) {
  PCLV_REQUIRE(cfg && key && value, "NULL argument");
  return guarded([&] {
    const auto map = cfg->cfg.to_map();
    const auto it = map.find(key);
    if (it == map.end()) pclv::fail(pclv::ErrorCode::kInvalidArgument, std::string("unknown config key '") + key + "'");
    cfg->scratch = it->second;
    *value = cfg->scratch.c_str();
  });
}

pclv_status pclv_config_validate(pclv_config* cfg, size_t* count, const char** text) {
  PCLV_REQUIRE(cfg, "NULL config");
  return guarded([&] {
    const auto diags = pclv::validate(cfg->cfg);
    cfg->scratch.clear();
    for (const auto& d : diags) cfg->scratch += d.field + ": " + d.message + "\n";
    if (count) *count = diags.size();
    if (text) *text = cfg->scratch.c_str();
  });
}

pclv_status pclv_config_from_metadata(const char* json, pclv_config** out) {
  PCLV_REQUIRE(json && out, "NULL argument");
  return guarded([&] { *out = new pclv_config{pclv::replay_config(json), {}}; });
}

pclv_status pclv_run(const pclv_config* cfg, pclv_result** out) {
  PCLV_REQUIRE(cfg && out, "NULL argument");
  return guarded([&] {
    auto* h = new pclv_result{pclv::run(cfg->cfg), {}};
    h->metadata = h->result.metadata_json();
    *out = h;
  });
}

void pclv_result_destroy(pclv_result* res) { delete res; }

size_t pclv_result_num_points(const pclv_result* res) { return res ? res->result.segmentation.num_points() : 0; }

size_t pclv_result_num_segments(const pclv_result* res) {
  return res ? res->result.segmentation.num_segments() : 0;
}

pclv_status pclv_result_labels(const pclv_result* res, uint32_t* out, size_t cap) {
  PCLV_REQUIRE(res && (out || cap == 0), "NULL argument");
  const auto& labels = res->result.segmentation.labels;
  std::copy_n(labels.begin(), std::min(cap, labels.size()), out);
  return PCLV_OK;
}

double pclv_result_delta(const pclv_result* res) { return res ? res->result.delta : 0.0; }

int pclv_result_within_tolerance(const pclv_result* res) { return res && res->result.within_tolerance ? 1 : 0; }

int pclv_result_has_metrics(const pclv_result* res) { return res && res->result.metrics ? 1 : 0; }

pclv_status pclv_result_metrics(const pclv_result* res, pclv_metrics* out) {
  PCLV_REQUIRE(res && out, "NULL argument");
  if (!res->result.metrics) return set_error(PCLV_ERR_PRECONDITION, "run had no ground truth");
  *out = to_metrics(*res->result.metrics);
  return PCLV_OK;
}

const char* pclv_result_metadata_json(const pclv_result* res) { return res ? res->metadata.c_str() : ""; }

double pclv_result_total_seconds(const pclv_result* res) { return res ? res->result.stats.total_seconds() : 0.0; }

size_t pclv_result_stage_count(const pclv_result* res) { return res ? res->result.stats.timings.size() : 0; }

pclv_status pclv_result_stage(const pclv_result* res, size_t index, const char** name, double* seconds) {
  PCLV_REQUIRE(res && name && seconds, "NULL argument");
  const auto& t = res->result.stats.timings;
  PCLV_REQUIRE(index < t.size(), "stage index out of range");
  *name = t[index].stage.c_str();
  *seconds = t[index].seconds;
  return PCLV_OK;
}

pclv_status pclv_result_counter(const pclv_result* res, const char* name, int64_t* out) {
  PCLV_REQUIRE(res && name && out, "NULL argument");
  const auto& s = res->result.stats;
  const std::string n = name;
  if (n == "normals_estimated") {
    *out = s.normals_estimated;
  } else if (n == "normals_loaded") {
    *out = s.normals_loaded;
  } else if (n == "fpfh_computed") {
    *out = s.fpfh_computed;
  } else if (n == "fpfh_loaded") {
    *out = s.fpfh_loaded;
  } else if (n == "n_edges") {
    *out = static_cast<int64_t>(s.n_edges);
  } else {
    return set_error(PCLV_ERR_INVALID_ARGUMENT, "unknown counter '" + n + "'");
  }
  return PCLV_OK;
}

pclv_status pclv_sweep_targets(const pclv_config* cfg, const size_t* targets, size_t count, pclv_records** out) {
  PCLV_REQUIRE(cfg && out && (targets || count == 0), "NULL argument");
  return guarded([&] {
    make_records(pclv::run_sweep(cfg->cfg, std::vector<std::size_t>(targets, targets + count)), out);
  });
}

pclv_status pclv_sweep_deltas(const pclv_config* cfg, const double* deltas, size_t count, pclv_records** out) {
  PCLV_REQUIRE(cfg && out && (deltas || count == 0), "NULL argument");
  return guarded([&] {
    make_records(pclv::run_sweep_deltas(cfg->cfg, std::vector<double>(deltas, deltas + count)), out);
  });
}

void pclv_records_destroy(pclv_records* recs) { delete recs; }

size_t pclv_records_count(const pclv_records* recs) { return recs ? recs->records.size() : 0; }

pclv_status pclv_records_get(const pclv_records* recs, size_t index, pclv_record* out) {
  PCLV_REQUIRE(recs && out, "NULL argument");
  PCLV_REQUIRE(index < recs->records.size(), "record index out of range");
  const auto& r = recs->records[index];
  *out = {r.target_segments, r.n_segments, r.boundary_recall, r.under_seg_error, r.gt_segments, r.delta,
          r.flagged ? 1 : 0};
  return PCLV_OK;
}

const char* pclv_records_csv(const pclv_records* recs) { return recs ? recs->csv.c_str() : ""; }

pclv_status pclv_eval_label_files(const char* pred_path, const char* gt_path, double d, int has_ignore,
                                  int64_t ignore, pclv_metrics* out) {
  PCLV_REQUIRE(pred_path && gt_path && out, "NULL argument");
  return guarded([&] {
    pclv::LabelImage pred = pclv::load_label_image(pred_path);
    pclv::LabelImage gt = pclv::load_label_image(gt_path);
    if (has_ignore) {
      pred = pclv::mask_label(pred, ignore);
      gt = pclv::mask_label(gt, ignore);
    }
    const pclv::UnderSegmentation ue = pclv::under_segmentation_error(gt, pred);
    const double br = pclv::boundary_recall(pclv::boundary_mask(gt), pclv::boundary_mask(pred), d);
    std::size_t n_pred = 0;
    {
      std::vector<std::int64_t> ids;
      for (std::size_t k = 0; k < pred.size(); ++k) {
        if (pred.labeled(k)) ids.push_back(pred.data[k]);
      }
      std::sort(ids.begin(), ids.end());
      n_pred = static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
    }
    *out = {br, ue.error, ue.gt_segments, n_pred, 0.0};
  });
}

pclv_status pclv_eval_arrays(size_t width, size_t height, const int64_t* pred, const int64_t* gt, double d,
                             pclv_metrics* out) {
  PCLV_REQUIRE(pred && gt && out, "NULL argument");
  PCLV_REQUIRE(width > 0 && height > 0, "empty image");
  return guarded([&] {
    pclv::LabelImage p(width, height), g(width, height);
    for (std::size_t k = 0; k < width * height; ++k) {
      p.data[k] = pred[k] < 0 ? pclv::LabelImage::kUnlabeled : pred[k];
      g.data[k] = gt[k] < 0 ? pclv::LabelImage::kUnlabeled : gt[k];
    }
    const pclv::UnderSegmentation ue = pclv::under_segmentation_error(g, p);
    const double br = pclv::boundary_recall(pclv::boundary_mask(g), pclv::boundary_mask(p), d);
    *out = {br, ue.error, ue.gt_segments, 0, 0.0};
  });
}

pclv_status pclv_convert_rgbd(const char* depth_path, const char* rgb_path, const char* intrinsics,
                              const char* out_ply, int ascii) {
  PCLV_REQUIRE(depth_path && rgb_path && intrinsics && out_ply, "NULL argument");
  return guarded([&] {
    pclv::RunConfig cfg;
    cfg.depth = depth_path;
    cfg.rgb = rgb_path;
    cfg.intrinsics = intrinsics;
    const pclv::PointCloud cloud = pclv::load_input(cfg);
    pclv::write_ply(cloud, out_ply, ascii ? pclv::PlyEncoding::kAscii : pclv::PlyEncoding::kBinaryLittleEndian);
  });
}

pclv_status pclv_colorize_labels(const pclv_config* cfg, const char* labels_path, const char* out_ply) {
  PCLV_REQUIRE(cfg && labels_path && out_ply, "NULL argument");
  return guarded([&] {
    const pclv::PointCloud cloud = pclv::load_input(cfg->cfg);
    const std::vector<std::uint32_t> labels = pclv::read_labels(labels_path);
    if (labels.size() != cloud.size()) {
      pclv::fail(pclv::ErrorCode::kPrecondition, std::string("labels file '") + labels_path + "' has " +
                                                     std::to_string(labels.size()) + " entries, cloud has " +
                                                     std::to_string(cloud.size()) + " points");
    }
    pclv::write_segmented_ply(cloud, labels, out_ply);
  });
}

pclv_status pclv_synth_scene(const char* kind, uint64_t seed, size_t width, size_t height, const char* out_dir) {
  PCLV_REQUIRE(kind && out_dir, "NULL argument");
  return guarded([&] {
    const std::string k = kind;
    pclv::SyntheticFrame frame;
    if (k == "corner") {
      pclv::ShadedCornerParams p;
      p.seed = seed;
      p.width = width;
      p.height = height;
      frame = pclv::shaded_corner(p);
    } else if (k == "room") {
      pclv::RoomSceneParams p;
      p.seed = seed;
      p.width = width;
      p.height = height;
      frame = pclv::room_scene(p);
    } else {
      pclv::fail(pclv::ErrorCode::kInvalidArgument, "unknown scene kind '" + k + "' (expected corner or room)");
    }
    pclv::write_frame(frame, out_dir);
  });
}

pclv_status pclv_cloud_load(const pclv_config* cfg, pclv_cloud** out) {
  PCLV_REQUIRE(cfg && out, "NULL argument");
  return guarded([&] { *out = new pclv_cloud{pclv::load_input(cfg->cfg)}; });
}

void pclv_cloud_destroy(pclv_cloud* cloud) { delete cloud; }

size_t pclv_cloud_size(const pclv_cloud* cloud) { return cloud ? cloud->cloud.size() : 0; }

pclv_status pclv_cloud_positions(const pclv_cloud* cloud, double* xyz, size_t cap_points) {
  PCLV_REQUIRE(cloud && (xyz || cap_points == 0), "NULL argument");
  const std::size_t n = std::min(cap_points, cloud->cloud.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cloud->cloud.positions[i];
    xyz[3 * i] = p.x();
    xyz[3 * i + 1] = p.y();
    xyz[3 * i + 2] = p.z();
  }
  return PCLV_OK;
}

pclv_status pclv_cloud_colors(const pclv_cloud* cloud, double* rgb, size_t cap_points) {
  PCLV_REQUIRE(cloud && (rgb || cap_points == 0), "NULL argument");
  const std::size_t n = std::min(cap_points, cloud->cloud.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = cloud->cloud.colors[i];
    rgb[3 * i] = c.x();
    rgb[3 * i + 1] = c.y();
    rgb[3 * i + 2] = c.z();
  }
  return PCLV_OK;
}

int pclv_cloud_has_grid(const pclv_cloud* cloud) { return cloud && cloud->cloud.grid ? 1 : 0; }

}  // extern "C"
