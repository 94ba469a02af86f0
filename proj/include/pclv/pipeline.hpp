#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pclv/cloud.hpp"
#include "pclv/eval.hpp"
#include "pclv/graph.hpp"
#include "pclv/merge.hpp"
#include "pclv/weights.hpp"

namespace pclv {

// Flat run configuration. Every field has a key in the key=value format
// (see RunConfig::set); the key names are listed in README.md.
struct RunConfig {
  // Input: a PLY file, or a depth + color pair with intrinsics.
  std::optional<std::filesystem::path> ply;
  std::optional<std::filesystem::path> depth;
  std::optional<std::filesystem::path> rgb;
  std::string intrinsics = "nyu";  // file path or "nyu"

  // Unset picks grid8 when the input has an image grid, knn otherwise.
  std::optional<GraphMethod> graph;
  std::size_t k = 8;
  double radius = 0.0;

  ModalitySet modalities = *ModalitySet::preset("pclv");
  MergeMode mode = MergeMode::kMultiCriteria;
  LinearCoefficients coefficients;
  std::optional<Modality> sort_modality;

  std::optional<double> delta;
  std::optional<std::size_t> target_segments;
  bool postprocess = true;
  // Desired count used by post-processing in fixed-delta runs; defaults to
  // the raw segment count.
  std::optional<std::size_t> postprocess_segments;

  std::size_t normal_k = 10;
  std::size_t fpfh_k = 15;
  bool estimate_normals = true;
  // Unset: signed when the cloud has a viewpoint (normals are oriented).
  std::optional<bool> unsigned_normals;
  std::optional<std::filesystem::path> normals_file;
  std::optional<std::filesystem::path> fpfh_file;

  std::optional<std::filesystem::path> gt;
  // Ground-truth value treated as unlabeled (0 in NYU-style label maps).
  std::optional<std::int64_t> gt_ignore = 0;
  double boundary_distance = kDefaultBoundaryDistance;

  std::optional<std::filesystem::path> out_labels;
  std::optional<std::filesystem::path> out_ply;
  std::optional<std::filesystem::path> out_meta;
  std::optional<std::filesystem::path> out_label_image;
  std::optional<std::filesystem::path> out_csv;
  std::optional<std::filesystem::path> out_edges;
  std::optional<std::filesystem::path> out_weights;

  // Applies one key=value pair. Throws Error(kInvalidArgument) for unknown
  // keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  // Reads a key=value file; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  // Every key with its effective value, sorted by key.
  std::map<std::string, std::string> to_map() const;

  static const std::vector<std::string>& keys();
};

struct Diagnostic {
  std::string field;
  std::string message;
};

std::vector<Diagnostic> validate(const RunConfig& cfg);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunStats {
  int normals_estimated = 0;
  int normals_loaded = 0;
  int fpfh_computed = 0;
  int fpfh_loaded = 0;
  std::size_t n_points = 0;
  std::size_t n_edges = 0;
  std::vector<StageTiming> timings;
  double total_seconds() const;
};

struct RunResult {
  PointCloud cloud;
  Segmentation segmentation;
  std::optional<MetricsRecord> metrics;
  double delta = 0.0;
  std::optional<std::size_t> target_segments;
  bool within_tolerance = true;
  std::optional<std::size_t> postprocess_segments;
  RunConfig config;
  RunStats stats;

  // JSON text: config echo, segment count, delta, timing.
  std::string metadata_json() const;
};

// Ingest -> graph -> descriptors -> weights -> merge -> post-process -> eval,
// writing whatever outputs the config names. Errors carry the stage name.
RunResult run(const RunConfig& cfg);

// Config that reproduces a run exactly from its metadata JSON.
RunConfig replay_config(const std::string& metadata_json);

// Shared graph/weights for several targets or thresholds; requires gt and an
// image grid.
std::vector<MetricsRecord> run_sweep(const RunConfig& cfg, const std::vector<std::size_t>& targets);
std::vector<MetricsRecord> run_sweep_deltas(const RunConfig& cfg, const std::vector<double>& deltas);

// Loads the cloud named by the config's input keys.
PointCloud load_input(const RunConfig& cfg);

void write_labels(const Segmentation& seg, const std::filesystem::path& path);
std::vector<std::uint32_t> read_labels(const std::filesystem::path& path);

}  // namespace pclv
