#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pclv/cloud.hpp"
#include "pclv/image.hpp"
#include "pclv/merge.hpp"

namespace pclv {

inline constexpr double kDefaultBoundaryDistance = 2.0;

using BoundaryMask = Image<std::uint8_t>;

LabelImage project_labels(const Segmentation& seg, const GridMapping& mapping);

// A labeled pixel is a boundary pixel when a 4-neighbor carries a different
// label. Unlabeled pixels never are.
BoundaryMask boundary_mask(const LabelImage& img);

// Fraction of gt boundary pixels with a predicted boundary pixel within
// Euclidean pixel distance d. 1 when gt has no boundary pixels.
double boundary_recall(const BoundaryMask& gt, const BoundaryMask& pred, double d);

struct UnderSegmentation {
  double error = 0.0;
  std::size_t gt_segments = 0;  // N: gt segments with at least one co-labeled pixel
};

// (1/N) * sum over gt segments S and predicted segments P meeting S of
// min(|P within S|, |P outside S|), counted over pixels labeled in both
// images.
UnderSegmentation under_segmentation_error(const LabelImage& gt, const LabelImage& pred);

// Treats `value` as unlabeled.
LabelImage mask_label(const LabelImage& img, std::int64_t value);

struct MetricsRecord {
  std::size_t target_segments = 0;  // 0 for fixed-delta records
  std::size_t n_segments = 0;
  double boundary_recall = 0.0;
  double under_seg_error = 0.0;
  std::size_t gt_segments = 0;
  double delta = 0.0;
  std::string graph;
  std::string modalities;
  std::string mode;
  bool flagged = false;
  std::string flag_reason;
};

MetricsRecord evaluate_segmentation(const Segmentation& seg, const GridMapping& mapping,
                                    const LabelImage& gt, double d = kDefaultBoundaryDistance);

struct SweepInput {
  const Segmenter* segmenter = nullptr;
  const GridMapping* mapping = nullptr;
  const LabelImage* gt = nullptr;
  bool postprocess = true;
  double d = kDefaultBoundaryDistance;
};

// One record per target, in the given order; each target bisects delta.
std::vector<MetricsRecord> sweep_targets(const SweepInput& in, const std::vector<std::size_t>& targets);
// One record per delta; post-processing uses the raw count as the desired
// count.
std::vector<MetricsRecord> sweep_deltas(const SweepInput& in, const std::vector<double>& deltas);

inline constexpr const char* kSweepCsvHeader =
    "delta,n_segments,boundary_recall,under_seg_error,graph,modalities,mode";

void write_sweep_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& path);
std::string sweep_csv(const std::vector<MetricsRecord>& records);

}  // namespace pclv
