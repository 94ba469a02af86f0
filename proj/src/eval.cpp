#include "pclv/eval.hpp"

#include <cmath>
#include <iomanip>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "pclv/error.hpp"

namespace pclv {

LabelImage project_labels(const Segmentation& seg, const GridMapping& mapping) {
  if (mapping.point_to_pixel.size() != seg.num_points()) {
    fail(ErrorCode::kPrecondition, "grid mapping covers " + std::to_string(mapping.point_to_pixel.size()) +
                                       " points, segmentation " + std::to_string(seg.num_points()));
  }
  LabelImage img(mapping.width, mapping.height);
  for (std::size_t i = 0; i < seg.num_points(); ++i) {
    const PixelCoord px = mapping.point_to_pixel[i];
    img.at(px.row, px.col) = seg.labels[i];
  }
  return img;
}

BoundaryMask boundary_mask(const LabelImage& img) {
  BoundaryMask mask(img.width, img.height, 0);
  const std::size_t w = img.width, h = img.height;
  auto differs = [&](std::int64_t a, std::size_t r, std::size_t c) {
    const std::int64_t b = img.at(r, c);
    return b != LabelImage::kUnlabeled && b != a;
  };
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::int64_t a = img.at(r, c);
      if (a == LabelImage::kUnlabeled) continue;
      const bool edge = (r > 0 && differs(a, r - 1, c)) || (r + 1 < h && differs(a, r + 1, c)) ||
                        (c > 0 && differs(a, r, c - 1)) || (c + 1 < w && differs(a, r, c + 1));
      mask.at(r, c) = edge ? 1 : 0;
    }
  }
  return mask;
}

double boundary_recall(const BoundaryMask& gt, const BoundaryMask& pred, double d) {
  if (gt.width != pred.width || gt.height != pred.height) {
    fail(ErrorCode::kInvalidArgument, "boundary masks differ in size");
  }
  if (!(d >= 0.0)) fail(ErrorCode::kInvalidArgument, "boundary distance must be >= 0");
  const auto reach = static_cast<int>(std::floor(d));
  std::vector<std::pair<int, int>> disk;
  for (int dy = -reach; dy <= reach; ++dy) {
    for (int dx = -reach; dx <= reach; ++dx) {
      if (static_cast<double>(dx * dx + dy * dy) <= d * d) disk.emplace_back(dy, dx);
    }
  }
  const auto w = static_cast<long>(gt.width), h = static_cast<long>(gt.height);
  std::size_t tp = 0, fn = 0;
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      if (!gt.at(r, c)) continue;
      bool hit = false;
      for (const auto& [dy, dx] : disk) {
        const long rr = r + dy, cc = c + dx;
        if (rr >= 0 && rr < h && cc >= 0 && cc < w && pred.at(rr, cc)) {
          hit = true;
          break;
        }
      }
      ++(hit ? tp : fn);
    }
  }
  if (tp + fn == 0) return 1.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

UnderSegmentation under_segmentation_error(const LabelImage& gt, const LabelImage& pred) {
  if (gt.width != pred.width || gt.height != pred.height) {
    fail(ErrorCode::kInvalidArgument, "label images differ in size (" + std::to_string(gt.width) + "x" +
                                          std::to_string(gt.height) + " vs " + std::to_string(pred.width) +
                                          "x" + std::to_string(pred.height) + ")");
  }
  std::unordered_map<std::int64_t, std::uint32_t> gt_ids, pred_ids;
  std::vector<std::size_t> pred_size;
  std::unordered_map<std::uint64_t, std::size_t> overlap;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    if (!gt.labeled(k) || !pred.labeled(k)) continue;
    const auto g = gt_ids.try_emplace(gt.data[k], static_cast<std::uint32_t>(gt_ids.size())).first->second;
    const auto [it, fresh] = pred_ids.try_emplace(pred.data[k], static_cast<std::uint32_t>(pred_ids.size()));
    if (fresh) pred_size.push_back(0);
    ++pred_size[it->second];
    ++overlap[(static_cast<std::uint64_t>(g) << 32) | it->second];
  }
  if (gt_ids.empty()) fail(ErrorCode::kInvalidArgument, "no pixel is labeled in both images");
  std::size_t total = 0;
  for (const auto& [key, in] : overlap) {
    const std::size_t p = pred_size[key & 0xffffffffu];
    total += std::min(in, p - in);
  }
  UnderSegmentation out;
  out.gt_segments = gt_ids.size();
  out.error = static_cast<double>(total) / static_cast<double>(out.gt_segments);
  return out;
}

LabelImage mask_label(const LabelImage& img, std::int64_t value) {
  LabelImage out = img;
  for (auto& v : out.data) {
    if (v == value) v = LabelImage::kUnlabeled;
  }
  return out;
}

MetricsRecord evaluate_segmentation(const Segmentation& seg, const GridMapping& mapping,
                                    const LabelImage& gt, double d) {
  if (gt.width != mapping.width || gt.height != mapping.height) {
    fail(ErrorCode::kInvalidArgument, "ground truth is " + std::to_string(gt.width) + "x" +
                                          std::to_string(gt.height) + " but the cloud grid is " +
                                          std::to_string(mapping.width) + "x" + std::to_string(mapping.height));
  }
  const LabelImage pred = project_labels(seg, mapping);
  LabelImage gt_valid = gt;
  for (std::size_t k = 0; k < gt_valid.size(); ++k) {
    if (!pred.labeled(k)) gt_valid.data[k] = LabelImage::kUnlabeled;
  }
  MetricsRecord rec;
  rec.n_segments = seg.num_segments();
  rec.boundary_recall = boundary_recall(boundary_mask(gt_valid), boundary_mask(pred), d);
  const UnderSegmentation ue = under_segmentation_error(gt_valid, pred);
  rec.under_seg_error = ue.error;
  rec.gt_segments = ue.gt_segments;
  rec.delta = seg.config.delta;
  rec.graph = std::string(to_string(seg.graph));
  rec.modalities = seg.config.modalities.to_string();
  rec.mode = std::string(to_string(seg.config.mode));
  return rec;
}

std::vector<MetricsRecord> sweep_targets(const SweepInput& in, const std::vector<std::size_t>& targets) {
  if (!in.segmenter || !in.mapping || !in.gt) fail(ErrorCode::kInvalidArgument, "sweep input incomplete");
  if (targets.empty()) fail(ErrorCode::kInvalidArgument, "sweep needs at least one target");
  const std::size_t n = in.segmenter->graph().graph.n_vertices;
  std::vector<MetricsRecord> out;
  for (std::size_t target : targets) {
    const DeltaSearch found = search_delta(*in.segmenter, target, in.postprocess);
    MetricsRecord rec = evaluate_segmentation(found.segmentation, *in.mapping, *in.gt, in.d);
    rec.target_segments = target;
    if (!found.within_tolerance) {
      rec.flagged = true;
      rec.flag_reason = "segment count " + std::to_string(rec.n_segments) + " not within 5% of target " +
                        std::to_string(target);
    } else if (rec.n_segments >= n) {
      rec.flagged = true;
      rec.flag_reason = "trivial one-segment-per-point output";
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<MetricsRecord> sweep_deltas(const SweepInput& in, const std::vector<double>& deltas) {
  if (!in.segmenter || !in.mapping || !in.gt) fail(ErrorCode::kInvalidArgument, "sweep input incomplete");
  if (deltas.empty()) fail(ErrorCode::kInvalidArgument, "sweep needs at least one delta");
  std::vector<MetricsRecord> out;
  for (double delta : deltas) {
    Segmentation seg = in.segmenter->run(delta);
    if (in.postprocess) seg = merge_small_segments(seg, *in.segmenter, seg.num_segments());
    out.push_back(evaluate_segmentation(seg, *in.mapping, *in.gt, in.d));
  }
  return out;
}

std::string sweep_csv(const std::vector<MetricsRecord>& records) {
  std::ostringstream out;
  out << kSweepCsvHeader << '\n' << std::setprecision(17);
  for (const MetricsRecord& r : records) {
    out << r.delta << ',' << r.n_segments << ',' << r.boundary_recall << ',' << r.under_seg_error << ','
        << r.graph << ",\"" << r.modalities << "\"," << r.mode << '\n';
  }
  return out.str();
}

void write_sweep_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << sweep_csv(records);
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace pclv
