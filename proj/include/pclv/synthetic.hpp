#pragma once

#include <cstdint>
#include <filesystem>

#include "pclv/cloud.hpp"
#include "pclv/image.hpp"

namespace pclv {

// A rendered RGB-D frame with per-pixel ground-truth surface labels.
// Pixels with no depth are 0 in `depth` and unlabeled in `gt`.
struct SyntheticFrame {
  DepthImage depth;
  RgbImage rgb;
  LabelImage gt;
  CameraIntrinsics intrinsics;
};

// NYU intrinsics rescaled to a smaller image.
CameraIntrinsics scaled_nyu_intrinsics(std::size_t width, std::size_t height);

// Two planes meeting at a right-angle concave crease straight ahead of the
// camera. Albedo is uniform; the shading darkens towards a line
// `shade_offset_px` columns right of the crease. Ground truth labels the two
// planes.
struct ShadedCornerParams {
  std::size_t width = 160;
  std::size_t height = 120;
  double crease_depth = 1.5;  // meters
  int shade_offset_px = 10;
  double shade_halfwidth_px = 40.0;
  double albedo = 0.8;
  double color_noise = 0.01;
  std::uint64_t seed = 1;
};
SyntheticFrame shaded_corner(const ShadedCornerParams& params);

// Floor, walls and a few rotated boxes with random albedos (some matching
// the wall behind them), directional shading, sensor noise and depth holes.
// Ground truth labels each object.
struct RoomSceneParams {
  std::size_t width = 160;
  std::size_t height = 120;
  int boxes = 4;
  double color_noise = 0.01;
  double depth_noise = 0.001;  // meters at 1 m, grows with z^2
  double dropout = 0.005;      // fraction of pixels without depth
  std::uint64_t seed = 1;
};
SyntheticFrame room_scene(const RoomSceneParams& params);

// Writes depth.png, rgb.png, gt.png and intrinsics.txt into `dir`. Labels are
// stored shifted by one so 0 marks unlabeled pixels.
void write_frame(const SyntheticFrame& frame, const std::filesystem::path& dir);

}  // namespace pclv
