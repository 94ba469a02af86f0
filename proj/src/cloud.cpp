#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "pclv/cloud.hpp"
#include "pclv/error.hpp"

namespace pclv {

CameraIntrinsics CameraIntrinsics::nyu() {
  return {5.1885790117450188e+02, 5.1946961112127485e+02, 3.2558244941119034e+02,
          2.5373616633400465e+02, 0.001};
}

void validate(const CameraIntrinsics& intr) {
  if (!(intr.fx > 0.0) || !(intr.fy > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "intrinsics: focal lengths must be positive");
  }
  if (!(intr.depth_scale > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "intrinsics: depth_scale must be positive");
  }
  if (!std::isfinite(intr.cx) || !std::isfinite(intr.cy)) {
    fail(ErrorCode::kInvalidArgument, "intrinsics: principal point must be finite");
  }
}

CameraIntrinsics load_intrinsics(const std::filesystem::path& path) {
  if (path == "nyu") return CameraIntrinsics::nyu();
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open intrinsics file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  std::istringstream ss(text.str());
  CameraIntrinsics intr;
  std::string word;
  if (!(ss >> intr.fx >> intr.fy >> intr.cx >> intr.cy >> intr.depth_scale)) {
    fail(ErrorCode::kFormat, "intrinsics file '" + path.string() +
                                 "' must hold five numbers: fx fy cx cy depth_scale");
  }
  if (ss >> word) {
    fail(ErrorCode::kFormat, "intrinsics file '" + path.string() + "' has trailing content");
  }
  try {
    validate(intr);
  } catch (const Error& e) {
    fail(ErrorCode::kFormat, "'" + path.string() + "': " + e.what());
  }
  return intr;
}

void check_invariants(const PointCloud& cloud) {
  const std::size_t n = cloud.size();
  if (n == 0) fail(ErrorCode::kPrecondition, "cloud is empty");
  if (cloud.colors.size() != n) fail(ErrorCode::kPrecondition, "colors/positions length mismatch");
  for (const Vec3& c : cloud.colors) {
    if (c.minCoeff() < 0.0 || c.maxCoeff() > 1.0) {
      fail(ErrorCode::kPrecondition, "color channel outside [0,1]");
    }
  }
  if (cloud.normals) {
    if (cloud.normals->size() != n) fail(ErrorCode::kPrecondition, "normals/positions length mismatch");
    for (const Vec3& nrm : *cloud.normals) {
      if (std::abs(nrm.norm() - 1.0) > 1e-6) fail(ErrorCode::kPrecondition, "normal is not unit length");
    }
  }
  if (cloud.fpfh) {
    if (cloud.fpfh->size() != n) fail(ErrorCode::kPrecondition, "fpfh/positions length mismatch");
    for (const Fpfh& h : *cloud.fpfh) {
      double sum = 0.0;
      for (double b : h) {
        if (b < 0.0) fail(ErrorCode::kPrecondition, "negative FPFH bin");
        sum += b;
      }
      if (std::abs(sum - 1.0) > 1e-6) fail(ErrorCode::kPrecondition, "FPFH histogram does not sum to 1");
    }
  }
  if (cloud.grid) {
    const GridMapping& g = *cloud.grid;
    if (g.point_to_pixel.size() != n) fail(ErrorCode::kPrecondition, "grid mapping does not cover the cloud");
    if (g.pixel_to_point.size() != g.width * g.height) {
      fail(ErrorCode::kPrecondition, "grid mapping has wrong pixel count");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const PixelCoord px = g.point_to_pixel[i];
      if (px.row >= g.height || px.col >= g.width ||
          g.point_at(px.row, px.col) != static_cast<std::int64_t>(i)) {
        fail(ErrorCode::kPrecondition, "grid mapping is not mutually inverse at point " + std::to_string(i));
      }
    }
  }
}

PointCloud backproject_depth(const DepthImage& depth, const RgbImage& rgb,
                             const CameraIntrinsics& intr) {
  validate(intr);
  if (depth.width != rgb.width || depth.height != rgb.height) {
    fail(ErrorCode::kInvalidArgument,
         "depth (" + std::to_string(depth.width) + "x" + std::to_string(depth.height) +
             ") and color (" + std::to_string(rgb.width) + "x" + std::to_string(rgb.height) +
             ") dimensions differ");
  }
  PointCloud cloud;
  GridMapping grid;
  grid.width = depth.width;
  grid.height = depth.height;
  grid.pixel_to_point.assign(depth.size(), GridMapping::kNoPoint);

  std::size_t valid = 0;
  for (std::uint16_t d : depth.data) valid += d != 0;
  if (valid == 0) fail(ErrorCode::kInvalidArgument, "depth image has no valid pixels");
  cloud.positions.reserve(valid);
  cloud.colors.reserve(valid);
  grid.point_to_pixel.reserve(valid);

  for (std::size_t row = 0; row < depth.height; ++row) {
    for (std::size_t col = 0; col < depth.width; ++col) {
      const std::uint16_t raw = depth.at(row, col);
      if (raw == 0) continue;
      const double z = raw * intr.depth_scale;
      const double x = (static_cast<double>(col) - intr.cx) * z / intr.fx;
      const double y = (static_cast<double>(row) - intr.cy) * z / intr.fy;
      grid.pixel_to_point[row * depth.width + col] = static_cast<std::int64_t>(cloud.size());
      grid.point_to_pixel.push_back({static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(col)});
      cloud.positions.emplace_back(x, y, z);
      const Rgb8 c = rgb.at(row, col);
      cloud.colors.emplace_back(c.r / 255.0, c.g / 255.0, c.b / 255.0);
    }
  }
  cloud.grid = std::move(grid);
  cloud.viewpoint = Vec3::Zero();
  return cloud;
}

Eigen::Vector2d project_point(const CameraIntrinsics& intr, const Vec3& p) {
  return {intr.fx * p.x() / p.z() + intr.cx, intr.fy * p.y() / p.z() + intr.cy};
}

}  // namespace pclv
