#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "pclv/image.hpp"

namespace pclv {

using Vec3 = Eigen::Vector3d;

inline constexpr std::size_t kFpfhBins = 33;
using Fpfh = std::array<double, kFpfhBins>;

struct PixelCoord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

// Links cloud points to the pixels they were back-projected from.
struct GridMapping {
  static constexpr std::int64_t kNoPoint = -1;

  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::int64_t> pixel_to_point;  // width * height, row-major
  std::vector<PixelCoord> point_to_pixel;    // one per point

  std::int64_t point_at(std::size_t row, std::size_t col) const {
    return pixel_to_point[row * width + col];
  }
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double depth_scale = 0.001;  // meters per raw depth unit

  // Kinect RGB camera parameters shipped with the NYU Depth V2 toolbox.
  static CameraIntrinsics nyu();
};

// Reads "fx fy cx cy depth_scale" (whitespace separated) or the preset name
// "nyu".
CameraIntrinsics load_intrinsics(const std::filesystem::path& path);
void validate(const CameraIntrinsics& intr);

struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;  // RGB, each channel in [0, 1]
  std::optional<std::vector<Vec3>> normals;
  std::optional<std::vector<Fpfh>> fpfh;
  std::optional<GridMapping> grid;
  std::optional<Vec3> viewpoint;

  std::size_t size() const { return positions.size(); }
};

// Throws Error(kPrecondition) naming the first violated invariant.
void check_invariants(const PointCloud& cloud);

inline constexpr double kDefaultGray = 0.5;

PointCloud load_ply(const std::filesystem::path& path);

enum class PlyEncoding { kAscii, kBinaryLittleEndian };
void write_ply(const PointCloud& cloud, const std::filesystem::path& path,
               PlyEncoding encoding = PlyEncoding::kBinaryLittleEndian);

PointCloud backproject_depth(const DepthImage& depth, const RgbImage& rgb,
                             const CameraIntrinsics& intr);

// Deterministic display color for a segment label. Injective over labels
// below 2^24.
Rgb8 segment_color(std::uint32_t label);

// Writes the cloud with every point colored by segment_color(label).
void write_segmented_ply(const PointCloud& cloud, std::span<const std::uint32_t> labels,
                         const std::filesystem::path& path);

// Pinhole projection (column, row) of a camera-frame point.
Eigen::Vector2d project_point(const CameraIntrinsics& intr, const Vec3& p);

}  // namespace pclv
