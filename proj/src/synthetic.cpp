#include "pclv/synthetic.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <vector>

#include "pclv/error.hpp"

namespace pclv {
namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Rgb8 to_rgb8(const Vec3& c) { return {to_byte(c.x()), to_byte(c.y()), to_byte(c.z())}; }

Vec3 pixel_ray(const CameraIntrinsics& intr, std::size_t row, std::size_t col) {
  return {(static_cast<double>(col) - intr.cx) / intr.fx, (static_cast<double>(row) - intr.cy) / intr.fy, 1.0};
}

std::uint16_t quantize_depth(double z, const CameraIntrinsics& intr) {
  const double raw = std::round(z / intr.depth_scale);
  if (!(raw >= 1.0) || raw > 65535.0) return 0;
  return static_cast<std::uint16_t>(raw);
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::UnitZ();
  int object = -1;
};

struct Plane {
  Vec3 normal;  // unit
  double offset;  // n.x = offset
  int object;
};

struct Box {
  Vec3 center;
  Vec3 half;
  Eigen::Matrix3d rotation;  // local -> camera
  int object;
};

void intersect(const Plane& p, const Vec3& dir, Hit& hit) {
  const double denom = p.normal.dot(dir);
  if (std::abs(denom) < 1e-12) return;
  const double t = p.offset / denom;
  if (t > 0.0 && t < hit.t) {
    hit.t = t;
    hit.normal = denom < 0.0 ? p.normal : Vec3(-p.normal);
    hit.object = p.object;
  }
}

void intersect(const Box& b, const Vec3& dir, Hit& hit) {
  const Vec3 o = b.rotation.transpose() * (-b.center);
  const Vec3 d = b.rotation.transpose() * dir;
  double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
  int axis = -1;
  double sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (std::abs(o[a]) > b.half[a]) return;
      continue;
    }
    double lo = (-b.half[a] - o[a]) / d[a], hi = (b.half[a] - o[a]) / d[a];
    double s = -1.0;
    if (lo > hi) {
      std::swap(lo, hi);
      s = 1.0;
    }
    if (lo > t0) {
      t0 = lo;
      axis = a;
      sign = s;
    }
    t1 = std::min(t1, hi);
  }
  if (axis < 0 || t0 > t1 || t0 <= 0.0 || t0 >= hit.t) return;
  Vec3 local = Vec3::Zero();
  local[axis] = sign;
  hit.t = t0;
  hit.normal = b.rotation * local;
  hit.object = b.object;
}

}  // namespace

CameraIntrinsics scaled_nyu_intrinsics(std::size_t width, std::size_t height) {
  CameraIntrinsics intr = CameraIntrinsics::nyu();
  const double sx = static_cast<double>(width) / 640.0, sy = static_cast<double>(height) / 480.0;
  intr.fx *= sx;
  intr.cx *= sx;
  intr.fy *= sy;
  intr.cy *= sy;
  return intr;
}

SyntheticFrame shaded_corner(const ShadedCornerParams& params) {
  if (params.width < 4 || params.height < 4) fail(ErrorCode::kInvalidArgument, "image too small");
  SyntheticFrame f;
  f.intrinsics = scaled_nyu_intrinsics(params.width, params.height);
  f.depth = DepthImage(params.width, params.height, 0);
  f.rgb = RgbImage(params.width, params.height);
  f.gt = LabelImage(params.width, params.height);
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> noise(0.0, params.color_noise);

  // Surface z = z0 - |x|: each plane is at 45 degrees to the optical axis, so
  // they meet at 90 degrees along x = 0, which projects to column cx.
  const double crease_col = f.intrinsics.cx;
  const double dark_col = crease_col + params.shade_offset_px;
  for (std::size_t r = 0; r < params.height; ++r) {
    for (std::size_t c = 0; c < params.width; ++c) {
      const Vec3 ray = pixel_ray(f.intrinsics, r, c);
      const double z = params.crease_depth / (1.0 + std::abs(ray.x()));
      f.depth.at(r, c) = quantize_depth(z, f.intrinsics);
      f.gt.at(r, c) = ray.x() < 0.0 ? 0 : 1;
      const double dist = std::abs(static_cast<double>(c) - dark_col) / params.shade_halfwidth_px;
      const double shade = 0.35 + 0.65 * std::min(1.0, dist);
      const double v = params.albedo * shade;
      f.rgb.at(r, c) = to_rgb8(Vec3(v + noise(rng), v + noise(rng), v + noise(rng)));
    }
  }
  return f;
}

SyntheticFrame room_scene(const RoomSceneParams& params) {
  if (params.width < 4 || params.height < 4) fail(ErrorCode::kInvalidArgument, "image too small");
  SyntheticFrame f;
  f.intrinsics = scaled_nyu_intrinsics(params.width, params.height);
  f.depth = DepthImage(params.width, params.height, 0);
  f.rgb = RgbImage(params.width, params.height);
  f.gt = LabelImage(params.width, params.height);
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

  std::vector<Plane> planes;
  std::vector<Vec3> albedo;
  const double back = between(3.2, 4.2), floor_y = between(1.0, 1.3), left = between(1.6, 2.4),
               right = between(1.6, 2.4), ceiling = between(1.2, 1.6);
  planes.push_back({Vec3(0, 0, 1), back, 0});
  planes.push_back({Vec3(0, 1, 0), floor_y, 1});
  planes.push_back({Vec3(-1, 0, 0), left, 2});
  planes.push_back({Vec3(1, 0, 0), right, 3});
  planes.push_back({Vec3(0, -1, 0), ceiling, 4});
  const Vec3 wall_albedo(between(0.55, 0.85), between(0.55, 0.85), between(0.5, 0.8));
  albedo.push_back(wall_albedo);
  albedo.push_back(Vec3(between(0.25, 0.55), between(0.2, 0.45), between(0.1, 0.35)));
  albedo.push_back(wall_albedo);
  albedo.push_back(wall_albedo);
  albedo.push_back(wall_albedo);

  std::vector<Box> boxes;
  for (int b = 0; b < params.boxes; ++b) {
    const Vec3 half(between(0.15, 0.45), between(0.15, 0.5), between(0.15, 0.4));
    const double z = between(1.6, back - 0.6);
    const double x = between(-0.5, 0.5) * z * 0.8;
    const Vec3 center(x, floor_y - half.y(), z);
    const double yaw = between(-0.7, 0.7);
    const int object = static_cast<int>(planes.size() + boxes.size());
    boxes.push_back({center, half, Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix(), object});
    if (uni(rng) < 0.3) {
      albedo.push_back(wall_albedo);
    } else {
      albedo.push_back(Vec3(between(0.1, 0.9), between(0.1, 0.9), between(0.1, 0.9)));
    }
  }

  const Vec3 light = Vec3(between(-0.5, 0.5), -1.0, between(-0.8, -0.2)).normalized();
  const double ambient = 0.35;
  std::normal_distribution<double> color_noise(0.0, params.color_noise);
  std::normal_distribution<double> depth_noise(0.0, 1.0);
  for (std::size_t r = 0; r < params.height; ++r) {
    for (std::size_t c = 0; c < params.width; ++c) {
      const Vec3 ray = pixel_ray(f.intrinsics, r, c);
      Hit hit;
      for (const Plane& p : planes) intersect(p, ray, hit);
      for (const Box& b : boxes) intersect(b, ray, hit);
      const double lambert = std::max(0.0, hit.normal.dot(-light));
      const Vec3 base = hit.object >= 0 ? albedo[static_cast<std::size_t>(hit.object)] : Vec3::Zero();
      const Vec3 col = base * (ambient + (1.0 - ambient) * lambert);
      f.rgb.at(r, c) = to_rgb8(col + Vec3(color_noise(rng), color_noise(rng), color_noise(rng)));
      const double drop = uni(rng);
      const double noise = depth_noise(rng);
      if (hit.object < 0 || drop < params.dropout) continue;
      const double z = hit.t + params.depth_noise * hit.t * hit.t * noise;
      const std::uint16_t raw = quantize_depth(z, f.intrinsics);
      if (raw == 0) continue;
      f.depth.at(r, c) = raw;
      f.gt.at(r, c) = hit.object;
    }
  }
  return f;
}

void write_frame(const SyntheticFrame& frame, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());
  write_png16(dir / "depth.png", frame.depth);
  write_png_rgb(dir / "rgb.png", frame.rgb);
  write_label_image(dir / "gt.png", frame.gt, 1);
  std::ofstream out(dir / "intrinsics.txt");
  if (!out) fail(ErrorCode::kIo, "cannot write '" + (dir / "intrinsics.txt").string() + "'");
  const CameraIntrinsics& k = frame.intrinsics;
  out << std::setprecision(17) << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' ' << k.depth_scale << '\n';
}

}  // namespace pclv
