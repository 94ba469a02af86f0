#include "pclv/descriptors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "pclv/error.hpp"
#include "pclv/kdtree.hpp"

namespace pclv {

NormalEstimate fit_normal(const std::vector<Vec3>& neighborhood) {
  NormalEstimate est;
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : neighborhood) mean += p;
  mean /= static_cast<double>(neighborhood.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& p : neighborhood) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(neighborhood.size());
  if (!(cov.trace() > 0.0)) {
    est.degenerate = true;
    return est;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Vec3 ev = eig.eigenvalues().cwiseMax(0.0);
  est.direction = eig.eigenvectors().col(0).normalized();
  est.curvature = ev[0] / ev.sum();
  return est;
}

std::vector<NormalEstimate> estimate_normals(const PointCloud& cloud, std::size_t k,
                                             const std::optional<Vec3>& viewpoint) {
  if (k < 3) fail(ErrorCode::kInvalidArgument, "normal estimation requires k >= 3");
  if (cloud.size() <= k) {
    fail(ErrorCode::kInvalidArgument, "normal estimation requires more than k=" +
                                          std::to_string(k) + " points");
  }
  const KdTree tree(cloud.positions);
  std::vector<NormalEstimate> out(cloud.size());
  std::vector<Neighbor> nbrs;
  std::vector<Vec3> hood;
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    tree.knn(cloud.positions[i], k - 1, i, nbrs);
    hood.clear();
    hood.push_back(cloud.positions[i]);
    for (const Neighbor& nb : nbrs) hood.push_back(cloud.positions[nb.index]);
    NormalEstimate est = fit_normal(hood);
    if (viewpoint && !est.degenerate && (*viewpoint - cloud.positions[i]).dot(est.direction) < 0.0) {
      est.direction = -est.direction;
    }
    out[i] = est;
  }
  return out;
}

bool pair_feature(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2, PairFeature& out) {
  Vec3 dp = p2 - p1;
  const double dist = dp.norm();
  if (dist == 0.0) return false;
  const double angle1 = n1.dot(dp) / dist;
  const double angle2 = n2.dot(dp) / dist;
  // The source is the endpoint whose normal is closer to the connecting line.
  // Near-ties (neighbors sharing a neighborhood get the same normal) keep p1
  // as the source so rounding cannot flip the choice.
  const bool swap = std::abs(angle1) < std::abs(angle2) - 1e-12;
  const Vec3& u = swap ? n2 : n1;
  const Vec3& nt = swap ? n1 : n2;
  if (swap) dp = -dp;
  out.phi = swap ? -angle2 : angle1;
  Vec3 v = dp.cross(u);
  const double vn = v.norm();
  if (vn == 0.0) return false;
  v /= vn;
  const Vec3 w = u.cross(v);
  out.alpha = v.dot(nt);
  out.theta = std::atan2(w.dot(nt), u.dot(nt));
  return true;
}

namespace {

std::size_t bin_of(double value, double lo, double hi) {
  const double t = (value - lo) / (hi - lo) * static_cast<double>(kFpfhBinsPerFeature);
  const auto b = static_cast<long>(std::floor(t));
  return static_cast<std::size_t>(std::clamp<long>(b, 0, kFpfhBinsPerFeature - 1));
}

void normalize_blocks(Fpfh& h) {
  for (std::size_t blk = 0; blk < 3; ++blk) {
    double sum = 0.0;
    for (std::size_t b = 0; b < kFpfhBinsPerFeature; ++b) sum += h[blk * kFpfhBinsPerFeature + b];
    for (std::size_t b = 0; b < kFpfhBinsPerFeature; ++b) {
      double& bin = h[blk * kFpfhBinsPerFeature + b];
      bin = sum > 0.0 ? bin / sum : 1.0 / kFpfhBinsPerFeature;
    }
  }
}

}  // namespace

std::vector<Fpfh> compute_fpfh(const PointCloud& cloud, const std::vector<NormalEstimate>& normals,
                               std::size_t k) {
  if (k < 3) fail(ErrorCode::kInvalidArgument, "FPFH requires k >= 3");
  if (normals.size() != cloud.size()) {
    fail(ErrorCode::kPrecondition, "FPFH requires a normal for every point");
  }
  if (cloud.size() <= k) {
    fail(ErrorCode::kInvalidArgument, "FPFH requires more than k=" + std::to_string(k) + " points");
  }
  const std::size_t n = cloud.size();
  const KdTree tree(cloud.positions);
  std::vector<std::vector<Neighbor>> hoods(n);
  for (std::uint32_t i = 0; i < n; ++i) tree.knn(cloud.positions[i], k, i, hoods[i]);

  // Simplified histograms: per-block fractions over the valid neighbor pairs.
  std::vector<Fpfh> spfh(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Fpfh h{};
    std::size_t valid = 0;
    for (const Neighbor& nb : hoods[i]) {
      PairFeature f;
      if (!pair_feature(cloud.positions[i], normals[i].direction, cloud.positions[nb.index],
                        normals[nb.index].direction, f)) {
        continue;
      }
      h[bin_of(f.theta, -std::numbers::pi, std::numbers::pi)] += 1.0;
      h[kFpfhBinsPerFeature + bin_of(f.alpha, -1.0, 1.0)] += 1.0;
      h[2 * kFpfhBinsPerFeature + bin_of(f.phi, -1.0, 1.0)] += 1.0;
      ++valid;
    }
    if (valid > 0) {
      for (double& b : h) b /= static_cast<double>(valid);
    }
    spfh[i] = h;
  }

  std::vector<Fpfh> out(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Fpfh h = spfh[i];
    const double inv_k = 1.0 / static_cast<double>(hoods[i].size());
    for (const Neighbor& nb : hoods[i]) {
      if (nb.dist2 == 0.0) continue;
      const double w = inv_k / std::sqrt(nb.dist2);
      for (std::size_t b = 0; b < kFpfhBins; ++b) h[b] += w * spfh[nb.index][b];
    }
    normalize_blocks(h);
    for (double& b : h) b /= 3.0;
    out[i] = h;
  }
  return out;
}

namespace {

constexpr char kCacheMagic[8] = {'P', 'C', 'L', 'V', 'D', 'S', 'C', '1'};

void write_header(std::ofstream& out, std::size_t n, std::size_t k, DescriptorKind kind) {
  out.write(kCacheMagic, sizeof(kCacheMagic));
  const std::uint64_t n64 = n, k64 = k;
  const auto kind32 = static_cast<std::uint32_t>(kind);
  out.write(reinterpret_cast<const char*>(&n64), sizeof(n64));
  out.write(reinterpret_cast<const char*>(&k64), sizeof(k64));
  out.write(reinterpret_cast<const char*>(&kind32), sizeof(kind32));
}

// Returns the payload when the header matches, nothing otherwise.
std::optional<std::vector<double>> read_matching(const std::filesystem::path& path, std::size_t n,
                                                 std::size_t k, DescriptorKind kind,
                                                 std::size_t values_per_point) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  std::uint64_t n64 = 0, k64 = 0;
  std::uint32_t kind32 = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&n64), sizeof(n64));
  in.read(reinterpret_cast<char*>(&k64), sizeof(k64));
  in.read(reinterpret_cast<char*>(&kind32), sizeof(kind32));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0 || n64 != n || k64 != k ||
      kind32 != static_cast<std::uint32_t>(kind)) {
    return std::nullopt;
  }
  std::vector<double> values(n * values_per_point);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != values.size() * sizeof(double)) return std::nullopt;
  return values;
}

void write_values(const std::filesystem::path& path, std::size_t n, std::size_t k,
                  DescriptorKind kind, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write descriptor cache '" + path.string() + "'");
  write_header(out, n, k, kind);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace

void save_normals_cache(const std::filesystem::path& path, std::size_t k,
                        const std::vector<NormalEstimate>& normals) {
  std::vector<double> values;
  values.reserve(normals.size() * 5);
  for (const NormalEstimate& e : normals) {
    values.insert(values.end(), {e.direction.x(), e.direction.y(), e.direction.z(), e.curvature,
                                 e.degenerate ? 1.0 : 0.0});
  }
  write_values(path, normals.size(), k, DescriptorKind::kNormals, values);
}

std::optional<std::vector<NormalEstimate>> load_normals_cache(const std::filesystem::path& path,
                                                              std::size_t n, std::size_t k) {
  auto values = read_matching(path, n, k, DescriptorKind::kNormals, 5);
  if (!values) return std::nullopt;
  std::vector<NormalEstimate> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* v = values->data() + 5 * i;
    out[i].direction = Vec3(v[0], v[1], v[2]);
    out[i].curvature = v[3];
    out[i].degenerate = v[4] != 0.0;
  }
  return out;
}

void save_fpfh_cache(const std::filesystem::path& path, std::size_t k, const std::vector<Fpfh>& fpfh) {
  std::vector<double> values;
  values.reserve(fpfh.size() * kFpfhBins);
  for (const Fpfh& h : fpfh) values.insert(values.end(), h.begin(), h.end());
  write_values(path, fpfh.size(), k, DescriptorKind::kFpfh, values);
}

std::optional<std::vector<Fpfh>> load_fpfh_cache(const std::filesystem::path& path, std::size_t n,
                                                 std::size_t k) {
  auto values = read_matching(path, n, k, DescriptorKind::kFpfh, kFpfhBins);
  if (!values) return std::nullopt;
  std::vector<Fpfh> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(values->data() + kFpfhBins * i, kFpfhBins, out[i].begin());
  }
  return out;
}

}  // namespace pclv
