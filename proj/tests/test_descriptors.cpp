#include <Eigen/Geometry>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pclv/descriptors.hpp"
#include "pclv/weights.hpp"

using namespace pclv;

namespace {

std::vector<Vec3> exact_plane(int side, double spacing) {
  std::vector<Vec3> pts;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) pts.emplace_back(i * spacing, j * spacing, 0.0);
  }
  return pts;
}

// Smooth random surface so neighborhoods have no distance ties.
std::vector<Vec3> wavy_surface(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = u(rng), y = u(rng);
    pts.emplace_back(x, y, 0.2 * std::sin(2.0 * x) * std::cos(3.0 * y) + 2.0);
  }
  return pts;
}

}  // namespace

TEST_CASE("exact plane normals face the viewpoint") {
  auto pts = exact_plane(5, 0.1);
  pts.resize(20);
  const auto cloud = oracle::cloud_of(pts);
  for (double vz : {10.0, -10.0}) {
    const auto normals = estimate_normals(cloud, 10, Vec3(0, 0, vz));
    for (const auto& n : normals) {
      CHECK((n.direction - Vec3(0, 0, vz > 0 ? 1 : -1)).norm() < 1e-6);
      CHECK(n.curvature == doctest::Approx(0.0).epsilon(1e-12));
      CHECK_FALSE(n.degenerate);
    }
  }
}

TEST_CASE("noisy plane normals stay within five degrees on average") {
  // Monte-Carlo: 20 draws of 100 uniform samples over a 1 m square, sigma = 1 cm.
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  double total = 0.0;
  std::size_t count = 0;
  for (int draw = 0; draw < 20; ++draw) {
    std::vector<Vec3> pts;
    for (int k = 0; k < 100; ++k) pts.emplace_back(u(rng), u(rng), noise(rng));
    for (const auto& n : estimate_normals(oracle::cloud_of(pts), 10, Vec3(0.5, 0.5, 3.0))) {
      total += oracle::angle_between(n.direction, Vec3::UnitZ());
      ++count;
    }
  }
  const double mean_deg = total / static_cast<double>(count) * 180.0 / M_PI;
  MESSAGE("mean angular error (deg): " << mean_deg);
  CHECK(mean_deg < 5.0);
}

TEST_CASE("degenerate neighborhoods are flagged") {
  const auto normals = estimate_normals(oracle::cloud_of(std::vector<Vec3>(12, Vec3(1, 2, 3))), 10, std::nullopt);
  for (const auto& n : normals) {
    CHECK(n.degenerate);
    CHECK(n.direction == Vec3(0, 0, 1));
    CHECK(n.curvature == 0.0);
  }
}

TEST_CASE("PCA fit matches a Jacobi eigen oracle") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> size(3, 200);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vec3> nb(size(rng));
    const Vec3 scale(1.0 + std::abs(g(rng)), 0.5 + std::abs(g(rng)), 0.05 * std::abs(g(rng)));
    const Eigen::Matrix3d rot = oracle::random_rotation(rng);
    for (auto& p : nb) p = rot * Vec3(scale.x() * g(rng), scale.y() * g(rng), scale.z() * g(rng)) + Vec3(1, 2, 3);

    Vec3 mean = Vec3::Zero();
    for (const auto& p : nb) mean += p;
    mean /= static_cast<double>(nb.size());
    double cov[3][3] = {};
    for (const auto& p : nb) {
      const Vec3 d = p - mean;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) cov[r][c] += d[r] * d[c];
      }
    }
    double values[3], vectors[3][3];
    oracle::jacobi_eigen(cov, values, vectors);
    const Vec3 expect(vectors[0][0], vectors[1][0], vectors[2][0]);
    const double sum = values[0] + values[1] + values[2];

    const NormalEstimate got = fit_normal(nb);
    CHECK(got.direction.norm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(std::abs(got.direction.dot(expect)) - 1.0) < 1e-9);
    CHECK(got.curvature == doctest::Approx(std::max(0.0, values[0]) / sum).epsilon(1e-9));
    CHECK(got.curvature >= 0.0);
    CHECK(got.curvature <= 1.0 / 3.0 + 1e-12);
  }
}

TEST_CASE("normals and FPFH are invariant under rigid motion") {
  std::mt19937_64 rng(8);
  const auto pts = wavy_surface(rng, 400);
  const Vec3 view(0, 0, 10);
  const auto cloud = oracle::cloud_of(pts);
  const auto normals = estimate_normals(cloud, 10, view);
  const auto fpfh = compute_fpfh(cloud, normals, 15);

  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Matrix3d rot = oracle::random_rotation(rng);
    const Vec3 t(0.3 * trial, -1.0, 2.5);
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(rot * p + t);
    const auto mcloud = oracle::cloud_of(moved);
    const auto mnormals = estimate_normals(mcloud, 10, Vec3(rot * view + t));
    const auto mfpfh = compute_fpfh(mcloud, mnormals, 15);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      CHECK(oracle::angle_between(mnormals[k].direction, rot * normals[k].direction) < 1e-5);
      CHECK(std::abs(mnormals[k].curvature - normals[k].curvature) < 1e-6);
      for (std::size_t b = 0; b < kFpfhBins; ++b) CHECK(std::abs(mfpfh[k][b] - fpfh[k][b]) < 1e-6);
    }
  }
}

TEST_CASE("normal estimates satisfy their invariants on a random surface") {
  std::mt19937_64 rng(81);
  const auto pts = wavy_surface(rng, 300);
  for (const auto& n : estimate_normals(oracle::cloud_of(pts), 10, std::nullopt)) {
    CHECK(std::abs(n.direction.norm() - 1.0) < 1e-6);
    CHECK(n.curvature >= 0.0);
    CHECK(n.curvature <= 1.0 / 3.0);
  }
}

TEST_CASE("pair features") {
  PairFeature f;
  CHECK_FALSE(pair_feature(Vec3(1, 1, 1), Vec3::UnitZ(), Vec3(1, 1, 1), Vec3::UnitX(), f));
  REQUIRE(pair_feature(Vec3(0, 0, 0), Vec3::UnitZ(), Vec3(1, 0, 0), Vec3::UnitZ(), f));
  CHECK(f.alpha == doctest::Approx(0.0));
  CHECK(f.phi == doctest::Approx(0.0));
  CHECK(f.theta == doctest::Approx(0.0));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int k = 0; k < 500; ++k) {
    const Vec3 p1(g(rng), g(rng), g(rng)), p2(g(rng), g(rng), g(rng));
    const Vec3 n1 = Vec3(g(rng), g(rng), g(rng)).normalized(), n2 = Vec3(g(rng), g(rng), g(rng)).normalized();
    REQUIRE(pair_feature(p1, n1, p2, n2, f));
    CHECK(std::abs(f.theta) <= M_PI + 1e-12);
    CHECK(std::abs(f.alpha) <= 1.0 + 1e-12);
    CHECK(std::abs(f.phi) <= 1.0 + 1e-12);
  }
}

TEST_CASE("FPFH on a plane with identical normals is constant and concentrated") {
  const auto cloud = oracle::cloud_of(exact_plane(8, 0.1));
  const std::vector<NormalEstimate> normals(cloud.size());
  const auto hist = compute_fpfh(cloud, normals, 15);
  for (const auto& h : hist) {
    CHECK(std::accumulate(h.begin(), h.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::count_if(h.begin(), h.end(), [](double v) { return v > 0.0; }) == 3);
    for (std::size_t b = 0; b < kFpfhBins; ++b) CHECK(h[b] == doctest::Approx(hist[0][b]).epsilon(1e-12));
  }
}

TEST_CASE("FPFH separates a crease from plane interiors") {
  // Floor z = 0 for x <= 0 and wall x = 0 for z > 0, 4 cm spacing.
  std::vector<Vec3> pts;
  for (int i = -25; i <= 0; ++i) {
    for (int j = 0; j <= 25; ++j) pts.emplace_back(i * 0.04, j * 0.04, 0.0);
  }
  for (int i = 1; i <= 25; ++i) {
    for (int j = 0; j <= 25; ++j) pts.emplace_back(0.0, j * 0.04, i * 0.04);
  }
  const auto cloud = oracle::cloud_of(pts);
  const auto normals = estimate_normals(cloud, 10, Vec3(-2.0, 0.5, 2.0));
  const auto hist = compute_fpfh(cloud, normals, 15);
  auto index_of = [&](const Vec3& p) {
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if ((pts[k] - p).norm() < 1e-9) return k;
    }
    FAIL("point not found");
    return std::size_t{0};
  };
  const auto crease = index_of(Vec3(0, 0.48, 0));
  const auto floor_a = index_of(Vec3(-0.6, 0.48, 0)), floor_b = index_of(Vec3(-0.8, 0.6, 0));
  const auto wall = index_of(Vec3(0, 0.48, 0.6));
  const double baseline = fpfh_weight(hist[floor_a], hist[floor_b]);
  MESSAGE("interior/interior " << baseline << ", crease/floor " << fpfh_weight(hist[crease], hist[floor_a])
                               << ", crease/wall " << fpfh_weight(hist[crease], hist[wall]));
  CHECK(baseline < 0.1);
  CHECK(fpfh_weight(hist[crease], hist[floor_a]) > 0.1);
  CHECK(fpfh_weight(hist[crease], hist[wall]) > 0.1);
}

TEST_CASE("descriptor caches round-trip and reject mismatched parameters") {
  oracle::TempDir dir("desc");
  std::mt19937_64 rng(4);
  const auto pts = wavy_surface(rng, 50);
  const auto cloud = oracle::cloud_of(pts);
  const auto normals = estimate_normals(cloud, 10, Vec3(0, 0, 10));
  const auto hist = compute_fpfh(cloud, normals, 15);
  save_normals_cache(dir / "n.bin", 10, normals);
  save_fpfh_cache(dir / "f.bin", 15, hist);

  const auto n = load_normals_cache(dir / "n.bin", 50, 10);
  REQUIRE(n.has_value());
  for (std::size_t k = 0; k < 50; ++k) {
    CHECK((*n)[k].direction == normals[k].direction);
    CHECK((*n)[k].curvature == normals[k].curvature);
    CHECK((*n)[k].degenerate == normals[k].degenerate);
  }
  const auto f = load_fpfh_cache(dir / "f.bin", 50, 15);
  REQUIRE(f.has_value());
  CHECK(*f == hist);

  CHECK_FALSE(load_normals_cache(dir / "n.bin", 51, 10).has_value());
  CHECK_FALSE(load_normals_cache(dir / "n.bin", 50, 11).has_value());
  CHECK_FALSE(load_fpfh_cache(dir / "f.bin", 50, 10).has_value());
  CHECK_FALSE(load_fpfh_cache(dir / "n.bin", 50, 10).has_value());
  CHECK_FALSE(load_normals_cache(dir / "absent.bin", 50, 10).has_value());
}
