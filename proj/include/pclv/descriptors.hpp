#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "pclv/cloud.hpp"

namespace pclv {

inline constexpr std::size_t kDefaultNormalK = 10;
inline constexpr std::size_t kDefaultFpfhK = 15;

struct NormalEstimate {
  Vec3 direction = Vec3::UnitZ();
  // lambda_0 / (lambda_0 + lambda_1 + lambda_2), in [0, 1/3].
  double curvature = 0.0;
  // Set when the neighborhood collapsed to a single location.
  bool degenerate = false;
};

// PCA plane fit over each point's k nearest neighbors (the point included).
// With a viewpoint, directions are flipped to face it.
std::vector<NormalEstimate> estimate_normals(const PointCloud& cloud, std::size_t k,
                                             const std::optional<Vec3>& viewpoint);

// Fit for a single neighborhood; exposed for testing.
NormalEstimate fit_normal(const std::vector<Vec3>& neighborhood);

// The three Darboux-frame angles of an oriented point pair, as used by
// FPFH: theta in [-pi, pi], alpha in [-1, 1], phi in [-1, 1]. Returns false
// for coincident points.
struct PairFeature {
  double theta = 0.0;
  double alpha = 0.0;
  double phi = 0.0;
};
bool pair_feature(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2, PairFeature& out);

inline constexpr std::size_t kFpfhBinsPerFeature = 11;

// FPFH over k-nearest neighborhoods. Each returned histogram sums to 1.
std::vector<Fpfh> compute_fpfh(const PointCloud& cloud, const std::vector<NormalEstimate>& normals,
                               std::size_t k);

// Binary descriptor cache: magic, n, k, kind, then raw little-endian doubles.
enum class DescriptorKind : std::uint32_t { kNormals = 1, kFpfh = 2 };

void save_normals_cache(const std::filesystem::path& path, std::size_t k,
                        const std::vector<NormalEstimate>& normals);
std::optional<std::vector<NormalEstimate>> load_normals_cache(const std::filesystem::path& path,
                                                              std::size_t n, std::size_t k);
void save_fpfh_cache(const std::filesystem::path& path, std::size_t k, const std::vector<Fpfh>& fpfh);
std::optional<std::vector<Fpfh>> load_fpfh_cache(const std::filesystem::path& path, std::size_t n,
                                                 std::size_t k);

}  // namespace pclv
