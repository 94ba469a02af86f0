#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pclv/cloud.hpp"

namespace pclv {

struct Neighbor {
  double dist2 = 0.0;
  std::uint32_t index = 0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Balanced k-d tree over a fixed point set. Query results are exact and
// ordered by (squared distance, index), so equidistant points resolve to the
// smaller index.
class KdTree {
 public:
  static constexpr std::uint32_t kNoExclude = std::numeric_limits<std::uint32_t>::max();

  explicit KdTree(std::span<const Vec3> points);

  std::size_t size() const { return points_.size(); }

  // The k nearest points to q, skipping index `exclude`.
  std::vector<Neighbor> knn(const Vec3& q, std::size_t k, std::uint32_t exclude = kNoExclude) const;
  void knn(const Vec3& q, std::size_t k, std::uint32_t exclude, std::vector<Neighbor>& out) const;

  // All points with squared distance strictly below radius^2.
  std::vector<Neighbor> radius(const Vec3& q, double radius) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double split = 0.0;
    int axis = -1;  // -1 marks a leaf
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void knn_recurse(std::int32_t node, const Vec3& q, std::size_t k, std::uint32_t exclude,
                   std::vector<Neighbor>& heap) const;
  void radius_recurse(std::int32_t node, const Vec3& q, double r2, std::vector<Neighbor>& out) const;

  std::vector<Vec3> points_;           // reordered copy, contiguous per leaf
  std::vector<std::uint32_t> index_;   // original index of points_[k]
  std::vector<Node> nodes_;
};

}  // namespace pclv
