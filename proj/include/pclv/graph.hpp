#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pclv/cloud.hpp"

namespace pclv {

enum class GraphMethod { kRadius, kKnn, kDelaunay, kGrid8 };

std::string_view to_string(GraphMethod m);
std::optional<GraphMethod> parse_graph_method(std::string_view s);

struct Edge {
  std::uint32_t i = 0;
  std::uint32_t j = 0;  // always i < j
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Undirected simple graph over point indices. Edge weights live in
// WeightedGraph; this type only records topology.
struct ConnectivityGraph {
  std::size_t n_vertices = 0;
  std::vector<Edge> edges;
  GraphMethod method = GraphMethod::kKnn;
};

// Throws Error(kInternal) if edges are not normalized or contain duplicates
// or self-loops.
void check_invariants(const ConnectivityGraph& g);

ConnectivityGraph build_grid8(const GridMapping& mapping);
ConnectivityGraph build_knn(const PointCloud& cloud, std::size_t k);
ConnectivityGraph build_radius(const PointCloud& cloud, double radius);
ConnectivityGraph build_delaunay(const PointCloud& cloud);

using Tetrahedron = std::array<std::uint32_t, 4>;

struct DelaunayResult {
  // Finite cells: tetrahedra, or triangles (last entry unused) when the input
  // was coplanar and the planar fallback ran.
  std::vector<Tetrahedron> cells;
  bool planar = false;
  int perturbation_retries = 0;
  std::vector<Vec3> points;  // coordinates actually triangulated
};

DelaunayResult delaunay_tetrahedralize(const PointCloud& cloud);

// Edge-list CSV with header "i,j".
void write_edges_csv(const ConnectivityGraph& g, const std::filesystem::path& path);

}  // namespace pclv
