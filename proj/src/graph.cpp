#include "pclv/graph.hpp"

#include <algorithm>
#include <fstream>

#include "pclv/error.hpp"
#include "pclv/kdtree.hpp"

namespace pclv {

std::string_view to_string(GraphMethod m) {
  switch (m) {
    case GraphMethod::kRadius: return "radius";
    case GraphMethod::kKnn: return "knn";
    case GraphMethod::kDelaunay: return "delaunay";
    case GraphMethod::kGrid8: return "grid8";
  }
  return "?";
}

std::optional<GraphMethod> parse_graph_method(std::string_view s) {
  if (s == "radius") return GraphMethod::kRadius;
  if (s == "knn") return GraphMethod::kKnn;
  if (s == "delaunay") return GraphMethod::kDelaunay;
  if (s == "grid8") return GraphMethod::kGrid8;
  return std::nullopt;
}

namespace {

Edge make_edge(std::uint32_t a, std::uint32_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }

void sort_unique(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

}  // namespace

void check_invariants(const ConnectivityGraph& g) {
  std::vector<Edge> sorted = g.edges;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const Edge& e = sorted[k];
    if (e.i >= e.j || e.j >= g.n_vertices) {
      fail(ErrorCode::kInternal, "edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                                     ") is not normalized or out of range");
    }
    if (k > 0 && sorted[k - 1] == e) {
      fail(ErrorCode::kInternal, "duplicate edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ")");
    }
  }
}

ConnectivityGraph build_grid8(const GridMapping& mapping) {
  ConnectivityGraph g;
  g.method = GraphMethod::kGrid8;
  g.n_vertices = mapping.point_to_pixel.size();
  const std::size_t w = mapping.width;
  const std::size_t h = mapping.height;
  g.edges.reserve(4 * g.n_vertices);
  // Forward half of the 8-neighborhood visits each pair exactly once.
  constexpr int kOffsets[4][2] = {{0, 1}, {1, -1}, {1, 0}, {1, 1}};
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::int64_t a = mapping.point_at(r, c);
      if (a == GridMapping::kNoPoint) continue;
      for (const auto& off : kOffsets) {
        const std::int64_t rr = static_cast<std::int64_t>(r) + off[0];
        const std::int64_t cc = static_cast<std::int64_t>(c) + off[1];
        if (rr >= static_cast<std::int64_t>(h) || cc < 0 || cc >= static_cast<std::int64_t>(w)) continue;
        const std::int64_t b = mapping.point_at(rr, cc);
        if (b == GridMapping::kNoPoint) continue;
        g.edges.push_back(make_edge(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)));
      }
    }
  }
  return g;
}

ConnectivityGraph build_knn(const PointCloud& cloud, std::size_t k) {
  if (k < 1) fail(ErrorCode::kInvalidArgument, "knn graph requires K >= 1");
  if (cloud.size() < 2) fail(ErrorCode::kInvalidArgument, "knn graph requires at least 2 points");
  ConnectivityGraph g;
  g.method = GraphMethod::kKnn;
  g.n_vertices = cloud.size();
  const KdTree tree(cloud.positions);
  g.edges.reserve(cloud.size() * k);
  std::vector<Neighbor> nbrs;
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    tree.knn(cloud.positions[i], k, i, nbrs);
    for (const Neighbor& nb : nbrs) g.edges.push_back(make_edge(i, nb.index));
  }
  sort_unique(g.edges);
  return g;
}

ConnectivityGraph build_radius(const PointCloud& cloud, double radius) {
  if (!(radius > 0.0)) fail(ErrorCode::kInvalidArgument, "radius graph requires R > 0");
  ConnectivityGraph g;
  g.method = GraphMethod::kRadius;
  g.n_vertices = cloud.size();
  const KdTree tree(cloud.positions);
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    for (const Neighbor& nb : tree.radius(cloud.positions[i], radius)) {
      if (nb.index > i) g.edges.push_back({i, nb.index});
    }
  }
  sort_unique(g.edges);
  return g;
}

ConnectivityGraph build_delaunay(const PointCloud& cloud) {
  const DelaunayResult dt = delaunay_tetrahedralize(cloud);
  ConnectivityGraph g;
  g.method = GraphMethod::kDelaunay;
  g.n_vertices = cloud.size();
  const int verts = dt.planar ? 3 : 4;
  for (const Tetrahedron& t : dt.cells) {
    for (int a = 0; a < verts; ++a) {
      for (int b = a + 1; b < verts; ++b) g.edges.push_back(make_edge(t[a], t[b]));
    }
  }
  sort_unique(g.edges);
  return g;
}

void write_edges_csv(const ConnectivityGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << "i,j\n";
  for (const Edge& e : g.edges) out << e.i << ',' << e.j << '\n';
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace pclv
