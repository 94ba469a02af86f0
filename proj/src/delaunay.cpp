// Incremental Bowyer-Watson Delaunay triangulation in 2D and 3D.
//
// The convex hull is closed with "ghost" cells that share a symbolic vertex at
// infinity, so no bounding super-simplex is needed and hull edges come out
// exactly. Predicates run in double precision with a static error filter; any
// sign that the filter cannot certify aborts the attempt and the caller
// retries on deterministically perturbed coordinates.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "pclv/error.hpp"
#include "pclv/graph.hpp"

namespace pclv {
namespace {

constexpr std::uint32_t kInfinite = std::numeric_limits<std::uint32_t>::max();
constexpr double kFilter = 1e-12;
constexpr int kMaxRetries = 4;

struct Uncertain {};

template <int D>
using Point = Eigen::Matrix<double, D, 1>;

double det3(const double m[3][3], double& perm) {
  const double c0 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
  const double c1 = m[1][0] * m[2][2] - m[1][2] * m[2][0];
  const double c2 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
  const double p0 = std::abs(m[1][1] * m[2][2]) + std::abs(m[1][2] * m[2][1]);
  const double p1 = std::abs(m[1][0] * m[2][2]) + std::abs(m[1][2] * m[2][0]);
  const double p2 = std::abs(m[1][0] * m[2][1]) + std::abs(m[1][1] * m[2][0]);
  perm = std::abs(m[0][0]) * p0 + std::abs(m[0][1]) * p1 + std::abs(m[0][2]) * p2;
  return m[0][0] * c0 - m[0][1] * c1 + m[0][2] * c2;
}

// Sign of a determinant, or Uncertain when it is within the error filter.
int certified_sign(double det, double perm) {
  if (det > kFilter * perm) return 1;
  if (det < -kFilter * perm) return -1;
  throw Uncertain{};
}

int orient(const Point<2>& a, const Point<2>& b, const Point<2>& c) {
  const double bx = b.x() - a.x(), by = b.y() - a.y();
  const double cx = c.x() - a.x(), cy = c.y() - a.y();
  const double det = bx * cy - by * cx;
  return certified_sign(det, std::abs(bx * cy) + std::abs(by * cx));
}

int orient(const Point<3>& a, const Point<3>& b, const Point<3>& c, const Point<3>& d) {
  const double m[3][3] = {{b.x() - a.x(), b.y() - a.y(), b.z() - a.z()},
                          {c.x() - a.x(), c.y() - a.y(), c.z() - a.z()},
                          {d.x() - a.x(), d.y() - a.y(), d.z() - a.z()}};
  double perm = 0.0;
  const double det = det3(m, perm);
  return certified_sign(det, perm);
}

// +1 when e is strictly inside the circumcircle of the positively oriented
// triangle abc.
int in_sphere(const Point<2>& a, const Point<2>& b, const Point<2>& c, const Point<2>& e) {
  const Point<2> pa = a - e, pb = b - e, pc = c - e;
  const double m[3][3] = {{pa.x(), pa.y(), pa.squaredNorm()},
                          {pb.x(), pb.y(), pb.squaredNorm()},
                          {pc.x(), pc.y(), pc.squaredNorm()}};
  double perm = 0.0;
  const double det = det3(m, perm);
  return certified_sign(det, perm);
}

// +1 when e is strictly inside the circumsphere of the positively oriented
// tetrahedron abcd.
int in_sphere(const Point<3>& a, const Point<3>& b, const Point<3>& c, const Point<3>& d,
              const Point<3>& e) {
  const Point<3> r[4] = {a - e, b - e, c - e, d - e};
  double lift[4];
  for (int k = 0; k < 4; ++k) lift[k] = r[k].squaredNorm();
  // Expand along the lifted column.
  double det = 0.0, perm = 0.0;
  for (int k = 0; k < 4; ++k) {
    double minor[3][3];
    int row = 0;
    for (int j = 0; j < 4; ++j) {
      if (j == k) continue;
      for (int c = 0; c < 3; ++c) minor[row][c] = r[j][c];
      ++row;
    }
    double mperm = 0.0;
    const double mdet = det3(minor, mperm);
    const double sign = (k % 2 == 0) ? -1.0 : 1.0;  // cofactor sign for column 3
    det += sign * lift[k] * mdet;
    perm += lift[k] * mperm;
  }
  return -certified_sign(det, perm);
}

template <int D>
struct Cell {
  std::array<std::uint32_t, D + 1> v{};
  std::array<std::int32_t, D + 1> nb{};
  bool alive = true;
  std::uint32_t stamp = 0;

  int infinite_slot() const {
    for (int k = 0; k <= D; ++k) {
      if (v[k] == kInfinite) return k;
    }
    return -1;
  }
};

template <int D>
class Triangulator {
 public:
  explicit Triangulator(const std::vector<Point<D>>& pts) : pts_(pts) {}

  std::vector<std::array<std::uint32_t, D + 1>> run() {
    const std::vector<std::uint32_t> order = insertion_order();
    std::array<std::uint32_t, D + 1> seed = initial_simplex(order);
    make_initial(seed);
    for (std::uint32_t idx : order) {
      if (std::find(seed.begin(), seed.end(), idx) != seed.end()) continue;
      insert(idx);
    }
    std::vector<std::array<std::uint32_t, D + 1>> out;
    for (const Cell<D>& c : cells_) {
      if (c.alive && c.infinite_slot() < 0) out.push_back(c.v);
    }
    return out;
  }

 private:
  const Point<D>& P(std::uint32_t i) const { return pts_[i]; }

  int orient_cell(const std::array<std::uint32_t, D + 1>& v) const {
    if constexpr (D == 2) {
      return orient(P(v[0]), P(v[1]), P(v[2]));
    } else {
      return orient(P(v[0]), P(v[1]), P(v[2]), P(v[3]));
    }
  }

  bool in_conflict(const Cell<D>& c, std::uint32_t p) const {
    const int inf = c.infinite_slot();
    if (inf < 0) {
      if constexpr (D == 2) {
        return in_sphere(P(c.v[0]), P(c.v[1]), P(c.v[2]), P(p)) > 0;
      } else {
        return in_sphere(P(c.v[0]), P(c.v[1]), P(c.v[2]), P(c.v[3]), P(p)) > 0;
      }
    }
    auto v = c.v;
    v[inf] = p;
    return orient_cell(v) > 0;
  }

  // Morton order keeps consecutive insertions spatially close, which keeps
  // the location walk short. The result does not depend on the order.
  std::vector<std::uint32_t> insertion_order() const {
    const std::size_t n = pts_.size();
    Point<D> lo = pts_[0], hi = pts_[0];
    for (const auto& p : pts_) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Point<D> ext = (hi - lo).cwiseMax(Point<D>::Constant(1e-300));
    std::vector<std::uint64_t> code(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t key = 0;
      std::uint32_t q[D];
      for (int d = 0; d < D; ++d) {
        q[d] = static_cast<std::uint32_t>(std::clamp((pts_[i][d] - lo[d]) / ext[d], 0.0, 1.0) * 1048575.0);
      }
      for (int bit = 19; bit >= 0; --bit) {
        for (int d = 0; d < D; ++d) key = (key << 1) | ((q[d] >> bit) & 1u);
      }
      code[i] = key;
    }
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return code[a] < code[b]; });
    return order;
  }

  std::array<std::uint32_t, D + 1> initial_simplex(const std::vector<std::uint32_t>& order) const {
    std::array<std::uint32_t, D + 1> s{};
    s[0] = order[0];
    auto farthest = [&](auto&& score) {
      std::uint32_t best = order[0];
      double best_score = -1.0;
      for (std::uint32_t i : order) {
        const double sc = score(i);
        if (sc > best_score) {
          best_score = sc;
          best = i;
        }
      }
      return best;
    };
    s[1] = farthest([&](std::uint32_t i) { return (P(i) - P(s[0])).squaredNorm(); });
    const Point<D> dir = (P(s[1]) - P(s[0])).normalized();
    s[2] = farthest([&](std::uint32_t i) {
      const Point<D> r = P(i) - P(s[0]);
      return (r - r.dot(dir) * dir).squaredNorm();
    });
    if constexpr (D == 3) {
      const Point<3> nrm = (P(s[1]) - P(s[0])).cross(P(s[2]) - P(s[0]));
      s[3] = farthest([&](std::uint32_t i) { return std::abs((P(i) - P(s[0])).dot(nrm)); });
    }
    // Throws Uncertain when the chosen simplex is flat.
    if (orient_cell(s) < 0) std::swap(s[0], s[1]);
    return s;
  }

  void make_initial(const std::array<std::uint32_t, D + 1>& s) {
    Cell<D> fin;
    fin.v = s;
    cells_.push_back(fin);
    for (int k = 0; k <= D; ++k) {
      Cell<D> ghost;
      ghost.v = s;
      ghost.v[k] = kInfinite;
      // Flip so that replacing the infinite vertex by an outside point gives a
      // positive orientation.
      const int a = (k == 0) ? 1 : 0;
      const int b = (k == D) ? D - 1 : D;
      std::swap(ghost.v[a], ghost.v[b]);
      cells_.push_back(ghost);
    }
    // Link: the finite cell's face k is shared with ghost k+1 (face opposite
    // the infinite vertex); ghosts link to each other through faces that
    // contain the infinite vertex.
    rebuild_links_bruteforce();
    last_ = 0;
  }

  // Neighbor linking for the handful of initial cells.
  void rebuild_links_bruteforce() {
    for (auto& c : cells_) c.nb.fill(-1);
    for (std::size_t a = 0; a < cells_.size(); ++a) {
      for (int fa = 0; fa <= D; ++fa) {
        const auto ka = face_key(cells_[a], fa);
        for (std::size_t b = 0; b < cells_.size(); ++b) {
          if (a == b) continue;
          for (int fb = 0; fb <= D; ++fb) {
            if (face_key(cells_[b], fb) == ka) cells_[a].nb[fa] = static_cast<std::int32_t>(b);
          }
        }
      }
    }
  }

  static std::array<std::uint32_t, D> face_key(const Cell<D>& c, int k) {
    std::array<std::uint32_t, D> f{};
    int j = 0;
    for (int m = 0; m <= D; ++m) {
      if (m != k) f[j++] = c.v[m];
    }
    std::sort(f.begin(), f.end());
    return f;
  }

  std::int32_t locate(std::uint32_t p) {
    std::int32_t cur = last_;
    if (cur < 0 || !cells_[cur].alive) cur = any_alive();
    const std::size_t max_steps = cells_.size() + 64;
    std::uint32_t rot = p;
    for (std::size_t step = 0; step < max_steps; ++step) {
      const Cell<D>& c = cells_[cur];
      const int inf = c.infinite_slot();
      if (inf >= 0) {
        if (in_conflict(c, p)) return cur;
        cur = c.nb[inf];
        continue;
      }
      std::int32_t next = -1;
      for (int t = 0; t <= D; ++t) {
        const int k = static_cast<int>((rot + t) % (D + 1));
        auto v = c.v;
        v[k] = p;
        bool negative = false;
        try {
          negative = orient_cell(v) < 0;
        } catch (const Uncertain&) {
          negative = false;
        }
        if (negative) {
          next = c.nb[k];
          break;
        }
      }
      ++rot;
      if (next < 0) {
        if (in_conflict(c, p)) return cur;
        break;
      }
      cur = next;
    }
    for (std::size_t k = 0; k < cells_.size(); ++k) {
      if (cells_[k].alive && in_conflict(cells_[k], p)) return static_cast<std::int32_t>(k);
    }
    fail(ErrorCode::kDegenerate, "point location failed");
  }

  std::int32_t any_alive() const {
    for (std::size_t k = cells_.size(); k-- > 0;) {
      if (cells_[k].alive) return static_cast<std::int32_t>(k);
    }
    return -1;
  }

  void insert(std::uint32_t p) {
    const std::int32_t seed = locate(p);
    ++stamp_;
    cavity_.clear();
    boundary_.clear();
    cavity_.push_back(seed);
    cells_[seed].stamp = stamp_;
    for (std::size_t q = 0; q < cavity_.size(); ++q) {
      const std::int32_t ci = cavity_[q];
      for (int k = 0; k <= D; ++k) {
        const std::int32_t ni = cells_[ci].nb[k];
        if (cells_[ni].stamp == stamp_) {
          if (!in_cavity(ni)) boundary_.push_back({ci, k});
          continue;
        }
        if (in_conflict(cells_[ni], p)) {
          cells_[ni].stamp = stamp_;
          cavity_.push_back(ni);
        } else {
          // Mark as tested-outside so it is not re-evaluated.
          cells_[ni].stamp = stamp_;
          outside_.push_back(ni);
          boundary_.push_back({ci, k});
        }
      }
    }
    for (std::int32_t o : outside_) cells_[o].stamp = 0;
    outside_.clear();

    struct PendingFace {
      std::array<std::uint32_t, D - 1> key;
      std::int32_t cell;
      int slot;
    };
    std::vector<PendingFace> pending;
    pending.reserve(boundary_.size() * D);

    for (const auto& [ci, k] : boundary_) {
      Cell<D> nc;
      nc.v = cells_[ci].v;
      nc.v[k] = p;
      nc.nb.fill(-1);
      const std::int32_t outside = cells_[ci].nb[k];
      nc.nb[k] = outside;
      const auto id = static_cast<std::int32_t>(cells_.size());
      for (int m = 0; m <= D; ++m) {
        if (cells_[outside].nb[m] == ci) cells_[outside].nb[m] = id;
      }
      for (int m = 0; m <= D; ++m) {
        if (m == k) continue;
        std::array<std::uint32_t, D - 1> key{};
        int j = 0;
        for (int t = 0; t <= D; ++t) {
          if (t != m && t != k) key[j++] = nc.v[t];
        }
        std::sort(key.begin(), key.end());
        auto it = std::find_if(pending.begin(), pending.end(),
                               [&](const PendingFace& f) { return f.key == key; });
        if (it != pending.end()) {
          nc.nb[m] = it->cell;
          cells_[it->cell].nb[it->slot] = id;
          *it = pending.back();
          pending.pop_back();
        } else {
          pending.push_back({key, id, m});
        }
      }
      cells_.push_back(nc);
    }
    if (!pending.empty()) fail(ErrorCode::kDegenerate, "cavity boundary is not closed");
    for (std::int32_t ci : cavity_) cells_[ci].alive = false;
    last_ = static_cast<std::int32_t>(cells_.size()) - 1;
  }

  bool in_cavity(std::int32_t ci) const {
    return cells_[ci].alive && std::find(cavity_.begin(), cavity_.end(), ci) != cavity_.end();
  }

  const std::vector<Point<D>>& pts_;
  std::vector<Cell<D>> cells_;
  std::vector<std::int32_t> cavity_;
  std::vector<std::int32_t> outside_;
  std::vector<std::pair<std::int32_t, int>> boundary_;
  std::uint32_t stamp_ = 0;
  std::int32_t last_ = -1;
};

// Deterministic per-(index, axis) direction in [-1, 1].
double jitter_direction(std::uint32_t index, int axis) {
  std::uint64_t x = (static_cast<std::uint64_t>(index) << 2) | static_cast<std::uint64_t>(axis);
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  x ^= x >> 31;
  return static_cast<double>(x >> 11) / static_cast<double>(1ull << 52) - 1.0;
}

template <int D>
std::vector<Point<D>> perturbed(const std::vector<Point<D>>& pts, int attempt) {
  if (attempt == 0) return pts;
  const double eps = std::pow(10.0, attempt - 1) * 1e-9;
  std::vector<Point<D>> out = pts;
  for (std::uint32_t i = 0; i < out.size(); ++i) {
    for (int d = 0; d < D; ++d) out[i][d] += eps * i * jitter_direction(i, d);
  }
  return out;
}

template <int D>
std::vector<std::array<std::uint32_t, D + 1>> triangulate_with_retries(
    const std::vector<Point<D>>& pts, int& retries, std::vector<Point<D>>& used) {
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    used = perturbed(pts, attempt);
    try {
      Triangulator<D> tri(used);
      retries = attempt;
      return tri.run();
    } catch (const Uncertain&) {
      continue;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerate) throw;
    }
  }
  fail(ErrorCode::kDegenerate, "Delaunay input remains degenerate after " +
                                   std::to_string(kMaxRetries) + " perturbation retries");
}

}  // namespace

DelaunayResult delaunay_tetrahedralize(const PointCloud& cloud) {
  const std::size_t n = cloud.size();
  if (n < 4) fail(ErrorCode::kInvalidArgument, "Delaunay graph requires at least 4 points");

  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : cloud.positions) mean += p;
  mean /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& p : cloud.positions) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Vec3 ev = eig.eigenvalues();  // ascending
  if (!(ev[2] > 0.0) || ev[1] <= 1e-24 * ev[2]) {
    fail(ErrorCode::kDegenerate, "Delaunay input is collinear or coincident");
  }

  DelaunayResult result;
  if (ev[0] <= 1e-24 * ev[2]) {
    // Coplanar: triangulate in the best-fit plane.
    const Vec3 u = eig.eigenvectors().col(2);
    const Vec3 v = eig.eigenvectors().col(1);
    std::vector<Point<2>> flat(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 r = cloud.positions[i] - mean;
      flat[i] = Point<2>(r.dot(u), r.dot(v));
    }
    std::vector<Point<2>> used;
    const auto tris = triangulate_with_retries<2>(flat, result.perturbation_retries, used);
    result.planar = true;
    for (const auto& t : tris) result.cells.push_back({t[0], t[1], t[2], kInfinite});
    result.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.points[i] = mean + used[i].x() * u + used[i].y() * v;
    return result;
  }

  std::vector<Point<3>> pts(cloud.positions.begin(), cloud.positions.end());
  std::vector<Point<3>> used;
  const auto tets = triangulate_with_retries<3>(pts, result.perturbation_retries, used);
  result.cells.assign(tets.begin(), tets.end());
  result.points.assign(used.begin(), used.end());
  return result;
}

}  // namespace pclv
