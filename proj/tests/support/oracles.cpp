#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <unistd.h>

namespace oracle {

EdgeSet edge_set(const pclv::ConnectivityGraph& g) {
  EdgeSet out;
  for (const auto& e : g.edges) out.insert({e.i, e.j});
  return out;
}

EdgeSet brute_knn(const std::vector<pclv::Vec3>& pts, std::size_t k) {
  EdgeSet out;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) all.push_back({(pts[i] - pts[j]).squaredNorm(), static_cast<std::uint32_t>(j)});
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < std::min(k, all.size()); ++r) {
      const auto a = static_cast<std::uint32_t>(i), b = all[r].second;
      out.insert({std::min(a, b), std::max(a, b)});
    }
  }
  return out;
}

EdgeSet brute_radius(const std::vector<pclv::Vec3>& pts, double r) {
  EdgeSet out;
  for (std::uint32_t i = 0; i < pts.size(); ++i) {
    for (std::uint32_t j = i + 1; j < pts.size(); ++j) {
      if ((pts[i] - pts[j]).norm() < r) out.insert({i, j});
    }
  }
  return out;
}

EdgeSet brute_grid8(const pclv::GridMapping& m) {
  EdgeSet out;
  for (std::size_t r1 = 0; r1 < m.height; ++r1) {
    for (std::size_t c1 = 0; c1 < m.width; ++c1) {
      for (std::size_t r2 = 0; r2 < m.height; ++r2) {
        for (std::size_t c2 = 0; c2 < m.width; ++c2) {
          const long dr = static_cast<long>(r1) - static_cast<long>(r2);
          const long dc = static_cast<long>(c1) - static_cast<long>(c2);
          if ((dr == 0 && dc == 0) || std::abs(dr) > 1 || std::abs(dc) > 1) continue;
          const auto a = m.point_at(r1, c1), b = m.point_at(r2, c2);
          if (a < 0 || b < 0) continue;
          out.insert({static_cast<std::uint32_t>(std::min(a, b)), static_cast<std::uint32_t>(std::max(a, b))});
        }
      }
    }
  }
  return out;
}

bool same_partition(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  if (a.size() != b.size()) return false;
  std::map<std::uint32_t, std::uint32_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto [it1, new1] = ab.emplace(a[i], b[i]);
    const auto [it2, new2] = ba.emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

double mst_max(const std::vector<std::uint32_t>& members, const std::vector<WEdge>& edges) {
  if (members.size() <= 1) return 0.0;
  std::map<std::uint32_t, std::size_t> local;
  for (std::size_t k = 0; k < members.size(); ++k) local[members[k]] = k;
  const std::size_t m = members.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> w(m, std::vector<double>(m, inf));
  for (const WEdge& e : edges) {
    const auto a = local.find(e.i), b = local.find(e.j);
    if (a == local.end() || b == local.end()) continue;
    w[a->second][b->second] = std::min(w[a->second][b->second], e.w);
    w[b->second][a->second] = w[a->second][b->second];
  }
  std::vector<bool> in(m, false);
  std::vector<double> best(m, inf);
  best[0] = 0.0;
  double mx = 0.0;
  for (std::size_t step = 0; step < m; ++step) {
    std::size_t u = m;
    for (std::size_t v = 0; v < m; ++v) {
      if (!in[v] && (u == m || best[v] < best[u])) u = v;
    }
    if (best[u] == inf) return -1.0;
    in[u] = true;
    mx = std::max(mx, best[u]);
    for (std::size_t v = 0; v < m; ++v) {
      if (!in[v]) best[v] = std::min(best[v], w[u][v]);
    }
  }
  return mx;
}

std::vector<std::uint32_t> reference_lv(std::size_t n, const std::vector<WEdge>& edges, double delta) {
  std::vector<std::uint32_t> comp(n);
  std::iota(comp.begin(), comp.end(), 0u);
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return edges[a].w < edges[b].w; });
  auto members_of = [&](std::uint32_t c) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t v = 0; v < n; ++v) {
      if (comp[v] == c) out.push_back(v);
    }
    return out;
  };
  // Internal variation recomputed from scratch after every merge.
  std::vector<double> internal(n, 0.0);
  for (std::size_t idx : order) {
    const WEdge& e = edges[idx];
    const std::uint32_t a = comp[e.i], b = comp[e.j];
    if (a == b) continue;
    const auto ma = members_of(a), mb = members_of(b);
    const double ta = internal[a] + delta / static_cast<double>(ma.size());
    const double tb = internal[b] + delta / static_cast<double>(mb.size());
    if (e.w <= std::min(ta, tb)) {
      for (std::uint32_t v : mb) comp[v] = a;
      // Only edges processed so far may join the component; restricting to
      // them keeps this the MST of the grown component.
      std::vector<WEdge> seen;
      for (std::size_t k : order) {
        seen.push_back(edges[k]);
        if (k == idx) break;
      }
      internal[a] = mst_max(members_of(a), seen);
    }
  }
  return comp;
}

std::vector<std::uint8_t> boundary(const std::vector<std::int64_t>& labels, std::size_t w, std::size_t h) {
  std::vector<std::uint8_t> out(w * h, 0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::int64_t v = labels[r * w + c];
      if (v < 0) continue;
      const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const long rr = static_cast<long>(r) + dr[k], cc = static_cast<long>(c) + dc[k];
        if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
        const std::int64_t u = labels[static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)];
        if (u >= 0 && u != v) out[r * w + c] = 1;
      }
    }
  }
  return out;
}

double brute_boundary_recall(const std::vector<std::int64_t>& gt, const std::vector<std::int64_t>& pred,
                             std::size_t w, std::size_t h, double d) {
  const auto gb = boundary(gt, w, h), pb = boundary(pred, w, h);
  std::size_t tp = 0, fn = 0;
  for (std::size_t a = 0; a < w * h; ++a) {
    if (!gb[a]) continue;
    bool hit = false;
    for (std::size_t b = 0; b < w * h && !hit; ++b) {
      if (!pb[b]) continue;
      const double dr = static_cast<double>(a / w) - static_cast<double>(b / w);
      const double dc = static_cast<double>(a % w) - static_cast<double>(b % w);
      hit = std::sqrt(dr * dr + dc * dc) <= d;
    }
    ++(hit ? tp : fn);
  }
  return tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

std::pair<double, std::size_t> brute_under_segmentation(const std::vector<std::int64_t>& gt,
                                                        const std::vector<std::int64_t>& pred) {
  std::set<std::int64_t> gs, ps;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    if (gt[k] >= 0 && pred[k] >= 0) {
      gs.insert(gt[k]);
      ps.insert(pred[k]);
    }
  }
  double total = 0.0;
  for (std::int64_t s : gs) {
    for (std::int64_t p : ps) {
      std::size_t in = 0, out = 0;
      for (std::size_t k = 0; k < gt.size(); ++k) {
        if (gt[k] < 0 || pred[k] != p) continue;
        ++(gt[k] == s ? in : out);
      }
      if (in > 0) total += static_cast<double>(std::min(in, out));
    }
  }
  return {gs.empty() ? 0.0 : total / static_cast<double>(gs.size()), gs.size()};
}

void jacobi_eigen(const double in[3][3], double values[3], double vectors[3][3]) {
  double a[3][3], v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a[i][j] = in[i][j];
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if (off < 1e-300) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  int idx[3] = {0, 1, 2};
  std::sort(idx, idx + 3, [&](int x, int y) { return a[x][x] < a[y][y]; });
  for (int c = 0; c < 3; ++c) {
    values[c] = a[idx[c]][idx[c]];
    for (int r = 0; r < 3; ++r) vectors[r][c] = v[r][idx[c]];
  }
}

pclv::LabelImage to_label_image(const std::vector<std::int64_t>& v, std::size_t w, std::size_t h) {
  pclv::LabelImage img(w, h);
  for (std::size_t k = 0; k < v.size(); ++k) img.data[k] = v[k] < 0 ? pclv::LabelImage::kUnlabeled : v[k];
  return img;
}

std::vector<pclv::Vec3> random_points(std::mt19937_64& rng, std::size_t n, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<pclv::Vec3> out(n);
  for (auto& p : out) p = pclv::Vec3(u(rng), u(rng), u(rng));
  return out;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("pclv_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

pclv::PointCloud cloud_of(const std::vector<pclv::Vec3>& pts) {
  pclv::PointCloud c;
  c.positions = pts;
  c.colors.assign(pts.size(), pclv::Vec3(0.5, 0.5, 0.5));
  return c;
}

pclv::Vec3 circumcenter(const pclv::Vec3& p0, const pclv::Vec3& p1, const pclv::Vec3& p2, const pclv::Vec3& p3) {
  const pclv::Vec3 a = p1 - p0, b = p2 - p0, c = p3 - p0;
  const double d = 2.0 * a.dot(b.cross(c));
  return p0 + (a.squaredNorm() * b.cross(c) + b.squaredNorm() * c.cross(a) + c.squaredNorm() * a.cross(b)) / d;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized().toRotationMatrix();
}

double angle_between(const pclv::Vec3& a, const pclv::Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

}  // namespace oracle
