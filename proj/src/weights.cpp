#include "pclv/weights.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "pclv/error.hpp"

namespace pclv {

namespace {
constexpr Modality kAllModalities[kModalityCount] = {Modality::kColor, Modality::kDistance,
                                                     Modality::kNormal, Modality::kFpfh};

struct Preset {
  std::string_view name;
  ModalitySet set;
};

const std::array<Preset, 6>& presets() {
  static const std::array<Preset, 6> kPresets = {{
      {"lv", {Modality::kColor}},
      {"lv_d", {Modality::kColor, Modality::kDistance}},
      {"lv_n", {Modality::kColor, Modality::kNormal}},
      {"dn", {Modality::kDistance, Modality::kNormal}},
      {"lv_fpfh", {Modality::kColor, Modality::kFpfh}},
      {"pclv", {Modality::kColor, Modality::kDistance, Modality::kNormal}},
  }};
  return kPresets;
}
}  // namespace

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kColor: return "color";
    case Modality::kDistance: return "distance";
    case Modality::kNormal: return "normal";
    case Modality::kFpfh: return "fpfh";
  }
  return "?";
}

std::optional<Modality> parse_modality(std::string_view s) {
  if (s == "color" || s == "c") return Modality::kColor;
  if (s == "distance" || s == "d") return Modality::kDistance;
  if (s == "normal" || s == "n") return Modality::kNormal;
  if (s == "fpfh") return Modality::kFpfh;
  return std::nullopt;
}

std::size_t ModalitySet::size() const { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<Modality> ModalitySet::members() const {
  std::vector<Modality> out;
  for (Modality m : kAllModalities) {
    if (contains(m)) out.push_back(m);
  }
  return out;
}

std::size_t ModalitySet::slot(Modality m) const {
  const unsigned below = bits_ & ((1u << static_cast<unsigned>(m)) - 1u);
  return static_cast<std::size_t>(std::popcount(below));
}

std::string ModalitySet::to_string() const {
  std::string out;
  for (Modality m : members()) {
    if (!out.empty()) out += ',';
    out += pclv::to_string(m);
  }
  return out;
}

std::optional<ModalitySet> ModalitySet::preset(std::string_view name) {
  for (const Preset& p : presets()) {
    if (p.name == name) return p.set;
  }
  return std::nullopt;
}

std::optional<std::string_view> ModalitySet::preset_name() const {
  for (const Preset& p : presets()) {
    if (p.set == *this) return p.name;
  }
  return std::nullopt;
}

std::optional<ModalitySet> ModalitySet::parse(std::string_view s) {
  if (auto p = preset(s)) return p;
  ModalitySet out;
  while (!s.empty()) {
    const std::size_t comma = s.find(',');
    const std::string_view tok = s.substr(0, comma);
    const auto m = parse_modality(tok);
    if (!m || out.contains(*m)) return std::nullopt;
    out.insert(*m);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

double color_weight(const Vec3& ci, const Vec3& cj) {
  return (ci - cj).norm() / std::sqrt(3.0);
}

double distance_weight(double length, double d_min, double d_max) {
  const double slack = 1e-12 * std::max(1.0, std::abs(d_max));
  if (length < d_min - slack || length > d_max + slack) {
    fail(ErrorCode::kInternal, "edge length " + std::to_string(length) + " outside [d_min, d_max]");
  }
  if (!(d_max > d_min)) return 0.0;
  return std::clamp((length - d_min) / (d_max - d_min), 0.0, 1.0);
}

double normal_weight(const Vec3& ni, const Vec3& nj, bool unsigned_normals) {
  const double dot = std::clamp(ni.dot(nj), -1.0, 1.0);
  return 1.0 - (unsigned_normals ? std::abs(dot) : dot);
}

double fpfh_weight(const Fpfh& hi, const Fpfh& hj) {
  double inter = 0.0;
  for (std::size_t l = 0; l < kFpfhBins; ++l) inter += std::min(hi[l], hj[l]);
  return std::clamp(1.0 - inter, 0.0, 1.0);
}

void validate(const LinearCoefficients& k) {
  if (k.color < 0.0 || k.distance < 0.0 || k.normal < 0.0) {
    fail(ErrorCode::kInvalidArgument, "linear coefficients must be nonnegative");
  }
  if (!(k.color > 0.0 || k.distance > 0.0 || k.normal > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "at least one linear coefficient must be positive");
  }
}

double combine_linear(double w_c, double w_d, double w_n, const LinearCoefficients& k) {
  validate(k);
  return k.color * w_c + k.distance * w_d + k.normal * w_n;
}

WeightedGraph assign_weights(const ConnectivityGraph& graph, const PointCloud& cloud,
                             const ModalitySet& modalities, bool unsigned_normals) {
  if (modalities.empty()) fail(ErrorCode::kInvalidArgument, "modality set is empty");
  if (graph.n_vertices != cloud.size()) {
    fail(ErrorCode::kPrecondition, "graph and cloud sizes differ");
  }
  if (modalities.contains(Modality::kNormal) && !cloud.normals) {
    fail(ErrorCode::kPrecondition, "normal modality requires normals on the cloud");
  }
  if (modalities.contains(Modality::kFpfh) && !cloud.fpfh) {
    fail(ErrorCode::kPrecondition, "fpfh modality requires FPFH descriptors on the cloud");
  }

  WeightedGraph wg;
  wg.graph = graph;
  wg.modalities = modalities;
  wg.unsigned_normals = unsigned_normals;
  const std::size_t m = graph.edges.size();

  wg.lengths.resize(m);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t e = 0; e < m; ++e) {
    const Edge& ed = graph.edges[e];
    const double len = (cloud.positions[ed.i] - cloud.positions[ed.j]).norm();
    wg.lengths[e] = len;
    lo = std::min(lo, len);
    hi = std::max(hi, len);
  }
  wg.d_min = m > 0 ? lo : 0.0;
  wg.d_max = m > 0 ? hi : 0.0;

  const std::vector<Modality> order = modalities.members();
  const std::size_t w = order.size();
  wg.weights.resize(m * w);
  for (std::size_t e = 0; e < m; ++e) {
    const Edge& ed = graph.edges[e];
    double* out = wg.weights.data() + e * w;
    for (std::size_t s = 0; s < w; ++s) {
      switch (order[s]) {
        case Modality::kColor:
          out[s] = color_weight(cloud.colors[ed.i], cloud.colors[ed.j]);
          break;
        case Modality::kDistance:
          out[s] = distance_weight(wg.lengths[e], wg.d_min, wg.d_max);
          break;
        case Modality::kNormal:
          out[s] = normal_weight((*cloud.normals)[ed.i], (*cloud.normals)[ed.j], unsigned_normals);
          break;
        case Modality::kFpfh:
          out[s] = fpfh_weight((*cloud.fpfh)[ed.i], (*cloud.fpfh)[ed.j]);
          break;
      }
    }
  }
  return wg;
}

void check_invariants(const WeightedGraph& wg) {
  if (wg.weights.size() != wg.num_edges() * wg.width()) {
    fail(ErrorCode::kInternal, "weight table does not match edge count");
  }
  if (wg.d_min > wg.d_max) fail(ErrorCode::kInternal, "d_min exceeds d_max");
  const std::vector<Modality> order = wg.modalities.members();
  for (std::size_t e = 0; e < wg.num_edges(); ++e) {
    for (std::size_t s = 0; s < order.size(); ++s) {
      const double v = wg.weight(e, s);
      const double upper = order[s] == Modality::kNormal ? 2.0 : 1.0;
      if (!std::isfinite(v) || v < 0.0 || v > upper) {
        fail(ErrorCode::kInternal, std::string(to_string(order[s])) + " weight " + std::to_string(v) +
                                       " out of range on edge " + std::to_string(e));
      }
    }
  }
}

void write_weights_csv(const WeightedGraph& wg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << "i,j,len,w_c,w_d,w_n,w_fpfh\n" << std::setprecision(17);
  for (std::size_t e = 0; e < wg.num_edges(); ++e) {
    const Edge& ed = wg.graph.edges[e];
    out << ed.i << ',' << ed.j << ',' << wg.lengths[e];
    for (Modality m : kAllModalities) {
      out << ',';
      if (wg.modalities.contains(m)) out << wg.weight(e, m);
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace pclv
