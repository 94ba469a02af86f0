#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pclv/cloud.hpp"
#include "pclv/graph.hpp"

namespace pclv {

enum class Modality : std::uint8_t { kColor = 0, kDistance = 1, kNormal = 2, kFpfh = 3 };
inline constexpr std::size_t kModalityCount = 4;

std::string_view to_string(Modality m);
std::optional<Modality> parse_modality(std::string_view s);

// Ordered subset of the modalities. Iteration order is always
// color, distance, normal, fpfh regardless of insertion order.
class ModalitySet {
 public:
  ModalitySet() = default;
  ModalitySet(std::initializer_list<Modality> ms) {
    for (Modality m : ms) insert(m);
  }

  void insert(Modality m) { bits_ |= bit(m); }
  bool contains(Modality m) const { return (bits_ & bit(m)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::size_t size() const;
  std::vector<Modality> members() const;
  // Position of m in the tuple; m must be a member.
  std::size_t slot(Modality m) const;

  // "color,distance,normal"
  std::string to_string() const;
  // Accepts a comma list of modality names or one of the presets
  // lv, lv_d, lv_n, dn, lv_fpfh, pclv.
  static std::optional<ModalitySet> parse(std::string_view s);
  static std::optional<ModalitySet> preset(std::string_view name);
  // Name of the preset this set equals, if any.
  std::optional<std::string_view> preset_name() const;

  friend bool operator==(const ModalitySet&, const ModalitySet&) = default;

 private:
  static std::uint8_t bit(Modality m) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(m)); }
  std::uint8_t bits_ = 0;
};

double color_weight(const Vec3& ci, const Vec3& cj);
// Requires d_min <= length <= d_max (up to rounding); returns 0 when the
// graph has a single edge length.
double distance_weight(double length, double d_min, double d_max);
double normal_weight(const Vec3& ni, const Vec3& nj, bool unsigned_normals);
double fpfh_weight(const Fpfh& hi, const Fpfh& hj);

struct LinearCoefficients {
  double color = 1.0 / 3.0;
  double distance = 1.0 / 3.0;
  double normal = 1.0 / 3.0;
};

// k_c*w_c + k_d*w_d + k_n*w_n. Rejects negative or all-zero coefficients.
double combine_linear(double w_c, double w_d, double w_n, const LinearCoefficients& k);
void validate(const LinearCoefficients& k);

// Connectivity graph plus one weight tuple per edge, laid out row-major:
// weight(e, slot) = weights[e * modalities.size() + slot].
struct WeightedGraph {
  ConnectivityGraph graph;
  ModalitySet modalities;
  bool unsigned_normals = false;
  std::vector<double> weights;
  std::vector<double> lengths;  // raw Euclidean edge lengths, meters
  double d_min = 0.0;
  double d_max = 0.0;

  std::size_t num_edges() const { return graph.edges.size(); }
  std::size_t width() const { return modalities.size(); }
  double weight(std::size_t e, std::size_t slot) const { return weights[e * width() + slot]; }
  double weight(std::size_t e, Modality m) const { return weight(e, modalities.slot(m)); }
  std::span<const double> tuple(std::size_t e) const {
    return {weights.data() + e * width(), width()};
  }
};

// Two passes: edge lengths and their extrema, then the weight tuples.
WeightedGraph assign_weights(const ConnectivityGraph& graph, const PointCloud& cloud,
                             const ModalitySet& modalities, bool unsigned_normals);

// Throws Error(kInternal) when any weight is non-finite or outside its range.
void check_invariants(const WeightedGraph& wg);

// CSV with header i,j,len,w_c,w_d,w_n,w_fpfh; absent modalities left blank.
void write_weights_csv(const WeightedGraph& wg, const std::filesystem::path& path);

}  // namespace pclv
