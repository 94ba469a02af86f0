#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pclv/graph.hpp"
#include "pclv/weights.hpp"

namespace pclv {

enum class MergeMode { kMultiCriteria, kLinearScalar };

std::string_view to_string(MergeMode m);
std::optional<MergeMode> parse_merge_mode(std::string_view s);

struct MergeConfig {
  double delta = 0.0;
  MergeMode mode = MergeMode::kMultiCriteria;
  LinearCoefficients coefficients;  // linear mode only
  ModalitySet modalities;
  // Unset: color when present, otherwise the first member of the set.
  std::optional<Modality> sort_modality;
};

Modality default_sort_modality(const ModalitySet& modalities);
// Validates the config against itself and returns the effective sort
// modality.
Modality resolve_sort_modality(const MergeConfig& cfg);
void validate(const MergeConfig& cfg);

// Union-find over points with per-component size and, per criterion, the
// largest weight among the edges that merged the component (its internal
// variation).
class MergeState {
 public:
  MergeState(std::size_t n, std::size_t criteria);

  std::uint32_t find(std::uint32_t x);
  // Joins two distinct roots through an edge with the given criterion
  // values; returns the surviving root.
  std::uint32_t unite(std::uint32_t a, std::uint32_t b, std::span<const double> edge_values);

  std::size_t size(std::uint32_t root) const { return size_[root]; }
  std::span<const double> internal(std::uint32_t root) const {
    return {internal_.data() + static_cast<std::size_t>(root) * criteria_, criteria_};
  }
  std::size_t criteria() const { return criteria_; }
  std::size_t num_components() const { return components_; }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
  std::vector<std::uint32_t> size_;
  std::vector<double> internal_;
  std::size_t criteria_;
  std::size_t components_;
};

struct Segmentation {
  std::vector<std::uint32_t> labels;  // dense, ordered by first point
  std::vector<std::size_t> sizes;
  // Per segment, per criterion internal variation; row width is criteria.
  std::vector<double> internal;
  std::size_t criteria = 0;
  MergeConfig config;
  GraphMethod graph = GraphMethod::kKnn;
  std::size_t small_segments_merged = 0;

  std::size_t num_segments() const { return sizes.size(); }
  std::size_t num_points() const { return labels.size(); }
  std::span<const double> internal_of(std::size_t label) const {
    return {internal.data() + label * criteria, criteria};
  }
};

// Precomputes the per-edge criterion values and the traversal order for one
// weighted graph, so many thresholds can be evaluated cheaply.
class Segmenter {
 public:
  // cfg.delta is ignored; pass it to run().
  Segmenter(const WeightedGraph& wg, const MergeConfig& cfg);

  Segmentation run(double delta) const;

  const WeightedGraph& graph() const { return wg_; }
  const MergeConfig& config() const { return cfg_; }
  std::size_t criteria() const { return criteria_; }
  // Criterion values of edge e (the tuple, or the combined scalar).
  std::span<const double> values(std::size_t e) const {
    return {values_.data() + e * criteria_, criteria_};
  }
  // Key the edges are sorted by.
  const std::vector<double>& sort_keys() const { return keys_; }
  const std::vector<std::uint32_t>& order() const { return order_; }
  double max_value() const { return max_value_; }

 private:
  const WeightedGraph& wg_;
  MergeConfig cfg_;
  std::size_t criteria_ = 0;
  std::vector<double> values_;
  std::vector<double> keys_;
  std::vector<std::uint32_t> order_;
  std::vector<Edge> sorted_edges_;
  std::vector<double> sorted_values_;
  double max_value_ = 0.0;
};

Segmentation segment(const WeightedGraph& wg, const MergeConfig& cfg);

// Absorbs every segment smaller than 0.1 * n / desired_segments into the
// neighbor across its lowest sort-key boundary edge, smallest segment first.
Segmentation merge_small_segments(const Segmentation& seg, const Segmenter& segmenter,
                                  std::size_t desired_segments);
Segmentation merge_small_segments(const Segmentation& seg, const WeightedGraph& wg,
                                  std::size_t desired_segments);

struct DeltaSearch {
  double delta = 0.0;
  Segmentation segmentation;
  int iterations = 0;
  bool within_tolerance = false;
};

inline constexpr int kDeltaSearchIterations = 20;
inline constexpr double kSegmentCountTolerance = 0.05;

// Bisects log(delta) for an output close to target_segments. The count is
// taken after small-segment post-processing when `postprocess` is set.
DeltaSearch search_delta(const Segmenter& segmenter, std::size_t target_segments, bool postprocess,
                         int iterations = kDeltaSearchIterations);

// Throws Error(kInternal) if any segment is disconnected in the graph.
void check_connectivity(const Segmentation& seg, const ConnectivityGraph& g);

}  // namespace pclv
