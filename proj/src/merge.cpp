#include "pclv/merge.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "pclv/error.hpp"

namespace pclv {

std::string_view to_string(MergeMode m) {
  return m == MergeMode::kMultiCriteria ? "multi" : "linear";
}

std::optional<MergeMode> parse_merge_mode(std::string_view s) {
  if (s == "multi" || s == "multi_criteria") return MergeMode::kMultiCriteria;
  if (s == "linear" || s == "linear_scalar") return MergeMode::kLinearScalar;
  return std::nullopt;
}

Modality default_sort_modality(const ModalitySet& modalities) {
  if (modalities.contains(Modality::kColor)) return Modality::kColor;
  const auto members = modalities.members();
  if (members.empty()) fail(ErrorCode::kInvalidArgument, "modality set is empty");
  return members.front();
}

void validate(const MergeConfig& cfg) {
  if (cfg.modalities.empty()) fail(ErrorCode::kInvalidArgument, "modality set is empty");
  if (!(cfg.delta >= 0.0) || !std::isfinite(cfg.delta)) {
    fail(ErrorCode::kInvalidArgument, "delta must be a finite nonnegative number");
  }
  if (cfg.sort_modality && !cfg.modalities.contains(*cfg.sort_modality)) {
    fail(ErrorCode::kInvalidArgument, "sort modality '" + std::string(to_string(*cfg.sort_modality)) +
                                          "' is not in the modality set");
  }
  if (cfg.mode == MergeMode::kLinearScalar) {
    if (cfg.modalities.contains(Modality::kFpfh)) {
      fail(ErrorCode::kInvalidArgument, "linear mode combines color, distance and normal only");
    }
    validate(cfg.coefficients);
  }
}

Modality resolve_sort_modality(const MergeConfig& cfg) {
  validate(cfg);
  return cfg.sort_modality.value_or(default_sort_modality(cfg.modalities));
}

MergeState::MergeState(std::size_t n, std::size_t criteria)
    : parent_(n), rank_(n, 0), size_(n, 1), internal_(n * criteria, 0.0), criteria_(criteria),
      components_(n) {
  std::iota(parent_.begin(), parent_.end(), 0u);
}

std::uint32_t MergeState::find(std::uint32_t x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

std::uint32_t MergeState::unite(std::uint32_t a, std::uint32_t b, std::span<const double> edge_values) {
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
  size_[a] += size_[b];
  double* ia = internal_.data() + static_cast<std::size_t>(a) * criteria_;
  const double* ib = internal_.data() + static_cast<std::size_t>(b) * criteria_;
  for (std::size_t s = 0; s < criteria_; ++s) ia[s] = std::max({ia[s], ib[s], edge_values[s]});
  --components_;
  return a;
}

Segmenter::Segmenter(const WeightedGraph& wg, const MergeConfig& cfg) : wg_(wg), cfg_(cfg) {
  const Modality sort_by = resolve_sort_modality(cfg);
  for (Modality m : cfg.modalities.members()) {
    if (!wg.modalities.contains(m)) {
      fail(ErrorCode::kPrecondition, "weighted graph lacks the '" + std::string(to_string(m)) + "' modality");
    }
  }
  const std::size_t m = wg.num_edges();
  const std::vector<Modality> members = cfg.modalities.members();
  keys_.resize(m);
  if (cfg.mode == MergeMode::kLinearScalar) {
    criteria_ = 1;
    values_.resize(m);
    const std::size_t width = wg.width();
    auto slot_of = [&](Modality mod) {
      return cfg.modalities.contains(mod) ? static_cast<std::ptrdiff_t>(wg.modalities.slot(mod)) : -1;
    };
    const std::ptrdiff_t sc = slot_of(Modality::kColor), sd = slot_of(Modality::kDistance),
                         sn = slot_of(Modality::kNormal);
    for (std::size_t e = 0; e < m; ++e) {
      const double* w = wg.weights.data() + e * width;
      values_[e] = combine_linear(sc < 0 ? 0.0 : w[sc], sd < 0 ? 0.0 : w[sd], sn < 0 ? 0.0 : w[sn],
                                  cfg.coefficients);
      keys_[e] = values_[e];
    }
  } else {
    criteria_ = members.size();
    values_.resize(m * criteria_);
    const std::size_t width = wg.width();
    std::vector<std::size_t> slots;
    for (Modality mod : members) slots.push_back(wg.modalities.slot(mod));
    const std::size_t sort_slot = wg.modalities.slot(sort_by);
    for (std::size_t e = 0; e < m; ++e) {
      const double* w = wg.weights.data() + e * width;
      for (std::size_t s = 0; s < criteria_; ++s) values_[e * criteria_ + s] = w[slots[s]];
      keys_[e] = w[sort_slot];
    }
  }
  max_value_ = values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
  std::vector<std::pair<double, std::uint32_t>> keyed(m);
  for (std::size_t e = 0; e < m; ++e) keyed[e] = {keys_[e], static_cast<std::uint32_t>(e)};
  std::sort(keyed.begin(), keyed.end());
  order_.resize(m);
  for (std::size_t r = 0; r < m; ++r) order_[r] = keyed[r].second;
  sorted_edges_.resize(m);
  sorted_values_.resize(m * criteria_);
  for (std::size_t r = 0; r < m; ++r) {
    const std::uint32_t e = order_[r];
    sorted_edges_[r] = wg.graph.edges[e];
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(e * criteria_), criteria_,
                sorted_values_.begin() + static_cast<std::ptrdiff_t>(r * criteria_));
  }
}


namespace {

// Union-find node with size and per-criterion internal variation side by
// side; edges arrive in weight order, so vertex access is random and one
// cache line per component matters.
template <std::size_t C>
struct Node {
  std::uint32_t parent;
  std::uint32_t size;
  std::array<double, C> internal;
};

template <std::size_t C>
void merge_pass(const std::vector<Edge>& edges, const std::vector<double>& values, double delta,
                Segmentation& seg) {
  const std::size_t n = seg.labels.size();
  std::vector<Node<C>> nodes(n);
  for (std::uint32_t i = 0; i < n; ++i) nodes[i] = {i, 1, {}};
  auto find = [&](std::uint32_t x) {
    while (nodes[x].parent != x) {
      nodes[x].parent = nodes[nodes[x].parent].parent;
      x = nodes[x].parent;
    }
    return x;
  };
  for (std::size_t r = 0; r < edges.size(); ++r) {
    std::uint32_t a = find(edges[r].i);
    std::uint32_t b = find(edges[r].j);
    if (a == b) continue;
    Node<C>& na = nodes[a];
    Node<C>& nb = nodes[b];
    const double ta = delta / static_cast<double>(na.size);
    const double tb = delta / static_cast<double>(nb.size);
    const double* w = values.data() + r * C;
    bool merge = true;
    for (std::size_t s = 0; s < C && merge; ++s) {
      merge = w[s] <= std::min(na.internal[s] + ta, nb.internal[s] + tb);
    }
    if (!merge) continue;
    if (na.size < nb.size) std::swap(a, b);
    Node<C>& into = nodes[a];
    Node<C>& from = nodes[b];
    from.parent = a;
    into.size += from.size;
    for (std::size_t s = 0; s < C; ++s) into.internal[s] = std::max({into.internal[s], from.internal[s], w[s]});
  }
  std::vector<std::int64_t> root_label(n, -1);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t r = find(i);
    if (root_label[r] < 0) {
      root_label[r] = static_cast<std::int64_t>(seg.sizes.size());
      seg.sizes.push_back(nodes[r].size);
      seg.internal.insert(seg.internal.end(), nodes[r].internal.begin(), nodes[r].internal.end());
    }
    seg.labels[i] = static_cast<std::uint32_t>(root_label[r]);
  }
}

}  // namespace

Segmentation Segmenter::run(double delta) const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    fail(ErrorCode::kInvalidArgument, "delta must be a finite nonnegative number");
  }
  Segmentation seg;
  seg.criteria = criteria_;
  seg.config = cfg_;
  seg.config.delta = delta;
  seg.graph = wg_.graph.method;
  seg.labels.resize(wg_.graph.n_vertices);
  switch (criteria_) {
    case 1: merge_pass<1>(sorted_edges_, sorted_values_, delta, seg); break;
    case 2: merge_pass<2>(sorted_edges_, sorted_values_, delta, seg); break;
    case 3: merge_pass<3>(sorted_edges_, sorted_values_, delta, seg); break;
    case 4: merge_pass<4>(sorted_edges_, sorted_values_, delta, seg); break;
    default: fail(ErrorCode::kInternal, "unsupported criterion count");
  }
  return seg;
}

Segmentation segment(const WeightedGraph& wg, const MergeConfig& cfg) {
  return Segmenter(wg, cfg).run(cfg.delta);
}

Segmentation merge_small_segments(const Segmentation& seg, const Segmenter& segmenter,
                                  std::size_t desired_segments) {
  if (desired_segments < 1) fail(ErrorCode::kInvalidArgument, "desired segment count must be >= 1");
  const WeightedGraph& wg = segmenter.graph();
  if (seg.num_points() != wg.graph.n_vertices) {
    fail(ErrorCode::kPrecondition, "segmentation and graph sizes differ");
  }
  const double threshold =
      0.1 * static_cast<double>(seg.num_points()) / static_cast<double>(desired_segments);
  const std::size_t k = seg.num_segments();
  const std::size_t width = seg.criteria;

  std::vector<std::uint32_t> parent(k);
  std::iota(parent.begin(), parent.end(), 0u);
  std::vector<std::size_t> size = seg.sizes;
  std::vector<double> internal = seg.internal;
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto is_small = [&](std::uint32_t s) { return static_cast<double>(size[s]) < threshold; };

  // Boundary edge lists, kept only for segments that are (and so always
  // were) below the threshold. Each entry carries the two original segment
  // labels of its edge.
  struct Side {
    std::uint32_t edge, a, b;
  };
  const auto& edges = wg.graph.edges;
  bool any_small = false;
  for (std::uint32_t s = 0; s < k; ++s) any_small = any_small || is_small(s);
  if (!any_small) return seg;
  std::vector<std::uint32_t> degree(k, 0);
  for (const Edge& e : edges) {
    const std::uint32_t a = seg.labels[e.i];
    const std::uint32_t b = seg.labels[e.j];
    if (a == b) continue;
    if (is_small(a)) ++degree[a];
    if (is_small(b)) ++degree[b];
  }
  std::vector<std::vector<Side>> boundary(k);
  for (std::uint32_t s = 0; s < k; ++s) boundary[s].reserve(degree[s]);
  for (std::uint32_t e = 0; e < edges.size(); ++e) {
    const std::uint32_t a = seg.labels[edges[e].i];
    const std::uint32_t b = seg.labels[edges[e].j];
    if (a == b) continue;
    if (is_small(a)) boundary[a].push_back({e, a, b});
    if (is_small(b)) boundary[b].push_back({e, a, b});
  }

  using Entry = std::pair<std::size_t, std::uint32_t>;  // (size, label)
  std::vector<Entry> initial;
  for (std::uint32_t s = 0; s < k; ++s) {
    if (is_small(s)) initial.push_back({size[s], s});
  }
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue(std::greater<>(), std::move(initial));

  const auto& keys = segmenter.sort_keys();
  std::size_t merged = 0;
  while (!queue.empty()) {
    const auto [sz, s] = queue.top();
    queue.pop();
    if (find(s) != s || size[s] != sz) continue;  // stale entry

    std::int64_t best = -1;
    std::uint32_t best_other = 0;
    auto& list = boundary[s];
    std::size_t keep = 0;
    for (const Side& side : list) {
      const std::uint32_t a = find(side.a);
      const std::uint32_t b = find(side.b);
      if (a == b) continue;  // became internal
      list[keep++] = side;
      const std::uint32_t e = side.edge;
      if (best < 0 || keys[e] < keys[best] || (keys[e] == keys[best] && e < best)) {
        best = e;
        best_other = a == s ? b : a;
      }
    }
    list.resize(keep);
    if (best < 0) continue;  // no neighbors left

    const auto vals = segmenter.values(static_cast<std::size_t>(best));
    const std::uint32_t t = best_other;
    parent[s] = t;
    size[t] += size[s];
    for (std::size_t c = 0; c < width && c < vals.size(); ++c) {
      internal[t * width + c] = std::max({internal[t * width + c], internal[s * width + c], vals[c]});
    }
    ++merged;
    if (is_small(t)) {
      auto& into = boundary[t];
      if (into.size() < list.size()) into.swap(list);
      into.insert(into.end(), list.begin(), list.end());
      queue.push({size[t], t});
    }
    std::vector<Side>().swap(list);
  }

  Segmentation out;
  out.criteria = width;
  out.config = seg.config;
  out.graph = seg.graph;
  out.small_segments_merged = seg.small_segments_merged + merged;
  out.labels.resize(seg.num_points());
  std::vector<std::int64_t> relabel(k, -1);
  for (std::size_t i = 0; i < seg.num_points(); ++i) {
    const std::uint32_t r = find(seg.labels[i]);
    if (relabel[r] < 0) {
      relabel[r] = static_cast<std::int64_t>(out.sizes.size());
      out.sizes.push_back(size[r]);
      out.internal.insert(out.internal.end(), internal.begin() + r * width,
                          internal.begin() + (r + 1) * width);
    }
    out.labels[i] = static_cast<std::uint32_t>(relabel[r]);
  }
  return out;
}

Segmentation merge_small_segments(const Segmentation& seg, const WeightedGraph& wg,
                                  std::size_t desired_segments) {
  return merge_small_segments(seg, Segmenter(wg, seg.config), desired_segments);
}

DeltaSearch search_delta(const Segmenter& segmenter, std::size_t target_segments, bool postprocess,
                         int iterations) {
  if (target_segments < 1) fail(ErrorCode::kInvalidArgument, "target segment count must be >= 1");
  const std::size_t n = segmenter.graph().graph.n_vertices;
  auto evaluate = [&](double delta) {
    Segmentation s = segmenter.run(delta);
    if (postprocess) s = merge_small_segments(s, segmenter, target_segments);
    return s;
  };

  // delta/|C| above every criterion value for |C| = n merges every edge;
  // far below every positive value leaves singletons.
  const double floor_delta = std::max(segmenter.max_value(), 1e-12) * 1e-9;
  const double ceil_delta = std::max(segmenter.max_value(), 1e-12) * static_cast<double>(n) * 2.0;

  DeltaSearch best;
  std::size_t best_gap = std::numeric_limits<std::size_t>::max();
  auto consider = [&](double delta, Segmentation&& s, int iter) {
    const std::size_t c = s.num_segments();
    const std::size_t gap = c > target_segments ? c - target_segments : target_segments - c;
    if (gap < best_gap || (gap == best_gap && delta < best.delta)) {
      best_gap = gap;
      best.delta = delta;
      best.segmentation = std::move(s);
      best.iterations = iter;
    }
    return c;
  };

  // Bracket first, stepping a decade at a time from an estimate: a segment
  // of n / target points stops growing once delta / size falls below the
  // typical edge weight. The extreme bounds stay as the last resort.
  const auto& keys = segmenter.sort_keys();
  double typical = 0.0;
  if (!keys.empty()) {
    std::vector<double> sample;
    const std::size_t stride = std::max<std::size_t>(1, keys.size() / 4096);
    for (std::size_t e = 0; e < keys.size(); e += stride) sample.push_back(keys[e]);
    std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(sample.size() / 2), sample.end());
    typical = sample[sample.size() / 2];
  }
  if (!(typical > 0.0)) typical = std::max(segmenter.max_value(), 1e-12) * 1e-3;
  const double guess = std::clamp(typical * static_cast<double>(n) / static_cast<double>(target_segments),
                                  floor_delta, ceil_delta);

  double lo = guess;
  double hi = guess;
  std::size_t c_lo = 0;
  std::size_t c_hi = 0;
  const std::size_t c_guess = consider(guess, evaluate(guess), 0);
  if (c_guess == target_segments) {
    c_lo = c_hi = c_guess;
  } else if (c_guess > target_segments) {
    c_lo = c_guess;
    c_hi = c_guess;
    while (c_hi > target_segments && hi < ceil_delta) {
      lo = hi;
      c_lo = c_hi;
      hi = std::min(hi * 10.0, ceil_delta);
      c_hi = consider(hi, evaluate(hi), 0);
    }
  } else {
    c_hi = c_guess;
    c_lo = c_guess;
    while (c_lo < target_segments && lo > floor_delta) {
      hi = lo;
      c_hi = c_lo;
      lo = std::max(lo / 10.0, floor_delta);
      c_lo = consider(lo, evaluate(lo), 0);
    }
  }
  if (c_lo > target_segments && c_hi < target_segments) {
    for (int it = 1; it <= iterations && best_gap > 0; ++it) {
      const double mid = std::sqrt(lo * hi);
      const std::size_t c = consider(mid, evaluate(mid), it);
      if (c > target_segments) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
  }
  best.within_tolerance =
      static_cast<double>(best_gap) <= kSegmentCountTolerance * static_cast<double>(target_segments);
  return best;
}

void check_connectivity(const Segmentation& seg, const ConnectivityGraph& g) {
  const std::size_t n = seg.num_points();
  if (g.n_vertices != n) fail(ErrorCode::kInternal, "segmentation and graph sizes differ");
  std::vector<std::uint32_t> offsets(n + 1, 0);
  for (const Edge& e : g.edges) {
    if (seg.labels[e.i] == seg.labels[e.j]) {
      ++offsets[e.i + 1];
      ++offsets[e.j + 1];
    }
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<std::uint32_t> adj(offsets.back());
  std::vector<std::uint32_t> fill(offsets.begin(), offsets.end() - 1);
  for (const Edge& e : g.edges) {
    if (seg.labels[e.i] == seg.labels[e.j]) {
      adj[fill[e.i]++] = e.j;
      adj[fill[e.j]++] = e.i;
    }
  }
  std::vector<char> seen_label(seg.num_segments(), 0);
  std::vector<char> visited(n, 0);
  std::vector<std::uint32_t> stack;
  for (std::uint32_t start = 0; start < n; ++start) {
    if (visited[start]) continue;
    const std::uint32_t label = seg.labels[start];
    if (seen_label[label]) {
      fail(ErrorCode::kInternal, "segment " + std::to_string(label) + " is not connected in the graph");
    }
    seen_label[label] = 1;
    stack.push_back(start);
    visited[start] = 1;
    while (!stack.empty()) {
      const std::uint32_t v = stack.back();
      stack.pop_back();
      for (std::uint32_t k = offsets[v]; k < offsets[v + 1]; ++k) {
        if (!visited[adj[k]]) {
          visited[adj[k]] = 1;
          stack.push_back(adj[k]);
        }
      }
    }
  }
}

}  // namespace pclv
