#pragma once

// Agglomerative clustering over a condensed distance matrix with
// Lance-Williams updates and a per-cluster nearest-neighbour cache.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "fixscope/distance.hpp"
#include "fixscope/error.hpp"

namespace fixscope {

enum class Linkage { Single, Complete, Average };

inline std::string_view to_string(Linkage l) {
  switch (l) {
    case Linkage::Single: return "single";
    case Linkage::Complete: return "complete";
    case Linkage::Average: return "average";
  }
  return "?";
}

inline Linkage parse_linkage(std::string_view s) {
  for (auto l : {Linkage::Single, Linkage::Complete, Linkage::Average})
    if (s == to_string(l)) return l;
  throw ConfigError("unknown linkage '" + std::string(s) + "'");
}

/// Upper triangle of a symmetric matrix with zero diagonal, row by row.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), values_(n < 2 ? 0 : n * (n - 1) / 2, 0.0) {}

  std::size_t size() const { return n_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    return values_[index(i, j)];
  }
  void set(std::size_t i, std::size_t j, double d) {
    if (i == j) return;
    if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("distance " + std::to_string(d) + " outside [0, 1]");
    values_[index(i, j)] = d;
  }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * n_ - i * (i + 1) / 2 + (j - i - 1);
  }

  std::size_t n_ = 0;
  std::vector<double> values_;
};

inline DistanceMatrix distance_matrix(std::span<const ScriptFeatures> features, const ScriptMetric& metric) {
  DistanceMatrix m(features.size());
  for (std::size_t i = 0; i < features.size(); ++i)
    for (std::size_t j = i + 1; j < features.size(); ++j) m.set(i, j, metric.distance(features[i], features[j]));
  return m;
}

inline DistanceMatrix distance_matrix(std::span<const EditScript> scripts, const ScriptMetric& metric) {
  std::vector<ScriptFeatures> f;
  f.reserve(scripts.size());
  for (const auto& s : scripts) f.push_back(metric.features(s));
  return distance_matrix(f, metric);
}

struct Merge {
  int a = 0;  // smaller cluster id
  int b = 0;
  double distance = 0.0;
  int id = 0;  // new cluster id: n_leaves, n_leaves + 1, ...

  friend bool operator==(const Merge&, const Merge&) = default;
};

struct Dendrogram {
  std::size_t n_leaves = 0;
  std::vector<Merge> merges;
};

struct Cluster {
  int cluster_id = 0;
  std::vector<int> members;  // item indices, ascending
  std::optional<std::string> label;
  int medoid = 0;

  friend bool operator==(const Cluster&, const Cluster&) = default;
};

/// Merges while the closest pair is within `cut`; ties go to the pair with
/// the smallest cluster id, then the smallest second id.
inline Dendrogram agglomerate(const DistanceMatrix& m, Linkage linkage,
                              double cut = std::numeric_limits<double>::infinity()) {
  const std::size_t n = m.size();
  Dendrogram out;
  out.n_leaves = n;
  if (n < 2) return out;

  // Slot s holds the cluster with id ids[s]; a merge reuses the lower slot.
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i][j] = m(i, j);
  std::vector<int> ids(n), sizes(n, 1);
  std::vector<char> active(n, 1);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);

  auto key = [&](std::size_t i, std::size_t j) {
    return std::make_tuple(d[i][j], std::min(ids[i], ids[j]), std::max(ids[i], ids[j]));
  };
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> nn(n, none);
  auto refresh = [&](std::size_t i) {
    nn[i] = none;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && active[j] && (nn[i] == none || key(i, j) < key(i, nn[i]))) nn[i] = j;
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  int next_id = static_cast<int>(n);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t best = none;
    for (std::size_t i = 0; i < n; ++i)
      if (active[i] && nn[i] != none && (best == none || key(i, nn[i]) < key(best, nn[best]))) best = i;
    const std::size_t i = best, j = nn[best];
    if (d[i][j] > cut) break;
    out.merges.push_back({std::min(ids[i], ids[j]), std::max(ids[i], ids[j]), d[i][j], next_id});

    const std::size_t keep = std::min(i, j), gone = std::max(i, j);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == i || k == j) continue;
      double v = 0;
      switch (linkage) {
        case Linkage::Single: v = std::min(d[i][k], d[j][k]); break;
        case Linkage::Complete: v = std::max(d[i][k], d[j][k]); break;
        case Linkage::Average:
          v = (sizes[i] * d[i][k] + sizes[j] * d[j][k]) / static_cast<double>(sizes[i] + sizes[j]);
          break;
      }
      d[keep][k] = d[k][keep] = v;
    }
    sizes[keep] = sizes[i] + sizes[j];
    ids[keep] = next_id++;
    active[gone] = 0;

    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k]) continue;
      if (k == keep || nn[k] == i || nn[k] == j || nn[k] == none) {
        refresh(k);
      } else if (key(k, keep) < key(k, nn[k])) {
        nn[k] = keep;
      }
    }
  }
  return out;
}

/// Active clusters after replaying the dendrogram, ordered by smallest member.
inline std::vector<Cluster> clusters_from(const Dendrogram& dg) {
  std::vector<std::vector<int>> members(dg.n_leaves + dg.merges.size());
  std::vector<char> alive(members.size(), 0);
  for (std::size_t i = 0; i < dg.n_leaves; ++i) {
    members[i] = {static_cast<int>(i)};
    alive[i] = 1;
  }
  for (const Merge& mg : dg.merges) {
    auto& dst = members[static_cast<std::size_t>(mg.id)];
    for (int src : {mg.a, mg.b}) {
      auto& s = members[static_cast<std::size_t>(src)];
      dst.insert(dst.end(), s.begin(), s.end());
      s.clear();
      alive[static_cast<std::size_t>(src)] = 0;
    }
    std::sort(dst.begin(), dst.end());
    alive[static_cast<std::size_t>(mg.id)] = 1;
  }
  std::vector<Cluster> out;
  for (std::size_t c = 0; c < members.size(); ++c)
    if (alive[c]) out.push_back({static_cast<int>(c), std::move(members[c]), std::nullopt, 0});
  std::sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) { return a.members[0] < b.members[0]; });
  return out;
}

/// Member minimising the summed distance to the others; sums within 1e-12
/// count as tied and go to the smaller id.
inline int compute_medoid(const Cluster& c, const DistanceMatrix& m) {
  int best = c.members.front();
  double best_sum = std::numeric_limits<double>::infinity();
  for (int a : c.members) {
    double s = 0;
    for (int b : c.members) s += m(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    if (s < best_sum - 1e-12) {
      best = a;
      best_sum = s;
    }
  }
  return best;
}

inline std::vector<Cluster> hac(const DistanceMatrix& m, Linkage linkage, double cut) {
  if (!(cut >= 0.0 && cut <= 1.0)) throw ConfigError("cut threshold must lie in [0, 1]");
  std::vector<Cluster> out = clusters_from(agglomerate(m, linkage, cut));
  for (auto& c : out) c.medoid = compute_medoid(c, m);
  return out;
}

struct FilterResult {
  std::vector<Cluster> kept;
  std::vector<int> unclustered;  // ascending
};

inline FilterResult filter_clusters(std::vector<Cluster> clusters, int min_size) {
  if (min_size < 1) throw ConfigError("min cluster size must be at least 1");
  FilterResult r;
  for (auto& c : clusters) {
    if (static_cast<int>(c.members.size()) >= min_size)
      r.kept.push_back(std::move(c));
    else
      r.unclustered.insert(r.unclustered.end(), c.members.begin(), c.members.end());
  }
  std::sort(r.unclustered.begin(), r.unclustered.end());
  return r;
}

}  // namespace fixscope
