#pragma once

// GumTree-style node matching: a greedy top-down pass over isomorphic
// subtrees followed by a bottom-up pass that pairs containers by the dice
// similarity of their mapped descendants.
//
// The optimal (tree-edit-distance) recovery of GumTree is
// replaced by an order-preserving alignment of the children of each matched
// pair: bounded by max_recovery_size during the bottom-up pass, then once
// more over every matched pair without a bound.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fixscope/ast.hpp"
#include "fixscope/error.hpp"

namespace fixscope {

struct MatcherParams {
  int min_height = 2;
  double min_dice = 0.5;
  int max_recovery_size = 100;
  // Pair the two roots when they share a type, as GumTree does.
  bool match_roots = true;

  friend bool operator==(const MatcherParams&, const MatcherParams&) = default;
};

/// Injective partial correspondence between the nodes of two trees.
class MappingSet {
 public:
  MappingSet() = default;
  MappingSet(std::size_t src_size, std::size_t dst_size)
      : src_to_dst_(src_size, kNoNode), dst_to_src_(dst_size, kNoNode) {}

  std::size_t src_size() const { return src_to_dst_.size(); }
  std::size_t dst_size() const { return dst_to_src_.size(); }
  std::size_t size() const { return count_; }

  bool src_mapped(NodeId s) const { return src_to_dst_[idx(s)] != kNoNode; }
  bool dst_mapped(NodeId d) const { return dst_to_src_[idx(d)] != kNoNode; }
  NodeId dst_of(NodeId s) const { return src_to_dst_[idx(s)]; }
  NodeId src_of(NodeId d) const { return dst_to_src_[idx(d)]; }
  bool contains(NodeId s, NodeId d) const { return src_mapped(s) && dst_of(s) == d; }

  /// Adds (s, d); throws InvalidMapping if either side is already paired
  /// with a different node.
  void add(NodeId s, NodeId d) {
    if (s < 0 || d < 0 || idx(s) >= src_size() || idx(d) >= dst_size())
      throw InvalidMapping("pair (" + std::to_string(s) + ", " + std::to_string(d) +
                           ") is out of range");
    if (contains(s, d)) return;
    if (src_mapped(s) || dst_mapped(d))
      throw InvalidMapping("pair (" + std::to_string(s) + ", " + std::to_string(d) +
                           ") breaks injectivity");
    src_to_dst_[idx(s)] = d;
    dst_to_src_[idx(d)] = s;
    ++count_;
  }

  /// Pairs sorted by source id.
  std::vector<std::pair<NodeId, NodeId>> pairs() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    out.reserve(count_);
    for (std::size_t s = 0; s < src_to_dst_.size(); ++s)
      if (src_to_dst_[s] != kNoNode) out.emplace_back(static_cast<NodeId>(s), src_to_dst_[s]);
    return out;
  }

  friend bool operator==(const MappingSet&, const MappingSet&) = default;

 private:
  static std::size_t idx(NodeId n) { return static_cast<std::size_t>(n); }

  std::vector<NodeId> src_to_dst_;
  std::vector<NodeId> dst_to_src_;
  std::size_t count_ = 0;
};

/// 2 * |descendants of a mapped into descendants of b| / (|desc(a)| + |desc(b)|).
inline double dice(const AstTree& src, NodeId a, const AstTree& dst, NodeId b,
                   const MappingSet& m) {
  if (a == kNoNode || b == kNoNode) return 0.0;
  const int da = src.subtree_size(a) - 1;
  const int db = dst.subtree_size(b) - 1;
  if (da + db == 0) return 0.0;
  int common = 0;
  for (NodeId d = a + 1; d < a + 1 + da; ++d)
    if (m.src_mapped(d) && dst.is_descendant(m.dst_of(d), b)) ++common;
  return 2.0 * common / (da + db);
}

namespace detail {

inline void map_isomorphic(const AstTree& src, NodeId a, NodeId b, MappingSet& m) {
  // Isomorphic subtrees have identical pre-order layouts.
  for (int k = 0; k < src.subtree_size(a); ++k) m.add(a + k, b + k);
}

// Height-indexed frontier of subtree roots still to consider.
class HeightQueue {
 public:
  explicit HeightQueue(const AstTree& t) : tree_(t) { push(t.root()); }

  int peek_max() const { return buckets_.empty() ? 0 : buckets_.rbegin()->first; }

  std::vector<NodeId> pop() {
    auto it = std::prev(buckets_.end());
    std::vector<NodeId> out = std::move(it->second);
    buckets_.erase(it);
    std::sort(out.begin(), out.end());
    return out;
  }

  void push(NodeId n) { buckets_[tree_.height(n)].push_back(n); }
  void open(NodeId n) {
    for (NodeId c : tree_.children(n)) push(c);
  }

 private:
  const AstTree& tree_;
  std::map<int, std::vector<NodeId>> buckets_;
};

// For each node of `of`, how many subtrees of `in` are isomorphic to it.
inline std::vector<int> isomorphic_counts(const AstTree& of, const AstTree& in) {
  std::unordered_map<std::uint64_t, std::vector<NodeId>> by_hash;
  for (NodeId n = 0; n < static_cast<NodeId>(in.size()); ++n) by_hash[in.hash(n)].push_back(n);
  std::vector<int> counts(of.size(), 0);
  for (NodeId n = 0; n < static_cast<NodeId>(of.size()); ++n) {
    auto it = by_hash.find(of.hash(n));
    if (it == by_hash.end()) continue;
    for (NodeId c : it->second)
      if (isomorphic(of, n, in, c)) ++counts[static_cast<std::size_t>(n)];
  }
  return counts;
}

}  // namespace detail

/// Greedy top-down matching of isomorphic subtrees of height >= min_height,
/// tallest first. Subtrees with several isomorphic partners are resolved by
/// context once every height has been visited: the number of ancestor levels
/// agreeing on type, label and position, then parent dice, then closeness of
/// positions.
inline MappingSet match_top_down(const AstTree& src, const AstTree& dst, int min_height = 2) {
  MappingSet m(src.size(), dst.size());
  if (min_height < 1) min_height = 1;
  const std::vector<int> src_in_dst = detail::isomorphic_counts(src, dst);
  const std::vector<int> dst_in_src = detail::isomorphic_counts(dst, src);

  detail::HeightQueue l1(src), l2(dst);
  std::vector<std::pair<NodeId, NodeId>> ambiguous;
  std::vector<char> src_ambiguous(src.size(), 0), dst_ambiguous(dst.size(), 0);

  while (std::min(l1.peek_max(), l2.peek_max()) >= min_height) {
    if (l1.peek_max() != l2.peek_max()) {
      if (l1.peek_max() > l2.peek_max()) {
        for (NodeId t : l1.pop()) l1.open(t);
      } else {
        for (NodeId t : l2.pop()) l2.open(t);
      }
      continue;
    }
    const std::vector<NodeId> h1 = l1.pop();
    const std::vector<NodeId> h2 = l2.pop();
    for (NodeId t1 : h1) {
      for (NodeId t2 : h2) {
        if (!isomorphic(src, t1, dst, t2)) continue;
        const bool unique = src_in_dst[static_cast<std::size_t>(t1)] == 1 &&
                            dst_in_src[static_cast<std::size_t>(t2)] == 1;
        if (unique) {
          detail::map_isomorphic(src, t1, t2, m);
        } else {
          ambiguous.emplace_back(t1, t2);
          src_ambiguous[static_cast<std::size_t>(t1)] = 1;
          dst_ambiguous[static_cast<std::size_t>(t2)] = 1;
        }
      }
    }
    for (NodeId t1 : h1)
      if (!m.src_mapped(t1) && !src_ambiguous[static_cast<std::size_t>(t1)]) l1.open(t1);
    for (NodeId t2 : h2)
      if (!m.dst_mapped(t2) && !dst_ambiguous[static_cast<std::size_t>(t2)]) l2.open(t2);
  }

  // Longest agreeing ancestor context first, then parent dice, then
  // closeness of the positions under the parents.
  auto context = [&](NodeId t1, NodeId t2) {
    int depth = 0;
    for (NodeId q1 = src.parent(t1), q2 = dst.parent(t2); q1 != kNoNode && q2 != kNoNode;
         t1 = q1, t2 = q2, q1 = src.parent(q1), q2 = dst.parent(q2)) {
      if (src.type(q1) != dst.type(q2) || src.label(q1) != dst.label(q2) || src.position(t1) != dst.position(t2))
        break;
      ++depth;
    }
    return depth;
  };
  std::vector<std::tuple<int, double, std::size_t, std::pair<NodeId, NodeId>>> scored;
  scored.reserve(ambiguous.size());
  for (auto [t1, t2] : ambiguous) {
    const std::size_t p1 = src.position(t1), p2 = dst.position(t2);
    scored.push_back({context(t1, t2), dice(src, src.parent(t1), dst, dst.parent(t2), m),
                      p1 > p2 ? p1 - p2 : p2 - p1, {t1, t2}});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
    if (std::get<2>(a) != std::get<2>(b)) return std::get<2>(a) < std::get<2>(b);
    return std::get<3>(a) < std::get<3>(b);
  });
  for (const auto& [ctx, score, gap, pair] : scored) {
    auto [t1, t2] = pair;
    if (m.src_mapped(t1) || m.dst_mapped(t2)) continue;
    detail::map_isomorphic(src, t1, t2, m);
  }
  return m;
}

namespace detail {

// Order-preserving alignment of the children of a matched pair. Existing
// child-to-child mappings are kept as anchors; between them, unmatched
// children of equal type are paired so that the inserted or deleted
// subtree mass is minimal, preferring equal labels.
inline void align_children(const AstTree& src, NodeId a, const AstTree& dst, NodeId b, MappingSet& m) {
  const auto& ca = src.children(a);
  const auto& cb = dst.children(b);
  const std::size_t n = ca.size(), k = cb.size();
  if (n == 0 || k == 0) return;
  constexpr long long kAnchor = -(1LL << 40);
  auto skip_src = [&](std::size_t i) -> long long {
    return m.src_mapped(ca[i]) ? 0 : src.subtree_size(ca[i]);
  };
  auto skip_dst = [&](std::size_t j) -> long long {
    return m.dst_mapped(cb[j]) ? 0 : dst.subtree_size(cb[j]);
  };
  // Cost of pairing, or nullopt when the two cannot be paired.
  auto pair_cost = [&](std::size_t i, std::size_t j) -> std::optional<long long> {
    const NodeId x = ca[i], y = cb[j];
    if (m.contains(x, y)) return kAnchor;
    if (m.src_mapped(x) || m.dst_mapped(y) || src.type(x) != dst.type(y)) return std::nullopt;
    return src.label(x) == dst.label(y) ? 0 : 1;
  };
  std::vector<std::vector<long long>> cost(n + 1, std::vector<long long>(k + 1, 0));
  for (std::size_t i = n; i-- > 0;) cost[i][k] = cost[i + 1][k] + skip_src(i);
  for (std::size_t j = k; j-- > 0;) cost[n][j] = cost[n][j + 1] + skip_dst(j);
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = k; j-- > 0;) {
      long long best = std::min(cost[i + 1][j] + skip_src(i), cost[i][j + 1] + skip_dst(j));
      if (auto c = pair_cost(i, j)) best = std::min(best, cost[i + 1][j + 1] + *c);
      cost[i][j] = best;
    }
  for (std::size_t i = 0, j = 0; i < n && j < k;) {
    const auto c = pair_cost(i, j);
    if (c && cost[i][j] == cost[i + 1][j + 1] + *c) {
      if (*c != kAnchor) m.add(ca[i], cb[j]);
      ++i;
      ++j;
    } else if (cost[i][j] == cost[i + 1][j] + skip_src(i)) {
      ++i;
    } else {
      ++j;
    }
  }
}

inline void recover(const AstTree& src, NodeId a, const AstTree& dst, NodeId b, MappingSet& m,
                    int max_size) {
  if (src.subtree_size(a) > max_size || dst.subtree_size(b) > max_size) return;
  align_children(src, a, dst, b, m);
  for (NodeId x : src.children(a)) {
    if (!m.src_mapped(x)) continue;
    const NodeId y = m.dst_of(x);
    if (dst.parent(y) == b) recover(src, x, dst, y, m, max_size);
  }
}

}  // namespace detail

/// Extends a top-down seed: every unmatched source container with matched
/// descendants is paired with the unmatched destination node of the same
/// type maximising dice (ties to the smaller id) when dice >= min_dice.
inline MappingSet match_bottom_up(const AstTree& src, const AstTree& dst, MappingSet seed,
                                  const MatcherParams& params) {
  MappingSet m = std::move(seed);
  for (NodeId t1 : src.post_order()) {
    if (m.src_mapped(t1) || src.is_leaf(t1)) continue;
    std::vector<NodeId> candidates;
    for (NodeId d = t1 + 1; d < t1 + src.subtree_size(t1); ++d) {
      if (!m.src_mapped(d)) continue;
      for (NodeId c = dst.parent(m.dst_of(d)); c != kNoNode; c = dst.parent(c))
        if (!m.dst_mapped(c) && dst.type(c) == src.type(t1)) candidates.push_back(c);
    }
    if (candidates.empty()) continue;
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    NodeId best = kNoNode;
    double best_dice = -1.0;
    for (NodeId c : candidates) {
      const double s = dice(src, t1, dst, c, m);
      if (s > best_dice) {
        best = c;
        best_dice = s;
      }
    }
    if (best_dice >= params.min_dice) {
      m.add(t1, best);
      detail::recover(src, t1, dst, best, m, params.max_recovery_size);
    }
  }
  const NodeId r1 = src.root(), r2 = dst.root();
  if (params.match_roots && !m.src_mapped(r1) && !m.dst_mapped(r2) &&
      src.type(r1) == dst.type(r2))
    m.add(r1, r2);
  if (m.contains(r1, r2)) detail::recover(src, r1, dst, r2, m, params.max_recovery_size);
  // Unbounded final alignment; pre-order visits each newly paired child later.
  for (NodeId x = 0; x < static_cast<NodeId>(src.size()); ++x)
    if (m.src_mapped(x)) detail::align_children(src, x, dst, m.dst_of(x), m);
  return m;
}

inline MappingSet match_bottom_up(const AstTree& src, const AstTree& dst, MappingSet seed,
                                  double min_dice, int max_recovery_size) {
  MatcherParams p;
  p.min_dice = min_dice;
  p.max_recovery_size = max_recovery_size;
  return match_bottom_up(src, dst, std::move(seed), p);
}

/// Full matcher: top-down then bottom-up.
inline MappingSet match(const AstTree& src, const AstTree& dst, const MatcherParams& params = {}) {
  return match_bottom_up(src, dst, match_top_down(src, dst, params.min_height), params);
}

}  // namespace fixscope
