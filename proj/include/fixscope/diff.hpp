#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fixscope/ast.hpp"
#include "fixscope/change_key.hpp"
#include "fixscope/edit_script.hpp"
#include "fixscope/error.hpp"
#include "fixscope/matching.hpp"

namespace fixscope {

inline EditScript diff(const AstTree& src, const AstTree& dst, const MatcherParams& params = {}) {
  return generate_script(src, dst, match(src, dst, params));
}

/// True when `a` should be preferred over `b` as the shortest script:
/// fewer actions, then lexicographically smaller key sequence under the
/// strictest scheme. Pool index breaks the remaining ties at the call site.
inline bool shorter_script(const EditScript& a, const EditScript& b) {
  if (a.length() != b.length()) return a.length() < b.length();
  return key_sequence(a, kStrictestScheme) < key_sequence(b, kStrictestScheme);
}

struct ShortestResult {
  EditScript script;
  std::size_t pool_index = 0;
};

/// Diffs `incorrect` against every pool member and keeps the shortest script.
inline ShortestResult shortest_script_indexed(const AstTree& incorrect,
                                              std::span<const AstTree> pool,
                                              const MatcherParams& params = {}) {
  if (pool.empty()) throw EmptyPool("correct-solution pool is empty");
  ShortestResult best;
  bool have = false;
  // Isomorphic pool members yield identical scripts; the first one wins.
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto& bucket = seen[tree_hash(pool[i])];
    bool duplicate = false;
    for (std::size_t j : bucket)
      if (structurally_equal(pool[i], pool[j])) duplicate = true;
    if (duplicate) continue;
    bucket.push_back(i);
    EditScript s = diff(incorrect, pool[i], params);
    if (!have || shorter_script(s, best.script)) {
      best.script = std::move(s);
      best.pool_index = i;
      have = true;
      if (best.script.empty()) break;
    }
  }
  best.script.dst_ref = "pool:" + std::to_string(best.pool_index);
  return best;
}

inline EditScript shortest_script(const AstTree& incorrect, std::span<const AstTree> pool,
                                  const MatcherParams& params = {}) {
  return shortest_script_indexed(incorrect, pool, params).script;
}

}  // namespace fixscope
