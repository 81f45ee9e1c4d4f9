#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fixscope/clustering.hpp"
#include "fixscope/random.hpp"
#include "support/oracles.hpp"
#include "support/random_programs.hpp"

using namespace fixscope;
using namespace fixscope::test_support;

namespace {

std::set<std::set<int>> partition(const std::vector<Cluster>& cs) {
  std::set<std::set<int>> out;
  for (const auto& c : cs) out.insert(std::set<int>(c.members.begin(), c.members.end()));
  return out;
}

Cluster cluster_of(std::vector<int> members) { return {0, std::move(members), std::nullopt, 0}; }

}  // namespace

TEST(DistanceMatrix, Examples) {
  test_support::ProgramGenerator gen(5);
  auto scripts = gen.scripts(4);
  const ScriptMetric metric = ScriptMetric::fit(DistanceConfig{}, scripts);
  const DistanceMatrix m = distance_matrix(scripts, metric);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(m(i, j), script_distance(scripts[i], scripts[j], metric));
  EXPECT_EQ(m.values().size(), 6u);

  scripts.push_back(scripts[1]);
  EXPECT_EQ(distance_matrix(scripts, metric)(1, 4), 0.0);
  const std::vector<EditScript> one(scripts.begin(), scripts.begin() + 1);
  EXPECT_TRUE(distance_matrix(one, metric).values().empty());
}

TEST(Hac, CutExtremes) {
  Rng rng(1);
  DistanceMatrix m(8);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = i + 1; j < 8; ++j) m.set(i, j, 0.05 + 0.9 * rng.uniform01());
  for (auto l : {Linkage::Single, Linkage::Complete, Linkage::Average}) {
    EXPECT_EQ(hac(m, l, 0.0).size(), 8u);
    const auto all = hac(m, l, 1.0);
    ASSERT_EQ(all.size(), 1u);
    EXPECT_EQ(all[0].members, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
    EXPECT_EQ(agglomerate(m, l).merges.size(), 7u);
  }
  EXPECT_THROW(hac(m, Linkage::Single, 1.5), ConfigError);
}

TEST(Hac, PlantedGroups) {
  DistanceMatrix m(5);
  const int group[] = {0, 1, 0, 1, 0};
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j) m.set(i, j, group[i] == group[j] ? 0.1 : 0.9);
  const std::set<std::set<int>> planted{{0, 2, 4}, {1, 3}};
  for (auto l : {Linkage::Single, Linkage::Complete, Linkage::Average}) {
    EXPECT_EQ(partition(hac(m, l, 0.5)), planted);
    EXPECT_EQ(agglomerate(m, l, 0.5).merges, reference_hac(m, l, 0.5));
  }
}

TEST(Hac, MatchesReferenceOnRandomMatrices) {
  Rng rng(2024);
  for (int round = 0; round < 100; ++round) {
    const std::size_t n = 1 + rng.below(50);
    for (auto l : {Linkage::Single, Linkage::Complete, Linkage::Average}) {
      // Average linkage sums in a different order than the reference, so its
      // matrices avoid exact ties; the other two are exercised on a coarse grid.
      const DistanceMatrix m = random_matrix(rng, n, l != Linkage::Average);
      const double cut = round % 3 == 0 ? 1.0 : rng.uniform01();
      const auto got = agglomerate(m, l, cut).merges;
      const auto want = reference_hac(m, l, cut);
      ASSERT_EQ(got.size(), want.size()) << "round " << round << " " << to_string(l);
      for (std::size_t k = 0; k < got.size(); ++k) {
        EXPECT_EQ(got[k].a, want[k].a);
        EXPECT_EQ(got[k].b, want[k].b);
        EXPECT_EQ(got[k].id, want[k].id);
        if (l == Linkage::Average)
          EXPECT_NEAR(got[k].distance, want[k].distance, 1e-12);
        else
          EXPECT_EQ(got[k].distance, want[k].distance);
        if (l != Linkage::Average && k > 0) EXPECT_GE(got[k].distance, got[k - 1].distance);
      }
      const auto cs = hac(m, l, cut);
      std::vector<int> seen;
      for (const auto& c : cs) seen.insert(seen.end(), c.members.begin(), c.members.end());
      std::sort(seen.begin(), seen.end());
      ASSERT_EQ(seen.size(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen[i], static_cast<int>(i));
      EXPECT_EQ(cs.size(), n - got.size());
    }
  }
}

TEST(Hac, Deterministic) {
  Rng rng(3);
  const DistanceMatrix m = random_matrix(rng, 30, true);
  EXPECT_EQ(hac(m, Linkage::Average, 0.4), hac(m, Linkage::Average, 0.4));
}

TEST(FilterClusters, Examples) {
  const std::vector<Cluster> cs{cluster_of({0, 1, 2, 3, 4}), cluster_of({5, 6, 7}), cluster_of({8})};
  EXPECT_EQ(filter_clusters(cs, 1).kept, cs);
  EXPECT_TRUE(filter_clusters(cs, 6).kept.empty());
  EXPECT_EQ(filter_clusters(cs, 6).unclustered.size(), 9u);
  const auto r = filter_clusters(cs, 3);
  ASSERT_EQ(r.kept.size(), 2u);
  EXPECT_EQ(r.kept[0].members.size(), 5u);
  EXPECT_EQ(r.kept[1].members.size(), 3u);
  EXPECT_EQ(r.unclustered, (std::vector<int>{8}));
  EXPECT_THROW(filter_clusters(cs, 0), ConfigError);
}

TEST(Medoid, Examples) {
  DistanceMatrix m(3);
  m.set(0, 1, 0.1);
  m.set(1, 2, 0.1);
  m.set(0, 2, 0.2);
  EXPECT_EQ(compute_medoid(cluster_of({0, 1, 2}), m), 1);
  EXPECT_EQ(compute_medoid(cluster_of({2}), m), 2);
  EXPECT_EQ(compute_medoid(cluster_of({0, 2}), m), 0);  // tie
}

TEST(Medoid, MatchesExhaustiveArgmin) {
  // Distances on a 1/20 grid, so the oracle sums exact integers.
  Rng rng(8);
  for (int round = 0; round < 50; ++round) {
    std::vector<std::vector<int>> q(20, std::vector<int>(20, 0));
    DistanceMatrix m(20);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = i + 1; j < 20; ++j) {
        q[i][j] = q[j][i] = static_cast<int>(rng.below(21));
        m.set(i, j, q[i][j] / 20.0);
      }
    std::vector<int> members(20);
    for (int i = 0; i < 20; ++i) members[static_cast<std::size_t>(i)] = i;
    rng.shuffle(members);
    members.resize(10);
    std::sort(members.begin(), members.end());
    int best = -1, best_sum = 1 << 30;
    for (int a : members) {
      int s = 0;
      for (int b : members) s += q[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      if (s < best_sum) {
        best = a;
        best_sum = s;
      }
    }
    EXPECT_EQ(compute_medoid(cluster_of(members), m), best);
  }
}
