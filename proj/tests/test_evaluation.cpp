#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fixscope/evaluation.hpp"
#include "fixscope/synth.hpp"
#include "support/oracles.hpp"

using namespace fixscope;
using namespace fixscope::test_support;

namespace {

LabeledPrediction lp(std::optional<std::string> candidate, double conf, double dist, std::string truth) {
  Prediction p;
  p.candidate = std::move(candidate);
  p.confidence = conf;
  p.nearest_distance = dist;
  return {p, std::move(truth)};
}

}  // namespace

TEST(Split, Sizes) {
  EXPECT_EQ(split_sizes(10, {}), (SplitSizes{8, 1, 1}));
  EXPECT_EQ(split_sizes(1472, {}), (SplitSizes{1176, 148, 148}));
  EXPECT_EQ(split_sizes(250, {}), (SplitSizes{200, 25, 25}));
  EXPECT_EQ(split_sizes(1, {}), (SplitSizes{0, 1, 0}));
  EXPECT_THROW(split_sizes(10, {0.5, 0.5, 0.5, 0}), ConfigError);
  EXPECT_THROW(split_sizes(10, {1.2, -0.1, -0.1, 0}), ConfigError);
}

TEST(Split, PartitionAndDeterminism) {
  std::vector<int> xs(1472);
  for (int i = 0; i < 1472; ++i) xs[static_cast<std::size_t>(i)] = i;
  const auto a = split<int>(xs, {0.8, 0.1, 0.1, 42});
  const auto b = split<int>(xs, {0.8, 0.1, 0.1, 42});
  const auto c = split<int>(xs, {0.8, 0.1, 0.1, 43});
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(a.test, c.test);
  EXPECT_EQ(a.train.size(), 1176u);
  EXPECT_EQ(a.test.size(), 148u);
  std::multiset<int> all(a.train.begin(), a.train.end());
  all.insert(a.validation.begin(), a.validation.end());
  all.insert(a.test.begin(), a.test.end());
  EXPECT_EQ(all, std::multiset<int>(xs.begin(), xs.end()));
  EXPECT_THROW(split<int>(std::vector<int>{}, {}), ConfigError);
}

TEST(PRCurve, AllCorrectGivesOne) {
  std::vector<LabeledPrediction> items;
  for (int i = 0; i < 10; ++i) items.push_back(lp("A", 1.0, 0.0, "A"));
  const PRCurve c = pr_curve(items);
  EXPECT_DOUBLE_EQ(c.auc, 1.0);
  ASSERT_EQ(c.points.size(), 3u);
  EXPECT_EQ(c.points[1].recall, 1.0);
  EXPECT_EQ(c.points[1].precision, 1.0);
}

TEST(PRCurve, AllUnknownGivesAnchorsOnly) {
  std::vector<LabeledPrediction> items;
  for (int i = 0; i < 10; ++i) items.push_back(lp(std::nullopt, 0.0, 1.0, "A"));
  const PRCurve c = pr_curve(items);
  EXPECT_DOUBLE_EQ(c.auc, 0.5);
  ASSERT_EQ(c.points.size(), 3u);  // (0,1) measured coincides with the anchor value
  EXPECT_EQ(c.points[1].recall, 0.0);
  EXPECT_EQ(c.points[1].precision, 1.0);
}

TEST(PRCurve, EmptyInputThrows) {
  EXPECT_THROW(pr_curve(std::vector<LabeledPrediction>{}), EmptyPredictionSet);
}

TEST(PRCurve, ElevenPointCurve) {
  // Nine operating points on 148 test items, built from confidence groups;
  // (correct, wrong) added at each lower threshold level.
  const std::vector<std::tuple<double, int, int>> groups = {
      {20 / 20.0, 11, 0}, {18 / 20.0, 5, 0}, {16 / 20.0, 7, 0}, {14 / 20.0, 7, 0}, {12 / 20.0, 13, 1},
      {10 / 20.0, 9, 0},  {8 / 20.0, 11, 0}, {6 / 20.0, 11, 2}, {0.0, 24, 47}};
  std::vector<LabeledPrediction> items;
  for (const auto& [conf, good, bad] : groups) {
    for (int i = 0; i < good; ++i) items.push_back(lp("A", conf, 0.1, "A"));
    for (int i = 0; i < bad; ++i) items.push_back(lp("A", conf, 0.1, "B"));
  }
  ASSERT_EQ(items.size(), 148u);
  const std::vector<std::pair<double, double>> expected = {
      {0, 1},
      {0.07432432432432433, 1.0},
      {0.10810810810810811, 1.0},
      {0.1554054054054054, 1.0},
      {0.20270270270270271, 1.0},
      {0.2905405405405405, 0.9772727272727273},
      {0.35135135135135137, 0.9811320754716981},
      {0.42567567567567566, 0.984375},
      {0.5, 0.961038961038961},
      {0.6621621621621622, 0.6621621621621622},
      {1, 0}};
  const PRCurve c = pr_curve(items, default_thresholds(), 0.5);
  ASSERT_EQ(c.points.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_NEAR(c.points[i].recall, expected[i].first, 1e-15) << i;
    EXPECT_NEAR(c.points[i].precision, expected[i].second, 1e-15) << i;
  }
  EXPECT_NEAR(c.auc, shoelace(expected), 1e-12);
  // The same polyline fed directly as points.
  std::vector<PRPoint> direct;
  for (const auto& [r, p] : expected) direct.push_back({r, p, std::nullopt});
  EXPECT_NEAR(trapezoid_auc(direct), shoelace(expected), 1e-12);
  // Distance rejection alone wipes the curve out.
  EXPECT_DOUBLE_EQ(pr_curve(items, default_thresholds(), 0.05).auc, 0.5);
}

TEST(PRCurve, RandomSetsMatchBruteForce) {
  Rng rng(2024);
  const std::vector<std::string> labels = {"A", "B", "C", kNovelLabel};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LabeledPrediction> items;
    const auto n = 1 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      std::optional<std::string> cand;
      if (rng.below(10) > 0) cand = labels[rng.below(3)];
      const double conf = trial % 2 ? rng.uniform01() : static_cast<double>(rng.below(21)) / 20.0;
      items.push_back(lp(cand, conf, rng.uniform01(), labels[rng.below(4)]));
    }
    const double delta = trial % 3 ? 0.5 : std::numeric_limits<double>::infinity();
    const PRCurve c = pr_curve(items, default_thresholds(), delta);
    const auto ref = brute_curve(items, delta);
    ASSERT_EQ(c.points.size(), ref.size()) << trial;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_NEAR(c.points[i].recall, ref[i].first, 1e-12);
      EXPECT_NEAR(c.points[i].precision, ref[i].second, 1e-12);
    }
    EXPECT_NEAR(c.auc, shoelace(ref), 1e-12) << trial;
    EXPECT_GE(c.auc, 0.0);
    EXPECT_LE(c.auc, 1.0);
    // Recall never rises with the threshold.
    double last = 2;
    for (double t : default_thresholds()) {
      const double r = pr_point(items, t, delta).recall;
      EXPECT_LE(r, last);
      last = r;
    }
  }
}

TEST(Evaluate, NovelTruthAndMissingLabels) {
  SubmissionPair p;
  p.pair_id = "x";
  p.ground_truth_label = "Z";
  EXPECT_EQ(truth_for(p, {"A"}), kNovelLabel);
  EXPECT_EQ(truth_for(p, {"Z"}), "Z");
  p.ground_truth_label.reset();
  EXPECT_THROW(truth_for(p, {"A"}), ConfigError);
}

TEST(Synth, HundredPairs) {
  const auto corpus = generate_synthetic_corpus(100, standard_operators(), 7);
  ASSERT_EQ(corpus.size(), 100u);
  std::set<std::string> ids;
  for (const auto& op : standard_operators()) ids.insert(op.id);
  std::map<std::string, int> counts;
  std::set<std::string> pair_ids;
  for (const auto& p : corpus) {
    ASSERT_TRUE(p.ground_truth_label);
    EXPECT_TRUE(ids.count(*p.ground_truth_label));
    ++counts[*p.ground_truth_label];
    EXPECT_GE(diff(p.incorrect, p.correct).length(), 1u) << p.pair_id;
    pair_ids.insert(p.pair_id);
  }
  EXPECT_EQ(pair_ids.size(), 100u);
  EXPECT_EQ(corpus.front().pair_id, "p0000");
  ASSERT_EQ(counts.size(), 4u);
  for (const auto& [k, v] : counts) EXPECT_EQ(v, 25) << k;
}

TEST(Synth, Balanced) {
  const auto corpus = generate_synthetic_corpus(103, standard_operators(), 3);
  std::map<std::string, int> counts;
  for (const auto& p : corpus) ++counts[*p.ground_truth_label];
  int lo = 1000, hi = 0;
  for (const auto& [k, v] : counts) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LE(hi - lo, 1);
}

TEST(Synth, SameSeedSameCorpus) {
  const auto a = generate_synthetic_corpus(60, standard_operators(), 11);
  const auto b = generate_synthetic_corpus(60, standard_operators(), 11);
  const auto c = generate_synthetic_corpus(60, standard_operators(), 12);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].pair_id, b[i].pair_id);
    EXPECT_EQ(a[i].ground_truth_label, b[i].ground_truth_label);
    EXPECT_TRUE(structurally_equal(a[i].incorrect, b[i].incorrect));
    EXPECT_TRUE(structurally_equal(a[i].correct, b[i].correct));
    differs = differs || !structurally_equal(a[i].incorrect, c[i].incorrect);
  }
  EXPECT_TRUE(differs);
}

TEST(Synth, OutputParsesBack) {
  for (const auto& p : generate_synthetic_corpus(40, standard_operators(), 5)) {
    const AstTree again = parse_minilang(to_minilang(p.incorrect));
    EXPECT_TRUE(structurally_equal(again, p.incorrect));
  }
}

TEST(Synth, InapplicableOperators) {
  const std::vector<CorrectProgram> pool = {{"straight", "x = 1; y = x + 2; print(y);"}};
  std::vector<std::string> warnings;
  SynthOptions opt;
  opt.warn = [&](const std::string& m) { warnings.push_back(m); };
  auto ops = standard_operators();
  const auto corpus = generate_synthetic_corpus(8, ops, 1, pool, opt);
  ASSERT_FALSE(warnings.empty());
  EXPECT_NE(warnings.front().find("WRONG_COMPARISON"), std::string::npos);
  for (const auto& p : corpus) EXPECT_NE(*p.ground_truth_label, "WRONG_COMPARISON");

  std::vector<MutationOperator> only_cmp;
  for (auto& op : ops)
    if (op.id == "WRONG_COMPARISON") only_cmp.push_back(op);
  EXPECT_THROW(generate_synthetic_corpus(8, only_cmp, 1, pool, opt), OperatorInapplicable);
  EXPECT_THROW(generate_synthetic_corpus(0, ops, 1, pool, opt), ConfigError);
}

TEST(Synth, ExtraStatementIsPureDeletion) {
  for (const auto& p : generate_synthetic_corpus(30, {extra_statement_operator()}, 9)) {
    const EditScript s = diff(p.incorrect, p.correct);
    ASSERT_GE(s.length(), 1u);
    for (const auto& a : s.actions) EXPECT_EQ(a.kind, EditKind::Delete) << p.pair_id;
  }
}
