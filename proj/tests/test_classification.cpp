#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fixscope/classify.hpp"
#include "fixscope/evaluation.hpp"
#include "fixscope/synth.hpp"

using namespace fixscope;

namespace {

EditAction act(EditKind k, std::string type) { return {k, 1, std::move(type), "", "Block", {}, {}, {}}; }

EditScript bag_script(std::map<std::string, int> counts) {
  EditScript s;
  for (const auto& [type, n] : counts)
    for (int i = 0; i < n; ++i) s.actions.push_back(act(EditKind::Delete, type));
  return s;
}

// Jaccard/KIND_TYPE model whose clusters are given as lists of scripts.
ClusterModel hand_model(const std::vector<std::pair<std::optional<std::string>, std::vector<EditScript>>>& groups) {
  ClusterModel m;
  m.config.distance.scheme = EqualityScheme::KindType;
  m.metric = ScriptMetric(m.config.distance, std::nullopt, std::nullopt);
  int id = 0;
  for (const auto& [label, scripts] : groups) {
    Cluster c;
    c.cluster_id = id++;
    c.label = label;
    for (const auto& s : scripts) {
      c.members.push_back(static_cast<int>(m.items.size()));
      m.items.push_back({"s" + std::to_string(m.items.size()), s, "", "", std::nullopt});
    }
    c.medoid = c.members.front();
    m.clusters.push_back(c);
  }
  m.pool.push_back(AstTree());
  m.refresh();
  return m;
}

struct Fixture {
  std::vector<SubmissionPair> corpus;
  Split<SubmissionPair> parts;
  ClusterModel model;
};

const Fixture& synthetic() {
  static const Fixture f = [] {
    Fixture x;
    x.corpus = generate_synthetic_corpus(250, standard_operators(), 7);
    x.parts = split<SubmissionPair>(x.corpus, SplitSpec{0.8, 0.1, 0.1, 7});
    x.model = train_model(x.parts.train, TrainConfig{});
    auto_label(x.model);
    return x;
  }();
  return f;
}

// Independent multiset Jaccard over (kind, type) pairs.
double ref_jaccard(const EditScript& a, const EditScript& b) {
  std::map<std::pair<int, std::string>, int> ca, cb;
  for (const auto& x : a.actions) ++ca[{static_cast<int>(x.kind), x.node_type}];
  for (const auto& x : b.actions) ++cb[{static_cast<int>(x.kind), x.node_type}];
  std::set<std::pair<int, std::string>> keys;
  for (auto& [k, v] : ca) keys.insert(k);
  for (auto& [k, v] : cb) keys.insert(k);
  int inter = 0, uni = 0;
  for (const auto& k : keys) {
    const int x = ca.count(k) ? ca[k] : 0, y = cb.count(k) ? cb[k] : 0;
    inter += std::min(x, y);
    uni += std::max(x, y);
  }
  return uni == 0 ? 0.0 : 1.0 - static_cast<double>(inter) / uni;
}

// Reference nearest-cluster classifier: full diff against every pool tree,
// then an exhaustive scan of all labelled members.
std::pair<std::optional<std::string>, double> ref_nearest(const AstTree& incorrect, const ClusterModel& m) {
  std::optional<EditScript> best;
  for (const auto& t : m.pool) {
    EditScript s = diff(incorrect, t, m.config.matcher);
    if (!best || s.length() < best->length() ||
        (s.length() == best->length() && key_sequence(s, kStrictestScheme) < key_sequence(*best, kStrictestScheme)))
      best = std::move(s);
  }
  std::optional<std::string> label;
  double d = 2;
  for (const auto& c : m.clusters) {
    if (!c.label) continue;
    for (int x : c.members) {
      const double v = ref_jaccard(*best, m.items[static_cast<std::size_t>(x)].script);
      if (v < d) {
        d = v;
        label = c.label;
      }
    }
  }
  return {label, d};
}

// Reference kNN: sort every labelled script by (distance, id), vote.
std::optional<std::string> ref_knn(const ScriptFeatures& f, const ClusterModel& m, int k, double eps) {
  std::vector<std::tuple<double, std::string, std::string>> all;
  for (const auto& c : m.clusters)
    if (c.label)
      for (int x : c.members)
        all.emplace_back(m.metric.distance(f, m.features[static_cast<std::size_t>(x)]),
                         m.items[static_cast<std::size_t>(x)].script_id, *c.label);
  std::sort(all.begin(), all.end());
  std::map<std::string, double> w;
  for (int i = 0; i < k; ++i) w[std::get<2>(all[static_cast<std::size_t>(i)])] += 1.0 / (std::get<0>(all[static_cast<std::size_t>(i)]) + eps);
  std::optional<std::string> best;
  for (const auto& [l, v] : w)
    if (!best || v > w[*best]) best = l;
  return best;
}

}  // namespace

TEST(Model, InvariantsOnSyntheticCorpus) {
  const auto& m = synthetic().model;
  ASSERT_FALSE(m.clusters.empty());
  std::vector<int> seen(m.items.size(), 0);
  for (std::size_t i = 0; i < m.clusters.size(); ++i) {
    const auto& c = m.clusters[i];
    EXPECT_EQ(c.cluster_id, static_cast<int>(i));
    EXPECT_GE(c.members.size(), 5u);
    if (i > 0) EXPECT_LE(c.members.size(), m.clusters[i - 1].members.size());
    EXPECT_TRUE(std::count(c.members.begin(), c.members.end(), c.medoid));
    for (int x : c.members) ++seen[static_cast<std::size_t>(x)];
  }
  for (int x : m.unclustered) ++seen[static_cast<std::size_t>(x)];
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(m.pool.size(), 21u);
  EXPECT_TRUE(m.has_labels());
}

TEST(Model, AssignLabel) {
  ClusterModel m = hand_model({{std::nullopt, {bag_script({{"A", 1}})}}, {std::nullopt, {bag_script({{"B", 1}})}}});
  assign_label(m, 1, "wrong-operator");
  EXPECT_EQ(m.clusters[1].label, "wrong-operator");
  assign_label(m, 1, "other");
  EXPECT_EQ(m.clusters[1].label, "other");
  assign_label(m, 1, "");
  EXPECT_FALSE(m.clusters[1].label);
  EXPECT_THROW(assign_label(m, 99, "x"), UnknownCluster);
}

TEST(Model, AutoLabelTakesMajority) {
  ClusterModel m = hand_model({{std::nullopt, {bag_script({{"A", 1}}), bag_script({{"A", 1}}), bag_script({{"A", 1}})}}});
  m.items[0].ground_truth = "Y";
  m.items[1].ground_truth = "X";
  m.items[2].ground_truth = "Y";
  auto_label(m);
  EXPECT_EQ(m.clusters[0].label, "Y");
  m.items[2].ground_truth = "X";
  m.items[0].ground_truth = std::nullopt;
  auto_label(m);
  EXPECT_EQ(m.clusters[0].label, "X");
}

TEST(NearestCluster, Examples) {
  const EditScript a = bag_script({{"x", 4}});
  const EditScript b = bag_script({{"x", 3}});
  const ClusterModel m = hand_model({{"A", {a, bag_script({{"z", 2}})}}, {"B", {b}}});
  ClassifierConfig c;
  const Prediction exact = nearest_cluster(m.metric.features(a), m, c);
  EXPECT_EQ(exact.candidate, "A");
  EXPECT_EQ(exact.nearest_distance, 0.0);
  EXPECT_EQ(exact.confidence, 1.0);

  const EditScript q = bag_script({{"x", 4}, {"y", 1}});
  const Prediction p = nearest_cluster(m.metric.features(q), m, c);
  EXPECT_EQ(p.candidate, "A");
  EXPECT_DOUBLE_EQ(p.nearest_distance, 0.2);
  EXPECT_DOUBLE_EQ(p.confidence, 0.8);
  ASSERT_EQ(p.evidence.size(), 2u);
  EXPECT_DOUBLE_EQ(p.evidence[1].distance, 0.4);
  EXPECT_EQ(p.evidence[1].cluster_id, 1);

  c.cluster_distance = ClusterDistance::Medoid;
  EXPECT_DOUBLE_EQ(nearest_cluster(m.metric.features(q), m, c).nearest_distance, 0.2);
}

TEST(NearestCluster, UnlabeledClustersAreSkipped) {
  const EditScript a = bag_script({{"x", 1}});
  const ClusterModel m = hand_model({{std::nullopt, {a}}, {"B", {bag_script({{"y", 1}})}}});
  const Prediction p = nearest_cluster(m.metric.features(a), m, ClassifierConfig{});
  EXPECT_EQ(p.candidate, "B");
  EXPECT_EQ(p.nearest_distance, 1.0);
  const ClusterModel none = hand_model({{std::nullopt, {a}}});
  EXPECT_THROW(nearest_cluster(none.metric.features(a), none, ClassifierConfig{}), UnlabeledModel);
  EXPECT_THROW(classify(AstTree(), none, ClassifierConfig{}), UnlabeledModel);
}

TEST(KnnVote, Examples) {
  const EditScript q = bag_script({{"x", 1}});
  const ClusterModel m = hand_model({{"X", {q}}, {"Y", {bag_script({{"y", 1}}), bag_script({{"z", 1}})}}});
  ClassifierConfig c;
  c.method = Method::Knn;
  c.k = 3;
  const Prediction p = knn_vote(m.metric.features(q), m, c);
  EXPECT_EQ(p.candidate, "X");
  EXPECT_NEAR(p.confidence, 1000.0 / (1000.0 + 2.0 / 1.001), 1e-12);
  EXPECT_NEAR(p.confidence, 0.998, 1e-3);
  EXPECT_EQ(p.evidence.size(), 3u);

  c.k = 1;
  const Prediction one = knn_vote(m.metric.features(bag_script({{"z", 1}})), m, c);
  EXPECT_EQ(one.candidate, "Y");
  EXPECT_EQ(one.confidence, 1.0);

  c.k = 4;
  EXPECT_THROW(knn_vote(m.metric.features(q), m, c), KTooLarge);
}

TEST(KnnVote, LabelTiesGoToTheSmallerLabel) {
  const ClusterModel m = hand_model({{"Y", {bag_script({{"y", 1}})}}, {"X", {bag_script({{"x", 1}})}}});
  ClassifierConfig c;
  c.method = Method::Knn;
  c.k = 2;
  EXPECT_EQ(knn_vote(m.metric.features(bag_script({{"q", 1}})), m, c).candidate, "X");
}

TEST(Classify, TrainingDuplicateGetsItsClusterLabel) {
  const auto& f = synthetic();
  const auto& m = f.model;
  ClassifierConfig c;
  c.confidence_threshold = 0;
  c.distance_threshold = 1;
  int checked = 0;
  for (const auto& cl : m.clusters) {
    const int x = cl.members.front();
    const auto& pair = f.parts.train[static_cast<std::size_t>(x)];
    const Prediction p = classify(pair.incorrect, m, c);
    EXPECT_EQ(p.nearest_distance, 0.0);
    EXPECT_EQ(p.label, cl.label);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Classify, UnreachableThresholdRejectsEverything) {
  const auto& f = synthetic();
  ClassifierConfig c;
  c.confidence_threshold = 1.01;
  for (const auto& p : f.parts.test) EXPECT_TRUE(classify(p.incorrect, f.model, c).unknown());
  c.method = Method::Knn;
  for (const auto& p : f.parts.test) EXPECT_TRUE(classify(p.incorrect, f.model, c).unknown());
}

TEST(Classify, MatchesReferenceImplementation) {
  const auto& f = synthetic();
  const ClassifierConfig c;
  for (const auto& p : f.parts.test) {
    const auto [label, d] = ref_nearest(p.incorrect, f.model);
    const Prediction got = classify(p.incorrect, f.model, c);
    EXPECT_DOUBLE_EQ(got.nearest_distance, d) << p.pair_id;
    EXPECT_EQ(got.candidate, label) << p.pair_id;
    const bool issued = d <= c.distance_threshold && 1.0 - d >= c.confidence_threshold;
    EXPECT_EQ(got.label, issued ? label : std::nullopt);
  }
}

TEST(Classify, KnnMatchesSortedScan) {
  const auto& f = synthetic();
  ClassifierConfig c;
  c.method = Method::Knn;
  for (const auto& p : f.parts.test) {
    const ScriptFeatures feat = f.model.metric.features(script_for(p.incorrect, f.model));
    EXPECT_EQ(knn_vote(feat, f.model, c).candidate, ref_knn(feat, f.model, c.k, c.vote_epsilon)) << p.pair_id;
  }
}

TEST(Classify, RejectionIsMonotone) {
  const auto& f = synthetic();
  for (auto method : {Method::NearestCluster, Method::Knn}) {
    ClassifierConfig c;
    c.method = method;
    for (const auto& p : f.parts.validation) {
      const Prediction raw = predict_features(f.model.metric.features(script_for(p.incorrect, f.model)), f.model, c);
      for (double t1 = 0; t1 <= 1.0; t1 += 0.1)
        for (double t2 = t1; t2 <= 1.0; t2 += 0.1)
          if (apply_rejection(raw, t1, 0.5).unknown()) EXPECT_TRUE(apply_rejection(raw, t2, 0.5).unknown());
      for (double d1 = 0; d1 <= 1.0; d1 += 0.1)
        for (double d2 = 0; d2 <= d1; d2 += 0.1)
          if (apply_rejection(raw, 0.5, d1).unknown()) EXPECT_TRUE(apply_rejection(raw, 0.5, d2).unknown());
      const Prediction issued = apply_rejection(raw, 0, 1);
      if (issued.label) EXPECT_TRUE(f.model.labels().count(*issued.label));
    }
  }
}

TEST(Classify, KnnWithOneNeighbourAgreesWithNearestCluster) {
  const auto& f = synthetic();
  ClassifierConfig knn;
  knn.method = Method::Knn;
  knn.k = 1;
  const ClassifierConfig near;
  for (const auto& p : f.parts.validation) {
    const ScriptFeatures feat = f.model.metric.features(script_for(p.incorrect, f.model));
    const Prediction a = knn_vote(feat, f.model, knn);
    const Prediction b = nearest_cluster(feat, f.model, near);
    if (a.evidence.front().cluster_id == b.evidence.front().cluster_id) EXPECT_EQ(a.candidate, b.candidate);
  }
}

TEST(Classify, Deterministic) {
  const auto& f = synthetic();
  for (const auto& p : f.parts.test) EXPECT_EQ(classify(p.incorrect, f.model), classify(p.incorrect, f.model));
}
