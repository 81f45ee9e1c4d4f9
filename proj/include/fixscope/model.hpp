#pragma once

// The trained artifact: training scripts, the correct-solution pool, fitted
// distance artifacts and the (optionally labelled) clusters.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixscope/clustering.hpp"
#include "fixscope/diff.hpp"
#include "fixscope/distance.hpp"
#include "fixscope/error.hpp"
#include "fixscope/minilang.hpp"
#include "fixscope/tree_io.hpp"

namespace fixscope {

enum class Method { NearestCluster, Knn };

inline std::string_view to_string(Method m) { return m == Method::Knn ? "KNN" : "NEAREST_CLUSTER"; }

/// Accepts the canonical names and the short CLI forms "nearest" and "knn".
inline Method parse_method(std::string_view s) {
  if (s == "KNN" || s == "knn") return Method::Knn;
  if (s == "NEAREST_CLUSTER" || s == "nearest") return Method::NearestCluster;
  throw ConfigError("unknown classifier method '" + std::string(s) + "'");
}

enum class ClusterDistance { MinMember, Medoid };

inline std::string_view to_string(ClusterDistance c) { return c == ClusterDistance::Medoid ? "medoid" : "min"; }

inline ClusterDistance parse_cluster_distance(std::string_view s) {
  if (s == "min") return ClusterDistance::MinMember;
  if (s == "medoid") return ClusterDistance::Medoid;
  throw ConfigError("unknown cluster distance '" + std::string(s) + "'");
}

struct ClassifierConfig {
  Method method = Method::NearestCluster;
  int k = 5;
  double vote_epsilon = 0.001;
  double confidence_threshold = 0.7;
  double distance_threshold = 0.5;
  ClusterDistance cluster_distance = ClusterDistance::MinMember;

  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

inline void validate(const ClassifierConfig& c) {
  if (c.k < 1) throw ConfigError("k must be at least 1");
  if (!(c.vote_epsilon > 0)) throw ConfigError("vote epsilon must be positive");
}

struct TrainConfig {
  MatcherParams matcher;
  DistanceConfig distance;
  Linkage linkage = Linkage::Average;
  double cut = 0.3;
  int min_size = 5;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainingItem {
  std::string script_id;
  EditScript script;
  std::string incorrect_src;
  std::string correct_src;
  std::optional<std::string> ground_truth;

  friend bool operator==(const TrainingItem&, const TrainingItem&) = default;
};

/// Source text when the tree came from MiniLang, else printed MiniLang, else
/// the serialized tree.
inline std::string render_source(const AstTree& t) {
  if (t.source_text()) return *t.source_text();
  try {
    return to_minilang(t);
  } catch (const FormatError&) {
    return write_tree(t).dump();
  }
}

struct ClusterModel {
  TrainConfig config;
  ClassifierConfig classifier;
  ScriptMetric metric;
  std::vector<TrainingItem> items;
  std::vector<AstTree> pool;
  std::vector<Cluster> clusters;  // cluster_id == index
  std::vector<int> unclustered;
  nlohmann::json provenance = nlohmann::json::object();

  // Derived from the fields above by refresh().
  std::vector<ScriptFeatures> features;
  std::vector<int> cluster_of;  // item -> cluster id or -1

  void refresh() {
    features.clear();
    features.reserve(items.size());
    for (const auto& it : items) features.push_back(metric.features(it.script));
    cluster_of.assign(items.size(), -1);
    for (const auto& c : clusters)
      for (int m : c.members) cluster_of[static_cast<std::size_t>(m)] = c.cluster_id;
  }

  const Cluster& cluster(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= clusters.size())
      throw UnknownCluster("no cluster with id " + std::to_string(id));
    return clusters[static_cast<std::size_t>(id)];
  }

  bool has_labels() const {
    return std::any_of(clusters.begin(), clusters.end(), [](const Cluster& c) { return c.label.has_value(); });
  }

  std::set<std::string> labels() const {
    std::set<std::string> out;
    for (const auto& c : clusters)
      if (c.label) out.insert(*c.label);
    return out;
  }
};

/// Scripts and pool shared by every model trained on one corpus.
struct TrainingSet {
  MatcherParams matcher;
  std::vector<TrainingItem> items;
  std::vector<AstTree> pool;

  std::vector<EditScript> scripts() const {
    std::vector<EditScript> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.script);
    return out;
  }
};

/// Structurally distinct trees in first-seen order.
inline std::vector<AstTree> distinct_trees(std::span<const AstTree> trees) {
  std::vector<AstTree> out;
  std::map<std::uint64_t, std::vector<std::size_t>> seen;
  for (const auto& t : trees) {
    auto& bucket = seen[tree_hash(t)];
    bool dup = false;
    for (std::size_t i : bucket) dup = dup || structurally_equal(out[i], t);
    if (dup) continue;
    bucket.push_back(out.size());
    out.push_back(t);
  }
  return out;
}

inline TrainingSet prepare_training(std::span<const SubmissionPair> pairs, const MatcherParams& matcher) {
  TrainingSet ts;
  ts.matcher = matcher;
  std::vector<AstTree> correct;
  for (const auto& p : pairs) {
    TrainingItem it;
    it.script_id = p.pair_id;
    it.script = diff(p.incorrect, p.correct, matcher);
    it.script.src_ref = p.pair_id;
    it.incorrect_src = render_source(p.incorrect);
    it.correct_src = render_source(p.correct);
    it.ground_truth = p.ground_truth_label;
    ts.items.push_back(std::move(it));
    correct.push_back(p.correct);
  }
  ts.pool = distinct_trees(correct);
  return ts;
}

/// Clusters a prepared training set with an already fitted metric and
/// matrix; lets sweeps share those across linkage, cut and size axes.
inline ClusterModel cluster_training(const TrainingSet& ts, const ScriptMetric& metric,
                                     const std::vector<ScriptFeatures>& features, const DistanceMatrix& matrix,
                                     const TrainConfig& config) {
  if (ts.items.empty()) throw ConfigError("training set is empty");
  ClusterModel m;
  m.config = config;
  m.config.matcher = ts.matcher;
  m.metric = metric;
  m.items = ts.items;
  m.pool = ts.pool;
  FilterResult fr = filter_clusters(hac(matrix, config.linkage, config.cut), config.min_size);
  std::stable_sort(fr.kept.begin(), fr.kept.end(),
                   [](const Cluster& a, const Cluster& b) { return a.members.size() > b.members.size(); });
  for (std::size_t i = 0; i < fr.kept.size(); ++i) fr.kept[i].cluster_id = static_cast<int>(i);
  m.clusters = std::move(fr.kept);
  m.unclustered = std::move(fr.unclustered);
  m.features = features;
  m.cluster_of.assign(m.items.size(), -1);
  for (const auto& c : m.clusters)
    for (int x : c.members) m.cluster_of[static_cast<std::size_t>(x)] = c.cluster_id;
  return m;
}

inline ClusterModel train_model(std::span<const SubmissionPair> pairs, const TrainConfig& config) {
  const TrainingSet ts = prepare_training(pairs, config.matcher);
  const auto scripts = ts.scripts();
  const ScriptMetric metric = ScriptMetric::fit(config.distance, scripts);
  std::vector<ScriptFeatures> features;
  for (const auto& s : scripts) features.push_back(metric.features(s));
  return cluster_training(ts, metric, features, distance_matrix(features, metric), config);
}

/// Stores a label; "" clears it.
inline void assign_label(ClusterModel& m, int cluster_id, const std::string& label) {
  m.cluster(cluster_id);
  auto& c = m.clusters[static_cast<std::size_t>(cluster_id)];
  if (label.empty())
    c.label.reset();
  else
    c.label = label;
}

/// Labels each cluster with the most frequent ground truth among its members
/// (ties to the lexicographically smaller label).
inline void auto_label(ClusterModel& m) {
  for (auto& c : m.clusters) {
    std::map<std::string, int> votes;
    for (int x : c.members)
      if (const auto& g = m.items[static_cast<std::size_t>(x)].ground_truth) ++votes[*g];
    c.label.reset();
    int best = 0;
    for (const auto& [label, n] : votes)
      if (n > best) {
        best = n;
        c.label = label;
      }
  }
}

}  // namespace fixscope
