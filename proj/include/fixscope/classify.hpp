#pragma once

// Labelling a new incorrect submission from a trained model.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixscope/diff.hpp"
#include "fixscope/error.hpp"
#include "fixscope/model.hpp"

namespace fixscope {

struct Evidence {
  std::string script_id;
  int item = -1;
  double distance = 1.0;
  int cluster_id = -1;

  friend bool operator==(const Evidence&, const Evidence&) = default;
};

struct Prediction {
  std::optional<std::string> label;      // empty means Unknown
  std::optional<std::string> candidate;  // label before rejection
  double confidence = 0.0;
  double nearest_distance = 1.0;
  Method method = Method::NearestCluster;
  std::vector<Evidence> evidence;

  bool unknown() const { return !label.has_value(); }
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Keeps the candidate only when it is close and confident enough.
inline Prediction apply_rejection(Prediction p, double theta, double delta) {
  if (p.candidate && p.nearest_distance <= delta && p.confidence >= theta)
    p.label = p.candidate;
  else
    p.label.reset();
  return p;
}

namespace detail {

inline void require_labels(const ClusterModel& m) {
  if (!m.has_labels()) throw UnlabeledModel("no cluster carries a label");
}

}  // namespace detail

/// Closest labelled cluster; candidate only, see apply_rejection.
inline Prediction nearest_cluster(const ScriptFeatures& f, const ClusterModel& m, const ClassifierConfig& c) {
  detail::require_labels(m);
  Prediction p;
  p.method = Method::NearestCluster;
  for (const Cluster& cl : m.clusters) {
    if (!cl.label) continue;
    Evidence e;
    e.cluster_id = cl.cluster_id;
    if (c.cluster_distance == ClusterDistance::Medoid) {
      e.item = cl.medoid;
      e.distance = m.metric.distance(f, m.features[static_cast<std::size_t>(cl.medoid)]);
    } else {
      for (int x : cl.members) {
        const double d = m.metric.distance(f, m.features[static_cast<std::size_t>(x)]);
        if (e.item < 0 || d < e.distance) {
          e.item = x;
          e.distance = d;
        }
      }
    }
    e.script_id = m.items[static_cast<std::size_t>(e.item)].script_id;
    p.evidence.push_back(std::move(e));
  }
  std::stable_sort(p.evidence.begin(), p.evidence.end(), [](const Evidence& a, const Evidence& b) {
    return std::tie(a.distance, a.cluster_id) < std::tie(b.distance, b.cluster_id);
  });
  const Evidence& best = p.evidence.front();
  p.candidate = m.clusters[static_cast<std::size_t>(best.cluster_id)].label;
  p.nearest_distance = best.distance;
  p.confidence = 1.0 - best.distance;
  return p;
}

/// Weighted vote of the k nearest scripts in labelled clusters.
inline Prediction knn_vote(const ScriptFeatures& f, const ClusterModel& m, const ClassifierConfig& c) {
  detail::require_labels(m);
  validate(c);
  std::vector<Evidence> voters;
  for (const Cluster& cl : m.clusters) {
    if (!cl.label) continue;
    for (int x : cl.members)
      voters.push_back({m.items[static_cast<std::size_t>(x)].script_id, x,
                        m.metric.distance(f, m.features[static_cast<std::size_t>(x)]), cl.cluster_id});
  }
  if (static_cast<std::size_t>(c.k) > voters.size())
    throw KTooLarge("k = " + std::to_string(c.k) + " but only " + std::to_string(voters.size()) +
                    " labelled scripts");
  std::sort(voters.begin(), voters.end(), [](const Evidence& a, const Evidence& b) {
    return std::tie(a.distance, a.script_id, a.item) < std::tie(b.distance, b.script_id, b.item);
  });
  voters.resize(static_cast<std::size_t>(c.k));
  std::map<std::string, double> weight;
  double total = 0;
  for (const auto& v : voters) {
    const double w = 1.0 / (v.distance + c.vote_epsilon);
    weight[*m.clusters[static_cast<std::size_t>(v.cluster_id)].label] += w;
    total += w;
  }
  Prediction p;
  p.method = Method::Knn;
  double best = -1;
  for (const auto& [label, w] : weight)
    if (w > best) {
      best = w;
      p.candidate = label;
    }
  p.confidence = best / total;
  p.nearest_distance = voters.front().distance;
  p.evidence = std::move(voters);
  return p;
}

/// Candidate prediction for a script, before thresholds.
inline Prediction predict_features(const ScriptFeatures& f, const ClusterModel& m, const ClassifierConfig& c) {
  return c.method == Method::Knn ? knn_vote(f, m, c) : nearest_cluster(f, m, c);
}

inline Prediction classify_script(const EditScript& s, const ClusterModel& m, const ClassifierConfig& c) {
  return apply_rejection(predict_features(m.metric.features(s), m, c), c.confidence_threshold,
                         c.distance_threshold);
}

/// Script against the nearest correct solution in the model's pool.
inline EditScript script_for(const AstTree& incorrect, const ClusterModel& m) {
  return shortest_script(incorrect, m.pool, m.config.matcher);
}

inline Prediction classify(const AstTree& incorrect, const ClusterModel& m, const ClassifierConfig& c) {
  detail::require_labels(m);
  return classify_script(script_for(incorrect, m), m, c);
}

inline Prediction classify(const AstTree& incorrect, const ClusterModel& m) { return classify(incorrect, m, m.classifier); }

inline nlohmann::json to_json(const Prediction& p) {
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : p.evidence)
    ev.push_back({{"script_id", e.script_id}, {"distance", e.distance}, {"cluster_id", e.cluster_id}});
  return {{"label", p.label ? nlohmann::json(*p.label) : nlohmann::json(nullptr)},
          {"confidence", p.confidence},
          {"nearest_distance", p.nearest_distance},
          {"method", to_string(p.method)},
          {"evidence", ev}};
}

inline nlohmann::json to_json(const ClassifierConfig& c) {
  return {{"method", to_string(c.method)},
          {"k", c.k},
          {"vote_epsilon", c.vote_epsilon},
          {"confidence_threshold", c.confidence_threshold},
          {"distance_threshold", c.distance_threshold},
          {"cluster_distance", to_string(c.cluster_distance)}};
}

inline ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
  try {
    ClassifierConfig c;
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    c.k = j.value("k", c.k);
    c.vote_epsilon = j.value("vote_epsilon", c.vote_epsilon);
    c.confidence_threshold = j.value("confidence_threshold", c.confidence_threshold);
    c.distance_threshold = j.value("distance_threshold", c.distance_threshold);
    if (j.contains("cluster_distance"))
      c.cluster_distance = parse_cluster_distance(j.at("cluster_distance").get<std::string>());
    validate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed classifier config: ") + e.what());
  }
}

}  // namespace fixscope
