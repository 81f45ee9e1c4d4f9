#pragma once

// Hyperparameter grids, the validation sweep and the final test run.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixscope/classify.hpp"
#include "fixscope/evaluation.hpp"
#include "fixscope/model.hpp"

namespace fixscope {

struct SweepGrid {
  // Clustering axes.
  std::vector<Metric> metrics{Metric::Jaccard};
  std::vector<EqualityScheme> schemes{EqualityScheme::KindType};
  std::vector<Linkage> linkages{Linkage::Average};
  std::vector<double> cuts{0.3};
  std::vector<int> min_sizes{5};
  // Classifier axes.
  std::vector<Method> methods{Method::NearestCluster};
  std::vector<int> ks{5};
  std::vector<double> deltas{0.5};
  std::vector<double> epsilons{0.001};
  // Fixed for the whole sweep.
  MatcherParams matcher;
  AutoencoderConfig autoencoder;
  ClusterDistance cluster_distance = ClusterDistance::MinMember;

  std::size_t clustering_count() const {
    return metrics.size() * schemes.size() * linkages.size() * cuts.size() * min_sizes.size();
  }
  std::size_t classifier_count() const { return methods.size() * ks.size() * deltas.size() * epsilons.size(); }
  std::size_t size() const { return clustering_count() * classifier_count(); }
};

/// 3 metrics x 4 schemes x 3 linkages x 4 cuts x 2 min sizes = 288 clusterings,
/// 2 methods x 4 k x 4 distance thresholds x 3 vote epsilons = 96 classifiers.
inline SweepGrid full_grid() {
  SweepGrid g;
  g.metrics = {Metric::Jaccard, Metric::BowCosine, Metric::AeCosine};
  g.schemes = {EqualityScheme::Kind, EqualityScheme::KindType, EqualityScheme::KindTypeLabel,
               EqualityScheme::KindTypeLabelParent};
  g.linkages = {Linkage::Single, Linkage::Complete, Linkage::Average};
  g.cuts = {0.1, 0.2, 0.3, 0.5};
  g.min_sizes = {2, 5};
  g.methods = {Method::NearestCluster, Method::Knn};
  g.ks = {1, 3, 5, 9};
  g.deltas = {0.25, 0.5, 0.75, 1.0};
  g.epsilons = {0.001, 0.01, 0.1};
  return g;
}

struct SweepConfig {
  TrainConfig train;
  ClassifierConfig classifier;
  std::size_t clustering_index = 0;

  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

/// Every combination; clustering axes vary slowest, so configs sharing a
/// model are contiguous.
inline std::vector<SweepConfig> enumerate(const SweepGrid& g) {
  std::vector<SweepConfig> out;
  out.reserve(g.size());
  std::size_t ci = 0;
  for (Metric metric : g.metrics)
    for (EqualityScheme scheme : g.schemes)
      for (Linkage linkage : g.linkages)
        for (double cut : g.cuts)
          for (int min_size : g.min_sizes) {
            TrainConfig t;
            t.matcher = g.matcher;
            t.distance.metric = metric;
            t.distance.scheme = scheme;
            t.distance.autoencoder = g.autoencoder;
            t.linkage = linkage;
            t.cut = cut;
            t.min_size = min_size;
            for (Method method : g.methods)
              for (int k : g.ks)
                for (double delta : g.deltas)
                  for (double eps : g.epsilons) {
                    ClassifierConfig c;
                    c.method = method;
                    c.k = k;
                    c.distance_threshold = delta;
                    c.vote_epsilon = eps;
                    c.cluster_distance = g.cluster_distance;
                    out.push_back({t, c, ci});
                  }
            ++ci;
          }
  return out;
}

// ---------------------------------------------------------------- TOML ----

/// Reads the TOML subset used by grid files: [section] headers, key = value
/// with strings, numbers, booleans and flat arrays, and # comments.
inline nlohmann::json parse_toml(std::istream& in) {
  using nlohmann::json;
  json root = json::object();
  json* section = &root;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw FormatError("grid line " + std::to_string(lineno) + ": " + why);
  };
  auto strip = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  // Drops a trailing comment that is not inside a string.
  auto uncomment = [](const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  };
  std::function<json(const std::string&)> value = [&](const std::string& raw) -> json {
    const std::string v = strip(raw);
    if (v.empty()) fail("missing value");
    if (v.front() == '"') {
      if (v.size() < 2 || v.back() != '"') fail("unterminated string");
      return v.substr(1, v.size() - 2);
    }
    if (v.front() == '[') {
      if (v.back() != ']') fail("unterminated array");
      json arr = json::array();
      std::string body = v.substr(1, v.size() - 2), cur;
      bool quoted = false;
      for (char ch : body) {
        if (ch == '"') quoted = !quoted;
        if (ch == ',' && !quoted) {
          if (!strip(cur).empty()) arr.push_back(value(cur));
          cur.clear();
        } else {
          cur += ch;
        }
      }
      if (!strip(cur).empty()) arr.push_back(value(cur));
      return arr;
    }
    if (v == "true") return true;
    if (v == "false") return false;
    try {
      std::size_t used = 0;
      if (v.find_first_of(".eE") == std::string::npos) {
        const long long n = std::stoll(v, &used);
        if (used == v.size()) return n;
      } else {
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
      }
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + v + "'");
    return nullptr;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = strip(uncomment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) fail("bad section header");
      const std::string name = strip(s.substr(1, s.size() - 2));
      if (root.contains(name)) fail("duplicate section [" + name + "]");
      root[name] = json::object();
      section = &root[name];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = strip(s.substr(0, eq));
    if (key.empty()) fail("empty key");
    if (section->contains(key)) fail("duplicate key '" + key + "'");
    (*section)[key] = value(s.substr(eq + 1));
  }
  return root;
}

namespace sweep_detail {

template <class T, class F>
std::vector<T> axis(const nlohmann::json& g, const char* key, std::vector<T> dflt, F conv) {
  if (!g.contains(key)) return dflt;
  const nlohmann::json& v = g.at(key);
  std::vector<T> out;
  if (v.is_array()) {
    for (const auto& x : v) out.push_back(conv(x));
  } else {
    out.push_back(conv(v));
  }
  if (out.empty()) throw ConfigError(std::string("grid axis '") + key + "' is empty");
  return out;
}

inline std::string str(const nlohmann::json& x) {
  if (!x.is_string()) throw ConfigError("expected a string in grid, got " + x.dump());
  return x.get<std::string>();
}

inline double num(const nlohmann::json& x) {
  if (!x.is_number()) throw ConfigError("expected a number in grid, got " + x.dump());
  return x.get<double>();
}

inline int integer(const nlohmann::json& x) {
  if (!x.is_number_integer()) throw ConfigError("expected an integer in grid, got " + x.dump());
  return x.get<int>();
}

}  // namespace sweep_detail

/// Grid from parsed TOML: axes under [grid], optional [matcher] and
/// [autoencoder] sections. Missing axes keep the single default value.
inline SweepGrid grid_from_json(const nlohmann::json& doc) {
  using namespace sweep_detail;
  SweepGrid g;
  const nlohmann::json empty = nlohmann::json::object();
  const nlohmann::json& a = doc.contains("grid") ? doc.at("grid") : empty;
  static const std::set<std::string> known = {"metrics", "schemes", "linkages", "cuts", "min_sizes", "methods",
                                              "ks",      "deltas",  "epsilons", "cluster_distance"};
  for (const auto& [k, v] : a.items())
    if (!known.count(k)) throw ConfigError("unknown grid axis '" + k + "'");
  g.metrics = axis(a, "metrics", g.metrics, [](const auto& x) { return parse_metric(str(x)); });
  g.schemes = axis(a, "schemes", g.schemes, [](const auto& x) { return parse_scheme(str(x)); });
  g.linkages = axis(a, "linkages", g.linkages, [](const auto& x) { return parse_linkage(str(x)); });
  g.cuts = axis(a, "cuts", g.cuts, num);
  g.min_sizes = axis(a, "min_sizes", g.min_sizes, integer);
  g.methods = axis(a, "methods", g.methods, [](const auto& x) { return parse_method(str(x)); });
  g.ks = axis(a, "ks", g.ks, integer);
  g.deltas = axis(a, "deltas", g.deltas, num);
  g.epsilons = axis(a, "epsilons", g.epsilons, num);
  if (a.contains("cluster_distance")) g.cluster_distance = parse_cluster_distance(str(a.at("cluster_distance")));
  for (double c : g.cuts)
    if (c < 0 || c > 1) throw ConfigError("cut outside [0, 1]");
  for (int m : g.min_sizes)
    if (m < 1) throw ConfigError("min size must be at least 1");
  for (int k : g.ks)
    if (k < 1) throw ConfigError("k must be at least 1");
  for (double e : g.epsilons)
    if (!(e > 0)) throw ConfigError("vote epsilon must be positive");
  if (doc.contains("matcher")) {
    const auto& m = doc.at("matcher");
    if (m.contains("min_height")) g.matcher.min_height = integer(m.at("min_height"));
    if (m.contains("min_dice")) g.matcher.min_dice = num(m.at("min_dice"));
    if (m.contains("max_recovery_size")) g.matcher.max_recovery_size = integer(m.at("max_recovery_size"));
  }
  if (doc.contains("autoencoder")) g.autoencoder = autoencoder_config_from_json(doc.at("autoencoder"));
  return g;
}

inline SweepGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grid file " + path);
  return grid_from_json(parse_toml(in));
}

// --------------------------------------------------------------- sweep ----

struct SweepRow {
  std::size_t index = 0;  // position in enumerate(grid)
  SweepConfig config;
  double validation_pr_auc = 0;
  double wall_time_ms = 0;
};

struct SweepResult {
  std::vector<SweepRow> ranked;
  std::size_t models_trained = 0;
};

struct SweepOptions {
  std::optional<std::size_t> budget;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Predictions for a whole split, or all-Unknown when the model cannot
/// produce candidates (no labels, or k exceeds the labelled scripts).
inline std::vector<LabeledPrediction> evaluate_or_unknown(const ClusterModel& m,
                                                         const std::vector<ScriptFeatures>& features,
                                                         std::span<const SubmissionPair> pairs,
                                                         const ClassifierConfig& c) {
  const auto known = m.labels();
  std::vector<LabeledPrediction> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Prediction p;
    p.method = c.method;
    if (!known.empty()) {
      try {
        p = predict_features(features[i], m, c);
      } catch (const KTooLarge&) {
      }
    }
    out.push_back({std::move(p), truth_for(pairs[i], known)});
  }
  return out;
}

/// Trains one model per clustering combination on the train split, scores
/// each classifier combination by validation PR-AUC and ranks descending.
inline SweepResult sweep(const Split<SubmissionPair>& data, const SweepGrid& grid, const SweepOptions& opt = {}) {
  using Clock = std::chrono::steady_clock;
  if (grid.size() == 0) throw ConfigError("sweep grid is empty");
  std::vector<SweepConfig> configs = enumerate(grid);
  if (opt.budget && *opt.budget < configs.size()) configs.resize(*opt.budget);
  if (configs.empty()) throw ConfigError("sweep budget leaves no combination");
  if (data.validation.empty()) throw ConfigError("validation split is empty");

  const TrainingSet ts = prepare_training(data.train, grid.matcher);
  const std::vector<EditScript> train_scripts = ts.scripts();

  // Validation scripts depend only on the pool and the matcher.
  std::vector<EditScript> val_scripts;
  for (const auto& p : data.validation) val_scripts.push_back(shortest_script(p.incorrect, ts.pool, ts.matcher));

  // Contiguous runs sharing a clustering.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t i = 0; i < configs.size(); ++i)
    if (i == 0 || configs[i].clustering_index != configs[i - 1].clustering_index)
      groups.emplace_back(i, i + 1);
    else
      groups.back().second = i + 1;

  // Fitted metric, features and matrix per distance config.
  struct Fitted {
    ScriptMetric metric;
    std::vector<ScriptFeatures> train, validation;
    DistanceMatrix matrix;
  };
  std::map<std::pair<Metric, EqualityScheme>, std::shared_ptr<const Fitted>> fitted;
  for (const auto& [b, e] : groups) {
    const DistanceConfig& dc = configs[b].train.distance;
    auto& slot = fitted[{dc.metric, dc.scheme}];
    if (slot) continue;
    auto f = std::make_shared<Fitted>();
    f->metric = ScriptMetric::fit(dc, train_scripts);
    for (const auto& s : train_scripts) f->train.push_back(f->metric.features(s));
    for (const auto& s : val_scripts) f->validation.push_back(f->metric.features(s));
    f->matrix = distance_matrix(f->train, f->metric);
    slot = std::move(f);
  }

  std::vector<SweepRow> rows(configs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t gi = next.fetch_add(1);
      if (gi >= groups.size()) return;
      try {
        const auto [b, e] = groups[gi];
        const auto t0 = Clock::now();
        const DistanceConfig& dc = configs[b].train.distance;
        const Fitted& f = *fitted.at({dc.metric, dc.scheme});
        ClusterModel m = cluster_training(ts, f.metric, f.train, f.matrix, configs[b].train);
        auto_label(m);
        const double train_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        for (std::size_t i = b; i < e; ++i) {
          const auto t1 = Clock::now();
          const auto preds = evaluate_or_unknown(m, f.validation, data.validation, configs[i].classifier);
          const PRCurve c = pr_curve(preds, default_thresholds(), configs[i].classifier.distance_threshold);
          const double eval_ms = std::chrono::duration<double, std::milli>(Clock::now() - t1).count();
          rows[i] = {i, configs[i], c.auc, eval_ms + (i == b ? train_ms : 0.0)};
        }
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        next = groups.size();
        return;
      }
    }
  };
  unsigned n = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, groups.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.validation_pr_auc > b.validation_pr_auc; });
  return {std::move(rows), groups.size()};
}

struct TestRun {
  ClusterModel model;
  PRCurve curve;
};

/// Retrains the chosen configuration on train and scores it once on test.
inline TestRun best_on_test(const SweepConfig& cfg, const Split<SubmissionPair>& data) {
  if (data.test.empty()) throw ConfigError("test split is empty");
  TestRun r;
  r.model = train_model(data.train, cfg.train);
  auto_label(r.model);
  r.model.classifier = cfg.classifier;
  std::vector<ScriptFeatures> f;
  for (const auto& p : data.test) f.push_back(r.model.metric.features(script_for(p.incorrect, r.model)));
  r.curve = pr_curve(evaluate_or_unknown(r.model, f, data.test, cfg.classifier), default_thresholds(),
                     cfg.classifier.distance_threshold);
  return r;
}

// ----------------------------------------------------------------- CSV ----

/// Shortest text that reads back as the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void write_results_csv(std::ostream& out, const SweepResult& r) {
  out << "rank,metric,scheme,linkage,cut,min_size,method,k,distance_threshold,vote_epsilon,validation_pr_auc,"
         "wall_time_ms\n";
  std::size_t rank = 1;
  for (const auto& row : r.ranked) {
    const auto& t = row.config.train;
    const auto& c = row.config.classifier;
    char ms[32];
    std::snprintf(ms, sizeof ms, "%.3f", row.wall_time_ms);
    out << rank++ << ',' << to_string(t.distance.metric) << ',' << to_string(t.distance.scheme) << ','
        << to_string(t.linkage) << ',' << format_double(t.cut) << ',' << t.min_size << ',' << to_string(c.method)
        << ',' << c.k << ',' << format_double(c.distance_threshold) << ',' << format_double(c.vote_epsilon) << ','
        << format_double(row.validation_pr_auc) << ',' << ms << '\n';
  }
}

inline void write_curve_csv(std::ostream& out, const PRCurve& c) {
  out << "theta,recall,precision\n";
  for (const auto& p : c.points)
    out << (p.theta ? format_double(*p.theta) : "") << ',' << format_double(p.recall) << ','
        << format_double(p.precision) << '\n';
}

}  // namespace fixscope
