#pragma once

// Splits, precision-recall curves and PR-AUC.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "fixscope/classify.hpp"
#include "fixscope/error.hpp"
#include "fixscope/random.hpp"
#include "fixscope/tree_io.hpp"

namespace fixscope {

struct SplitSpec {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
};

struct SplitSizes {
  std::size_t train = 0, validation = 0, test = 0;
  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

/// Validation and test get ceil(n * fraction) items (minus 1e-9 so exact
/// products are not bumped up); train gets the remainder.
inline SplitSizes split_sizes(std::size_t n, const SplitSpec& s) {
  for (double f : {s.train, s.validation, s.test})
    if (f < 0) throw ConfigError("split fractions must be non-negative");
  if (std::fabs(s.train + s.validation + s.test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  auto part = [n](double f) {
    return std::min(n, static_cast<std::size_t>(std::ceil(static_cast<double>(n) * f - 1e-9)));
  };
  SplitSizes z;
  z.validation = part(s.validation);
  z.test = std::min(n - z.validation, part(s.test));
  z.train = n - z.validation - z.test;
  return z;
}

template <class T>
struct Split {
  std::vector<T> train, validation, test;
};

/// Seeded shuffle, then validation, test and train slices in that order.
template <class T>
Split<T> split(std::span<const T> items, const SplitSpec& spec) {
  if (items.empty()) throw ConfigError("cannot split an empty corpus");
  const SplitSizes z = split_sizes(items.size(), spec);
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);
  Split<T> out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const T& x = items[order[k]];
    if (k < z.validation)
      out.validation.push_back(x);
    else if (k < z.validation + z.test)
      out.test.push_back(x);
    else
      out.train.push_back(x);
  }
  return out;
}

inline constexpr const char* kNovelLabel = "NOVEL";

struct LabeledPrediction {
  Prediction prediction;
  std::string truth;
};

struct PRPoint {
  double recall = 0;
  double precision = 1;
  std::optional<double> theta;  // absent for the two anchors

  friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

struct PRCurve {
  std::vector<PRPoint> points;
  double auc = 0;
};

/// 0, 0.05, ..., 1.
inline std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 20; ++i) t.push_back(i / 20.0);
  return t;
}

/// Trapezoidal area of the polyline through the points, in order.
inline double trapezoid_auc(std::span<const PRPoint> pts) {
  double a = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    a += (pts[i].recall - pts[i - 1].recall) * (pts[i].precision + pts[i - 1].precision) / 2.0;
  return a;
}

/// Precision and recall at one confidence threshold.
inline PRPoint pr_point(std::span<const LabeledPrediction> items, double theta, double delta) {
  std::size_t issued = 0, correct = 0;
  for (const auto& it : items) {
    const Prediction p = apply_rejection(it.prediction, theta, delta);
    if (!p.label) continue;
    ++issued;
    if (*p.label == it.truth) ++correct;
  }
  PRPoint pt;
  pt.theta = theta;
  pt.precision = issued == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(issued);
  pt.recall = static_cast<double>(correct) / static_cast<double>(items.size());
  return pt;
}

/// One measured point per distinct (recall, precision), sorted by recall then
/// descending precision, between the anchors (0, 1) and (1, 0).
inline PRCurve pr_curve(std::span<const LabeledPrediction> items, std::span<const double> thresholds,
                        double delta = std::numeric_limits<double>::infinity()) {
  if (items.empty()) throw EmptyPredictionSet("no predictions to evaluate");
  std::vector<PRPoint> measured;
  for (double t : thresholds) measured.push_back(pr_point(items, t, delta));
  std::stable_sort(measured.begin(), measured.end(), [](const PRPoint& a, const PRPoint& b) {
    return std::make_tuple(a.recall, -a.precision, *a.theta) < std::make_tuple(b.recall, -b.precision, *b.theta);
  });
  PRCurve c;
  c.points.push_back({0.0, 1.0, std::nullopt});
  for (std::size_t i = 0; i < measured.size(); ++i)
    if (i == 0 || measured[i].recall != measured[i - 1].recall || measured[i].precision != measured[i - 1].precision)
      c.points.push_back(measured[i]);
  c.points.push_back({1.0, 0.0, std::nullopt});
  c.auc = trapezoid_auc(c.points);
  return c;
}

inline PRCurve pr_curve(std::span<const LabeledPrediction> items) {
  const auto t = default_thresholds();
  return pr_curve(items, t);
}

/// Truth labels the model never learned are replaced by kNovelLabel.
inline std::string truth_for(const SubmissionPair& p, const std::set<std::string>& known) {
  if (!p.ground_truth_label) throw ConfigError("pair " + p.pair_id + " has no ground-truth label");
  return known.count(*p.ground_truth_label) ? *p.ground_truth_label : std::string(kNovelLabel);
}

/// Candidate predictions (thresholds not yet applied) for every pair.
inline std::vector<LabeledPrediction> evaluate(const ClusterModel& m, std::span<const SubmissionPair> pairs,
                                               const ClassifierConfig& c) {
  const auto known = m.labels();
  std::vector<LabeledPrediction> out;
  for (const auto& p : pairs) {
    const ScriptFeatures f = m.metric.features(script_for(p.incorrect, m));
    out.push_back({predict_features(f, m, c), truth_for(p, known)});
  }
  return out;
}

}  // namespace fixscope
