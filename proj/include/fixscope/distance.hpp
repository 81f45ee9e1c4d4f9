#pragma once

// Script-to-script distance: one of three metric families under an equality
// scheme, plus whatever artifacts the family needs (vocabulary, autoencoder).

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixscope/autoencoder.hpp"
#include "fixscope/bow.hpp"
#include "fixscope/change_key.hpp"
#include "fixscope/edit_script.hpp"
#include "fixscope/error.hpp"

namespace fixscope {

enum class Metric { Jaccard, BowCosine, AeCosine };

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Jaccard: return "JACCARD";
    case Metric::BowCosine: return "BOW_COSINE";
    case Metric::AeCosine: return "AE_COSINE";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  for (auto m : {Metric::Jaccard, Metric::BowCosine, Metric::AeCosine})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown metric '" + std::string(s) + "'");
}

struct DistanceConfig {
  Metric metric = Metric::Jaccard;
  EqualityScheme scheme = EqualityScheme::KindType;
  int min_df = 1;
  AutoencoderConfig autoencoder;

  friend bool operator==(const DistanceConfig&, const DistanceConfig&) = default;
};

/// Everything a distance needs to know about one script, computed once.
struct ScriptFeatures {
  KeyBag bag;
  BowVector bow;
  Embedding embedding;
};

class ScriptMetric {
 public:
  ScriptMetric() = default;
  ScriptMetric(DistanceConfig config, std::optional<Vocabulary> vocab, std::optional<Autoencoder> ae)
      : config_(config), vocab_(std::move(vocab)), ae_(std::move(ae)) {
    if (config_.metric != Metric::Jaccard && !vocab_)
      throw ConfigError(std::string(to_string(config_.metric)) + " needs a vocabulary");
    if (vocab_ && vocab_->scheme() != config_.scheme)
      throw SchemeMismatch("vocabulary scheme differs from distance scheme");
    if (config_.metric == Metric::AeCosine) {
      if (!ae_) throw ConfigError("AE_COSINE needs a trained autoencoder");
      if (static_cast<std::size_t>(ae_->vocab_size) != vocab_->size())
        throw DimensionMismatch("autoencoder input size differs from vocabulary size");
    }
  }

  /// Fits the vocabulary and autoencoder the metric family needs on `training`.
  static ScriptMetric fit(const DistanceConfig& config, std::span<const EditScript> training) {
    if (config.metric == Metric::Jaccard) return ScriptMetric(config, std::nullopt, std::nullopt);
    Vocabulary vocab = build_vocabulary(training, config.scheme, config.min_df);
    if (config.metric == Metric::BowCosine) return ScriptMetric(config, std::move(vocab), std::nullopt);
    std::vector<BowVector> vectors;
    vectors.reserve(training.size());
    for (const auto& s : training) vectors.push_back(vectorize(s, config.scheme, vocab));
    Autoencoder ae = train_autoencoder(vectors, static_cast<int>(vocab.size()), config.autoencoder);
    return ScriptMetric(config, std::move(vocab), std::move(ae));
  }

  const DistanceConfig& config() const { return config_; }
  const std::optional<Vocabulary>& vocabulary() const { return vocab_; }
  const std::optional<Autoencoder>& autoencoder() const { return ae_; }

  ScriptFeatures features(const EditScript& s) const {
    ScriptFeatures f;
    switch (config_.metric) {
      case Metric::Jaccard:
        f.bag = project(s, config_.scheme);
        break;
      case Metric::BowCosine:
        f.bow = vectorize(s, config_.scheme, *vocab_);
        break;
      case Metric::AeCosine:
        f.bow = vectorize(s, config_.scheme, *vocab_);
        f.embedding = embed(f.bow, *ae_);
        break;
    }
    return f;
  }

  double distance(const ScriptFeatures& a, const ScriptFeatures& b) const {
    switch (config_.metric) {
      case Metric::Jaccard: return jaccard_distance(a.bag, b.bag);
      case Metric::BowCosine: return cosine_distance(a.bow, b.bow);
      case Metric::AeCosine: return cosine_distance(a.embedding, b.embedding, true);
    }
    return 1.0;
  }

  double distance(const EditScript& a, const EditScript& b) const {
    return distance(features(a), features(b));
  }

 private:
  DistanceConfig config_;
  std::optional<Vocabulary> vocab_;
  std::optional<Autoencoder> ae_;
};

inline double script_distance(const EditScript& a, const EditScript& b, const ScriptMetric& metric) {
  return metric.distance(a, b);
}

inline nlohmann::json to_json(const AutoencoderConfig& c) {
  return {{"hidden_dim", c.hidden_dim}, {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"seed", c.seed}};
}

inline AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j) {
  AutoencoderConfig c;
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  return c;
}

inline nlohmann::json to_json(const DistanceConfig& c) {
  return {{"metric", to_string(c.metric)}, {"scheme", to_string(c.scheme)}, {"min_df", c.min_df},
          {"autoencoder", to_json(c.autoencoder)}};
}

inline DistanceConfig distance_config_from_json(const nlohmann::json& j) {
  try {
    DistanceConfig c;
    c.metric = parse_metric(j.at("metric").get<std::string>());
    c.scheme = parse_scheme(j.at("scheme").get<std::string>());
    c.min_df = j.value("min_df", 1);
    if (j.contains("autoencoder")) c.autoencoder = autoencoder_config_from_json(j.at("autoencoder"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed distance config: ") + e.what());
  }
}

}  // namespace fixscope
