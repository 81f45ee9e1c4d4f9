#pragma once

// One-hidden-layer autoencoder over L2-normalised bag-of-words vectors.
//   h = relu(W1 x + b1),  y = W2 h + b2,  loss = mean over batch of mean (y - x)^2
// Trained by plain mini-batch SGD, single-threaded so runs are reproducible.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixscope/bow.hpp"
#include "fixscope/error.hpp"
#include "fixscope/random.hpp"

namespace fixscope {

struct AutoencoderConfig {
  int hidden_dim = 32;
  double learning_rate = 0.05;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;

  friend bool operator==(const AutoencoderConfig&, const AutoencoderConfig&) = default;
};

struct Autoencoder {
  int vocab_size = 0;
  int hidden_dim = 0;
  std::vector<double> w1;  // hidden_dim x vocab_size, row-major
  std::vector<double> b1;  // hidden_dim
  std::vector<double> w2;  // vocab_size x hidden_dim, row-major
  std::vector<double> b2;  // vocab_size
  double final_loss = 0.0;

  friend bool operator==(const Autoencoder&, const Autoencoder&) = default;
};

using Embedding = std::vector<double>;

/// Dense copy scaled to unit L2 norm (zero stays zero).
inline std::vector<double> normalized_input(const BowVector& v) {
  std::vector<double> x = v.dense();
  double n = 0;
  for (double e : x) n += e * e;
  if (n > 0) {
    n = std::sqrt(n);
    for (double& e : x) e /= n;
  }
  return x;
}

inline void validate(const AutoencoderConfig& c) {
  if (c.hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
  if (!(c.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (c.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (c.batch_size < 1) throw ConfigError("batch_size must be positive");
}

/// Every parameter uniform in [-1/sqrt(V), 1/sqrt(V)].
inline Autoencoder init_autoencoder(int vocab_size, int hidden_dim, std::uint64_t seed) {
  Autoencoder m;
  m.vocab_size = vocab_size;
  m.hidden_dim = hidden_dim;
  const double r = vocab_size > 0 ? 1.0 / std::sqrt(static_cast<double>(vocab_size)) : 1.0;
  Rng rng(seed);
  auto fill = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (double& e : v) e = rng.uniform(-r, r);
  };
  const auto V = static_cast<std::size_t>(vocab_size), d = static_cast<std::size_t>(hidden_dim);
  fill(m.w1, d * V);
  fill(m.b1, d);
  fill(m.w2, V * d);
  fill(m.b2, V);
  return m;
}

namespace detail {

inline void encode(const Autoencoder& m, std::span<const double> x, std::vector<double>& z,
                   std::vector<double>& h) {
  const auto V = static_cast<std::size_t>(m.vocab_size), d = static_cast<std::size_t>(m.hidden_dim);
  z.assign(d, 0.0);
  h.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = m.b1[j];
    const double* row = &m.w1[j * V];
    for (std::size_t i = 0; i < V; ++i) s += row[i] * x[i];
    z[j] = s;
    h[j] = s > 0 ? s : 0.0;
  }
}

inline void decode(const Autoencoder& m, std::span<const double> h, std::vector<double>& y) {
  const auto V = static_cast<std::size_t>(m.vocab_size), d = static_cast<std::size_t>(m.hidden_dim);
  y.assign(V, 0.0);
  for (std::size_t i = 0; i < V; ++i) {
    double s = m.b2[i];
    const double* row = &m.w2[i * d];
    for (std::size_t j = 0; j < d; ++j) s += row[j] * h[j];
    y[i] = s;
  }
}

}  // namespace detail

/// Gradient of the loss with the same layout as the parameters.
struct AutoencoderGradient {
  std::vector<double> w1, b1, w2, b2;
};

/// Mean reconstruction loss over `batch` (already normalised inputs); when
/// grad is given it receives the exact gradient.
inline double reconstruction_loss(const Autoencoder& m, std::span<const std::vector<double>> batch,
                                  AutoencoderGradient* grad = nullptr) {
  const auto V = static_cast<std::size_t>(m.vocab_size), d = static_cast<std::size_t>(m.hidden_dim);
  if (grad) {
    grad->w1.assign(d * V, 0.0);
    grad->b1.assign(d, 0.0);
    grad->w2.assign(V * d, 0.0);
    grad->b2.assign(V, 0.0);
  }
  if (batch.empty() || V == 0) return 0.0;
  const double scale = 1.0 / (static_cast<double>(batch.size()) * static_cast<double>(V));
  double loss = 0;
  std::vector<double> z, h, y, dy(V), dh(d);
  for (const auto& x : batch) {
    detail::encode(m, x, z, h);
    detail::decode(m, h, y);
    for (std::size_t i = 0; i < V; ++i) {
      const double e = y[i] - x[i];
      loss += e * e;
      dy[i] = 2.0 * e * scale;
    }
    if (!grad) continue;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t i = 0; i < V; ++i) {
      grad->b2[i] += dy[i];
      for (std::size_t j = 0; j < d; ++j) {
        grad->w2[i * d + j] += dy[i] * h[j];
        dh[j] += m.w2[i * d + j] * dy[i];
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (z[j] <= 0) continue;
      grad->b1[j] += dh[j];
      for (std::size_t i = 0; i < V; ++i) grad->w1[j * V + i] += dh[j] * x[i];
    }
  }
  return loss * scale;
}

/// Trains on the given vectors, all of dimension vocab_size. final_loss is
/// the full-data loss after the last epoch (the initial loss for 0 epochs).
inline Autoencoder train_autoencoder(std::span<const BowVector> vectors, int vocab_size,
                                     const AutoencoderConfig& config) {
  validate(config);
  if (vectors.empty()) throw ConfigError("autoencoder training set is empty");
  std::vector<std::vector<double>> data;
  data.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (v.dim != static_cast<std::size_t>(vocab_size))
      throw DimensionMismatch("training vector dimension differs from vocabulary size");
    data.push_back(normalized_input(v));
  }
  Autoencoder m = init_autoencoder(vocab_size, config.hidden_dim, config.seed);
  Rng order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::vector<double>> batch;
  AutoencoderGradient g;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + bs); ++k) batch.push_back(data[order[k]]);
      reconstruction_loss(m, batch, &g);
      auto step = [&](std::vector<double>& p, const std::vector<double>& dp) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= config.learning_rate * dp[i];
      };
      step(m.w1, g.w1);
      step(m.b1, g.b1);
      step(m.w2, g.w2);
      step(m.b2, g.b2);
    }
  }
  m.final_loss = reconstruction_loss(m, data);
  return m;
}

inline Embedding embed(const BowVector& v, const Autoencoder& m) {
  if (v.dim != static_cast<std::size_t>(m.vocab_size))
    throw DimensionMismatch("vector dimension " + std::to_string(v.dim) + " differs from autoencoder input " +
                            std::to_string(m.vocab_size));
  std::vector<double> z, h;
  detail::encode(m, normalized_input(v), z, h);
  return h;
}

inline nlohmann::json to_json(const Autoencoder& m) {
  return {{"vocab_size", m.vocab_size}, {"hidden_dim", m.hidden_dim}, {"w1", m.w1}, {"b1", m.b1},
          {"w2", m.w2}, {"b2", m.b2}, {"final_loss", m.final_loss}};
}

inline Autoencoder autoencoder_from_json(const nlohmann::json& j) {
  try {
    Autoencoder m;
    m.vocab_size = j.at("vocab_size").get<int>();
    m.hidden_dim = j.at("hidden_dim").get<int>();
    m.w1 = j.at("w1").get<std::vector<double>>();
    m.b1 = j.at("b1").get<std::vector<double>>();
    m.w2 = j.at("w2").get<std::vector<double>>();
    m.b2 = j.at("b2").get<std::vector<double>>();
    m.final_loss = j.value("final_loss", 0.0);
    const auto V = static_cast<std::size_t>(m.vocab_size), d = static_cast<std::size_t>(m.hidden_dim);
    if (m.w1.size() != d * V || m.b1.size() != d || m.w2.size() != V * d || m.b2.size() != V)
      throw FormatError("autoencoder weight shapes do not match its dimensions");
    for (const auto* v : {&m.w1, &m.b1, &m.w2, &m.b2})
      for (double e : *v)
        if (!std::isfinite(e)) throw FormatError("autoencoder weight is not finite");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed autoencoder: ") + e.what());
  }
}

}  // namespace fixscope
