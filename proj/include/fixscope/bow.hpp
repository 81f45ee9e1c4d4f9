#pragma once

// Bag-of-words vectors over change-key vocabularies, and cosine distance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fixscope/change_key.hpp"
#include "fixscope/edit_script.hpp"
#include "fixscope/error.hpp"

namespace fixscope {

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(EqualityScheme scheme, std::vector<ChangeKey> keys) : scheme_(scheme), keys_(std::move(keys)) {
    std::sort(keys_.begin(), keys_.end());
    keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
    for (std::size_t i = 0; i < keys_.size(); ++i) index_.emplace(keys_[i], static_cast<int>(i));
  }

  EqualityScheme scheme() const { return scheme_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }
  const std::vector<ChangeKey>& keys() const { return keys_; }

  std::optional<int> find(const ChangeKey& k) const {
    auto it = index_.find(k);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// FNV-1a over the scheme and keys; identifies the vocabulary in vectors.
  std::uint64_t id() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
      h ^= 0x1f;
      h *= 0x100000001b3ULL;
    };
    mix(to_string(scheme_));
    for (const auto& k : keys_) mix(to_string(k));
    return h;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.scheme_ == b.scheme_ && a.keys_ == b.keys_;
  }

 private:
  EqualityScheme scheme_ = EqualityScheme::Kind;
  std::vector<ChangeKey> keys_;
  std::map<ChangeKey, int> index_;
};

struct BowVector {
  std::map<int, int> counts;  // vocabulary index -> count >= 1
  std::size_t dim = 0;
  std::uint64_t vocab_id = 0;

  int total() const {
    int n = 0;
    for (auto [i, c] : counts) n += c;
    return n;
  }
  bool zero() const { return counts.empty(); }
  std::vector<double> dense() const {
    std::vector<double> out(dim, 0.0);
    for (auto [i, c] : counts) out[static_cast<std::size_t>(i)] = c;
    return out;
  }

  friend bool operator==(const BowVector&, const BowVector&) = default;
};

/// Keys that occur in at least min_df distinct scripts.
inline Vocabulary build_vocabulary(std::span<const EditScript> scripts, EqualityScheme scheme,
                                   int min_df = 1) {
  if (min_df < 1) throw ConfigError("min_df must be at least 1");
  std::map<ChangeKey, int> df;
  for (const auto& s : scripts)
    for (const auto& [k, c] : project(s, scheme)) ++df[k];
  std::vector<ChangeKey> keys;
  for (const auto& [k, n] : df)
    if (n >= min_df) keys.push_back(k);
  return Vocabulary(scheme, std::move(keys));
}

/// Counts in-vocabulary keys; the number of dropped actions goes to *oov.
inline BowVector vectorize(const EditScript& s, EqualityScheme scheme, const Vocabulary& vocab,
                           std::size_t* oov = nullptr) {
  if (scheme != vocab.scheme())
    throw SchemeMismatch("script projected with " + std::string(to_string(scheme)) +
                         " but vocabulary uses " + std::string(to_string(vocab.scheme())));
  BowVector v;
  v.dim = vocab.size();
  v.vocab_id = vocab.id();
  std::size_t dropped = 0;
  for (const auto& a : s.actions) {
    if (auto i = vocab.find(project(a, scheme)))
      ++v.counts[*i];
    else
      ++dropped;
  }
  if (oov) *oov = dropped;
  return v;
}

namespace detail {

// 1 - cos, with both-zero -> 0 and one-zero -> 1.
inline double one_minus_cosine(double dot, double na, double nb) {
  if (na == 0.0 && nb == 0.0) return 0.0;
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / std::sqrt(na * nb);
}

}  // namespace detail

inline double cosine_distance(const BowVector& a, const BowVector& b) {
  if (a.dim != b.dim) throw DimensionMismatch("bag-of-words vectors differ in dimension");
  double dot = 0, na = 0, nb = 0;
  for (auto [i, c] : a.counts) na += static_cast<double>(c) * c;
  for (auto [i, c] : b.counts) nb += static_cast<double>(c) * c;
  auto ia = a.counts.begin(), ib = b.counts.begin();
  while (ia != a.counts.end() && ib != b.counts.end()) {
    if (ia->first < ib->first)
      ++ia;
    else if (ib->first < ia->first)
      ++ib;
    else {
      dot += static_cast<double>(ia->second) * ib->second;
      ++ia;
      ++ib;
    }
  }
  return std::clamp(detail::one_minus_cosine(dot, na, nb), 0.0, 1.0);
}

/// Dense cosine distance. With rescale the raw value in [0, 2] is halved,
/// for vectors that may have negative coordinates.
inline double cosine_distance(std::span<const double> a, std::span<const double> b, bool rescale = false) {
  if (a.size() != b.size()) throw DimensionMismatch("vectors differ in dimension");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double raw = detail::one_minus_cosine(dot, na, nb);
  if (rescale) return std::clamp(raw / 2.0, 0.0, 1.0);
  return std::clamp(raw, 0.0, 1.0);
}

inline nlohmann::json to_json(const Vocabulary& v) {
  nlohmann::json keys = nlohmann::json::array();
  for (const auto& k : v.keys()) keys.push_back(to_json(k));
  return {{"scheme", to_string(v.scheme())}, {"keys", keys}};
}

inline Vocabulary vocabulary_from_json(const nlohmann::json& j) {
  try {
    std::vector<ChangeKey> keys;
    for (const auto& k : j.at("keys")) keys.push_back(change_key_from_json(k));
    return Vocabulary(parse_scheme(j.at("scheme").get<std::string>()), std::move(keys));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed vocabulary: ") + e.what());
  }
}

}  // namespace fixscope
