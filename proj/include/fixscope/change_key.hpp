#pragma once

// Projection of edit actions onto comparable keys, and multiset Jaccard.

#include <algorithm>
#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixscope/edit_script.hpp"
#include "fixscope/error.hpp"

namespace fixscope {

/// How much of an action counts when deciding whether two actions are the
/// same change. Each level adds one field to the previous one.
enum class EqualityScheme { Kind, KindType, KindTypeLabel, KindTypeLabelParent };

inline std::string_view to_string(EqualityScheme s) {
  switch (s) {
    case EqualityScheme::Kind: return "KIND";
    case EqualityScheme::KindType: return "KIND_TYPE";
    case EqualityScheme::KindTypeLabel: return "KIND_TYPE_LABEL";
    case EqualityScheme::KindTypeLabelParent: return "KIND_TYPE_LABEL_PARENT";
  }
  return "?";
}

inline EqualityScheme parse_scheme(std::string_view s) {
  for (auto v : {EqualityScheme::Kind, EqualityScheme::KindType, EqualityScheme::KindTypeLabel,
                 EqualityScheme::KindTypeLabelParent})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown equality scheme '" + std::string(s) + "'");
}

inline constexpr EqualityScheme kStrictestScheme = EqualityScheme::KindTypeLabelParent;

struct ChangeKey {
  EditKind kind = EditKind::Insert;
  std::optional<std::string> node_type;
  std::optional<std::string> label;
  std::optional<std::string> parent_type;

  friend auto operator<=>(const ChangeKey& a, const ChangeKey& b) {
    return std::tie(a.kind, a.node_type, a.label, a.parent_type) <=>
           std::tie(b.kind, b.node_type, b.label, b.parent_type);
  }
  friend bool operator==(const ChangeKey&, const ChangeKey&) = default;
};

inline std::string to_string(const ChangeKey& k) {
  std::string out(to_string(k.kind));
  if (k.node_type) out += ":" + *k.node_type;
  if (k.label) out += ":" + *k.label;
  if (k.parent_type) out += "@" + *k.parent_type;
  return out;
}

/// Projects one action. The label of an Update key is "old->new", so a key
/// captures what changed, not only where.
inline ChangeKey project(const EditAction& a, EqualityScheme scheme) {
  ChangeKey k;
  k.kind = a.kind;
  if (scheme >= EqualityScheme::KindType) k.node_type = a.node_type;
  if (scheme >= EqualityScheme::KindTypeLabel)
    k.label = a.kind == EditKind::Update ? a.label + "->" + a.new_label.value_or("") : a.label;
  if (scheme >= EqualityScheme::KindTypeLabelParent) k.parent_type = a.parent_type;
  return k;
}

/// Keys in script order (used for deterministic tie-breaking).
inline std::vector<ChangeKey> key_sequence(const EditScript& s, EqualityScheme scheme) {
  std::vector<ChangeKey> out;
  out.reserve(s.actions.size());
  for (const auto& a : s.actions) out.push_back(project(a, scheme));
  return out;
}

/// Multiset of change keys: key -> multiplicity.
using KeyBag = std::map<ChangeKey, int>;

inline KeyBag project(const EditScript& s, EqualityScheme scheme) {
  KeyBag bag;
  for (const auto& a : s.actions) ++bag[project(a, scheme)];
  return bag;
}

inline int bag_size(const KeyBag& b) {
  int n = 0;
  for (const auto& [k, c] : b) n += c;
  return n;
}

/// 1 - |a ∩ b| / |a ∪ b| with min/max multiplicities; 0 for two empty bags.
inline double jaccard_distance(const KeyBag& a, const KeyBag& b) {
  long inter = 0, uni = 0;
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

inline nlohmann::json to_json(const ChangeKey& k) {
  nlohmann::json j = {{"kind", to_string(k.kind)}};
  if (k.node_type) j["node_type"] = *k.node_type;
  if (k.label) j["label"] = *k.label;
  if (k.parent_type) j["parent_type"] = *k.parent_type;
  return j;
}

inline ChangeKey change_key_from_json(const nlohmann::json& j) {
  try {
    ChangeKey k;
    k.kind = parse_edit_kind(j.at("kind").get<std::string>());
    if (j.contains("node_type")) k.node_type = j.at("node_type").get<std::string>();
    if (j.contains("label")) k.label = j.at("label").get<std::string>();
    if (j.contains("parent_type")) k.parent_type = j.at("parent_type").get<std::string>();
    return k;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed change key: ") + e.what());
  }
}

}  // namespace fixscope
