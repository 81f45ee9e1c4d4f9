#pragma once

// Edit scripts: Chawathe-style generation from a mapping, and application.
//
// Actions address nodes of an evolving working tree. Source nodes keep their
// pre-order ids; each Insert creates the next id after the source's last
// (src.size(), src.size() + 1, ...). Both trees hang below a virtual root
// with id kVirtualRoot, which lets scripts replace the root itself.

#include <algorithm>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixscope/ast.hpp"
#include "fixscope/error.hpp"
#include "fixscope/matching.hpp"

namespace fixscope {

inline constexpr NodeId kVirtualRoot = -1;

enum class EditKind { Insert, Delete, Update, Move };

inline std::string_view to_string(EditKind k) {
  switch (k) {
    case EditKind::Insert: return "Insert";
    case EditKind::Delete: return "Delete";
    case EditKind::Update: return "Update";
    case EditKind::Move: return "Move";
  }
  return "?";
}

inline EditKind parse_edit_kind(std::string_view s) {
  if (s == "Insert") return EditKind::Insert;
  if (s == "Delete") return EditKind::Delete;
  if (s == "Update") return EditKind::Update;
  if (s == "Move") return EditKind::Move;
  throw FormatError("unknown edit kind '" + std::string(s) + "'");
}

struct EditAction {
  EditKind kind = EditKind::Update;
  NodeId node = kNoNode;       // working-tree id of the affected node
  std::string node_type;
  std::string label;           // label before the action
  std::string parent_type;     // Insert/Move: target parent; otherwise current parent
  std::optional<NodeId> target_parent;
  std::optional<std::size_t> position;
  std::optional<std::string> new_label;

  friend bool operator==(const EditAction&, const EditAction&) = default;
};

struct EditScript {
  std::vector<EditAction> actions;
  std::string src_ref;
  std::string dst_ref;

  std::size_t length() const { return actions.size(); }
  bool empty() const { return actions.empty(); }

  friend bool operator==(const EditScript&, const EditScript&) = default;
};

namespace detail {

inline constexpr NodeId kDetached = -2;

class WorkTree {
 public:
  struct Node {
    std::string type;
    std::string label;
    NodeId parent = kDetached;
    std::vector<NodeId> children;
  };

  explicit WorkTree(const AstTree& src) {
    nodes_.reserve(src.size() * 2);
    for (const AstNode& n : src.nodes())
      nodes_.push_back({n.type, n.label, n.parent == kNoNode ? kVirtualRoot : n.parent, n.children});
    root_.children = {src.root()};
  }

  bool exists(NodeId id) const {
    return id == kVirtualRoot || (id >= 0 && static_cast<std::size_t>(id) < nodes_.size());
  }

  bool attached(NodeId id) const {
    if (!exists(id)) return false;
    while (id != kVirtualRoot) {
      id = at(id).parent;
      if (id == kDetached) return false;
    }
    return true;
  }

  // True when `node` is `ancestor` or lies below it.
  bool within(NodeId node, NodeId ancestor) const {
    for (; node != kDetached; node = node == kVirtualRoot ? kDetached : at(node).parent)
      if (node == ancestor) return true;
    return false;
  }

  Node& at(NodeId id) { return id == kVirtualRoot ? root_ : nodes_[static_cast<std::size_t>(id)]; }
  const Node& at(NodeId id) const {
    return id == kVirtualRoot ? root_ : nodes_[static_cast<std::size_t>(id)];
  }
  NodeId next_id() const { return static_cast<NodeId>(nodes_.size()); }
  const std::vector<NodeId>& children(NodeId id) const { return at(id).children; }
  NodeId parent(NodeId id) const { return at(id).parent; }

  std::size_t position(NodeId id) const {
    const auto& sib = at(at(id).parent).children;
    return static_cast<std::size_t>(std::find(sib.begin(), sib.end(), id) - sib.begin());
  }

  NodeId insert(std::string type, std::string label, NodeId parent, std::size_t pos) {
    const NodeId id = next_id();
    nodes_.push_back({std::move(type), std::move(label), kDetached, {}});
    attach(id, parent, pos);
    return id;
  }

  void detach(NodeId id) {
    Node& n = at(id);
    auto& sib = at(n.parent).children;
    sib.erase(std::find(sib.begin(), sib.end(), id));
    n.parent = kDetached;
  }

  void attach(NodeId id, NodeId parent, std::size_t pos) {
    auto& kids = at(parent).children;
    kids.insert(kids.begin() + static_cast<std::ptrdiff_t>(pos), id);
    at(id).parent = parent;
  }

  std::vector<NodeId> post_order() const {
    std::vector<NodeId> out;
    post_order_from(kVirtualRoot, out);
    out.pop_back();  // virtual root
    return out;
  }

  NodeSpec to_spec(NodeId id) const {
    const Node& n = at(id);
    NodeSpec s(n.type, n.label);
    for (NodeId c : n.children) s.children.push_back(to_spec(c));
    return s;
  }

 private:
  void post_order_from(NodeId id, std::vector<NodeId>& out) const {
    for (NodeId c : at(id).children) post_order_from(c, out);
    out.push_back(id);
  }

  std::vector<Node> nodes_;
  Node root_;
};

class ScriptGenerator {
 public:
  ScriptGenerator(const AstTree& src, const AstTree& dst, const MappingSet& m)
      : dst_(dst), work_(src), work_partner_(src.size(), kNoNode), dst_partner_(dst.size(), kNoNode),
        dst_in_order_(dst.size(), 0) {
    for (auto [s, d] : m.pairs()) {
      work_partner_[static_cast<std::size_t>(s)] = d;
      dst_partner_[static_cast<std::size_t>(d)] = s;
    }
  }

  std::vector<EditAction> run() {
    for (NodeId x : dst_.breadth_first()) {
      const NodeId y = dst_.parent(x);
      const NodeId z = y == kNoNode ? kVirtualRoot : partner_of_dst(y);
      NodeId w = partner_of_dst(x);
      if (w == kNoNode) {
        const std::size_t k = find_pos(x);
        w = work_.insert(dst_.type(x), dst_.label(x), z, k);
        work_partner_.push_back(x);
        dst_partner_[static_cast<std::size_t>(x)] = w;
        EditAction a{EditKind::Insert, w, dst_.type(x), dst_.label(x), work_.at(z).type,
                     z, k, std::nullopt};
        out_.push_back(std::move(a));
      } else {
        const NodeId v = work_.parent(w);
        if (work_.at(w).label != dst_.label(x)) {
          EditAction a{EditKind::Update, w,        work_.at(w).type, work_.at(w).label,
                       work_.at(v).type, std::nullopt, std::nullopt,   dst_.label(x)};
          out_.push_back(std::move(a));
          work_.at(w).label = dst_.label(x);
        }
        if (z != v) move(w, z, x);
      }
      dst_in_order_[static_cast<std::size_t>(x)] = 1;
      align_children(w, x);
    }
    for (NodeId w : work_.post_order()) {
      if (work_partner_[static_cast<std::size_t>(w)] != kNoNode) continue;
      const auto& n = work_.at(w);
      EditAction a{EditKind::Delete, w, n.type, n.label, work_.at(n.parent).type,
                   std::nullopt,     std::nullopt, std::nullopt};
      out_.push_back(std::move(a));
      work_.detach(w);
    }
    return std::move(out_);
  }

 private:
  NodeId partner_of_dst(NodeId d) const { return dst_partner_[static_cast<std::size_t>(d)]; }

  void move(NodeId w, NodeId z, NodeId x) {
    work_.detach(w);
    const std::size_t k = find_pos(x);
    work_.attach(w, z, k);
    const auto& n = work_.at(w);
    out_.push_back({EditKind::Move, w, n.type, n.label, work_.at(z).type, z, k, std::nullopt});
  }

  // Index in the working tree right after the partner of x's rightmost
  // in-order left sibling.
  std::size_t find_pos(NodeId x) const {
    const NodeId y = dst_.parent(x);
    if (y == kNoNode) return 0;
    const auto& siblings = dst_.children(y);
    for (NodeId c : siblings) {
      if (dst_in_order_[static_cast<std::size_t>(c)]) {
        if (c == x) return 0;
        break;
      }
    }
    NodeId v = kNoNode;
    for (NodeId c : siblings) {
      if (c == x) break;
      if (dst_in_order_[static_cast<std::size_t>(c)]) v = c;
    }
    if (v == kNoNode) return 0;
    return work_.position(partner_of_dst(v)) + 1;
  }

  void align_children(NodeId w, NodeId x) {
    for (NodeId c : dst_.children(x)) dst_in_order_[static_cast<std::size_t>(c)] = 0;
    std::vector<NodeId> s1, s2;
    for (NodeId c : work_.children(w)) {
      const NodeId p = work_partner_[static_cast<std::size_t>(c)];
      if (p != kNoNode && dst_.parent(p) == x) s1.push_back(c);
    }
    for (NodeId c : dst_.children(x)) {
      const NodeId p = partner_of_dst(c);
      if (p != kNoNode && work_.parent(p) == w) s2.push_back(c);
    }
    // Longest common subsequence of s1 and s2 under the mapping.
    const std::size_t n1 = s1.size(), n2 = s2.size();
    std::vector<std::vector<int>> lcs(n1 + 1, std::vector<int>(n2 + 1, 0));
    for (std::size_t i = n1; i-- > 0;)
      for (std::size_t j = n2; j-- > 0;)
        lcs[i][j] = work_partner_[static_cast<std::size_t>(s1[i])] == s2[j]
                        ? lcs[i + 1][j + 1] + 1
                        : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    std::vector<char> kept(n2, 0);
    for (std::size_t i = 0, j = 0; i < n1 && j < n2;) {
      if (work_partner_[static_cast<std::size_t>(s1[i])] == s2[j]) {
        kept[j] = 1;
        dst_in_order_[static_cast<std::size_t>(s2[j])] = 1;
        ++i;
        ++j;
      } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
        ++i;
      } else {
        ++j;
      }
    }
    for (std::size_t j = 0; j < n2; ++j) {
      if (kept[j]) continue;
      move(partner_of_dst(s2[j]), w, s2[j]);
      dst_in_order_[static_cast<std::size_t>(s2[j])] = 1;
    }
  }

  const AstTree& dst_;
  WorkTree work_;
  std::vector<NodeId> work_partner_;
  std::vector<NodeId> dst_partner_;
  std::vector<char> dst_in_order_;
  std::vector<EditAction> out_;
};

}  // namespace detail

inline void validate_mapping(const AstTree& src, const AstTree& dst, const MappingSet& m) {
  if (m.src_size() != src.size() || m.dst_size() != dst.size())
    throw InvalidMapping("mapping dimensions do not match the trees");
  for (auto [s, d] : m.pairs()) {
    if (m.src_of(d) != s) throw InvalidMapping("mapping is not injective");
    if (src.type(s) != dst.type(d))
      throw InvalidMapping("pair (" + std::to_string(s) + ", " + std::to_string(d) +
                           ") joins nodes of type " + src.type(s) + " and " + dst.type(d));
  }
}

/// Emits Insert/Update/Move actions in a breadth-first pass over dst, then
/// Delete actions in a post-order pass over the source.
inline EditScript generate_script(const AstTree& src, const AstTree& dst, const MappingSet& mapping) {
  validate_mapping(src, dst, mapping);
  EditScript script;
  script.actions = detail::ScriptGenerator(src, dst, mapping).run();
  return script;
}

/// Applies a script to a copy of src. Throws ApplyError naming the failing
/// action index.
inline AstTree apply_script(const AstTree& src, const EditScript& script) {
  detail::WorkTree work(src);
  for (std::size_t i = 0; i < script.actions.size(); ++i) {
    const EditAction& a = script.actions[i];
    auto fail = [i](const std::string& what) { throw ApplyError(i, what); };
    const bool needs_target = a.kind == EditKind::Insert || a.kind == EditKind::Move;
    if (needs_target) {
      if (!a.target_parent || !a.position) fail("missing target parent or position");
      if (!work.attached(*a.target_parent))
        fail("target parent " + std::to_string(*a.target_parent) + " does not resolve");
    }
    switch (a.kind) {
      case EditKind::Insert: {
        if (a.node != work.next_id())
          fail("inserted node id " + std::to_string(a.node) + " expected " +
               std::to_string(work.next_id()));
        if (*a.position > work.children(*a.target_parent).size()) fail("position out of range");
        work.insert(a.node_type, a.label, *a.target_parent, *a.position);
        break;
      }
      case EditKind::Delete: {
        if (a.node == kVirtualRoot || !work.attached(a.node))
          fail("node " + std::to_string(a.node) + " does not resolve");
        work.detach(a.node);
        break;
      }
      case EditKind::Update: {
        if (a.node == kVirtualRoot || !work.attached(a.node))
          fail("node " + std::to_string(a.node) + " does not resolve");
        if (!a.new_label) fail("update without new label");
        work.at(a.node).label = *a.new_label;
        break;
      }
      case EditKind::Move: {
        if (a.node == kVirtualRoot || !work.attached(a.node))
          fail("node " + std::to_string(a.node) + " does not resolve");
        if (work.within(*a.target_parent, a.node)) fail("move into its own subtree");
        work.detach(a.node);
        if (*a.position > work.children(*a.target_parent).size()) fail("position out of range");
        work.attach(a.node, *a.target_parent, *a.position);
        break;
      }
    }
  }
  const auto& top = work.children(kVirtualRoot);
  if (top.size() != 1)
    throw ApplyError(script.actions.size(),
                     "result has " + std::to_string(top.size()) + " roots, expected 1");
  return AstTree(work.to_spec(top.front()));
}

// --- serialization --------------------------------------------------------

inline nlohmann::json to_json(const EditAction& a) {
  nlohmann::json j = {{"kind", to_string(a.kind)}, {"node", a.node}, {"node_type", a.node_type}};
  if (!a.label.empty()) j["label"] = a.label;
  if (!a.parent_type.empty()) j["parent_type"] = a.parent_type;
  if (a.target_parent) j["parent"] = *a.target_parent;
  if (a.position) j["position"] = *a.position;
  if (a.new_label) j["new_label"] = *a.new_label;
  return j;
}

inline EditAction action_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("edit action must be a JSON object");
  try {
    EditAction a;
    a.kind = parse_edit_kind(j.at("kind").get<std::string>());
    a.node = j.value("node", kNoNode);
    a.node_type = j.at("node_type").get<std::string>();
    a.label = j.value("label", std::string());
    a.parent_type = j.value("parent_type", std::string());
    if (j.contains("parent")) a.target_parent = j.at("parent").get<NodeId>();
    if (j.contains("position")) a.position = j.at("position").get<std::size_t>();
    if (j.contains("new_label")) a.new_label = j.at("new_label").get<std::string>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed edit action: ") + e.what());
  }
}

inline nlohmann::json to_json(const EditScript& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : s.actions) arr.push_back(to_json(a));
  return arr;
}

inline EditScript script_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw FormatError("edit script must be a JSON array");
  EditScript s;
  for (const auto& j : arr) s.actions.push_back(action_from_json(j));
  return s;
}

/// JSON Lines: one action per line.
inline void write_script_jsonl(std::ostream& out, const EditScript& s) {
  for (const auto& a : s.actions) out << to_json(a).dump() << '\n';
}

inline EditScript read_script_jsonl(std::istream& in) {
  EditScript s;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      s.actions.push_back(action_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("invalid JSON line: ") + e.what());
    }
  }
  return s;
}

inline std::string describe(const EditAction& a) {
  std::string out(to_string(a.kind));
  out += " " + a.node_type;
  if (!a.label.empty()) out += "[" + a.label + "]";
  if (a.new_label) out += " -> [" + *a.new_label + "]";
  if (a.target_parent) {
    out += " under " + (a.parent_type.empty() ? std::string("<root>") : a.parent_type) + "#" +
           std::to_string(*a.target_parent) + " at " + std::to_string(a.position.value_or(0));
  }
  return out;
}

}  // namespace fixscope
