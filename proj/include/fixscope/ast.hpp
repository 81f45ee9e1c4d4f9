#pragma once

// AST data model shared by the parser, the tree differ and the corpus tools.
//
// An AstTree is immutable once built. Nodes live in one contiguous vector
// indexed by their pre-order id, so a subtree rooted at `id` occupies the id
// range [id, id + subtree_size(id)).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fixscope/error.hpp"

namespace fixscope {

using NodeId = int;
inline constexpr NodeId kNoNode = -1;

struct Span {
  std::size_t start = 0;
  std::size_t length = 0;

  bool empty() const { return start == 0 && length == 0; }
  bool contains(const Span& inner) const {
    return inner.start >= start && inner.start + inner.length <= start + length;
  }
  friend bool operator==(const Span&, const Span&) = default;
};

/// Recursive, mutable description of a tree. Used to build AstTrees and as
/// the working representation for tree rewrites.
struct NodeSpec {
  std::string type;
  std::string label;  // empty means "no label"
  std::vector<NodeSpec> children;
  Span span;

  NodeSpec() = default;
  NodeSpec(std::string t, std::string l = {}, std::vector<NodeSpec> c = {})
      : type(std::move(t)), label(std::move(l)), children(std::move(c)) {}

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& c : children) n += c.size();
    return n;
  }
};

struct AstNode {
  NodeId id = kNoNode;
  std::string type;
  std::string label;
  NodeId parent = kNoNode;
  std::vector<NodeId> children;
  Span span;
};

namespace detail {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= static_cast<unsigned char>(v >> (8 * i));
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace detail

class AstTree {
 public:
  AstTree() : AstTree(NodeSpec("Program")) {}

  explicit AstTree(const NodeSpec& root, std::optional<std::string> source = {})
      : source_(std::move(source)) {
    nodes_.reserve(root.size());
    append(root, kNoNode, 0);
    finalize();
  }

  std::size_t size() const { return nodes_.size(); }
  int height() const { return height_[0]; }
  NodeId root() const { return 0; }
  const std::optional<std::string>& source_text() const { return source_; }

  const AstNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<AstNode>& nodes() const { return nodes_; }
  const std::string& type(NodeId id) const { return node(id).type; }
  const std::string& label(NodeId id) const { return node(id).label; }
  NodeId parent(NodeId id) const { return node(id).parent; }
  const std::vector<NodeId>& children(NodeId id) const { return node(id).children; }
  bool is_leaf(NodeId id) const { return node(id).children.empty(); }

  int height(NodeId id) const { return height_[static_cast<std::size_t>(id)]; }
  int depth(NodeId id) const { return depth_[static_cast<std::size_t>(id)]; }
  /// Node count of the subtree rooted at id, including id itself.
  int subtree_size(NodeId id) const { return subtree_size_[static_cast<std::size_t>(id)]; }
  std::uint64_t hash(NodeId id) const { return hash_[static_cast<std::size_t>(id)]; }

  /// Index of id within its parent's child list (0 for the root).
  std::size_t position(NodeId id) const {
    NodeId p = parent(id);
    if (p == kNoNode) return 0;
    const auto& siblings = children(p);
    return static_cast<std::size_t>(std::find(siblings.begin(), siblings.end(), id) -
                                    siblings.begin());
  }

  /// True when `node` lies strictly below `ancestor`.
  bool is_descendant(NodeId node, NodeId ancestor) const {
    return node > ancestor && node < ancestor + subtree_size(ancestor);
  }

  std::vector<NodeId> post_order() const {
    std::vector<NodeId> out;
    out.reserve(size());
    post_order_from(root(), out);
    return out;
  }

  std::vector<NodeId> breadth_first() const {
    std::vector<NodeId> out{root()};
    out.reserve(size());
    for (std::size_t i = 0; i < out.size(); ++i)
      for (NodeId c : children(out[i])) out.push_back(c);
    return out;
  }

  NodeSpec to_spec(NodeId id = 0) const {
    const AstNode& n = node(id);
    NodeSpec s(n.type, n.label);
    s.span = n.span;
    s.children.reserve(n.children.size());
    for (NodeId c : n.children) s.children.push_back(to_spec(c));
    return s;
  }

 private:
  NodeId append(const NodeSpec& spec, NodeId parent, int depth) {
    if (spec.type.empty())
      throw FormatError("node without type at depth " + std::to_string(depth));
    const NodeId id = static_cast<NodeId>(nodes_.size());
    AstNode n;
    n.id = id;
    n.type = spec.type;
    n.label = spec.label;
    n.parent = parent;
    n.span = spec.span;
    nodes_.push_back(std::move(n));
    depth_.push_back(depth);
    std::vector<NodeId> kids;
    kids.reserve(spec.children.size());
    for (const auto& c : spec.children) kids.push_back(append(c, id, depth + 1));
    nodes_[static_cast<std::size_t>(id)].children = std::move(kids);
    return id;
  }

  void finalize() {
    const std::size_t n = nodes_.size();
    height_.assign(n, 1);
    subtree_size_.assign(n, 1);
    hash_.assign(n, 0);
    // Reverse pre-order visits children before parents.
    for (std::size_t k = n; k-- > 0;) {
      const AstNode& nd = nodes_[k];
      std::uint64_t h = detail::fnv1a(detail::kFnvOffset, nd.type);
      h = detail::fnv1a(h, "\x1f");
      h = detail::fnv1a(h, nd.label);
      h = detail::fnv1a(h, "\x1e");
      for (NodeId c : nd.children) {
        const auto ci = static_cast<std::size_t>(c);
        height_[k] = std::max(height_[k], height_[ci] + 1);
        subtree_size_[k] += subtree_size_[ci];
        h = detail::fnv1a_u64(h, hash_[ci]);
      }
      hash_[k] = detail::fnv1a_u64(h, nd.children.size());
      if (nd.parent != kNoNode) {
        const Span& outer = nodes_[static_cast<std::size_t>(nd.parent)].span;
        if (!nd.span.empty() && !outer.empty() && !outer.contains(nd.span))
          throw FormatError("span of node " + std::to_string(k) +
                            " lies outside its parent's span");
      }
    }
  }

  void post_order_from(NodeId id, std::vector<NodeId>& out) const {
    for (NodeId c : children(id)) post_order_from(c, out);
    out.push_back(id);
  }

  std::vector<AstNode> nodes_;
  std::vector<int> height_;
  std::vector<int> depth_;
  std::vector<int> subtree_size_;
  std::vector<std::uint64_t> hash_;
  std::optional<std::string> source_;
};

/// Structural hash of the subtree rooted at id: equal for isomorphic subtrees
/// (same type, label and child structure). Equality of hashes is always
/// confirmed with isomorphic() before it is relied upon.
inline std::uint64_t tree_hash(const AstTree& tree, NodeId id) { return tree.hash(id); }
inline std::uint64_t tree_hash(const AstTree& tree) { return tree.hash(tree.root()); }

inline bool isomorphic(const AstTree& a, NodeId ia, const AstTree& b, NodeId ib) {
  if (a.hash(ia) != b.hash(ib) || a.subtree_size(ia) != b.subtree_size(ib)) return false;
  // Subtrees are contiguous pre-order ranges; compare them node by node.
  const int n = a.subtree_size(ia);
  for (int k = 0; k < n; ++k) {
    const AstNode& x = a.node(ia + k);
    const AstNode& y = b.node(ib + k);
    if (x.type != y.type || x.label != y.label || x.children.size() != y.children.size())
      return false;
    for (std::size_t c = 0; c < x.children.size(); ++c)
      if (x.children[c] - ia != y.children[c] - ib) return false;
  }
  return true;
}

/// Structural identity of whole trees: types, labels and child order. Spans
/// and source text are not compared.
inline bool structurally_equal(const AstTree& a, const AstTree& b) {
  return a.size() == b.size() && isomorphic(a, a.root(), b, b.root());
}

}  // namespace fixscope
