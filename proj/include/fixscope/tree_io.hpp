#pragma once

// Serialized tree documents and corpus files.
//
// Tree document: a JSON object per node with "type" (required), "label",
// "children" and "span" ([start, length]). A child entry may also be an
// integer referring to a node by its explicit "id"; referenced nodes can be
// declared in an optional "nodes" array on the root object. Every node must
// be placed exactly once, so cycles and shared nodes are rejected.
//
// Corpus file: JSON Lines, one submission pair per line.

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixscope/ast.hpp"
#include "fixscope/error.hpp"
#include "fixscope/minilang.hpp"

namespace fixscope {

using json = nlohmann::json;

namespace detail {

class TreeReader {
 public:
  explicit TreeReader(const json& doc) : doc_(doc) {}

  NodeSpec read() {
    if (!doc_.is_object()) throw FormatError("$: tree document must be a JSON object");
    collect(doc_, "$");
    if (auto it = doc_.find("nodes"); it != doc_.end()) {
      if (!it->is_array()) throw FormatError("$.nodes: must be an array");
      for (std::size_t i = 0; i < it->size(); ++i)
        collect((*it)[i], "$.nodes[" + std::to_string(i) + "]");
    }
    return build(doc_, "$");
  }

 private:
  struct Entry {
    const json* node;
    std::string path;
  };

  void collect(const json& node, const std::string& path) {
    if (!node.is_object()) return;
    if (auto it = node.find("id"); it != node.end()) {
      if (!it->is_number_integer()) throw FormatError(path + ".id: must be an integer");
      const long long id = it->get<long long>();
      if (!by_id_.emplace(id, Entry{&node, path}).second)
        throw FormatError(path + ".id: duplicate explicit id " + std::to_string(id) +
                          " (first declared at " + by_id_.at(id).path + ")");
    }
    if (auto it = node.find("children"); it != node.end() && it->is_array())
      for (std::size_t i = 0; i < it->size(); ++i)
        collect((*it)[i], path + ".children[" + std::to_string(i) + "]");
  }

  NodeSpec build(const json& node, const std::string& path) {
    if (!node.is_object()) throw FormatError(path + ": node must be an object");
    if (!placed_.insert(&node).second)
      throw FormatError(path + ": node placed more than once");
    auto type = node.find("type");
    if (type == node.end()) throw FormatError(path + ".type: missing node_type");
    if (!type->is_string() || type->get<std::string>().empty())
      throw FormatError(path + ".type: must be a non-empty string");
    NodeSpec spec(type->get<std::string>());
    if (auto label = node.find("label"); label != node.end() && !label->is_null()) {
      if (!label->is_string()) throw FormatError(path + ".label: must be a string");
      spec.label = label->get<std::string>();
    }
    if (auto span = node.find("span"); span != node.end()) {
      if (!span->is_array() || span->size() != 2 || !(*span)[0].is_number_unsigned() ||
          !(*span)[1].is_number_unsigned())
        throw FormatError(path + ".span: must be [start, length] of non-negative integers");
      spec.span = {(*span)[0].get<std::size_t>(), (*span)[1].get<std::size_t>()};
    }
    on_stack_.insert(&node);
    if (auto kids = node.find("children"); kids != node.end()) {
      if (!kids->is_array()) throw FormatError(path + ".children: must be an array");
      for (std::size_t i = 0; i < kids->size(); ++i) {
        const json& child = (*kids)[i];
        const std::string child_path = path + ".children[" + std::to_string(i) + "]";
        if (child.is_number_integer()) {
          auto it = by_id_.find(child.get<long long>());
          if (it == by_id_.end())
            throw FormatError(child_path + ": reference to undeclared id " + child.dump());
          if (on_stack_.count(it->second.node))
            throw FormatError(child_path + ": cyclic reference to id " + child.dump() +
                              " (node is its own descendant)");
          spec.children.push_back(build(*it->second.node, it->second.path));
        } else {
          spec.children.push_back(build(child, child_path));
        }
      }
    }
    on_stack_.erase(&node);
    return spec;
  }

  const json& doc_;
  std::map<long long, Entry> by_id_;
  std::set<const json*> placed_;
  std::set<const json*> on_stack_;
};

inline json write_node(const AstTree& tree, NodeId id) {
  const AstNode& n = tree.node(id);
  json out = {{"type", n.type}};
  if (!n.label.empty()) out["label"] = n.label;
  if (!n.span.empty()) out["span"] = {n.span.start, n.span.length};
  if (!n.children.empty()) {
    json kids = json::array();
    for (NodeId c : n.children) kids.push_back(write_node(tree, c));
    out["children"] = std::move(kids);
  }
  return out;
}

}  // namespace detail

/// Reads a serialized tree document; ids are re-assigned in pre-order and
/// unknown fields are ignored.
inline AstTree read_tree(const json& document) {
  return AstTree(detail::TreeReader(document).read());
}

inline AstTree read_tree(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("$: invalid JSON: ") + e.what());
  }
  return read_tree(doc);
}

inline json write_tree(const AstTree& tree) { return detail::write_node(tree, tree.root()); }

/// Loads either MiniLang source or a serialized tree document, deciding by
/// the first non-blank character.
inline AstTree load_tree_text(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return read_tree(text);
  return parse_minilang(text);
}

struct SubmissionPair {
  std::string pair_id;
  std::string problem_id;
  AstTree incorrect;
  AstTree correct;
  std::optional<std::string> ground_truth_label;
};

namespace detail {

inline AstTree corpus_tree(const json& line, const char* src_field, const char* tree_field,
                           std::size_t lineno) {
  const std::string where = "line " + std::to_string(lineno) + ": ";
  if (auto src = line.find(src_field); src != line.end()) {
    if (!src->is_string()) throw FormatError(where + src_field + " must be a string");
    try {
      return parse_minilang(src->get<std::string>());
    } catch (const SyntaxError& e) {
      throw FormatError(where + src_field + ": " + e.what());
    }
  }
  if (auto tree = line.find(tree_field); tree != line.end()) {
    try {
      return read_tree(*tree);
    } catch (const FormatError& e) {
      throw FormatError(where + tree_field + ": " + e.what());
    }
  }
  throw FormatError(where + "needs " + src_field + " or " + tree_field);
}

}  // namespace detail

inline SubmissionPair parse_corpus_line(const json& line, std::size_t lineno) {
  const std::string where = "line " + std::to_string(lineno) + ": ";
  if (!line.is_object()) throw FormatError(where + "expected a JSON object");
  SubmissionPair p;
  auto str = [&](const char* field) -> std::string {
    auto it = line.find(field);
    if (it == line.end() || !it->is_string())
      throw FormatError(where + "missing string field " + field);
    return it->get<std::string>();
  };
  p.pair_id = str("pair_id");
  p.problem_id = str("problem_id");
  p.incorrect = detail::corpus_tree(line, "incorrect_src", "incorrect_tree", lineno);
  p.correct = detail::corpus_tree(line, "correct_src", "correct_tree", lineno);
  if (auto it = line.find("label"); it != line.end() && !it->is_null()) {
    if (!it->is_string()) throw FormatError(where + "label must be a string");
    p.ground_truth_label = it->get<std::string>();
  }
  return p;
}

inline std::vector<SubmissionPair> read_corpus(std::istream& in) {
  std::vector<SubmissionPair> pairs;
  std::set<std::string> seen;
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json line;
    try {
      line = json::parse(text);
    } catch (const json::parse_error& e) {
      throw FormatError("line " + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    SubmissionPair p = parse_corpus_line(line, lineno);
    if (!seen.insert(p.pair_id).second)
      throw FormatError("line " + std::to_string(lineno) + ": duplicate pair_id " + p.pair_id);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

inline json corpus_line(const SubmissionPair& p) {
  json line = {{"pair_id", p.pair_id}, {"problem_id", p.problem_id}};
  if (p.incorrect.source_text())
    line["incorrect_src"] = *p.incorrect.source_text();
  else
    line["incorrect_tree"] = write_tree(p.incorrect);
  if (p.correct.source_text())
    line["correct_src"] = *p.correct.source_text();
  else
    line["correct_tree"] = write_tree(p.correct);
  if (p.ground_truth_label) line["label"] = *p.ground_truth_label;
  return line;
}

inline void write_corpus(std::ostream& out, const std::vector<SubmissionPair>& pairs) {
  for (const auto& p : pairs) out << corpus_line(p).dump() << '\n';
}

}  // namespace fixscope
