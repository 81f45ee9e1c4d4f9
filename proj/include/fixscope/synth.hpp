#pragma once

// Synthetic {incorrect, correct} corpora: correct programs come from a fixed
// template pool and one mutation operator plants a known error type.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fixscope/ast.hpp"
#include "fixscope/error.hpp"
#include "fixscope/minilang.hpp"
#include "fixscope/random.hpp"
#include "fixscope/tree_io.hpp"

namespace fixscope {

struct MutationOperator {
  std::string id;
  std::string description;
  std::function<bool(const NodeSpec&)> applicable;
  std::function<NodeSpec(const NodeSpec&, Rng&)> apply;
};

namespace synth_detail {

// Upper-case placeholders are replaced per variant; everything else is verbatim.
inline const std::vector<std::pair<std::string, std::string>>& templates() {
  static const std::vector<std::pair<std::string, std::string>> t = {
      {"sum_to_n",
       "def solve(N) {\n  S = 0;\n  I = 1;\n  while (I <= N) {\n    S = S + I;\n    I = I + 1;\n  }\n"
       "  return S;\n}\nprint(solve(C1));\n"},
      {"max_of_three",
       "def solve(A, B, C) {\n  M = A;\n  if (B > M) {\n    M = B;\n  }\n  if (C > M) {\n    M = C;\n  }\n"
       "  return M;\n}\nprint(solve(C1, C2, 7));\n"},
      {"factorial",
       "def solve(N) {\n  R = 1;\n  while (N > 1) {\n    R = R * N;\n    N = N - 1;\n  }\n  return R;\n}\n"
       "print(solve(C2));\n"},
      {"count_digits",
       "def solve(N) {\n  K = 0;\n  while (N > 0) {\n    N = N / 10;\n    K = K + 1;\n  }\n  return K;\n}\n"
       "print(solve(C1 * 1000 + C2));\n"},
      {"sign",
       "def solve(X) {\n  if (X < 0) {\n    return -1;\n  } else if (X == 0) {\n    return 0;\n  }\n  return 1;\n}\n"
       "print(solve(C1 - C2));\n"},
      {"gcd",
       "def solve(A, B) {\n  while (B != 0) {\n    T = B;\n    B = A - A / B * B;\n    A = T;\n  }\n  return A;\n}\n"
       "print(solve(C1, C2));\n"},
      {"power",
       "def solve(B, E) {\n  R = 1;\n  I = 0;\n  while (I < E) {\n    R = R * B;\n    I = I + 1;\n  }\n"
       "  return R;\n}\nprint(solve(C2, 3));\n"},
  };
  return t;
}

inline const std::vector<std::map<std::string, std::string>>& variants() {
  static const std::vector<std::map<std::string, std::string>> v = {
      {{"A", "a"}, {"B", "b"}, {"C", "c"}, {"E", "e"}, {"I", "i"}, {"K", "k"}, {"M", "m"}, {"N", "n"},
       {"R", "r"}, {"S", "s"}, {"T", "t"}, {"X", "x"}, {"C1", "10"}, {"C2", "4"}},
      {{"A", "p"}, {"B", "q"}, {"C", "w"}, {"E", "exp"}, {"I", "idx"}, {"K", "cnt"}, {"M", "best"},
       {"N", "num"}, {"R", "res"}, {"S", "total"}, {"T", "tmp"}, {"X", "val"}, {"C1", "12"}, {"C2", "6"}},
      {{"A", "first"}, {"B", "second"}, {"C", "third"}, {"E", "power"}, {"I", "step"}, {"K", "count"},
       {"M", "top"}, {"N", "limit"}, {"R", "out"}, {"S", "acc"}, {"T", "swap"}, {"X", "arg"}, {"C1", "15"},
       {"C2", "9"}},
  };
  return v;
}

inline std::string instantiate(std::string_view text, const std::map<std::string, std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < text.size();) {
    if (std::isalpha(static_cast<unsigned char>(text[i]))) {
      std::size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      const std::string word(text.substr(i, j - i));
      auto it = names.find(word);
      out += it == names.end() ? word : it->second;
      i = j;
    } else {
      out += text[i++];
    }
  }
  return out;
}

struct Site {
  NodeSpec* node;
  NodeSpec* parent;
  std::size_t index;  // position among parent's children
  std::vector<std::string> scope;  // variables visible at the site
};

inline void collect_names(const NodeSpec& n, std::vector<std::string>& out) {
  if (n.type == "Name" && std::find(out.begin(), out.end(), n.label) == out.end()) out.push_back(n.label);
  for (const auto& c : n.children) collect_names(c, out);
}

inline void walk(NodeSpec& n, NodeSpec* parent, std::size_t index, const std::vector<std::string>& scope,
                 std::vector<Site>& out) {
  std::vector<std::string> inner = scope;
  if (n.type == "FuncDef") {
    inner.clear();
    collect_names(n, inner);
  }
  out.push_back({&n, parent, index, inner});
  for (std::size_t i = 0; i < n.children.size(); ++i) walk(n.children[i], &n, i, inner, out);
}

inline std::vector<Site> sites(NodeSpec& root) {
  std::vector<std::string> top;
  for (const auto& s : root.children)
    if (s.type != "FuncDef") collect_names(s, top);
  std::vector<Site> out;
  walk(root, nullptr, 0, top, out);
  return out;
}

using Pred = std::function<bool(const Site&)>;

inline bool comparison_site(const Site& s) { return s.node->type == "BinOp" && minilang::is_comparison(s.node->label); }

inline bool integer_site(const Site& s) {
  if (s.node->type != "Literal" || s.node->label.empty()) return false;
  return std::all_of(s.node->label.begin(), s.node->label.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

inline bool statement_site(const Site& s) {
  return s.parent && (s.parent->type == "Block" || s.parent->type == "Program") && s.node->type != "FuncDef";
}

inline bool variable_use_site(const Site& s) {
  if (s.node->type != "Name" || !s.parent) return false;
  if (s.parent->type == "Params") return false;
  if (s.parent->type == "Assign" && s.index == 0) return false;
  return s.scope.size() >= 2;
}

inline bool simple_statement_site(const Site& s) {
  return statement_site(s) && (s.node->type == "Assign" || s.node->type == "ExprStmt");
}

inline bool any_site(const NodeSpec& tree, const Pred& p) {
  NodeSpec copy = tree;
  for (const auto& s : sites(copy))
    if (p(s)) return true;
  return false;
}

inline NodeSpec mutate(const NodeSpec& tree, Rng& rng, const Pred& p,
                       const std::function<void(const Site&, Rng&)>& edit) {
  NodeSpec out = tree;
  std::vector<Site> cands;
  for (const auto& s : sites(out))
    if (p(s)) cands.push_back(s);
  if (cands.empty()) throw OperatorInapplicable("no applicable site");
  edit(cands[rng.below(cands.size())], rng);
  return out;
}

template <class T>
const T& choose(const std::vector<T>& v, Rng& rng) {
  return v[rng.below(v.size())];
}

}  // namespace synth_detail

/// The four planted error types.
inline std::vector<MutationOperator> standard_operators() {
  using namespace synth_detail;
  std::vector<MutationOperator> ops;
  ops.push_back({"WRONG_COMPARISON", "swap one comparison operator",
                 [](const NodeSpec& t) { return any_site(t, comparison_site); },
                 [](const NodeSpec& t, Rng& rng) {
                   return mutate(t, rng, comparison_site, [](const Site& s, Rng& r) {
                     std::vector<std::string> others;
                     for (const auto& op : minilang::comparison_ops())
                       if (op != s.node->label) others.push_back(std::string(op));
                     s.node->label = choose(others, r);
                   });
                 }});
  ops.push_back({"OFF_BY_ONE", "perturb one integer literal by one",
                 [](const NodeSpec& t) { return any_site(t, integer_site); },
                 [](const NodeSpec& t, Rng& rng) {
                   return mutate(t, rng, integer_site, [](const Site& s, Rng& r) {
                     const long v = std::stol(s.node->label);
                     s.node->label = std::to_string(v == 0 || r.below(2) ? v + 1 : v - 1);
                   });
                 }});
  ops.push_back({"MISSING_STATEMENT", "delete one statement",
                 [](const NodeSpec& t) { return any_site(t, statement_site); },
                 [](const NodeSpec& t, Rng& rng) {
                   return mutate(t, rng, statement_site, [](const Site& s, Rng&) {
                     s.parent->children.erase(s.parent->children.begin() + static_cast<std::ptrdiff_t>(s.index));
                   });
                 }});
  ops.push_back({"WRONG_VARIABLE", "replace one variable use with another in scope",
                 [](const NodeSpec& t) { return any_site(t, variable_use_site); },
                 [](const NodeSpec& t, Rng& rng) {
                   return mutate(t, rng, variable_use_site, [](const Site& s, Rng& r) {
                     std::vector<std::string> others;
                     for (const auto& v : s.scope)
                       if (v != s.node->label) others.push_back(v);
                     s.node->label = choose(others, r);
                   });
                 }});
  return ops;
}

/// An error type outside the standard four: one simple statement duplicated,
/// so the fix is a pure deletion. Used to probe rejection of unseen errors.
inline MutationOperator extra_statement_operator() {
  using namespace synth_detail;
  return {"EXTRA_STATEMENT", "duplicate one assignment or call statement",
          [](const NodeSpec& t) { return any_site(t, simple_statement_site); },
          [](const NodeSpec& t, Rng& rng) {
            return mutate(t, rng, simple_statement_site, [](const Site& s, Rng&) {
              NodeSpec copy = *s.node;
              s.parent->children.insert(s.parent->children.begin() + static_cast<std::ptrdiff_t>(s.index) + 1,
                                        std::move(copy));
            });
          }};
}

struct CorrectProgram {
  std::string problem_id;
  std::string source;
};

/// Every template under every naming variant.
inline std::vector<CorrectProgram> template_pool() {
  std::vector<CorrectProgram> out;
  for (const auto& [name, text] : synth_detail::templates())
    for (std::size_t v = 0; v < synth_detail::variants().size(); ++v)
      out.push_back({name, synth_detail::instantiate(text, synth_detail::variants()[v])});
  return out;
}

struct SynthOptions {
  std::string id_prefix = "p";
  std::function<void(const std::string&)> warn = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
};

/// n pairs with operators dealt from shuffled rounds (each round uses every
/// operator once), so label counts differ by at most one.
inline std::vector<SubmissionPair> generate_synthetic_corpus(int n_pairs, std::vector<MutationOperator> ops,
                                                             std::uint64_t seed,
                                                             std::span<const CorrectProgram> pool,
                                                             const SynthOptions& opt = {}) {
  if (n_pairs < 1) throw ConfigError("n_pairs must be at least 1");
  if (ops.empty()) throw ConfigError("no mutation operators given");
  if (pool.empty()) throw ConfigError("template pool is empty");
  std::vector<AstTree> parsed;
  for (const auto& p : pool) parsed.push_back(parse_minilang(p.source));

  // Drop operators no template supports.
  std::vector<std::vector<std::size_t>> usable;
  std::vector<MutationOperator> kept;
  for (auto& op : ops) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < parsed.size(); ++i)
      if (op.applicable(parsed[i].to_spec())) idx.push_back(i);
    if (idx.empty()) {
      if (opt.warn) opt.warn("operator " + op.id + " applies to no template; skipped");
      continue;
    }
    usable.push_back(std::move(idx));
    kept.push_back(std::move(op));
  }
  if (kept.empty()) throw OperatorInapplicable("no operator applies to any template");

  Rng rng(seed);
  std::vector<std::size_t> deck;
  std::vector<SubmissionPair> out;
  char id[32];
  for (int k = 0; k < n_pairs; ++k) {
    if (deck.empty()) {
      for (std::size_t i = 0; i < kept.size(); ++i) deck.push_back(i);
      rng.shuffle(deck);
    }
    const std::size_t o = deck.back();
    deck.pop_back();
    const std::size_t t = usable[o][rng.below(usable[o].size())];
    const AstTree& correct = parsed[t];
    AstTree incorrect = parse_minilang(to_minilang(kept[o].apply(correct.to_spec(), rng)));
    if (structurally_equal(incorrect, correct))
      throw OperatorInapplicable(kept[o].id + " left the program unchanged");
    std::snprintf(id, sizeof id, "%s%04d", opt.id_prefix.c_str(), k);
    out.push_back({id, pool[t].problem_id, std::move(incorrect), correct, kept[o].id});
  }
  return out;
}

inline std::vector<SubmissionPair> generate_synthetic_corpus(int n_pairs, std::vector<MutationOperator> ops,
                                                             std::uint64_t seed, const SynthOptions& opt = {}) {
  const auto pool = template_pool();
  return generate_synthetic_corpus(n_pairs, std::move(ops), seed, pool, opt);
}

}  // namespace fixscope
