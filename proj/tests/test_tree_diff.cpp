#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fixscope/diff.hpp"
#include "fixscope/minilang.hpp"
#include "support/random_programs.hpp"

using namespace fixscope;

namespace {

// Every (src, dst) pair of isomorphic subtree roots with height >= h.
std::set<std::pair<NodeId, NodeId>> isomorphic_roots(const AstTree& a, const AstTree& b, int h) {
  std::set<std::pair<NodeId, NodeId>> out;
  for (NodeId s = 0; s < static_cast<NodeId>(a.size()); ++s)
    for (NodeId d = 0; d < static_cast<NodeId>(b.size()); ++d)
      if (a.height(s) >= h && isomorphic(a, s, b, d)) out.insert({s, d});
  return out;
}

// dice straight from its definition over explicit descendant sets.
double dice_oracle(const AstTree& a, NodeId x, const AstTree& b, NodeId y, const MappingSet& m) {
  std::set<NodeId> da, db;
  for (NodeId n = 0; n < static_cast<NodeId>(a.size()); ++n)
    for (NodeId p = a.parent(n); p != kNoNode; p = a.parent(p))
      if (p == x) da.insert(n);
  for (NodeId n = 0; n < static_cast<NodeId>(b.size()); ++n)
    for (NodeId p = b.parent(n); p != kNoNode; p = b.parent(p))
      if (p == y) db.insert(n);
  int common = 0;
  for (auto [s, d] : m.pairs())
    if (da.count(s) && db.count(d)) ++common;
  return da.size() + db.size() == 0 ? 0.0 : 2.0 * common / static_cast<double>(da.size() + db.size());
}

MappingSet identity_mapping(const AstTree& a, const AstTree& b) {
  MappingSet m(a.size(), b.size());
  for (NodeId k = 0; k < static_cast<NodeId>(a.size()); ++k) m.add(k, k);
  return m;
}

void expect_valid(const AstTree& a, const AstTree& b, const MappingSet& m) {
  std::set<NodeId> srcs, dsts;
  for (auto [s, d] : m.pairs()) {
    EXPECT_TRUE(srcs.insert(s).second);
    EXPECT_TRUE(dsts.insert(d).second);
    EXPECT_EQ(a.type(s), b.type(d));
  }
}

}  // namespace

TEST(MatchTopDown, IdenticalTreesFullyMapped) {
  const AstTree t = parse_minilang("def f(a) { return a + 1; } x = f(2);");
  const MappingSet m = match_top_down(t, t, 2);
  EXPECT_EQ(m.size(), t.size());
  for (NodeId k = 0; k < static_cast<NodeId>(t.size()); ++k) EXPECT_TRUE(m.contains(k, k));
}

TEST(MatchTopDown, NoSharedTypesGivesEmptyMapping) {
  const AstTree a(NodeSpec("A", "", {NodeSpec("B", "", {NodeSpec("C")})}));
  const AstTree b(NodeSpec("X", "", {NodeSpec("Y", "", {NodeSpec("Z")})}));
  EXPECT_EQ(match_top_down(a, b, 1).size(), 0u);
}

TEST(MatchTopDown, DistinctLabelsStayUnmatched) {
  const AstTree src = parse_minilang("x = 1; y = 2;");
  const AstTree dst = parse_minilang("x = 1; y = 3;");
  const auto roots = isomorphic_roots(src, dst, 2);
  ASSERT_EQ(roots, (std::set<std::pair<NodeId, NodeId>>{{1, 1}}));
  const MappingSet m = match_top_down(src, dst, 2);
  EXPECT_EQ(m.pairs(), (std::vector<std::pair<NodeId, NodeId>>{{1, 1}, {2, 2}, {3, 3}}));
}

TEST(MatchTopDown, AmbiguousCandidatesFollowParentDice) {
  // Two identical assignments; the one inside the matching If block should
  // pair with its counterpart in the other If block.
  const AstTree src = parse_minilang("if (a < b) { x = 1; c = 2; y = 5; } x = 1;");
  const AstTree dst = parse_minilang("x = 1; if (a < b) { x = 1; c = 2; y = 6; }");
  const MappingSet m = match_top_down(src, dst, 2);
  expect_valid(src, dst, m);
  // src: If=1 (cond 2..4, Block 5, Assign x 6), dst: Assign x 1, If 4, Block 8, Assign x 9.
  EXPECT_TRUE(m.contains(6, 9));
  EXPECT_TRUE(m.contains(src.size() - 3, 1));
}

TEST(MatchBottomUp, SeedCoveringEverything) {
  const AstTree t = parse_minilang("while (i < 3) { i = i + 1; }");
  const MappingSet seed = match_top_down(t, t, 2);
  EXPECT_EQ(match_bottom_up(t, t, seed, 0.5, 100), seed);
}

TEST(MatchBottomUp, DiceExactlyAtThresholdMatches) {
  // C(P(L), M, N) vs C(P(L), K, J): P(L) is mapped top-down, covering 2 of
  // the 4 descendants on each side.
  const AstTree src(NodeSpec("C", "", {NodeSpec("P", "", {NodeSpec("L")}), NodeSpec("M"), NodeSpec("N")}));
  const AstTree dst(NodeSpec("C", "", {NodeSpec("P", "", {NodeSpec("L")}), NodeSpec("K"), NodeSpec("J")}));
  const MappingSet seed = match_top_down(src, dst, 2);
  ASSERT_EQ(seed.size(), 2u);
  MatcherParams params;
  params.match_roots = false;
  // Exhaustive candidate scoring: only the roots share a type among unmatched containers.
  for (NodeId s = 0; s < 5; ++s)
    for (NodeId d = 0; d < 5; ++d)
      if (!seed.src_mapped(s) && !seed.dst_mapped(d) && src.type(s) == dst.type(d) && !src.is_leaf(s))
        EXPECT_EQ(std::make_pair(s, d), std::make_pair(0, 0));
  EXPECT_DOUBLE_EQ(dice_oracle(src, 0, dst, 0, seed), 0.5);
  EXPECT_DOUBLE_EQ(dice(src, 0, dst, 0, seed), 0.5);

  params.min_dice = 0.5;
  EXPECT_TRUE(match_bottom_up(src, dst, seed, params).contains(0, 0));
  params.min_dice = 0.6;
  EXPECT_FALSE(match_bottom_up(src, dst, seed, params).src_mapped(0));
}

TEST(MatchBottomUp, DiceAgreesWithDefinitionOnRandomPairs) {
  test_support::ProgramGenerator gen(21);
  for (int i = 0; i < 40; ++i) {
    const NodeSpec spec = gen.program();
    const AstTree a(spec), b(gen.perturb(spec));
    const MappingSet m = match(a, b);
    for (NodeId x = 0; x < static_cast<NodeId>(a.size()); x += 3)
      for (NodeId y = 0; y < static_cast<NodeId>(b.size()); y += 3)
        ASSERT_DOUBLE_EQ(dice(a, x, b, y, m), dice_oracle(a, x, b, y, m));
  }
}

TEST(Matching, InjectiveAndTypeConsistentAfterEachPhase) {
  test_support::ProgramGenerator gen(8);
  for (int i = 0; i < 200; ++i) {
    const NodeSpec spec = gen.program();
    const AstTree a(spec), b(gen.perturb(spec));
    const MappingSet top = match_top_down(a, b, 2);
    expect_valid(a, b, top);
    const MappingSet full = match_bottom_up(a, b, top, MatcherParams{});
    expect_valid(a, b, full);
    for (auto [s, d] : top.pairs()) EXPECT_TRUE(full.contains(s, d));
  }
}

TEST(GenerateScript, IdenticalTreesGiveEmptyScript) {
  const AstTree t = parse_minilang("x = 1; if (x) { y = x; }");
  EXPECT_TRUE(generate_script(t, t, identity_mapping(t, t)).empty());
}

TEST(GenerateScript, SingleLabelChangeIsOneUpdate) {
  const AstTree a = parse_minilang("x = 1; y = x * 2;");
  const AstTree b = parse_minilang("x = 1; y = x * 3;");
  const EditScript s = generate_script(a, b, identity_mapping(a, b));
  ASSERT_EQ(s.length(), 1u);
  EXPECT_EQ(s.actions[0].kind, EditKind::Update);
  EXPECT_EQ(s.actions[0].label, "2");
  EXPECT_EQ(s.actions[0].new_label, "3");
  EXPECT_FALSE(s.actions[0].target_parent);
  EXPECT_TRUE(structurally_equal(apply_script(a, s), b));
}

TEST(GenerateScript, TrailingStatementIsOneInsertGroup) {
  const AstTree a = parse_minilang("x = 1;");
  const AstTree b = parse_minilang("x = 1; y = x + 2;");
  MappingSet m(a.size(), b.size());
  for (NodeId k = 0; k < 4; ++k) m.add(k, k);
  const EditScript s = generate_script(a, b, m);
  ASSERT_EQ(s.length(), 5u);
  std::set<NodeId> inserted;
  for (std::size_t i = 0; i < s.length(); ++i) {
    const auto& act = s.actions[i];
    ASSERT_EQ(act.kind, EditKind::Insert);
    if (i == 0)
      EXPECT_EQ(act.target_parent, 0);
    else
      EXPECT_TRUE(inserted.count(*act.target_parent));
    inserted.insert(act.node);
  }
  EXPECT_TRUE(structurally_equal(apply_script(a, s), b));
}

TEST(GenerateScript, RejectsInvalidMappings) {
  const AstTree a = parse_minilang("x = 1;");
  const AstTree b = parse_minilang("x = 1;");
  MappingSet m(a.size(), b.size());
  m.add(2, 3);  // Name vs Literal
  EXPECT_THROW(generate_script(a, b, m), InvalidMapping);
  MappingSet n(a.size(), b.size());
  n.add(1, 1);
  EXPECT_THROW(n.add(1, 2), InvalidMapping);
  EXPECT_THROW(n.add(2, 1), InvalidMapping);
  EXPECT_THROW(generate_script(a, b, MappingSet(2, 2)), InvalidMapping);
}

TEST(GenerateScript, UnmappedRootsAreReplaced) {
  const AstTree a(NodeSpec("A", "", {NodeSpec("B", "1")}));
  const AstTree b(NodeSpec("X", "", {NodeSpec("B", "1"), NodeSpec("C")}));
  MappingSet m(a.size(), b.size());
  m.add(1, 1);
  const EditScript s = generate_script(a, b, m);
  EXPECT_TRUE(structurally_equal(apply_script(a, s), b));
}

TEST(ApplyScript, EmptyScriptCopies) {
  const AstTree t = parse_minilang("x = 1; y = 2;");
  EXPECT_TRUE(structurally_equal(apply_script(t, EditScript{}), t));
}

TEST(ApplyScript, DeleteRootChild) {
  const AstTree t = parse_minilang("x = 1; y = 2;");
  EditScript s;
  s.actions.push_back({EditKind::Delete, 1, "Assign", "", "Program", {}, {}, {}});
  const AstTree out = apply_script(t, s);
  EXPECT_EQ(out.children(out.root()).size(), 1u);
  EXPECT_TRUE(structurally_equal(out, parse_minilang("y = 2;")));
  EXPECT_EQ(t.size(), 7u);  // source untouched
}

TEST(ApplyScript, ErrorsNameTheFailingAction) {
  const AstTree t = parse_minilang("x = 1;");
  EditScript s;
  s.actions.push_back({EditKind::Update, 3, "Literal", "1", "Assign", {}, {}, std::string("2")});
  s.actions.push_back({EditKind::Move, 99, "Name", "x", "Program", 0, 0, {}});
  try {
    apply_script(t, s);
    FAIL();
  } catch (const ApplyError& e) {
    EXPECT_EQ(e.action_index(), 1u);
  }
  EditScript bad_pos;
  bad_pos.actions.push_back({EditKind::Insert, 4, "Return", "", "Program", 0, 5, {}});
  try {
    apply_script(t, bad_pos);
    FAIL();
  } catch (const ApplyError& e) {
    EXPECT_EQ(e.action_index(), 0u);
  }
  EditScript cycle;
  cycle.actions.push_back({EditKind::Move, 1, "Assign", "", "Assign", 2, 0, {}});
  EXPECT_THROW(apply_script(t, cycle), ApplyError);
  EditScript deleted;
  deleted.actions.push_back({EditKind::Delete, 1, "Assign", "", "Program", {}, {}, {}});
  deleted.actions.push_back({EditKind::Update, 3, "Literal", "1", "Assign", {}, {}, std::string("2")});
  EXPECT_THROW(apply_script(t, deleted), ApplyError);
  EditScript two_roots;
  two_roots.actions.push_back({EditKind::Insert, 4, "Program", "", "", kVirtualRoot, 1, {}});
  EXPECT_THROW(apply_script(t, two_roots), ApplyError);
}

TEST(Diff, Examples) {
  const AstTree t = parse_minilang("def f(a) { return a; }");
  EXPECT_TRUE(diff(t, t).empty());

  const EditScript one = diff(parse_minilang("x = 1;"), parse_minilang("x = 2;"));
  ASSERT_EQ(one.length(), 1u);
  EXPECT_EQ(one.actions[0].kind, EditKind::Update);
  EXPECT_EQ(one.actions[0].node_type, "Literal");
  EXPECT_EQ(one.actions[0].label, "1");
  EXPECT_EQ(*one.actions[0].new_label, "2");

  const AstTree a = parse_minilang("if (x < 1) { y = 2; } else { y = 3; }");
  const AstTree b = parse_minilang("if (x <= 1) { y = 2; } else { y = 3; }");
  const EditScript cmp = diff(a, b);
  EXPECT_TRUE(structurally_equal(apply_script(a, cmp), b));
  bool found = false;
  for (const auto& act : cmp.actions)
    found |= act.kind == EditKind::Update && act.node_type == "BinOp" && act.label == "<" &&
             act.new_label == "<=";
  EXPECT_TRUE(found);
  EXPECT_EQ(cmp.length(), 1u);
}

TEST(Diff, SwappedStatementsAreOneMove) {
  const AstTree a = parse_minilang("x = 1; y = 2; z = 3;");
  const AstTree b = parse_minilang("y = 2; x = 1; z = 3;");
  const EditScript s = diff(a, b);
  ASSERT_EQ(s.length(), 1u);
  EXPECT_EQ(s.actions[0].kind, EditKind::Move);
  EXPECT_TRUE(structurally_equal(apply_script(a, s), b));
}

TEST(Diff, PropertiesOnRandomPairs) {
  test_support::ProgramGenerator gen(99);
  for (int i = 0; i < 300; ++i) {
    const NodeSpec spec = gen.program();
    const AstTree a(spec);
    const AstTree b(i % 5 == 0 ? gen.program() : gen.perturb(spec));
    const EditScript s = diff(a, b);
    ASSERT_TRUE(structurally_equal(apply_script(a, s), b)) << to_minilang(a) << "\n---\n" << to_minilang(b);
    EXPECT_LE(s.length(), a.size() + b.size());
    EXPECT_EQ(diff(a, b), s);
    EXPECT_TRUE(diff(a, a).empty());
    for (const auto& act : s.actions) {
      const bool targeted = act.kind == EditKind::Insert || act.kind == EditKind::Move;
      EXPECT_EQ(act.target_parent.has_value(), targeted);
      EXPECT_EQ(act.position.has_value(), targeted);
      EXPECT_EQ(act.new_label.has_value(), act.kind == EditKind::Update);
    }
  }
}

TEST(Diff, SingleRelabelIsOneUpdate) {
  test_support::ProgramGenerator gen(4242);
  for (int done = 0; done < 500;) {
    const NodeSpec spec = gen.program();
    NodeSpec changed = spec;
    if (!gen.relabel(changed)) continue;
    const EditScript s = diff(AstTree(spec), AstTree(changed));
    ASSERT_EQ(s.length(), 1u) << to_minilang(AstTree(spec)) << "\n---\n" << to_minilang(AstTree(changed));
    EXPECT_EQ(s.actions[0].kind, EditKind::Update);
    ++done;
  }
}

TEST(Diff, DuplicateSubtreesFollowTheirContext) {
  const auto one_update = [](const char* a, const char* b) {
    const EditScript s = diff(parse_minilang(a), parse_minilang(b));
    return s.length() == 1 && s.actions[0].kind == EditKind::Update;
  };
  EXPECT_TRUE(one_update("i = b - -y > -y;", "i = b - -z > -y;"));
  EXPECT_TRUE(one_update("if (-y == -b) { }", "if (-b == -b) { }"));
  EXPECT_TRUE(one_update("i = print(-n, (6 + n) / -n);", "i = print(-n, (6 + n) / -f);"));
  EXPECT_TRUE(one_update("def f(y, y, c) { }", "def f(g, y, c) { }"));
}

TEST(Diff, SerializationRoundTrip) {
  const AstTree a = parse_minilang("x = 1; if (x < 2) { y = x; }");
  const AstTree b = parse_minilang("if (x <= 2) { y = x + 1; } x = 1; z = 0;");
  const EditScript s = diff(a, b);
  std::stringstream io;
  write_script_jsonl(io, s);
  const EditScript back = read_script_jsonl(io);
  EXPECT_EQ(back.actions, s.actions);
  EXPECT_TRUE(structurally_equal(apply_script(a, back), b));
  // Absent fields are omitted.
  const auto j = to_json(s.actions.front());
  if (s.actions.front().kind != EditKind::Update) EXPECT_FALSE(j.contains("new_label"));
}

TEST(ShortestScript, IdenticalPoolMemberGivesEmptyScript) {
  const AstTree t = parse_minilang("x = 1; y = 2;");
  const std::vector<AstTree> pool{parse_minilang("x = 5;"), t, parse_minilang("")};
  const ShortestResult r = shortest_script_indexed(t, pool);
  EXPECT_TRUE(r.script.empty());
  EXPECT_EQ(r.pool_index, 1u);
}

TEST(ShortestScript, SingletonPoolEqualsDiff) {
  const AstTree a = parse_minilang("x = 1;");
  const std::vector<AstTree> pool{parse_minilang("x = 2; y = 3;")};
  EXPECT_EQ(shortest_script(a, pool).actions, diff(a, pool[0]).actions);
  EXPECT_THROW(shortest_script(a, std::vector<AstTree>{}), EmptyPool);
}

TEST(ShortestScript, MatchesBruteForceArgmin) {
  test_support::ProgramGenerator gen(4);
  for (int round = 0; round < 20; ++round) {
    const NodeSpec base = gen.program();
    const AstTree incorrect(gen.perturb(base, 2));
    std::vector<AstTree> pool;
    for (int i = 0; i < 10; ++i) pool.emplace_back(gen.perturb(base, 3));
    pool.push_back(pool[3]);  // duplicate member must not change the outcome
    std::size_t best = 0;
    std::vector<EditScript> all;
    for (const auto& p : pool) all.push_back(diff(incorrect, p));
    for (std::size_t i = 1; i < all.size(); ++i) {
      const auto& c = all[i];
      const auto& b = all[best];
      if (c.length() < b.length() ||
          (c.length() == b.length() &&
           key_sequence(c, kStrictestScheme) < key_sequence(b, kStrictestScheme)))
        best = i;
    }
    const ShortestResult r = shortest_script_indexed(incorrect, pool);
    EXPECT_EQ(r.pool_index, best);
    EXPECT_EQ(r.script.actions, all[best].actions);
  }
}
