#include <gtest/gtest.h>

#include <random>

#include "ctxeval/reward.hpp"
#include "oracles.hpp"

using namespace ctxeval;

namespace {

ToolCall fx(int v) {
  ToolCall c;
  c.function_name = "f";
  c.arguments["x"] = json(v);
  return c;
}

}  // namespace

// ---- parse_tool_calls ----

TEST(ParseToolCalls, NoBlocksYieldsNothing) {
  auto r = parse_tool_calls("just a normal sentence");
  EXPECT_TRUE(r.calls.empty());
  EXPECT_EQ(r.malformed, 0);
}

TEST(ParseToolCalls, SingleWellFormedBlock) {
  auto r = parse_tool_calls(R"(<tool_call>{"name":"f","arguments":{"x":1}}</tool_call>)");
  ASSERT_EQ(r.calls.size(), 1u);
  EXPECT_EQ(r.calls[0].function_name, "f");
  EXPECT_EQ(r.calls[0].arguments.at("x"), json(1));
  EXPECT_EQ(r.malformed, 0);
}

TEST(ParseToolCalls, ValidPlusMalformedCountsOne) {
  auto r = parse_tool_calls(
      "<tool_call>{\"name\":\"f\",\"arguments\":{\"x\":1}}</tool_call>"
      "<tool_call>{broken</tool_call>");
  EXPECT_EQ(r.calls.size(), 1u);
  EXPECT_EQ(r.malformed, 1);
}

TEST(ParseToolCalls, MissingFieldsAreMalformed) {
  EXPECT_EQ(parse_tool_calls("<tool_call>{\"name\":\"f\"}</tool_call>").malformed, 1);
  EXPECT_EQ(parse_tool_calls("<tool_call>{\"arguments\":{}}</tool_call>").malformed, 1);
  EXPECT_EQ(parse_tool_calls("<tool_call>[1,2]</tool_call>").malformed, 1);
}

TEST(ParseToolCalls, UnterminatedBlockIsMalformed) {
  auto r = parse_tool_calls("<tool_call>{\"name\":\"f\",\"arguments\":{}}");
  EXPECT_TRUE(r.calls.empty());
  EXPECT_EQ(r.malformed, 1);
}

TEST(ParseToolCalls, ProseAroundBlocksIgnored) {
  auto r = parse_tool_calls(
      "Sure, checking that for you. "
      "<tool_call>{\"name\":\"g\",\"arguments\":{\"y\":\"a\"}}</tool_call> done!");
  ASSERT_EQ(r.calls.size(), 1u);
  EXPECT_EQ(r.calls[0].function_name, "g");
}

TEST(ParseToolCalls, ArgumentsKeysCanonicallySorted) {
  auto r = parse_tool_calls(
      R"(<tool_call>{"name":"f","arguments":{"z":1,"a":2}}</tool_call>)");
  ASSERT_EQ(r.calls.size(), 1u);
  EXPECT_EQ(tool_call_to_json(r.calls[0]).dump(),
            R"({"name":"f","arguments":{"a":2,"z":1}})");
}

// ---- match_calls ----

TEST(MatchCalls, IdenticalMultisetsMatchFully) {
  std::vector<ToolCall> calls{fx(1), fx(2), fx(2)};
  auto m = match_calls(calls, calls);
  EXPECT_EQ(m.n_correct, 3);
  EXPECT_EQ(m.pairs.size(), 3u);
}

TEST(MatchCalls, DuplicatePredMatchesOnce) {
  std::vector<ToolCall> pred{fx(1), fx(1)};
  std::vector<ToolCall> gold{fx(1)};
  auto m = match_calls(pred, gold);
  EXPECT_EQ(m.n_pred, 2);
  EXPECT_EQ(m.n_gold, 1);
  EXPECT_EQ(m.n_correct, 1);
}

TEST(MatchCalls, DisjointSetsMatchNothing) {
  std::vector<ToolCall> pred{fx(1)};
  std::vector<ToolCall> gold{fx(2)};
  EXPECT_EQ(match_calls(pred, gold).n_correct, 0);
}

TEST(MatchCalls, PairsAreOneToOne) {
  std::mt19937 rng(17);
  for (int iter = 0; iter < 200; ++iter) {
    auto pred = oracle::random_call_multiset(rng, 6);
    auto gold = oracle::random_call_multiset(rng, 6);
    auto m = match_calls(pred, gold);
    std::set<int> pred_used, gold_used;
    for (auto [p, g] : m.pairs) {
      EXPECT_TRUE(pred_used.insert(p).second);
      EXPECT_TRUE(gold_used.insert(g).second);
      EXPECT_EQ(pred[p], gold[g]);
    }
    EXPECT_LE(m.n_correct, std::min(m.n_pred, m.n_gold));
  }
}

TEST(MatchCalls, AgreesWithBruteForceMaximumMatching) {
  std::mt19937 rng(5);
  for (int iter = 0; iter < 500; ++iter) {
    auto pred = oracle::random_call_multiset(rng, 6);
    auto gold = oracle::random_call_multiset(rng, 6);
    EXPECT_EQ(match_calls(pred, gold).n_correct, oracle::brute_force_match_count(pred, gold));
  }
}

// ---- tool_call_f1 ----

TEST(ToolCallF1, BothEmptyIsPerfect) {
  EXPECT_DOUBLE_EQ(tool_call_f1({}, {}), 1.0);
}

TEST(ToolCallF1, PerfectMatchOfThree) {
  std::vector<ToolCall> calls{fx(1), fx(2), fx(3)};
  EXPECT_DOUBLE_EQ(tool_call_f1(calls, calls), 1.0);
}

TEST(ToolCallF1, HalfRight) {
  // 2 pred, 2 gold, 1 correct: P = R = 0.5, reward = 2*0.25/max(1,1) = 0.5
  std::vector<ToolCall> pred{fx(1), fx(9)};
  std::vector<ToolCall> gold{fx(1), fx(2)};
  EXPECT_DOUBLE_EQ(tool_call_f1(pred, gold), 0.5);
}

TEST(ToolCallF1, DenominatorGuardBelowOne) {
  // 1 pred, 4 gold, 1 correct: P = 1, R = 0.25, reward = 0.5/1.25 = 0.4
  std::vector<ToolCall> pred{fx(1)};
  std::vector<ToolCall> gold{fx(1), fx(2), fx(3), fx(4)};
  EXPECT_DOUBLE_EQ(tool_call_f1(pred, gold), 0.4);
}

TEST(ToolCallF1, DisjointIsZero) {
  std::vector<ToolCall> pred{fx(1)};
  std::vector<ToolCall> gold{fx(2)};
  EXPECT_DOUBLE_EQ(tool_call_f1(pred, gold), 0.0);
}

TEST(ToolCallF1, SpuriousPredictionNeverHelps) {
  std::mt19937 rng(23);
  for (int iter = 0; iter < 300; ++iter) {
    auto pred = oracle::random_call_multiset(rng, 5);
    auto gold = oracle::random_call_multiset(rng, 5);
    double before = tool_call_f1(pred, gold);
    pred.push_back(fx(777));  // never in gold's alphabet
    EXPECT_LE(tool_call_f1(pred, gold), before + 1e-15);
  }
}

TEST(ToolCallF1, AlwaysInUnitInterval) {
  std::mt19937 rng(29);
  for (int iter = 0; iter < 300; ++iter) {
    auto pred = oracle::random_call_multiset(rng, 6);
    auto gold = oracle::random_call_multiset(rng, 6);
    double r = tool_call_f1(pred, gold);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
}

// ---- roleplay_reward ----

TEST(RoleplayReward, EndpointsAndMidpoint) {
  EXPECT_DOUBLE_EQ(roleplay_reward(0), 0.0);
  EXPECT_DOUBLE_EQ(roleplay_reward(5), 1.0);
  EXPECT_DOUBLE_EQ(roleplay_reward(4), 0.8);
  EXPECT_DOUBLE_EQ(roleplay_reward(3), 0.6);
}

TEST(RoleplayReward, OutOfRangeRejected) {
  EXPECT_THROW(roleplay_reward(-1), ValidationError);
  EXPECT_THROW(roleplay_reward(6), ValidationError);
}

// ---- combined_reward ----

TEST(CombinedReward, ToolOnlyWeightPassesThrough) {
  EXPECT_DOUBLE_EQ(combined_reward(0.7, 0.3, {1.0, 0.0}), 0.7);
}

TEST(CombinedReward, DefaultWeightsBlend) {
  EXPECT_DOUBLE_EQ(combined_reward(1.0, 0.6, {0.5, 0.5}), 0.8);
}

TEST(CombinedReward, ClippedAtOne) {
  EXPECT_DOUBLE_EQ(combined_reward(1.5, 1.5, {1.0, 1.0}), 1.0);
}

TEST(CombinedReward, ClippedAtZero) {
  EXPECT_DOUBLE_EQ(combined_reward(-2.0, 0.0, {1.0, 1.0}), 0.0);
}

TEST(CombinedReward, BadWeightsRejected) {
  EXPECT_THROW(combined_reward(0.5, 0.5, {1.5, 0.0}), ValidationError);
  EXPECT_THROW(combined_reward(0.5, 0.5, {0.0, -0.1}), ValidationError);
}
