// Reward stack: tool-call extraction from model text, one-to-one matching
// against gold calls, the F1-style tool reward with its 0/0 edge case, the
// 0-5 judge score normalization, and the clipped weighted blend.
#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctxeval/core.hpp"
#include "ctxeval/prompts.hpp"

namespace ctxeval {

// ---- Parsing ----

struct ParsedCalls {
  std::vector<ToolCall> calls;
  int malformed = 0;  // unparseable or structurally wrong blocks
};

// Extracts <tool_call>{"name": ..., "arguments": {...}}</tool_call> blocks.
// Malformed blocks (bad JSON, missing fields, unterminated tag) are counted,
// not raised; surrounding prose is ignored.
inline ParsedCalls parse_tool_calls(std::string_view text) {
  ParsedCalls result;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = text.find(kToolCallOpenTag, pos);
    if (open == std::string_view::npos) break;
    const std::size_t payload_start = open + kToolCallOpenTag.size();
    const std::size_t close = text.find(kToolCallCloseTag, payload_start);
    if (close == std::string_view::npos) {
      ++result.malformed;  // unterminated block swallows the rest
      break;
    }
    const std::string_view payload = text.substr(payload_start, close - payload_start);
    json j = json::parse(payload, nullptr, false);
    if (j.is_discarded()) {
      ++result.malformed;
    } else {
      try {
        result.calls.push_back(tool_call_from_json(j));
      } catch (const ValidationError&) {
        ++result.malformed;
      }
    }
    pos = close + kToolCallCloseTag.size();
  }
  return result;
}

// ---- Matching ----

struct MatchResult {
  int n_pred = 0;
  int n_gold = 0;
  int n_correct = 0;
  std::vector<std::pair<int, int>> pairs;  // (pred index, gold index), one-to-one
};

// Maximum one-to-one matching under exact equality; with equality as the
// predicate this is the multiset intersection, so a greedy first-fit scan
// is already maximal.
inline MatchResult match_calls(std::span<const ToolCall> pred, std::span<const ToolCall> gold) {
  MatchResult result;
  result.n_pred = static_cast<int>(pred.size());
  result.n_gold = static_cast<int>(gold.size());
  std::vector<bool> gold_used(gold.size(), false);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < gold.size(); ++j) {
      if (!gold_used[j] && pred[i] == gold[j]) {
        gold_used[j] = true;
        result.pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        break;
      }
    }
  }
  result.n_correct = static_cast<int>(result.pairs.size());
  return result;
}

// ---- Rewards ----

// Precision = Nc/max(1,Np), Recall = Nc/max(1,Ng),
// reward = 2PR/max(1, P+R); both-empty scores 1.0.
inline double tool_call_f1(const MatchResult& match) {
  if (match.n_pred == 0 && match.n_gold == 0) return 1.0;
  const double precision =
      static_cast<double>(match.n_correct) / std::max(1, match.n_pred);
  const double recall = static_cast<double>(match.n_correct) / std::max(1, match.n_gold);
  return 2.0 * precision * recall / std::max(1.0, precision + recall);
}

inline double tool_call_f1(std::span<const ToolCall> pred, std::span<const ToolCall> gold) {
  return tool_call_f1(match_calls(pred, gold));
}

// Judge score s in {0..5} normalized to s/5.
inline double roleplay_reward(int score) {
  if (score < 0 || score > 5) {
    throw ValidationError("judge score must be in {0..5}, got " + std::to_string(score));
  }
  return static_cast<double>(score) / 5.0;
}

struct RewardWeights {
  double eta_tool = 0.5;
  double eta_dlg = 0.5;

  void validate() const {
    if (eta_tool < 0.0 || eta_tool > 1.0 || eta_dlg < 0.0 || eta_dlg > 1.0) {
      throw ValidationError("reward weights must lie in [0, 1]");
    }
  }
};

// Weighted sum clipped to [0, 1].
inline double combined_reward(double r_tool, double r_dlg, const RewardWeights& weights) {
  weights.validate();
  return std::clamp(weights.eta_tool * r_tool + weights.eta_dlg * r_dlg, 0.0, 1.0);
}

}  // namespace ctxeval
