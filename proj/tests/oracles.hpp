// Test-only reference implementations, kept deliberately independent of the
// library code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ctxeval/core.hpp"
#include "ctxeval/grpo.hpp"

namespace ctxeval::oracle {

// Exhaustive maximum one-to-one matching: tries, for every predicted call,
// each unused gold slot or none, and takes the best count.
inline int brute_force_match_count(const std::vector<ToolCall>& pred,
                                   const std::vector<ToolCall>& gold) {
  std::vector<bool> used(gold.size(), false);
  std::function<int(std::size_t)> best = [&](std::size_t i) -> int {
    if (i == pred.size()) return 0;
    int result = best(i + 1);  // leave pred[i] unmatched
    for (std::size_t j = 0; j < gold.size(); ++j) {
      if (used[j] || !(pred[i] == gold[j])) continue;
      used[j] = true;
      result = std::max(result, 1 + best(i + 1));
      used[j] = false;
    }
    return result;
  };
  return best(0);
}

// Direct transcription of the reward formulas over the brute-force count.
inline double brute_force_f1(const std::vector<ToolCall>& pred,
                             const std::vector<ToolCall>& gold) {
  const int n_pred = static_cast<int>(pred.size());
  const int n_gold = static_cast<int>(gold.size());
  if (n_pred == 0 && n_gold == 0) return 1.0;
  const int n_correct = brute_force_match_count(pred, gold);
  const double precision = static_cast<double>(n_correct) / std::max(1, n_pred);
  const double recall = static_cast<double>(n_correct) / std::max(1, n_gold);
  return 2.0 * precision * recall / std::max(1.0, precision + recall);
}

// Random call multisets over a small alphabet: <= max_calls calls with
// <= 3 arguments each, names and values drawn from tiny pools so that
// collisions (and hence nontrivial matchings) are common.
inline std::vector<ToolCall> random_call_multiset(std::mt19937& rng, int max_calls) {
  std::uniform_int_distribution<int> n_calls(0, max_calls);
  std::uniform_int_distribution<int> n_args(0, 3);
  std::uniform_int_distribution<int> name(0, 2);
  std::uniform_int_distribution<int> key(0, 2);
  std::uniform_int_distribution<int> value(0, 2);
  const char* names[] = {"f", "g", "h"};
  const char* keys[] = {"x", "y", "z"};
  std::vector<ToolCall> calls;
  for (int i = n_calls(rng); i > 0; --i) {
    ToolCall call;
    call.function_name = names[name(rng)];
    for (int a = n_args(rng); a > 0; --a) {
      call.arguments[keys[key(rng)]] = json(value(rng));
    }
    calls.push_back(std::move(call));
  }
  return calls;
}

// Naive, loop-by-loop evaluation of the group objective: standardized
// advantages, clipped surrogate, KL penalty, entropy bonus.
inline double naive_grpo_loss(const RolloutGroup& group, const GrpoConfig& cfg, double kl_beta) {
  const std::size_t k = group.rewards.size();
  double sum = 0.0;
  for (double r : group.rewards) sum += r;
  const double mean = sum / static_cast<double>(k);
  double sq = 0.0;
  for (double r : group.rewards) sq += (r - mean) * (r - mean);
  const double std_dev = std::sqrt(sq / static_cast<double>(k));

  bool constant = true;
  for (double r : group.rewards) {
    if (r != group.rewards.front()) constant = false;
  }

  double surrogate_sum = 0.0;
  double kl_sum = 0.0;
  double entropy_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double advantage =
        constant ? 0.0 : (group.rewards[i] - mean) / (std_dev + cfg.advantage_eps);
    const double ratio = std::exp(group.logp_new[i] - group.logp_old[i]);
    const double clipped =
        std::min(std::max(ratio, 1.0 - cfg.clip_eps), 1.0 + cfg.clip_eps);
    surrogate_sum += std::min(ratio * advantage, clipped * advantage);
    kl_sum += group.kl_estimates[i];
    entropy_sum += group.entropy_estimates[i];
  }
  return -surrogate_sum / static_cast<double>(k) +
         kl_beta * (kl_sum / static_cast<double>(k)) -
         cfg.entropy_alpha * (entropy_sum / static_cast<double>(k));
}

}  // namespace ctxeval::oracle
