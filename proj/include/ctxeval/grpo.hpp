// Group-relative policy optimization numerics: standardized group
// advantages, importance ratios, the clipped surrogate objective with KL and
// entropy terms, and the adaptive KL-coefficient controller. Pure functions
// of numbers; callers supply rewards and per-sample log-probabilities.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctxeval/core.hpp"

namespace ctxeval {

struct GrpoConfig {
  double clip_eps = 0.2;
  double entropy_alpha = 0.01;
  double kl_beta_init = 1e-3;
  double kl_target = 0.1;
  double kl_coef = 0.001;
  int group_size = 5;
  double advantage_eps = 1e-8;

  void validate() const {
    if (!(clip_eps > 0.0) || clip_eps >= 1.0) {
      throw ValidationError("clip_eps must lie in (0, 1)");
    }
    if (group_size < 2) throw ValidationError("group_size must be at least 2");
    if (entropy_alpha < 0.0 || kl_beta_init < 0.0 || kl_target < 0.0 || kl_coef < 0.0 ||
        advantage_eps < 0.0) {
      throw ValidationError("coefficients must be non-negative");
    }
  }
};

// One prompt's worth of rollouts; all five lists share length K.
struct RolloutGroup {
  std::vector<double> rewards;
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::vector<double> kl_estimates;
  std::vector<double> entropy_estimates;
};

// A_i = (r_i - mean) / (population std + eps); a constant-reward group has
// zero advantage everywhere by definition.
inline std::vector<double> group_advantages(std::span<const double> rewards,
                                            double advantage_eps) {
  if (rewards.empty()) throw ValidationError("reward group must be non-empty");
  for (double r : rewards) {
    if (!std::isfinite(r)) throw ValidationError("rewards must be finite");
  }
  const auto k = static_cast<double>(rewards.size());
  bool constant = true;
  for (double r : rewards) {
    if (r != rewards.front()) {
      constant = false;
      break;
    }
  }
  if (constant) return std::vector<double>(rewards.size(), 0.0);

  double sum = 0.0;
  for (double r : rewards) sum += r;
  const double mean = sum / k;
  double sq_sum = 0.0;
  for (double r : rewards) sq_sum += (r - mean) * (r - mean);
  const double std_dev = std::sqrt(sq_sum / k);

  std::vector<double> advantages;
  advantages.reserve(rewards.size());
  for (double r : rewards) advantages.push_back((r - mean) / (std_dev + advantage_eps));
  return advantages;
}

// rho_i = exp(logp_new_i - logp_old_i)
inline std::vector<double> importance_ratios(std::span<const double> logp_new,
                                             std::span<const double> logp_old) {
  if (logp_new.size() != logp_old.size()) {
    throw ValidationError("log-probability lists must have equal length");
  }
  std::vector<double> ratios;
  ratios.reserve(logp_new.size());
  for (std::size_t i = 0; i < logp_new.size(); ++i) {
    if (!std::isfinite(logp_new[i]) || !std::isfinite(logp_old[i])) {
      throw ValidationError("log-probabilities must be finite");
    }
    ratios.push_back(std::exp(logp_new[i] - logp_old[i]));
  }
  return ratios;
}

struct GrpoDiagnostics {
  double surrogate = 0.0;      // -mean(min(rho*A, clip(rho)*A))
  double kl_penalty = 0.0;     // beta * mean(KL estimates)
  double entropy_bonus = 0.0;  // alpha * mean(entropy estimates)
  double clip_fraction = 0.0;  // share of samples with rho outside [1-eps, 1+eps]
};

// loss = surrogate + kl_penalty - entropy_bonus
inline std::pair<double, GrpoDiagnostics> grpo_loss(const RolloutGroup& group,
                                                    const GrpoConfig& cfg, double kl_beta) {
  cfg.validate();
  const auto k = static_cast<std::size_t>(cfg.group_size);
  if (group.rewards.size() != k || group.logp_new.size() != k || group.logp_old.size() != k ||
      group.kl_estimates.size() != k || group.entropy_estimates.size() != k) {
    throw ValidationError("all rollout lists must have length group_size");
  }
  for (double r : group.rewards) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("rewards must lie in [0, 1]");
  }
  for (double v : group.kl_estimates) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError("KL estimates must be finite and non-negative");
    }
  }
  for (double v : group.entropy_estimates) {
    if (!std::isfinite(v)) throw ValidationError("entropy estimates must be finite");
  }
  const auto advantages = group_advantages(group.rewards, cfg.advantage_eps);
  const auto ratios = importance_ratios(group.logp_new, group.logp_old);

  double surrogate_sum = 0.0;
  double kl_sum = 0.0;
  double entropy_sum = 0.0;
  int clipped = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double clipped_ratio = std::clamp(ratios[i], 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    if (ratios[i] < 1.0 - cfg.clip_eps || ratios[i] > 1.0 + cfg.clip_eps) ++clipped;
    surrogate_sum += std::min(ratios[i] * advantages[i], clipped_ratio * advantages[i]);
    kl_sum += group.kl_estimates[i];
    entropy_sum += group.entropy_estimates[i];
  }
  const auto kd = static_cast<double>(k);
  GrpoDiagnostics diag;
  diag.surrogate = -surrogate_sum / kd;
  diag.kl_penalty = kl_beta * (kl_sum / kd);
  diag.entropy_bonus = cfg.entropy_alpha * (entropy_sum / kd);
  diag.clip_fraction = static_cast<double>(clipped) / kd;
  return {diag.surrogate + diag.kl_penalty - diag.entropy_bonus, diag};
}

// Exponential proportional controller on the KL coefficient:
// beta' = beta * exp(coef * (observed/target - 1)), clamped to [1e-8, 10].
// Grows exactly when the observed KL exceeds the target.
inline double update_kl_beta(double beta, double observed_kl, const GrpoConfig& cfg) {
  const double next = beta * std::exp(cfg.kl_coef * (observed_kl / cfg.kl_target - 1.0));
  return std::clamp(next, 1e-8, 10.0);
}

}  // namespace ctxeval
