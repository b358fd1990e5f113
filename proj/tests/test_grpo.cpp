#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ctxeval/grpo.hpp"
#include "oracles.hpp"

using namespace ctxeval;

namespace {

RolloutGroup make_group(std::vector<double> rewards, std::vector<double> logp_new,
                        std::vector<double> logp_old, std::vector<double> kl = {},
                        std::vector<double> entropy = {}) {
  RolloutGroup g;
  g.rewards = std::move(rewards);
  g.logp_new = std::move(logp_new);
  g.logp_old = std::move(logp_old);
  g.kl_estimates = kl.empty() ? std::vector<double>(g.rewards.size(), 0.0) : std::move(kl);
  g.entropy_estimates =
      entropy.empty() ? std::vector<double>(g.rewards.size(), 0.0) : std::move(entropy);
  return g;
}

RolloutGroup random_group(std::mt19937& rng, int k) {
  std::uniform_real_distribution<double> reward(0.0, 1.0);
  std::uniform_real_distribution<double> logp(-3.0, 0.0);
  std::uniform_real_distribution<double> kl(0.0, 0.5);
  std::uniform_real_distribution<double> entropy(-1.0, 2.0);
  RolloutGroup g;
  for (int i = 0; i < k; ++i) {
    g.rewards.push_back(reward(rng));
    g.logp_new.push_back(logp(rng));
    g.logp_old.push_back(logp(rng));
    g.kl_estimates.push_back(kl(rng));
    g.entropy_estimates.push_back(entropy(rng));
  }
  return g;
}

}  // namespace

// ---- group_advantages ----

TEST(GroupAdvantages, ConstantGroupIsExactlyZero) {
  auto a = group_advantages(std::vector<double>{0.7, 0.7, 0.7, 0.7, 0.7}, 1e-8);
  for (double v : a) EXPECT_EQ(v, 0.0);
}

TEST(GroupAdvantages, TwoPointGroup) {
  // mean 0.5, population std 0.5 -> [1, -1]
  auto a = group_advantages(std::vector<double>{1.0, 0.0}, 0.0);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_DOUBLE_EQ(a[0], 1.0);
  EXPECT_DOUBLE_EQ(a[1], -1.0);
}

TEST(GroupAdvantages, OneHotGroupOfFive) {
  // mean 0.2, population std 0.4 -> [2, -0.5, -0.5, -0.5, -0.5]
  auto a = group_advantages(std::vector<double>{1.0, 0.0, 0.0, 0.0, 0.0}, 0.0);
  ASSERT_EQ(a.size(), 5u);
  EXPECT_NEAR(a[0], 2.0, 1e-12);
  for (int i = 1; i < 5; ++i) EXPECT_NEAR(a[i], -0.5, 1e-12);
}

TEST(GroupAdvantages, NonFiniteRewardRejected) {
  EXPECT_THROW(group_advantages(std::vector<double>{1.0, std::nan("")}, 1e-8), ValidationError);
  EXPECT_THROW(group_advantages(std::vector<double>{}, 1e-8), ValidationError);
}

TEST(GroupAdvantages, StandardizationProperty) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> reward(0.0, 1.0);
  const double eps = 1e-8;
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<double> rewards;
    for (int i = 0; i < 5; ++i) rewards.push_back(reward(rng));
    if (rewards == std::vector<double>(5, rewards[0])) continue;
    auto a = group_advantages(rewards, eps);

    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= 5.0;
    EXPECT_LE(std::abs(mean), 1e-9);

    double r_mean = 0.0;
    for (double r : rewards) r_mean += r;
    r_mean /= 5.0;
    double r_sq = 0.0;
    for (double r : rewards) r_sq += (r - r_mean) * (r - r_mean);
    const double sigma = std::sqrt(r_sq / 5.0);

    double a_sq = 0.0;
    for (double v : a) a_sq += (v - mean) * (v - mean);
    const double a_std = std::sqrt(a_sq / 5.0);
    EXPECT_NEAR(a_std, sigma / (sigma + eps), 1e-9);
  }
}

TEST(GroupAdvantages, ShiftInvariance) {
  std::mt19937 rng(37);
  std::uniform_real_distribution<double> reward(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-2.0, 2.0);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<double> rewards;
    for (int i = 0; i < 5; ++i) rewards.push_back(reward(rng));
    const double c = shift(rng);
    std::vector<double> shifted;
    for (double r : rewards) shifted.push_back(r + c);
    auto a = group_advantages(rewards, 1e-8);
    auto b = group_advantages(shifted, 1e-8);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(GroupAdvantages, ScaleInvarianceWithZeroEps) {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> reward(0.0, 1.0);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<double> rewards;
    for (int i = 0; i < 5; ++i) rewards.push_back(reward(rng));
    std::vector<double> scaled;
    for (double r : rewards) scaled.push_back(r * 4.0);  // power of two keeps fp exact
    auto a = group_advantages(rewards, 0.0);
    auto b = group_advantages(scaled, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

// ---- importance_ratios ----

TEST(ImportanceRatios, IdenticalPoliciesGiveOnes) {
  std::vector<double> lp{-1.0, -2.0, -0.5};
  auto r = importance_ratios(lp, lp);
  for (double v : r) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(ImportanceRatios, LogTwoDoubles) {
  const double ln2 = std::log(2.0);
  auto r = importance_ratios(std::vector<double>{-1.0 + ln2, -1.0 - ln2},
                             std::vector<double>{-1.0, -1.0});
  EXPECT_NEAR(r[0], 2.0, 1e-15);
  EXPECT_NEAR(r[1], 0.5, 1e-15);
}

TEST(ImportanceRatios, LengthMismatchRejected) {
  EXPECT_THROW(importance_ratios(std::vector<double>{0.0}, std::vector<double>{0.0, 0.0}),
               ValidationError);
}

// ---- grpo_loss ----

TEST(GrpoLoss, ZeroAdvantagesLeaveOnlyRegularizers) {
  GrpoConfig cfg;
  auto g = make_group({0.5, 0.5, 0.5, 0.5, 0.5}, {-1, -1, -1, -1, -1}, {-1, -1, -1, -1, -1},
                      {0.2, 0.2, 0.2, 0.2, 0.2}, {1.0, 1.0, 1.0, 1.0, 1.0});
  auto [loss, diag] = grpo_loss(g, cfg, 0.5);
  EXPECT_DOUBLE_EQ(diag.surrogate, 0.0);
  EXPECT_DOUBLE_EQ(diag.kl_penalty, 0.5 * 0.2);
  EXPECT_DOUBLE_EQ(diag.entropy_bonus, 0.01 * 1.0);
  EXPECT_DOUBLE_EQ(loss, 0.5 * 0.2 - 0.01 * 1.0);
}

TEST(GrpoLoss, ClipBranchCapsRatio) {
  // rho = 1.5, A = 1: surrogate term is -min(1.5, 1.2) = -1.2
  GrpoConfig cfg;
  cfg.group_size = 2;
  cfg.advantage_eps = 0.0;  // keep the two-point advantages exactly +-1
  const double ln = std::log(1.5);
  auto g = make_group({1.0, 0.0}, {ln, 0.0}, {0.0, 0.0});
  auto [loss, diag] = grpo_loss(g, cfg, 0.0);
  // advantages are [1, -1]; sample 0 clips at 1.2, sample 1 pays full rho * -1
  EXPECT_NEAR(diag.surrogate, -(1.2 * 1.0 + 1.0 * -1.0) / 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(diag.clip_fraction, 0.5);
  EXPECT_NEAR(loss, diag.surrogate, 1e-15);
}

TEST(GrpoLoss, UnitRatiosGiveExactZeroSurrogateWithZeroEps) {
  GrpoConfig cfg;
  cfg.advantage_eps = 0.0;
  // dyadic rewards make the standardized advantages cancel exactly
  auto g = make_group({1.0, 0.0, 0.5, 0.25, 0.75}, {-1, -1, -1, -1, -1},
                      {-1, -1, -1, -1, -1});
  auto [loss, diag] = grpo_loss(g, cfg, 0.0);
  EXPECT_EQ(diag.surrogate, 0.0);
  EXPECT_EQ(loss, 0.0);
  EXPECT_DOUBLE_EQ(diag.clip_fraction, 0.0);
}

TEST(GrpoLoss, GroupSizeMismatchRejected) {
  GrpoConfig cfg;  // group_size 5
  auto g = make_group({1.0, 0.0}, {0.0, 0.0}, {0.0, 0.0});
  EXPECT_THROW(grpo_loss(g, cfg, 0.0), ValidationError);
}

TEST(GrpoLoss, GroupInvariantsEnforced) {
  GrpoConfig cfg;
  cfg.group_size = 2;
  auto reward_out_of_range = make_group({1.5, 0.0}, {0.0, 0.0}, {0.0, 0.0});
  EXPECT_THROW(grpo_loss(reward_out_of_range, cfg, 0.0), ValidationError);
  auto negative_kl = make_group({1.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {-0.1, 0.0});
  EXPECT_THROW(grpo_loss(negative_kl, cfg, 0.0), ValidationError);
  auto bad_entropy =
      make_group({1.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {std::nan(""), 0.0});
  EXPECT_THROW(grpo_loss(bad_entropy, cfg, 0.0), ValidationError);
}

TEST(GrpoLoss, MatchesNaiveTranscription) {
  std::mt19937 rng(53);
  GrpoConfig cfg;
  for (int iter = 0; iter < 500; ++iter) {
    auto g = random_group(rng, cfg.group_size);
    auto [loss, diag] = grpo_loss(g, cfg, 1e-3);
    const double expected = oracle::naive_grpo_loss(g, cfg, 1e-3);
    const double scale = std::max(1.0, std::abs(expected));
    EXPECT_LE(std::abs(loss - expected) / scale, 1e-12);
  }
}

TEST(GrpoLoss, ClipBranchActivatesExactlyOutsideWindow) {
  GrpoConfig cfg;
  cfg.group_size = 2;
  for (double rho : {0.5, 0.79999, 0.8, 1.0, 1.2, 1.20001, 2.0}) {
    auto g = make_group({1.0, 0.0}, {std::log(rho), 0.0}, {0.0, 0.0});
    auto [loss, diag] = grpo_loss(g, cfg, 0.0);
    const bool outside = rho < 0.8 || rho > 1.2;
    // sample 1 has rho exactly 1 (never clipped), so the fraction isolates sample 0
    EXPECT_DOUBLE_EQ(diag.clip_fraction, outside ? 0.5 : 0.0) << "rho=" << rho;
  }
}

// ---- update_kl_beta ----

TEST(UpdateKlBeta, FixedPointAtTarget) {
  GrpoConfig cfg;
  EXPECT_NEAR(update_kl_beta(1e-3, cfg.kl_target, cfg), 1e-3, 1e-15);
}

TEST(UpdateKlBeta, DoubleTargetGrowsByExpCoef) {
  GrpoConfig cfg;
  EXPECT_NEAR(update_kl_beta(1e-3, 2.0 * cfg.kl_target, cfg), 1e-3 * std::exp(0.001), 1e-15);
}

TEST(UpdateKlBeta, ZeroObservedShrinksByExpCoef) {
  GrpoConfig cfg;
  EXPECT_NEAR(update_kl_beta(1e-3, 0.0, cfg), 1e-3 * std::exp(-0.001), 1e-15);
}

TEST(UpdateKlBeta, StrictlyIncreasingInObservedKl) {
  GrpoConfig cfg;
  double prev = update_kl_beta(1e-3, 0.0, cfg);
  for (double kl = 0.01; kl < 1.0; kl += 0.01) {
    double next = update_kl_beta(1e-3, kl, cfg);
    EXPECT_GT(next, prev);
    prev = next;
  }
}

TEST(UpdateKlBeta, GrowsIffAboveTarget) {
  GrpoConfig cfg;
  EXPECT_GT(update_kl_beta(1e-3, 0.15, cfg), 1e-3);
  EXPECT_LT(update_kl_beta(1e-3, 0.05, cfg), 1e-3);
}

TEST(UpdateKlBeta, ClampedToBounds) {
  GrpoConfig cfg;
  EXPECT_GE(update_kl_beta(1e-8, 0.0, cfg), 1e-8);
  EXPECT_LE(update_kl_beta(10.0, 100.0, cfg), 10.0);
}

// ---- GrpoConfig ----

TEST(GrpoConfig, PaperDefaults) {
  GrpoConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.clip_eps, 0.2);
  EXPECT_DOUBLE_EQ(cfg.entropy_alpha, 0.01);
  EXPECT_DOUBLE_EQ(cfg.kl_beta_init, 1e-3);
  EXPECT_DOUBLE_EQ(cfg.kl_target, 0.1);
  EXPECT_DOUBLE_EQ(cfg.kl_coef, 0.001);
  EXPECT_EQ(cfg.group_size, 5);
  EXPECT_DOUBLE_EQ(cfg.advantage_eps, 1e-8);
}

TEST(GrpoConfig, InvariantsEnforced) {
  GrpoConfig cfg;
  cfg.clip_eps = 1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = GrpoConfig{};
  cfg.group_size = 1;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = GrpoConfig{};
  cfg.kl_coef = -0.1;
  EXPECT_THROW(cfg.validate(), ValidationError);
}
