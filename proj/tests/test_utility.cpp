#include <gtest/gtest.h>

#include <cmath>

#include "mecoff/config.hpp"
#include "mecoff/errors.hpp"
#include "mecoff/utility.hpp"

using namespace mecoff;

namespace {
SystemConfig cfg4() {
  SystemConfig cfg = reference_config();
  cfg.task_queue_cap = 4;
  return cfg;
}
}  // namespace

TEST(TaskDrop, Examples) {
  const auto cfg = cfg4();
  EXPECT_EQ(task_drop(4, 0.0, 1, cfg), 1);
  EXPECT_EQ(task_drop(4, 3e-3, 1, cfg), 0);
  EXPECT_EQ(task_drop(0, 0.0, 0, cfg), 0);
  // A failed execution does not free a slot.
  EXPECT_EQ(task_drop(4, 6e-3, 1, cfg), 1);
}

TEST(QueuingDelay, Examples) {
  EXPECT_EQ(queuing_delay(3, 2e-3), 2);
  EXPECT_EQ(queuing_delay(0, 0.0), 0);
  EXPECT_EQ(queuing_delay(1, 6e-3), 0);
}

TEST(FailurePenalty, Examples) {
  const auto cfg = cfg4();
  EXPECT_EQ(failure_penalty(6e-3, cfg), 1);
  EXPECT_EQ(failure_penalty(5e-3, cfg), 0);
  EXPECT_EQ(failure_penalty(0.0, cfg), 0);
}

TEST(ServicePayment, Examples) {
  const auto cfg = cfg4();
  EXPECT_DOUBLE_EQ(service_payment(4e-3, 2e-3, 2, cfg), 2e-3);
  EXPECT_EQ(service_payment(4e-3, 0.0, 0, cfg), 0.0);
  EXPECT_DOUBLE_EQ(service_payment(7e-3, 2e-3, 2, cfg), 3e-3);
}

TEST(Utility, IdleEpochIsMaximal) {
  const auto cfg = cfg4();
  const auto u = utility_from_raw({}, cfg);
  EXPECT_EQ(u.total, 20.0);
  for (int k = 0; k < kNumComponents; ++k) EXPECT_EQ(u.components[k], cfg.weights[k]);
}

TEST(Utility, LocalSuccessFrequencyCapped) {
  const auto cfg = cfg4();
  NetworkState s{1, 2, 1, std::vector<int>(6, 0)};
  const auto u = utility_components(s, {0, 2}, 3.6875e-3, 0.0, 0, cfg);
  EXPECT_NEAR(u.total, 19.988957871436791, 1e-12);
  EXPECT_NEAR(u.total, 19.98896, 5e-6);
  EXPECT_EQ(u.raw.queuing, 0);
  EXPECT_EQ(u.raw.drops, 0);
  EXPECT_EQ(u.raw.payment, 0.0);
}

TEST(Utility, FailurePenaltyComponent) {
  const auto cfg = cfg4();
  NetworkState s{2, 2, 1, std::vector<int>(6, 0)};
  const auto u = utility_components(s, {1, 1}, 6e-3, 0.0, 0, cfg);
  EXPECT_EQ(u.raw.penalty, 1);
  EXPECT_NEAR(u.components[3], 0.73575888234288464, 1e-14);
  EXPECT_EQ(u.raw.delay, cfg.epoch_duration);
}

TEST(Utility, TotalIsSequentialSumOfComponents) {
  const auto cfg = cfg4();
  NetworkState s{3, 2, 1, std::vector<int>(6, 0)};
  const auto u = utility_components(s, {2, 1}, 2.7e-3, 2e-3, 1, cfg);
  EXPECT_EQ(u.total, u.components[0] + u.components[1] + u.components[2] + u.components[3] + u.components[4]);
}

TEST(Utility, BoundedAndMonotone) {
  const auto cfg = cfg4();
  const UtilityRaw base{1e-3, 1, 1, 0, 1e-3};
  const double t0 = utility_from_raw(base, cfg).total;
  EXPECT_GT(t0, 0.0);
  EXPECT_LE(t0, 20.0);
  auto bumped = [&](auto f) {
    UtilityRaw r = base;
    f(r);
    return utility_from_raw(r, cfg).total;
  };
  EXPECT_LE(bumped([](UtilityRaw& r) { r.delay += 1e-3; }), t0);
  EXPECT_LE(bumped([](UtilityRaw& r) { r.drops += 1; }), t0);
  EXPECT_LE(bumped([](UtilityRaw& r) { r.queuing += 1; }), t0);
  EXPECT_LE(bumped([](UtilityRaw& r) { r.penalty += 1; }), t0);
  EXPECT_LE(bumped([](UtilityRaw& r) { r.payment += 1e-3; }), t0);
}

TEST(Decompose, IdentityPartitionKeepsComponents) {
  const auto cfg = cfg4();
  const auto u = utility_from_raw({1e-3, 1, 2, 0, 5e-4}, cfg);
  const auto parts = decompose(u, identity_pattern());
  ASSERT_EQ(parts.size(), 5u);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(parts[k], u.components[k]);
}

TEST(Decompose, SingleAgentGetsTotal) {
  const auto cfg = cfg4();
  const auto u = utility_from_raw({1e-3, 1, 2, 0, 5e-4}, cfg);
  const auto parts = decompose(u, {{0, 1, 2, 3, 4}});
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(parts[0], u.total);
}

TEST(Decompose, FourGroupPartition) {
  const auto cfg = cfg4();
  const auto u = utility_from_raw({1e-3, 1, 2, 0, 5e-4}, cfg);
  const auto parts = decompose(u, {{0, 2}, {1}, {3}, {4}});
  ASSERT_EQ(parts.size(), 4u);
  EXPECT_EQ(parts[0], u.components[0] + u.components[2]);
  EXPECT_EQ(parts[1], u.components[1]);
  double sum = 0;
  for (double p : parts) sum += p;
  EXPECT_NEAR(sum, u.total, 1e-12);
}

TEST(Decompose, GroupOrderDoesNotMatter) {
  const auto cfg = cfg4();
  const auto u = utility_from_raw({2e-3, 0, 1, 1, 1e-3}, cfg);
  EXPECT_EQ(decompose(u, {{2, 0}, {1}, {3}, {4}}), decompose(u, {{0, 2}, {1}, {3}, {4}}));
}

TEST(Decompose, NonPartitionRejected) {
  const auto u = utility_from_raw({}, cfg4());
  EXPECT_THROW(decompose(u, {{0, 1}, {2}}), ConfigError);
  EXPECT_THROW(decompose(u, {{0, 1, 2}, {2, 3, 4}}), ConfigError);
}
