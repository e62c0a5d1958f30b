#include <gtest/gtest.h>

#include <cmath>

#include "mecoff/config.hpp"
#include "mecoff/environment.hpp"
#include "mecoff/errors.hpp"
#include "mecoff/state.hpp"

using namespace mecoff;

namespace {

// Runs one step from `s`, trying successive seeds until the arrival draws
// equal the requested ones.
StepOutcome step_with_arrivals(const NetworkState& s, const JointAction& a, const SystemConfig& cfg, int a_t,
                               int a_e) {
  for (std::uint64_t seed = 1; seed < 100000; ++seed) {
    auto rngs = EnvStreams::from_seed(seed);
    auto out = step(s, a, cfg, rngs);
    if (out.diagnostics.task_arrival == a_t && out.diagnostics.energy_arrival == a_e) return out;
  }
  throw std::runtime_error("no seed produced the requested arrivals");
}

NetworkState ref_state(int qt, int qe, int s = 1) { return {qt, qe, s, std::vector<int>(6, 0)}; }

}  // namespace

TEST(Arrivals, DegenerateTaskArrivals) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(sample_task_arrival(rng, 0.0), 0);
    EXPECT_EQ(sample_task_arrival(rng, 1.0), 1);
    EXPECT_EQ(sample_energy_arrival(rng, 0.0), 0);
  }
}

TEST(Arrivals, EmpiricalMeans) {
  Rng rng(2);
  double t = 0, e = 0;
  for (int i = 0; i < 100000; ++i) {
    t += sample_task_arrival(rng, 0.5);
    e += sample_energy_arrival(rng, 1.6);
  }
  EXPECT_GE(t / 1e5, 0.49);
  EXPECT_LE(t / 1e5, 0.51);
  EXPECT_GE(e / 1e5, 1.56);
  EXPECT_LE(e / 1e5, 1.64);
}

TEST(Channel, IdentityMatrixIsAbsorbing) {
  std::vector<ChannelModel> chans(3, ChannelModel{{-1, -2, -3}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}});
  Rng rng(3);
  std::vector<int> g{0, 2, 1};
  for (int i = 0; i < 100; ++i) g = step_channel(g, chans, rng);
  EXPECT_EQ(g, (std::vector<int>{0, 2, 1}));
}

TEST(Channel, SingleStateChain) {
  std::vector<ChannelModel> chans{ChannelModel{{-4.0}, {{1.0}}}};
  Rng rng(4);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(step_channel({0}, chans, rng)[0], 0);
}

TEST(Channel, TwoStateStationaryDistribution) {
  // pi P = pi for P = [[0.3, 0.7], [0.4, 0.6]] gives pi = (4/11, 7/11).
  std::vector<ChannelModel> chans{ChannelModel{{-11.23, -2.08}, {{0.3, 0.7}, {0.4, 0.6}}}};
  Rng rng(5);
  std::vector<int> g{0};
  int in_zero = 0;
  for (int i = 0; i < 100000; ++i) {
    g = step_channel(g, chans, rng);
    in_zero += g[0] == 0;
  }
  EXPECT_NEAR(in_zero / 1e5, 4.0 / 11.0, 0.01);
}

TEST(Channel, MalformedInputsRejected) {
  std::vector<ChannelModel> chans{ChannelModel{{-1, -2}, {{0.5, 0.5}, {1.0}}}};
  Rng rng(6);
  EXPECT_THROW(step_channel({1}, chans, rng), ConfigError);
  EXPECT_THROW(step_channel({0, 0}, chans, rng), ConfigError);
  EXPECT_THROW(step_channel({2}, chans, rng), ConfigError);
}

TEST(Association, Examples) {
  EXPECT_EQ(update_association(3, 5, true), 5);
  EXPECT_EQ(update_association(3, 0, true), 3);
  EXPECT_EQ(update_association(3, 5, false), 3);
}

TEST(Step, IdleEpochBanksEnergy) {
  const auto cfg = reference_config();
  const auto out = step_with_arrivals(ref_state(1, 1), {0, 0}, cfg, 0, 2);
  EXPECT_EQ(out.next_state.task_queue, 1);
  EXPECT_EQ(out.next_state.energy_queue, 3);
  EXPECT_EQ(out.diagnostics.delay, 0.0);
  EXPECT_EQ(out.utility.raw.queuing, 1);
}

TEST(Step, FullQueueDropsArrival) {
  const auto cfg = reference_config();
  const auto out = step_with_arrivals(ref_state(4, 0), {0, 0}, cfg, 1, 0);
  EXPECT_EQ(out.next_state.task_queue, 4);
  EXPECT_EQ(out.utility.raw.drops, 1);
  EXPECT_NEAR(out.utility.components[1], 9 * std::exp(-1.0), 1e-12);
}

TEST(Step, LocalOneUnitCompletesTask) {
  const auto cfg = reference_config();
  for (int a_t : {0, 1}) {
    const auto out = step_with_arrivals(ref_state(1, 1), {0, 1}, cfg, a_t, 0);
    EXPECT_NEAR(out.diagnostics.delay, 4.4784531892998502e-3, 1e-15);
    EXPECT_EQ(out.next_state.task_queue, a_t);
    EXPECT_EQ(out.next_state.energy_queue, 0);
    EXPECT_TRUE(out.diagnostics.executed);
  }
}

TEST(Step, OffloadMovesAssociation) {
  const auto cfg = reference_config();
  const auto out = step_with_arrivals(ref_state(1, 2, 3), {5, 1}, cfg, 0, 0);
  EXPECT_EQ(out.next_state.association, 5);
  EXPECT_EQ(out.diagnostics.handover, cfg.handover_delay);
  EXPECT_EQ(out.next_state.energy_queue, 1);
}

TEST(Step, OverdrawnEnergyIsNoop) {
  const auto cfg = reference_config();
  const auto out = step_with_arrivals(ref_state(2, 1, 3), {5, 3}, cfg, 0, 0);
  EXPECT_TRUE(out.diagnostics.forced_noop);
  EXPECT_FALSE(out.diagnostics.executed);
  EXPECT_EQ(out.diagnostics.delay, 0.0);
  EXPECT_EQ(out.diagnostics.energy_deducted, 0);
  EXPECT_EQ(out.next_state.energy_queue, 1);
  EXPECT_EQ(out.next_state.association, 3);
  EXPECT_EQ(out.next_state.task_queue, 2);
  EXPECT_EQ(out.utility.raw.payment, 0.0);
}

TEST(Step, EmptyTaskQueueIsNoop) {
  const auto cfg = reference_config();
  const auto out = step_with_arrivals(ref_state(0, 3, 3), {5, 1}, cfg, 0, 0);
  EXPECT_TRUE(out.diagnostics.forced_noop);
  EXPECT_EQ(out.next_state.association, 3);
  EXPECT_EQ(out.next_state.energy_queue, 3);
  EXPECT_EQ(out.utility.total, 20.0);
}

TEST(Step, EnergyArrivalsTruncatedAtCapacity) {
  const auto cfg = reference_config();
  const auto out = step_with_arrivals(ref_state(0, 3), {0, 0}, cfg, 0, 3);
  EXPECT_EQ(out.next_state.energy_queue, 4);
}

TEST(Step, InvalidInputsRejected) {
  const auto cfg = reference_config();
  auto rngs = EnvStreams::from_seed(1);
  EXPECT_THROW(step(ref_state(5, 0), {0, 0}, cfg, rngs), ContractViolation);
  EXPECT_THROW(step(ref_state(0, 0, 7), {0, 0}, cfg, rngs), ContractViolation);
  EXPECT_THROW(step(ref_state(0, 0), {7, 0}, cfg, rngs), ContractViolation);
  EXPECT_THROW(step(ref_state(0, 0), {0, 5}, cfg, rngs), ContractViolation);
}

TEST(Environment, StartsEmptyAtFirstBs) {
  const auto cfg = reference_config();
  Environment env(cfg, 3);
  EXPECT_EQ(env.state().task_queue, 0);
  EXPECT_EQ(env.state().energy_queue, 0);
  EXPECT_EQ(env.state().association, 1);
  EXPECT_TRUE(is_valid(env.state(), cfg));
}

TEST(Environment, SameSeedSameTrajectory) {
  const auto cfg = reference_config();
  Environment a(cfg, 9), b(cfg, 9);
  Rng pick(1);
  for (int i = 0; i < 5000; ++i) {
    const auto act = action_from_index(static_cast<int>(uniform_index(pick, num_actions(cfg))), cfg);
    const auto oa = a.step(act);
    const auto ob = b.step(act);
    ASSERT_EQ(oa.next_state, ob.next_state);
    ASSERT_EQ(oa.utility.total, ob.utility.total);
  }
}

TEST(Environment, ArrivalsIndependentOfActions) {
  const auto cfg = reference_config();
  Environment a(cfg, 4), b(cfg, 4);
  Rng pick(2);
  for (int i = 0; i < 5000; ++i) {
    const auto da = a.step({0, 0}).diagnostics;
    const auto db = b.step(action_from_index(static_cast<int>(uniform_index(pick, num_actions(cfg))), cfg)).diagnostics;
    ASSERT_EQ(da.task_arrival, db.task_arrival);
    ASSERT_EQ(da.energy_arrival, db.energy_arrival);
  }
}

TEST(Environment, RandomActionFuzzKeepsInvariants) {
  auto cfg = reference_config();
  cfg.energy_arrival_rate = 1.6;
  Environment env(cfg, 5);
  Rng pick(3);
  for (int i = 0; i < 100000; ++i) {
    const NetworkState s = env.state();
    const auto act = action_from_index(static_cast<int>(uniform_index(pick, num_actions(cfg))), cfg);
    const auto out = env.step(act);
    const auto bad = step_violations(s, act, out, cfg);
    ASSERT_TRUE(bad.empty()) << bad.front();
  }
}

TEST(StepViolations, DetectsCorruptedOutcome) {
  const auto cfg = reference_config();
  auto rngs = EnvStreams::from_seed(1);
  const auto s = ref_state(2, 2);
  auto out = step(s, {0, 1}, cfg, rngs);
  ASSERT_TRUE(step_violations(s, {0, 1}, out, cfg).empty());
  auto broken = out;
  broken.next_state.energy_queue = (out.next_state.energy_queue + 1) % 5;
  EXPECT_FALSE(step_violations(s, {0, 1}, broken, cfg).empty());
  broken = out;
  broken.diagnostics.drops = 1;
  EXPECT_FALSE(step_violations(s, {0, 1}, broken, cfg).empty());
}

TEST(Encoding, ReferenceLength) { EXPECT_EQ(encode_state(ref_state(0, 0), reference_config()).size(), 14u); }

TEST(Encoding, Features) {
  const auto cfg = reference_config();
  NetworkState s{0, 0, 3, {0, 5, 0, 0, 0, 0}};
  // Level list is ascending, so index 0 is the minimum and 5 the maximum.
  const auto f = encode_state(s, cfg);
  EXPECT_EQ(f[0], 0.0);
  EXPECT_EQ(f[1], 0.0);
  for (int b = 0; b < 6; ++b) EXPECT_EQ(f[2 + b], b == 2 ? 1.0 : 0.0);
  EXPECT_EQ(f[8], -1.0);
  EXPECT_EQ(f[9], 1.0);
  s.task_queue = 4;
  s.energy_queue = 2;
  const auto g = encode_state(s, cfg);
  EXPECT_EQ(g[0], 1.0);
  EXPECT_EQ(g[1], 0.5);
}

TEST(Indexing, StateAndActionRoundTrip) {
  const auto cfg = tiny_config();
  const auto sizes = space_sizes(cfg);
  for (std::uint64_t x = 0; x < sizes.states; ++x) EXPECT_EQ(state_index(state_from_index(x, cfg), cfg), x);
  for (int a = 0; a < num_actions(cfg); ++a) EXPECT_EQ(action_index(action_from_index(a, cfg), cfg), a);
  EXPECT_EQ(action_index({1, 2}, cfg), 1 * 3 + 2);
}
