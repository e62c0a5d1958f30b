#pragma once

// Single-user MEC environment: stochastic task/energy arrivals, per-BS
// Markov channels, and the epoch transition.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mecoff/config.hpp"
#include "mecoff/errors.hpp"
#include "mecoff/link_physics.hpp"
#include "mecoff/random.hpp"
#include "mecoff/state.hpp"
#include "mecoff/utility.hpp"

namespace mecoff {

inline int sample_task_arrival(Rng& rng, double prob) { return bernoulli(rng, prob); }

inline int sample_energy_arrival(Rng& rng, double rate) { return poisson(rng, rate); }

/// Advances every BS's gain index one step along its own chain.
inline std::vector<int> step_channel(const std::vector<int>& gains,
                                     const std::vector<ChannelModel>& channels, Rng& rng) {
  if (gains.size() != channels.size()) throw ConfigError("gain vector does not match channel count");
  std::vector<int> next(gains.size());
  for (std::size_t b = 0; b < gains.size(); ++b) {
    const auto& m = channels[b].transition;
    if (gains[b] < 0 || static_cast<std::size_t>(gains[b]) >= m.size()) {
      throw ConfigError("gain index outside channel " + std::to_string(b + 1));
    }
    const auto& row = m[gains[b]];
    if (row.size() != m.size()) throw ConfigError("malformed transition matrix");
    next[b] = m.size() == 1 ? 0 : static_cast<int>(categorical(rng, row));
  }
  return next;
}

/// Association after an epoch: moves to the target BS only when the task
/// was actually sent there.
inline int update_association(int previous, int target, bool executed) {
  return (executed && target >= 1) ? target : previous;
}

struct StepDiagnostics {
  double delay = 0.0;            // d (may be +inf for an infeasible link)
  double handover = 0.0;         // h
  double exec_component = 0.0;   // d_mobile or d_tr
  bool power_capped = false;
  bool freq_capped = false;
  bool forced_noop = false;
  bool link_infeasible = false;
  bool executed = false;
  int energy_deducted = 0;
  double energy_spent = 0.0;
  int drops = 0;
  int queuing = 0;
  int penalty = 0;
  double payment = 0.0;
  int task_arrival = 0;
  int energy_arrival = 0;
};

struct StepOutcome {
  NetworkState next_state;
  UtilityBreakdown utility;
  StepDiagnostics diagnostics;
};

/// Generators driving one environment: the channel chains and the arrivals
/// are separate streams so that algorithms share arrival realizations.
struct EnvStreams {
  Rng channel;
  Rng arrivals;

  static EnvStreams from_seed(std::uint64_t seed) {
    return {substream(seed, streams::kEnvChannel), substream(seed, streams::kEnvArrivals)};
  }
};

/// True when the action would actually run a task this epoch.
inline bool executes(const NetworkState& state, const JointAction& action) {
  return action.energy > 0 && action.energy <= state.energy_queue && state.task_queue > 0;
}

/// One decision epoch. Infeasible allocations (e > q_e) and allocations
/// against an empty task queue are neutralized into a no-op: no delay, no
/// energy drawn, no handover, association kept.
inline StepOutcome step(const NetworkState& state, const JointAction& action,
                        const SystemConfig& cfg, EnvStreams& rngs) {
  require_valid(state, cfg);
  require_valid(action, cfg);

  StepOutcome out;
  auto& diag = out.diagnostics;
  diag.executed = executes(state, action);
  diag.forced_noop = action.energy > 0 && !diag.executed;

  JointAction effective = action;
  if (!diag.executed) effective.energy = 0;

  if (diag.executed) {
    const auto ex = execution_delay(state, effective, cfg);
    diag.delay = ex.total;
    diag.handover = ex.handover;
    diag.exec_component = ex.component;
    diag.power_capped = ex.power_capped;
    diag.freq_capped = ex.freq_capped;
    diag.link_infeasible = ex.link_infeasible;
    diag.energy_spent = ex.energy_spent;
    diag.energy_deducted = effective.energy;
  }

  diag.task_arrival = sample_task_arrival(rngs.arrivals, cfg.task_arrival_prob);
  diag.energy_arrival = sample_energy_arrival(rngs.arrivals, cfg.energy_arrival_rate);

  const int done = (diag.delay > 0.0 && diag.delay <= cfg.epoch_duration) ? 1 : 0;
  auto& next = out.next_state;
  next.task_queue = std::min(state.task_queue - done + diag.task_arrival, cfg.task_queue_cap);
  {
    // Widen before adding: a Poisson draw can be large.
    const long long qe = static_cast<long long>(state.energy_queue) - diag.energy_deducted +
                         diag.energy_arrival;
    next.energy_queue = static_cast<int>(std::min<long long>(qe, cfg.energy_queue_cap));
  }
  next.association = update_association(state.association, effective.target, diag.executed);
  next.gains = step_channel(state.gains, cfg.channels, rngs.channel);

  out.utility = utility_components(state, effective, diag.delay, diag.handover,
                                   diag.task_arrival, cfg);
  diag.drops = out.utility.raw.drops;
  diag.queuing = out.utility.raw.queuing;
  diag.penalty = out.utility.raw.penalty;
  diag.payment = out.utility.raw.payment;
  return out;
}

/// Checks one transition against the queue, energy and drop accounting rules.
/// Returns a description of every violated rule; empty when consistent.
inline std::vector<std::string> step_violations(const NetworkState& state, const JointAction& action,
                                                const StepOutcome& out, const SystemConfig& cfg) {
  std::vector<std::string> bad;
  const auto& next = out.next_state;
  const auto& diag = out.diagnostics;
  if (!is_valid(next, cfg)) bad.push_back("next state outside its bounds");
  if (!(diag.delay >= 0.0) || !(diag.handover >= 0.0) || !(diag.exec_component >= 0.0)) {
    bad.push_back("negative delay");
  }
  const bool ran = executes(state, action);
  if (diag.energy_deducted != (ran ? action.energy : 0)) bad.push_back("wrong energy deduction");
  const long long qe = static_cast<long long>(state.energy_queue) - diag.energy_deducted + diag.energy_arrival;
  if (next.energy_queue != std::min<long long>(qe, cfg.energy_queue_cap)) bad.push_back("energy not conserved");
  const int done = (diag.delay > 0.0 && diag.delay <= cfg.epoch_duration) ? 1 : 0;
  const int qt = state.task_queue - done + diag.task_arrival;
  if (next.task_queue != std::min(qt, cfg.task_queue_cap)) bad.push_back("task queue update mismatch");
  if (diag.drops != std::max(qt - cfg.task_queue_cap, 0)) bad.push_back("drop count mismatch");
  if (diag.drops > 0 && next.task_queue != cfg.task_queue_cap) bad.push_back("drop with a non-full queue");
  if (!ran && next.association != state.association) bad.push_back("association moved without offloading");
  return bad;
}

/// Stateful wrapper owning the current state and its generators.
class Environment {
 public:
  Environment(SystemConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), rngs_(EnvStreams::from_seed(seed)) {
    validate(cfg_);
    state_.gains.resize(cfg_.num_bs);
    for (int b = 0; b < cfg_.num_bs; ++b) {
      state_.gains[b] = static_cast<int>(
          uniform_index(rngs_.channel, cfg_.channels[b].levels_db.size()));
    }
  }

  Environment(SystemConfig cfg, std::uint64_t seed, NetworkState initial)
      : cfg_(std::move(cfg)), rngs_(EnvStreams::from_seed(seed)), state_(std::move(initial)) {
    validate(cfg_);
    require_valid(state_, cfg_);
  }

  const SystemConfig& config() const { return cfg_; }
  const NetworkState& state() const { return state_; }
  void reset(NetworkState s) {
    require_valid(s, cfg_);
    state_ = std::move(s);
  }

  StepOutcome step(const JointAction& action) {
    StepOutcome out = mecoff::step(state_, action, cfg_, rngs_);
    state_ = out.next_state;
    return out;
  }

 private:
  SystemConfig cfg_;
  EnvStreams rngs_;
  NetworkState state_;
};

}  // namespace mecoff
