#pragma once

// Fixed comparison policies: always-local, always-offload, and the
// per-epoch delay-greedy choice between the two.

#include <cmath>
#include <limits>

#include "mecoff/config.hpp"
#include "mecoff/link_physics.hpp"
#include "mecoff/state.hpp"

namespace mecoff {

/// Largest energy allocation whose unconstrained local frequency stays within
/// the CPU cap: floor(tau * nu * f_max^2 / E_unit).
inline int mobile_energy_cap(const SystemConfig& cfg) {
  const double joules = cfg.switched_capacitance * cfg.task_cycles * cfg.max_cpu_freq * cfg.max_cpu_freq;
  // The small slack absorbs rounding when the ratio is an exact integer.
  return static_cast<int>(std::floor(joules / cfg.energy_unit * (1.0 + 1e-12)));
}

inline JointAction mobile_execution_policy(const NetworkState& state, const SystemConfig& cfg) {
  if (state.energy_queue == 0 || state.task_queue == 0) return {0, 0};
  return {0, std::min(state.energy_queue, mobile_energy_cap(cfg))};
}

/// Largest allocation e <= available whose energy-optimal transmission to BS
/// `target` respects the power cap; 1 if even a single unit overshoots.
/// Returns 0 when the link cannot carry the task at all.
inline int server_energy_for(const NetworkState& state, int target, const SystemConfig& cfg) {
  const double gain = cfg.channels[target - 1].levels_db[state.gains[target - 1]];
  // Power grows with e, so scan downward.
  for (int e = state.energy_queue; e >= 1; --e) {
    const auto tx = solve_transmit_time(gain, e, cfg);
    if (tx && !tx->power_capped) return e;
  }
  return solve_transmit_time(gain, 1, cfg) ? 1 : 0;
}

inline JointAction server_execution_policy(const NetworkState& state, const SystemConfig& cfg) {
  if (state.energy_queue == 0 || state.task_queue == 0) return {0, 0};
  JointAction best{0, 0};
  double best_delay = std::numeric_limits<double>::infinity();
  for (int b = 1; b <= cfg.num_bs; ++b) {
    const int e = server_energy_for(state, b, cfg);
    if (e == 0) continue;
    const double d = execution_delay(state, {b, e}, cfg).total;
    if (d < best_delay) {
      best_delay = d;
      best = {b, e};
    }
  }
  return best;
}

inline JointAction greedy_execution_policy(const NetworkState& state, const SystemConfig& cfg) {
  const JointAction local = mobile_execution_policy(state, cfg);
  const JointAction remote = server_execution_policy(state, cfg);
  if (remote.energy == 0) return local;
  if (local.energy == 0) return remote;
  const double d_local = execution_delay(state, local, cfg).total;
  const double d_remote = execution_delay(state, remote, cfg).total;
  return d_local <= d_remote ? local : remote;
}

}  // namespace mecoff
