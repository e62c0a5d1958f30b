#pragma once

// Delay models for one scheduled task: local execution under a CPU frequency
// cap, constant-rate uplink transmission under a power cap, and handover.

#include <cmath>
#include <limits>
#include <optional>

#include "mecoff/config.hpp"
#include "mecoff/errors.hpp"
#include "mecoff/state.hpp"

namespace mecoff {

struct LocalSolution {
  double frequency = 0.0;  // Hz
  double delay = 0.0;      // s
  bool freq_capped = false;
};

struct TransmitSolution {
  double delay = 0.0;  // s
  double rate = 0.0;   // bit/s
  double power = 0.0;  // W
  bool power_capped = false;
  double energy_spent = 0.0;  // J
  double residual = 0.0;      // fixed-point residual at the returned root (uncapped case)
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline LocalSolution local_solution(int energy_units, const SystemConfig& cfg) {
  if (energy_units < 1) throw ContractViolation("local execution needs at least one energy unit");
  const double energy = energy_units * cfg.energy_unit;
  const double raw = std::sqrt(energy / (cfg.switched_capacitance * cfg.task_cycles));
  LocalSolution sol;
  sol.freq_capped = raw > cfg.max_cpu_freq;
  sol.frequency = sol.freq_capped ? cfg.max_cpu_freq : raw;
  sol.delay = cfg.task_cycles / sol.frequency;
  return sol;
}

/// Root x* > 0 of log2(1 + a x) = c x, i.e. the inverse transmission time that
/// spends the whole energy budget at a constant rate. Returns nullopt when only
/// the trivial root exists (a <= c ln 2).
///
/// The residual f(x) = log2(1 + a x) - c x is positive just right of zero and
/// negative past the nontrivial root, so bisection on [eps, a/(c ln 2) + 1] is
/// always bracketed.
inline std::optional<double> solve_inverse_transmit_time(double a, double c, double tol = 1e-12) {
  if (!(a > c * std::log(2.0))) return std::nullopt;
  auto f = [&](double x) { return std::log2(1.0 + a * x) - c * x; };
  double lo = std::numeric_limits<double>::epsilon();
  double hi = a / (c * std::log(2.0)) + 1.0;
  // Scale lo up until it is on the positive side (f can round to 0 near x = 0).
  while (f(lo) <= 0.0 && lo < hi) lo *= 2.0;
  for (int it = 0; it < 2000 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Minimum-time uplink transmission of the task input with `energy_units`
/// allocated, over a channel with gain `gain_db`. When the energy-optimal
/// constant rate would exceed the power cap, the task is instead sent at the
/// maximum power. Returns nullopt when no positive-rate solution exists.
inline std::optional<TransmitSolution> solve_transmit_time(double gain_db, int energy_units,
                                                           const SystemConfig& cfg) {
  if (energy_units < 1) throw ContractViolation("transmission needs at least one energy unit");
  const double g = db_to_linear(gain_db);
  const double energy = energy_units * cfg.energy_unit;
  const double a = g * energy / cfg.interference_noise;
  const double c = cfg.input_bits / cfg.bandwidth;
  const auto root = solve_inverse_transmit_time(a, c);
  if (!root) return std::nullopt;

  TransmitSolution sol;
  sol.delay = 1.0 / *root;
  sol.power = energy / sol.delay;
  sol.rate = cfg.input_bits / sol.delay;
  sol.residual = std::log2(1.0 + a * *root) - c * *root;
  sol.energy_spent = energy;
  if (sol.power > cfg.max_tx_power) {
    sol.power_capped = true;
    sol.power = cfg.max_tx_power;
    sol.rate = cfg.bandwidth * std::log2(1.0 + g * cfg.max_tx_power / cfg.interference_noise);
    sol.delay = cfg.input_bits / sol.rate;
    sol.energy_spent = cfg.max_tx_power * sol.delay;
    sol.residual = 0.0;
  }
  return sol;
}

inline double handover_delay(int target, int association, const SystemConfig& cfg) {
  return (target >= 1 && target <= cfg.num_bs && target != association) ? cfg.handover_delay
                                                                         : 0.0;
}

/// Per-task delay and the component it came from.
struct ExecutionDelay {
  double total = 0.0;     // d; +inf when the chosen link cannot carry the task
  double handover = 0.0;  // h
  double component = 0.0;  // d_mobile or d_tr
  bool power_capped = false;
  bool freq_capped = false;
  bool link_infeasible = false;
  double energy_spent = 0.0;  // J actually radiated or consumed, diagnostics only
};

/// Task execution delay of a feasibility-screened action: 0 without energy,
/// local delay for target 0, handover + transmission + server time otherwise.
inline ExecutionDelay execution_delay(const NetworkState& state, const JointAction& action,
                                      const SystemConfig& cfg) {
  ExecutionDelay out;
  if (action.energy == 0) return out;
  if (action.target == 0) {
    const auto local = local_solution(action.energy, cfg);
    out.total = out.component = local.delay;
    out.freq_capped = local.freq_capped;
    out.energy_spent = action.energy * cfg.energy_unit;
    return out;
  }
  const int b = action.target - 1;
  out.handover = handover_delay(action.target, state.association, cfg);
  const auto tx = solve_transmit_time(cfg.channels[b].levels_db[state.gains[b]], action.energy, cfg);
  if (!tx) {
    out.link_infeasible = true;
    out.component = std::numeric_limits<double>::infinity();
    out.total = std::numeric_limits<double>::infinity();
    return out;
  }
  out.component = tx->delay;
  out.power_capped = tx->power_capped;
  out.energy_spent = tx->energy_spent;
  out.total = out.handover + tx->delay + cfg.server_exec_time;
  return out;
}

}  // namespace mecoff
