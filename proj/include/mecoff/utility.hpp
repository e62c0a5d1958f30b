#pragma once

// Per-epoch satisfaction model: five exponential satisfaction terms combined
// with weights, and their split across decomposition agents.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "mecoff/config.hpp"
#include "mecoff/state.hpp"

namespace mecoff {

/// Raw quantities behind the five satisfaction terms.
struct UtilityRaw {
  double delay = 0.0;    // min{d, delta}
  int drops = 0;         // eta
  int queuing = 0;       // rho
  int penalty = 0;       // varphi
  double payment = 0.0;  // phi
};

struct UtilityBreakdown {
  std::array<double, kNumComponents> components{};  // weighted u1..u5
  double total = 0.0;
  UtilityRaw raw;
};

inline int task_drop(int task_queue, double delay, int task_arrival, const SystemConfig& cfg) {
  const int done = (delay > 0.0 && delay <= cfg.epoch_duration) ? 1 : 0;
  return std::max(task_queue - done + task_arrival - cfg.task_queue_cap, 0);
}

inline int queuing_delay(int task_queue, double delay) {
  return task_queue - (delay > 0.0 ? 1 : 0);
}

inline int failure_penalty(double delay, const SystemConfig& cfg) {
  return delay > cfg.epoch_duration ? 1 : 0;
}

inline double service_payment(double delay, double handover, int target, const SystemConfig& cfg) {
  if (target < 1 || target > cfg.num_bs) return 0.0;
  return cfg.mec_price * (std::min(delay, cfg.epoch_duration) - handover);
}

/// Weighted satisfaction terms from already-computed raw quantities.
inline UtilityBreakdown utility_from_raw(const UtilityRaw& raw, const SystemConfig& cfg) {
  UtilityBreakdown out;
  out.raw = raw;
  const std::array<double, kNumComponents> exponents{
      raw.delay, static_cast<double>(raw.drops), static_cast<double>(raw.queuing),
      static_cast<double>(raw.penalty), raw.payment};
  for (int k = 0; k < kNumComponents; ++k) {
    out.components[k] = cfg.weights[k] * std::exp(-exponents[k]);
  }
  out.total = out.components[0];
  for (int k = 1; k < kNumComponents; ++k) out.total += out.components[k];
  return out;
}

/// Utility of one epoch given the executed action's delay `delay`, handover
/// `handover` and the task arrival indicator.
inline UtilityBreakdown utility_components(const NetworkState& state, const JointAction& action,
                                           double delay, double handover, int task_arrival,
                                           const SystemConfig& cfg) {
  UtilityRaw raw;
  raw.delay = std::min(delay, cfg.epoch_duration);
  raw.drops = task_drop(state.task_queue, delay, task_arrival, cfg);
  raw.queuing = queuing_delay(state.task_queue, delay);
  raw.penalty = failure_penalty(delay, cfg);
  raw.payment = service_payment(delay, handover, action.target, cfg);
  return utility_from_raw(raw, cfg);
}

/// Per-agent utilities: each agent receives the sum of its group's weighted
/// terms, accumulated in component order.
inline std::vector<double> decompose(const UtilityBreakdown& u, const DecompositionPattern& pattern) {
  validate_pattern(pattern);
  std::vector<double> out;
  out.reserve(pattern.size());
  for (const auto& group : pattern) {
    std::vector<int> sorted = group;
    std::sort(sorted.begin(), sorted.end());
    double acc = u.components[sorted[0]];
    for (std::size_t i = 1; i < sorted.size(); ++i) acc += u.components[sorted[i]];
    out.push_back(acc);
  }
  return out;
}

/// Same as decompose() for a 5-vector of component values (e.g. expectations).
inline std::vector<double> decompose(const std::array<double, kNumComponents>& components,
                                     const DecompositionPattern& pattern) {
  UtilityBreakdown u;
  u.components = components;
  return decompose(u, pattern);
}

}  // namespace mecoff
