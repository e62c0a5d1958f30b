#pragma once

// MDP state and action types with their flat index encodings.

#include <cstdint>
#include <string>
#include <vector>

#include "mecoff/config.hpp"
#include "mecoff/errors.hpp"

namespace mecoff {

/// State at the beginning of a decision epoch. `association` is 1-based,
/// `gains` holds one level index per BS.
struct NetworkState {
  int task_queue = 0;
  int energy_queue = 0;
  int association = 1;
  std::vector<int> gains;

  bool operator==(const NetworkState&) const = default;
};

/// Offload target (0 executes locally, b in 1..B offloads via BS b) and
/// number of allocated energy units.
struct JointAction {
  int target = 0;
  int energy = 0;

  bool operator==(const JointAction&) const = default;
};

struct SpaceSizes {
  std::uint64_t states = 0;
  std::uint64_t actions = 0;
};

/// State and action space cardinalities. Does not require a validated config,
/// so degenerate queue capacities of zero are accepted.
inline SpaceSizes space_sizes(const SystemConfig& cfg) {
  std::uint64_t gains = 1;
  for (const auto& ch : cfg.channels) gains *= ch.levels_db.size();
  const auto qt = static_cast<std::uint64_t>(1 + cfg.task_queue_cap);
  const auto qe = static_cast<std::uint64_t>(1 + cfg.energy_queue_cap);
  const auto b = static_cast<std::uint64_t>(cfg.num_bs);
  return {qt * qe * b * gains, (1 + b) * qe};
}

inline bool is_valid(const NetworkState& s, const SystemConfig& cfg) {
  if (s.task_queue < 0 || s.task_queue > cfg.task_queue_cap) return false;
  if (s.energy_queue < 0 || s.energy_queue > cfg.energy_queue_cap) return false;
  if (s.association < 1 || s.association > cfg.num_bs) return false;
  if (static_cast<int>(s.gains.size()) != cfg.num_bs) return false;
  for (int b = 0; b < cfg.num_bs; ++b) {
    if (s.gains[b] < 0 || s.gains[b] >= static_cast<int>(cfg.channels[b].levels_db.size())) {
      return false;
    }
  }
  return true;
}

inline bool is_valid(const JointAction& a, const SystemConfig& cfg) {
  return a.target >= 0 && a.target <= cfg.num_bs && a.energy >= 0 &&
         a.energy <= cfg.energy_queue_cap;
}

inline void require_valid(const NetworkState& s, const SystemConfig& cfg) {
  if (!is_valid(s, cfg)) {
    throw ContractViolation("invalid network state (q_t=" + std::to_string(s.task_queue) +
                            ", q_e=" + std::to_string(s.energy_queue) +
                            ", s=" + std::to_string(s.association) + ")");
  }
}

inline void require_valid(const JointAction& a, const SystemConfig& cfg) {
  if (!is_valid(a, cfg)) {
    throw ContractViolation("action outside the action space (c=" + std::to_string(a.target) +
                            ", e=" + std::to_string(a.energy) + ")");
  }
}

inline int num_actions(const SystemConfig& cfg) {
  return (1 + cfg.num_bs) * (1 + cfg.energy_queue_cap);
}

inline int action_index(const JointAction& a, const SystemConfig& cfg) {
  return a.target * (1 + cfg.energy_queue_cap) + a.energy;
}

inline JointAction action_from_index(int index, const SystemConfig& cfg) {
  if (index < 0 || index >= num_actions(cfg)) {
    throw ContractViolation("action index out of range: " + std::to_string(index));
  }
  return {index / (1 + cfg.energy_queue_cap), index % (1 + cfg.energy_queue_cap)};
}

/// Mixed-radix index over (q_t, q_e, s, g_1, ..., g_B), last BS varying fastest.
inline std::uint64_t state_index(const NetworkState& s, const SystemConfig& cfg) {
  std::uint64_t idx = static_cast<std::uint64_t>(s.task_queue);
  idx = idx * (1 + cfg.energy_queue_cap) + s.energy_queue;
  idx = idx * cfg.num_bs + (s.association - 1);
  for (int b = 0; b < cfg.num_bs; ++b) {
    idx = idx * cfg.channels[b].levels_db.size() + s.gains[b];
  }
  return idx;
}

inline NetworkState state_from_index(std::uint64_t idx, const SystemConfig& cfg) {
  NetworkState s;
  s.gains.assign(cfg.num_bs, 0);
  for (int b = cfg.num_bs - 1; b >= 0; --b) {
    const auto n = cfg.channels[b].levels_db.size();
    s.gains[b] = static_cast<int>(idx % n);
    idx /= n;
  }
  s.association = static_cast<int>(idx % cfg.num_bs) + 1;
  idx /= cfg.num_bs;
  s.energy_queue = static_cast<int>(idx % (1 + cfg.energy_queue_cap));
  idx /= (1 + cfg.energy_queue_cap);
  s.task_queue = static_cast<int>(idx);
  return s;
}

inline int feature_length(const SystemConfig& cfg) { return 2 + 2 * cfg.num_bs; }

/// Network input features: normalized queues, one-hot association, and each
/// BS's gain in dB rescaled to [-1, 1] over that BS's level range.
inline void encode_state(const NetworkState& s, const SystemConfig& cfg, double* out) {
  out[0] = static_cast<double>(s.task_queue) / cfg.task_queue_cap;
  out[1] = static_cast<double>(s.energy_queue) / cfg.energy_queue_cap;
  for (int b = 0; b < cfg.num_bs; ++b) out[2 + b] = (s.association == b + 1) ? 1.0 : 0.0;
  for (int b = 0; b < cfg.num_bs; ++b) {
    const auto& levels = cfg.channels[b].levels_db;
    double lo = levels.front(), hi = levels.front();
    for (double v : levels) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double g = levels[s.gains[b]];
    out[2 + cfg.num_bs + b] = hi > lo ? 2.0 * (g - lo) / (hi - lo) - 1.0 : 0.0;
  }
}

inline std::vector<double> encode_state(const NetworkState& s, const SystemConfig& cfg) {
  require_valid(s, cfg);
  std::vector<double> out(feature_length(cfg));
  encode_state(s, cfg, out.data());
  return out;
}

}  // namespace mecoff
