#pragma once

// Exact dynamic programming and tabular learning on enumerable instances.
// These are the ground truth the environment and the deep agents are checked
// against.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mecoff/config.hpp"
#include "mecoff/environment.hpp"
#include "mecoff/errors.hpp"
#include "mecoff/link_physics.hpp"
#include "mecoff/random.hpp"
#include "mecoff/state.hpp"
#include "mecoff/utility.hpp"

namespace mecoff {

inline constexpr std::uint64_t kMaxEnumerableStateActions = 1'000'000;

struct Transition {
  std::uint32_t next = 0;
  double prob = 0.0;
};

/// Controlled transition kernel with expected one-step utilities, rows
/// indexed by state * actions + action.
struct Kernel {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<std::vector<Transition>> rows;
  std::vector<std::array<double, kNumComponents>> expected_components;
  std::vector<double> expected_utility;

  std::size_t row(std::size_t state, std::size_t action) const { return state * actions + action; }
};

/// Table over states x actions, row-major.
struct QTable {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<double> values;

  QTable() = default;
  QTable(std::size_t x, std::size_t y, double init = 0.0) : states(x), actions(y), values(x * y, init) {}

  double& operator()(std::size_t s, std::size_t a) { return values[s * actions + a]; }
  double operator()(std::size_t s, std::size_t a) const { return values[s * actions + a]; }

  double max_value(std::size_t s) const {
    const auto* p = &values[s * actions];
    return *std::max_element(p, p + actions);
  }
  /// Greedy action with lowest-index tie-break.
  std::size_t argmax(std::size_t s) const {
    const auto* p = &values[s * actions];
    return static_cast<std::size_t>(std::max_element(p, p + actions) - p);
  }
};

inline double sup_norm_diff(const QTable& a, const QTable& b) {
  if (a.values.size() != b.values.size()) throw ContractViolation("table shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

struct ValueTables {
  std::vector<double> value;  // V
  QTable q;                   // Q
  std::vector<QTable> per_agent;  // Q_k, only filled by decomposed evaluation
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

inline double poisson_pmf(int k, double mean) {
  if (mean <= 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
}

// Distribution of min(base + Poisson(mean), cap) as probabilities indexed by value.
inline std::vector<double> capped_poisson(int base, int cap, double mean) {
  std::vector<double> dist(cap + 1, 0.0);
  double below = 0.0;
  for (int k = 0; base + k < cap; ++k) {
    const double p = poisson_pmf(k, mean);
    dist[base + k] += p;
    below += p;
  }
  dist[cap] += std::max(0.0, 1.0 - below);
  return dist;
}

}  // namespace detail

/// Enumerates the factorized transition kernel. Task arrivals enter the
/// expected utility through the drop term, so utilities are averaged over them.
inline Kernel build_kernel(const SystemConfig& cfg) {
  validate(cfg);
  const auto sizes = space_sizes(cfg);
  if (sizes.states * sizes.actions > kMaxEnumerableStateActions) {
    throw SolverError("state-action space too large to enumerate: X*Y = " +
                      std::to_string(sizes.states * sizes.actions));
  }
  Kernel k;
  k.states = sizes.states;
  k.actions = sizes.actions;
  k.rows.resize(k.states * k.actions);
  k.expected_components.resize(k.states * k.actions);
  k.expected_utility.resize(k.states * k.actions);

  // Joint next-gain distribution depends only on the current gain vector; the
  // mixed-radix gain suffix of the state index is enumerated here.
  std::uint64_t gain_combos = 1;
  for (const auto& ch : cfg.channels) gain_combos *= ch.levels_db.size();

  const double pt = cfg.task_arrival_prob;
  for (std::size_t x = 0; x < k.states; ++x) {
    const NetworkState s = state_from_index(x, cfg);

    // Product distribution over next gains, as (gain suffix index, prob).
    std::vector<std::pair<std::uint64_t, double>> gain_dist{{0, 1.0}};
    for (int b = 0; b < cfg.num_bs; ++b) {
      const auto& row = cfg.channels[b].transition[s.gains[b]];
      std::vector<std::pair<std::uint64_t, double>> next_dist;
      for (const auto& [idx, p] : gain_dist) {
        for (std::size_t g = 0; g < row.size(); ++g) {
          if (row[g] > 0.0) next_dist.emplace_back(idx * row.size() + g, p * row[g]);
        }
      }
      gain_dist = std::move(next_dist);
    }

    for (std::size_t a = 0; a < k.actions; ++a) {
      const JointAction act = action_from_index(static_cast<int>(a), cfg);
      const bool run = executes(s, act);
      JointAction eff = act;
      if (!run) eff.energy = 0;
      ExecutionDelay ex;
      if (run) ex = execution_delay(s, eff, cfg);
      const int done = (ex.total > 0.0 && ex.total <= cfg.epoch_duration) ? 1 : 0;
      const int next_assoc = update_association(s.association, eff.target, run);
      const auto energy_dist =
          detail::capped_poisson(s.energy_queue - eff.energy, cfg.energy_queue_cap, cfg.energy_arrival_rate);

      std::vector<Transition> row;
      std::array<double, kNumComponents> comp{};
      double total = 0.0;
      for (int arrival = 0; arrival <= 1; ++arrival) {
        const double pa = arrival ? pt : 1.0 - pt;
        if (pa <= 0.0) continue;
        const auto u = utility_components(s, eff, ex.total, ex.handover, arrival, cfg);
        for (int c = 0; c < kNumComponents; ++c) comp[c] += pa * u.components[c];
        total += pa * u.total;
        const int next_qt = std::min(s.task_queue - done + arrival, cfg.task_queue_cap);
        for (int qe = 0; qe <= cfg.energy_queue_cap; ++qe) {
          const double pe = energy_dist[qe];
          if (pe <= 0.0) continue;
          const std::uint64_t prefix =
              (static_cast<std::uint64_t>(next_qt) * (1 + cfg.energy_queue_cap) + qe) * cfg.num_bs +
              (next_assoc - 1);
          for (const auto& [gidx, pg] : gain_dist) {
            row.push_back({static_cast<std::uint32_t>(prefix * gain_combos + gidx), pa * pe * pg});
          }
        }
      }
      std::sort(row.begin(), row.end(), [](const Transition& l, const Transition& r) { return l.next < r.next; });
      std::vector<Transition> merged;
      for (const auto& t : row) {
        if (!merged.empty() && merged.back().next == t.next) {
          merged.back().prob += t.prob;
        } else {
          merged.push_back(t);
        }
      }
      const std::size_t r = k.row(x, a);
      k.rows[r] = std::move(merged);
      k.expected_components[r] = comp;
      k.expected_utility[r] = total;
    }
  }
  return k;
}

namespace detail {

inline double expected_next(const std::vector<Transition>& row, const std::vector<double>& v) {
  double acc = 0.0;
  for (const auto& t : row) acc += t.prob * v[t.next];
  return acc;
}

}  // namespace detail

/// Q(x, a) = (1 - gamma) u(x, a) + gamma * E[V(x')].
inline QTable q_from_values(const Kernel& k, const std::vector<double>& v, double gamma) {
  QTable q(k.states, k.actions);
  for (std::size_t x = 0; x < k.states; ++x) {
    for (std::size_t a = 0; a < k.actions; ++a) {
      const auto r = k.row(x, a);
      q(x, a) = (1.0 - gamma) * k.expected_utility[r] + gamma * detail::expected_next(k.rows[r], v);
    }
  }
  return q;
}

/// Synchronous value iteration on the normalized Bellman optimality operator.
/// Stops once the contraction bound gamma/(1-gamma) * change guarantees the
/// returned values lie within `tol` of the fixed point.
inline ValueTables value_iteration(const Kernel& k, double gamma, double tol = 1e-12,
                                   int max_iterations = 1'000'000) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractViolation("discount must lie in [0, 1)");
  ValueTables out;
  out.value.assign(k.states, 0.0);
  std::vector<double> next(k.states);
  for (int it = 1; it <= max_iterations; ++it) {
    double change = 0.0;
    for (std::size_t x = 0; x < k.states; ++x) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < k.actions; ++a) {
        const auto r = k.row(x, a);
        best = std::max(best, (1.0 - gamma) * k.expected_utility[r] +
                                  gamma * detail::expected_next(k.rows[r], out.value));
      }
      next[x] = best;
      change = std::max(change, std::abs(best - out.value[x]));
    }
    out.value.swap(next);
    out.iterations = it;
    out.residual = change;
    if (change * gamma < tol * (1.0 - gamma)) {
      out.q = q_from_values(k, out.value, gamma);
      return out;
    }
  }
  throw SolverError("value iteration did not converge: residual " + std::to_string(out.residual));
}

/// Largest |V(x) - max_a Q(x, a)| where Q is recomputed from V; zero at a fixed point.
inline double bellman_residual(const Kernel& k, const std::vector<double>& v, double gamma) {
  const QTable q = q_from_values(k, v, gamma);
  double m = 0.0;
  for (std::size_t x = 0; x < k.states; ++x) m = std::max(m, std::abs(v[x] - q.max_value(x)));
  return m;
}

inline std::vector<int> greedy_policy(const QTable& q) {
  std::vector<int> policy(q.states);
  for (std::size_t x = 0; x < q.states; ++x) policy[x] = static_cast<int>(q.argmax(x));
  return policy;
}

/// Exact evaluation of a deterministic stationary policy, both per agent
/// (one utility group each) and for the undecomposed utility, by solving
/// (I - gamma P_pi) V = (1 - gamma) u_pi directly.
inline ValueTables policy_evaluation_decomposed(const Kernel& k, const std::vector<int>& policy,
                                                const DecompositionPattern& pattern, double gamma) {
  validate_pattern(pattern);
  if (policy.size() != k.states) throw ContractViolation("policy must assign one action per state");
  if (k.states > 20000) throw SolverError("dense policy evaluation limited to 20000 states");
  const auto n = static_cast<Eigen::Index>(k.states);

  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
  const auto groups = static_cast<Eigen::Index>(pattern.size());
  Eigen::MatrixXd rhs(n, groups + 1);
  for (std::size_t x = 0; x < k.states; ++x) {
    const int a = policy[x];
    if (a < 0 || static_cast<std::size_t>(a) >= k.actions) throw ContractViolation("policy action out of range");
    const auto r = k.row(x, a);
    for (const auto& t : k.rows[r]) system(static_cast<Eigen::Index>(x), t.next) -= gamma * t.prob;
    const auto per_agent = decompose(k.expected_components[r], pattern);
    for (Eigen::Index g = 0; g < groups; ++g) rhs(static_cast<Eigen::Index>(x), g) = (1.0 - gamma) * per_agent[g];
    rhs(static_cast<Eigen::Index>(x), groups) = (1.0 - gamma) * k.expected_utility[r];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) throw SolverError("policy evaluation system is singular");
  const Eigen::MatrixXd values = lu.solve(rhs);

  auto q_for = [&](Eigen::Index col, auto utility_of) {
    std::vector<double> v(k.states);
    for (std::size_t x = 0; x < k.states; ++x) v[x] = values(static_cast<Eigen::Index>(x), col);
    QTable q(k.states, k.actions);
    for (std::size_t x = 0; x < k.states; ++x) {
      for (std::size_t a = 0; a < k.actions; ++a) {
        const auto r = k.row(x, a);
        q(x, a) = (1.0 - gamma) * utility_of(r) + gamma * detail::expected_next(k.rows[r], v);
      }
    }
    return std::make_pair(v, q);
  };

  ValueTables out;
  for (Eigen::Index g = 0; g < groups; ++g) {
    out.per_agent.push_back(
        q_for(g, [&](std::size_t r) { return decompose(k.expected_components[r], pattern)[g]; }).second);
  }
  auto [v, q] = q_for(groups, [&](std::size_t r) { return k.expected_utility[r]; });
  out.value = std::move(v);
  out.q = std::move(q);
  return out;
}

/// Step-size and exploration schedules for the tabular learners.
struct TabularSchedule {
  double alpha_exponent = 0.85;  // alpha = 1 / (1 + visits(x, a) / alpha_horizon)^exponent
  double alpha_horizon = 1.0;
  double epsilon_floor = 0.01;   // epsilon_j = max(floor, epsilon_scale / sqrt(j))
  double epsilon_scale = 1.0;

  double alpha(std::uint64_t visits) const {
    return 1.0 / std::pow(1.0 + static_cast<double>(visits) / alpha_horizon, alpha_exponent);
  }
  double epsilon(std::uint64_t epoch) const {
    return std::max(epsilon_floor, epsilon_scale / std::sqrt(static_cast<double>(epoch)));
  }
};

/// Q-learning step: Q(x,a) += alpha ((1-gamma) u + gamma max_b Q(nx,b) - Q(x,a)).
inline void q_learning_update(QTable& q, std::size_t x, std::size_t a, double utility, std::size_t nx,
                              double alpha, double gamma) {
  double& qa = q(x, a);
  qa += alpha * ((1.0 - gamma) * utility + gamma * q.max_value(nx) - qa);
}

/// SARSA step toward the value of the action actually taken next.
inline void sarsa_update(QTable& q, std::size_t x, std::size_t a, double utility, std::size_t nx, std::size_t na,
                         double alpha, double gamma) {
  double& qa = q(x, a);
  qa += alpha * ((1.0 - gamma) * utility + gamma * q(nx, na) - qa);
}

namespace detail {

inline std::size_t epsilon_greedy_row(const double* q, std::size_t n, double eps, Rng& rng) {
  if (eps > 0.0 && uniform01(rng) < eps) return static_cast<std::size_t>(uniform_index(rng, n));
  return static_cast<std::size_t>(std::max_element(q, q + n) - q);
}

}  // namespace detail

/// Called after every environment step of a tabular run.
using EpochObserver = std::function<void(const StepOutcome&)>;

struct TabularRun {
  QTable q;                       // Q-learning table, or the monolithic SARSA table
  std::vector<QTable> per_agent;  // SARL per-agent tables
  std::vector<std::uint64_t> visits;
  std::vector<int> policy;  // greedy policy at the end
};

/// Online off-policy Q-learning against the environment.
inline TabularRun tabular_q_learning(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t epochs,
                                     const TabularSchedule& schedule = {}, const EpochObserver& observe = {}) {
  const auto sizes = space_sizes(cfg);
  if (sizes.states * sizes.actions > kMaxEnumerableStateActions) {
    throw SolverError("state-action space too large for a table: X*Y = " +
                      std::to_string(sizes.states * sizes.actions));
  }
  Environment env(cfg, seed);
  Rng explore = substream(seed, streams::kAgentExplore);
  const double gamma = cfg.discount;
  TabularRun run;
  run.q = QTable(sizes.states, sizes.actions);
  run.visits.assign(sizes.states * sizes.actions, 0);

  std::size_t x = state_index(env.state(), cfg);
  for (std::uint64_t j = 1; j <= epochs; ++j) {
    const std::size_t a = detail::epsilon_greedy_row(&run.q.values[x * sizes.actions], sizes.actions,
                                                     schedule.epsilon(j), explore);
    const auto out = env.step(action_from_index(static_cast<int>(a), cfg));
    const std::size_t nx = state_index(out.next_state, cfg);
    const double alpha = schedule.alpha(run.visits[x * sizes.actions + a]++);
    q_learning_update(run.q, x, a, out.utility.total, nx, alpha, gamma);
    if (observe) observe(out);
    x = nx;
  }
  run.policy = greedy_policy(run.q);
  return run;
}

/// Online decomposed SARSA: one table per utility group, joint action chosen
/// by the summed tables. A monolithic SARSA table is updated from the same
/// transitions so the sum of the per-agent tables can be checked against it.
inline TabularRun tabular_sarl(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t epochs,
                               const DecompositionPattern& pattern, const TabularSchedule& schedule = {},
                               const EpochObserver& observe = {}) {
  validate_pattern(pattern);
  const auto sizes = space_sizes(cfg);
  if (sizes.states * sizes.actions > kMaxEnumerableStateActions) {
    throw SolverError("state-action space too large for a table: X*Y = " +
                      std::to_string(sizes.states * sizes.actions));
  }
  Environment env(cfg, seed);
  Rng explore = substream(seed, streams::kAgentExplore);
  const double gamma = cfg.discount;
  const std::size_t Y = sizes.actions;
  TabularRun run;
  run.q = QTable(sizes.states, Y);
  run.per_agent.assign(pattern.size(), QTable(sizes.states, Y));
  run.visits.assign(sizes.states * Y, 0);

  std::vector<double> summed(Y);
  auto choose = [&](std::size_t state, std::uint64_t j) {
    for (std::size_t a = 0; a < Y; ++a) {
      double acc = run.per_agent[0](state, a);
      for (std::size_t k = 1; k < run.per_agent.size(); ++k) acc += run.per_agent[k](state, a);
      summed[a] = acc;
    }
    return detail::epsilon_greedy_row(summed.data(), Y, schedule.epsilon(j), explore);
  };

  std::size_t x = state_index(env.state(), cfg);
  std::size_t a = choose(x, 1);
  for (std::uint64_t j = 1; j <= epochs; ++j) {
    const auto out = env.step(action_from_index(static_cast<int>(a), cfg));
    const auto rewards = decompose(out.utility, pattern);
    const std::size_t nx = state_index(out.next_state, cfg);
    const std::size_t na = choose(nx, j + 1);
    const double alpha = schedule.alpha(run.visits[x * Y + a]++);
    for (std::size_t k = 0; k < pattern.size(); ++k) sarsa_update(run.per_agent[k], x, a, rewards[k], nx, na, alpha, gamma);
    sarsa_update(run.q, x, a, out.utility.total, nx, na, alpha, gamma);
    if (observe) observe(out);
    x = nx;
    a = na;
  }
  QTable total(sizes.states, Y);
  for (std::size_t i = 0; i < total.values.size(); ++i) {
    for (const auto& qk : run.per_agent) total.values[i] += qk.values[i];
  }
  run.policy = greedy_policy(total);
  return run;
}

inline nlohmann::json to_json(const QTable& q) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t x = 0; x < q.states; ++x) {
    rows.push_back(std::vector<double>(q.values.begin() + x * q.actions, q.values.begin() + (x + 1) * q.actions));
  }
  return rows;
}

inline nlohmann::json to_json(const ValueTables& t) {
  nlohmann::json j;
  j["value"] = t.value;
  j["q"] = to_json(t.q);
  j["iterations"] = t.iterations;
  j["residual"] = t.residual;
  if (!t.per_agent.empty()) {
    j["per_agent_q"] = nlohmann::json::array();
    for (const auto& qk : t.per_agent) j["per_agent_q"].push_back(to_json(qk));
  }
  return j;
}

}  // namespace mecoff
