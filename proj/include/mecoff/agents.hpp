#pragma once

// Deep agents: a double DQN over the joint utility (DARLING) and a set of
// per-utility-group DQNs trained on-policy with SARSA targets whose outputs are
// summed for control (Deep-SARL).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mecoff/config.hpp"
#include "mecoff/errors.hpp"
#include "mecoff/mlp.hpp"
#include "mecoff/random.hpp"
#include "mecoff/replay.hpp"
#include "mecoff/state.hpp"

namespace mecoff {

/// Epsilon-greedy choice: uniform with probability epsilon, otherwise the
/// argmax with the lowest index winning ties.
inline int select_action(std::span<const double> q, double epsilon, Rng& rng) {
  if (q.empty()) throw ContractViolation("cannot select from an empty action set");
  if (epsilon > 0.0 && uniform01(rng) < epsilon) {
    return static_cast<int>(uniform_index(rng, q.size()));
  }
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

inline int argmax_index(std::span<const double> q) {
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

struct DarlingExperience {
  std::vector<double> state;  // encoded features
  NetworkState raw_state;
  int action = 0;
  double utility = 0.0;
  std::vector<double> next_state;
  NetworkState raw_next_state;
};

struct SarlExperience {
  std::vector<double> state;
  NetworkState raw_state;
  int action = 0;
  std::vector<double> utilities;  // one per agent
  std::vector<double> next_state;
  NetworkState raw_next_state;
  int next_action = 0;
};

/// Double-DQN target: the online network picks the next action, the target
/// network evaluates it.
inline double darling_target(const DarlingExperience& exp, const MlpParams& online,
                             const MlpParams& target, double gamma) {
  const Vector q_online = mlp_forward(online, exp.next_state);
  const int best = argmax_index(std::span<const double>(q_online.data(), q_online.size()));
  const Vector q_target = mlp_forward(target, exp.next_state);
  return (1.0 - gamma) * exp.utility + gamma * q_target[best];
}

/// Per-agent SARSA targets evaluated at the stored next action.
inline std::vector<double> sarl_targets(const SarlExperience& exp, const std::vector<MlpParams>& targets,
                                        double gamma) {
  if (exp.utilities.size() != targets.size()) throw ContractViolation("one utility per agent required");
  std::vector<double> y(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const Vector q = mlp_forward(targets[k], exp.next_state);
    y[k] = (1.0 - gamma) * exp.utilities[k] + gamma * q[exp.next_action];
  }
  return y;
}

namespace detail {

inline Matrix stack_columns(const std::vector<const std::vector<double>*>& cols, int rows) {
  Matrix m(rows, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (static_cast<int>(cols[i]->size()) != rows) throw ContractViolation("feature length mismatch");
    m.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Vector>(cols[i]->data(), rows);
  }
  return m;
}

// Output `slot[i]` of column i, from precomputed hidden activations.
inline std::vector<double> pick_outputs(const MlpParams& p, const Matrix& hidden, std::span<const int> slot) {
  std::vector<double> out(slot.size());
  for (std::size_t i = 0; i < slot.size(); ++i) {
    out[i] = p.w2.row(slot[i]).dot(hidden.col(static_cast<Eigen::Index>(i))) + p.b2[slot[i]];
  }
  return out;
}

// Regresses output `slot[i]` toward `target[i]`: one Adam step on the mean
// squared error. Returns that mean squared error before the step.
inline double regress_slots(MlpParams& net, AdamState& opt, const Matrix& inputs, std::span<const int> slot,
                            std::span<const double> target) {
  const Matrix hidden = mlp_hidden(net, inputs);
  const auto q = pick_outputs(net, hidden, slot);
  const double n = static_cast<double>(slot.size());
  std::vector<double> signal(slot.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < slot.size(); ++i) {
    const double err = target[i] - q[i];
    loss += err * err;
    // Descent direction of 1/2 * mean squared error.
    signal[i] = -err / n;
  }
  const MlpParams grad = mlp_gradient_sparse(net, inputs, hidden, slot, signal);
  adam_step(net, opt, grad);
  return loss / n;
}

}  // namespace detail

/// Double-DQN agent with experience replay and a periodically synced target.
class DarlingAgent {
 public:
  DarlingAgent(const SystemConfig& cfg, std::uint64_t seed)
      : gamma_(cfg.discount),
        epsilon_(cfg.exploration),
        batch_(static_cast<std::size_t>(cfg.batch_size)),
        memory_(static_cast<std::size_t>(cfg.replay_capacity)),
        explore_(substream(seed, streams::kAgentExplore)),
        replay_rng_(substream(seed, streams::kReplaySampling)) {
    Rng init = substream(seed, streams::kAgentInit);
    online_ = mlp_init(feature_length(cfg), cfg.darling_hidden, num_actions(cfg), init);
    target_ = online_;
    opt_ = AdamState(online_, {cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon});
  }

  Vector q_values(std::span<const double> features) const { return mlp_forward(online_, features); }

  int act(std::span<const double> features) {
    const Vector q = q_values(features);
    return select_action(std::span<const double>(q.data(), q.size()), epsilon_, explore_);
  }

  void remember(DarlingExperience exp) { memory_.push(std::move(exp)); }

  /// One minibatch update; nullopt while the memory is smaller than a batch.
  std::optional<double> train() {
    auto batch = memory_.sample(batch_, replay_rng_);
    if (!batch) return std::nullopt;
    return train_on(*batch);
  }

  double train_on(const std::vector<const DarlingExperience*>& batch) {
    const int in = online_.inputs();
    std::vector<const std::vector<double>*> xs, nxs;
    std::vector<int> actions;
    for (const auto* e : batch) {
      xs.push_back(&e->state);
      nxs.push_back(&e->next_state);
      actions.push_back(e->action);
    }
    const Matrix x = detail::stack_columns(xs, in);
    const Matrix nx = detail::stack_columns(nxs, in);

    const Matrix q_next = mlp_forward_batch(online_, nx);
    std::vector<int> best(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Eigen::Index arg = 0;
      q_next.col(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
      best[i] = static_cast<int>(arg);
    }
    const auto evaluated = detail::pick_outputs(target_, mlp_hidden(target_, nx), best);
    std::vector<double> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      y[i] = (1.0 - gamma_) * batch[i]->utility + gamma_ * evaluated[i];
    }
    return detail::regress_slots(online_, opt_, x, actions, y);
  }

  void sync_target() { target_ = online_; }

  const MlpParams& online() const { return online_; }
  const MlpParams& target() const { return target_; }
  MlpParams& online() { return online_; }
  MlpParams& target() { return target_; }
  const AdamState& optimizer() const { return opt_; }
  const ReplayMemory<DarlingExperience>& memory() const { return memory_; }
  double discount() const { return gamma_; }

  nlohmann::json checkpoint() const {
    return {{"kind", "darling"}, {"online", to_json(online_)}, {"target", to_json(target_)}, {"adam", to_json(opt_)}};
  }

  void restore(const nlohmann::json& j) {
    if (j.at("kind") != "darling") throw ConfigError("checkpoint is not a DARLING checkpoint");
    MlpParams online = mlp_from_json(j.at("online"));
    MlpParams target = mlp_from_json(j.at("target"));
    AdamState opt = adam_from_json(j.at("adam"));
    if (!online.same_shape(online_) || !target.same_shape(online_) || !opt.m.same_shape(online_)) {
      throw ConfigError("checkpoint shapes do not match the agent");
    }
    online_ = std::move(online);
    target_ = std::move(target);
    opt_ = std::move(opt);
  }

 private:
  double gamma_;
  double epsilon_;
  std::size_t batch_;
  MlpParams online_, target_;
  AdamState opt_;
  ReplayMemory<DarlingExperience> memory_;
  Rng explore_;
  Rng replay_rng_;
};

/// K virtual agents, one DQN each, trained with on-policy SARSA targets; the
/// controller acts on the sum of their outputs.
class DeepSarlAgent {
 public:
  DeepSarlAgent(const SystemConfig& cfg, std::uint64_t seed)
      : gamma_(cfg.discount),
        epsilon_(cfg.exploration),
        batch_(static_cast<std::size_t>(cfg.batch_size)),
        pattern_(cfg.decomposition),
        memory_(static_cast<std::size_t>(cfg.replay_capacity)),
        explore_(substream(seed, streams::kAgentExplore)),
        replay_rng_(substream(seed, streams::kReplaySampling)) {
    validate_pattern(pattern_);
    Rng init = substream(seed, streams::kAgentInit);
    const AdamHyper hyper{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
    for (std::size_t k = 0; k < pattern_.size(); ++k) {
      online_.push_back(mlp_init(feature_length(cfg), cfg.sarl_hidden, num_actions(cfg), init));
      opt_.emplace_back(online_.back(), hyper);
    }
    target_ = online_;
  }

  std::size_t agents() const { return online_.size(); }
  const DecompositionPattern& pattern() const { return pattern_; }

  /// Summed per-agent outputs.
  Vector q_values(std::span<const double> features) const {
    Vector total = mlp_forward(online_[0], features);
    for (std::size_t k = 1; k < online_.size(); ++k) total += mlp_forward(online_[k], features);
    return total;
  }

  int act(std::span<const double> features) {
    const Vector q = q_values(features);
    return select_action(std::span<const double>(q.data(), q.size()), epsilon_, explore_);
  }

  void remember(SarlExperience exp) {
    if (exp.utilities.size() != online_.size()) throw ContractViolation("one utility per agent required");
    memory_.push(std::move(exp));
  }

  /// Each agent takes its own Adam step; returns the summed per-agent losses.
  std::optional<double> train() {
    auto batch = memory_.sample(batch_, replay_rng_);
    if (!batch) return std::nullopt;
    return train_on(*batch);
  }

  double train_on(const std::vector<const SarlExperience*>& batch) {
    const int in = online_[0].inputs();
    std::vector<const std::vector<double>*> xs, nxs;
    std::vector<int> actions, next_actions;
    for (const auto* e : batch) {
      xs.push_back(&e->state);
      nxs.push_back(&e->next_state);
      actions.push_back(e->action);
      next_actions.push_back(e->next_action);
    }
    const Matrix x = detail::stack_columns(xs, in);
    const Matrix nx = detail::stack_columns(nxs, in);

    double total = 0.0;
    std::vector<double> y(batch.size());
    for (std::size_t k = 0; k < online_.size(); ++k) {
      const auto next_q = detail::pick_outputs(target_[k], mlp_hidden(target_[k], nx), next_actions);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        y[i] = (1.0 - gamma_) * batch[i]->utilities[k] + gamma_ * next_q[i];
      }
      total += detail::regress_slots(online_[k], opt_[k], x, actions, y);
    }
    return total;
  }

  void sync_target() { target_ = online_; }

  const std::vector<MlpParams>& online() const { return online_; }
  const std::vector<MlpParams>& target() const { return target_; }
  std::vector<MlpParams>& online() { return online_; }
  std::vector<MlpParams>& target() { return target_; }
  const ReplayMemory<SarlExperience>& memory() const { return memory_; }
  double discount() const { return gamma_; }

  nlohmann::json checkpoint() const {
    nlohmann::json j{{"kind", "deep-sarl"}};
    for (std::size_t k = 0; k < online_.size(); ++k) {
      j["agents"].push_back({{"online", to_json(online_[k])}, {"target", to_json(target_[k])}, {"adam", to_json(opt_[k])}});
    }
    return j;
  }

  void restore(const nlohmann::json& j) {
    if (j.at("kind") != "deep-sarl") throw ConfigError("checkpoint is not a Deep-SARL checkpoint");
    const auto& agents = j.at("agents");
    if (agents.size() != online_.size()) throw ConfigError("checkpoint agent count mismatch");
    std::vector<MlpParams> online, target;
    std::vector<AdamState> opt;
    for (std::size_t k = 0; k < online_.size(); ++k) {
      online.push_back(mlp_from_json(agents[k].at("online")));
      target.push_back(mlp_from_json(agents[k].at("target")));
      opt.push_back(adam_from_json(agents[k].at("adam")));
      if (!online.back().same_shape(online_[k]) || !target.back().same_shape(online_[k])) {
        throw ConfigError("checkpoint shapes do not match the agent");
      }
    }
    online_ = std::move(online);
    target_ = std::move(target);
    opt_ = std::move(opt);
  }

 private:
  double gamma_;
  double epsilon_;
  std::size_t batch_;
  DecompositionPattern pattern_;
  std::vector<MlpParams> online_, target_;
  std::vector<AdamState> opt_;
  ReplayMemory<SarlExperience> memory_;
  Rng explore_;
  Rng replay_rng_;
};

}  // namespace mecoff
