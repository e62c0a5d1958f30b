#pragma once

// Experiment driver: runs one algorithm per seed against the environment,
// collects per-epoch metrics, sweeps arrival parameters and writes CSV/JSON.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mecoff/agents.hpp"
#include "mecoff/baselines.hpp"
#include "mecoff/config.hpp"
#include "mecoff/environment.hpp"
#include "mecoff/errors.hpp"
#include "mecoff/state.hpp"
#include "mecoff/tabular.hpp"

namespace mecoff {

enum class Algorithm { Darling, DeepSarl, Mobile, Server, Greedy, TabularQ, TabularSarl, ValueIteration };

inline const std::vector<std::pair<Algorithm, std::string>>& algorithm_names() {
  static const std::vector<std::pair<Algorithm, std::string>> names{
      {Algorithm::Darling, "darling"},        {Algorithm::DeepSarl, "deep-sarl"},
      {Algorithm::Mobile, "mobile"},          {Algorithm::Server, "server"},
      {Algorithm::Greedy, "greedy"},          {Algorithm::TabularQ, "tabular-q"},
      {Algorithm::TabularSarl, "tabular-sarl"}, {Algorithm::ValueIteration, "value-iteration"}};
  return names;
}

inline std::string to_string(Algorithm a) {
  for (const auto& [alg, name] : algorithm_names()) {
    if (alg == a) return name;
  }
  throw ContractViolation("unknown algorithm");
}

inline Algorithm parse_algorithm(const std::string& text) {
  for (const auto& [alg, name] : algorithm_names()) {
    if (name == text) return alg;
  }
  throw ConfigError("unknown algorithm '" + text + "'");
}

enum class SweepAxis { TaskArrival, EnergyArrival };

inline std::string to_string(SweepAxis a) { return a == SweepAxis::TaskArrival ? "task-arrival" : "energy-arrival"; }

inline SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "task-arrival" || text == "lambda-t") return SweepAxis::TaskArrival;
  if (text == "energy-arrival" || text == "lambda-e") return SweepAxis::EnergyArrival;
  throw ConfigError("unknown sweep axis '" + text + "'");
}

enum class OutputFormat { Csv, Json };

inline OutputFormat parse_format(const std::string& text) {
  if (text == "csv") return OutputFormat::Csv;
  if (text == "json") return OutputFormat::Json;
  throw ConfigError("unknown output format '" + text + "'");
}

struct ExperimentSpec {
  SystemConfig cfg;
  std::vector<Algorithm> algorithms{Algorithm::Darling};
  std::uint64_t epochs = 50'000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::optional<SweepAxis> axis;
  std::vector<double> grid;
  std::string output_dir;
  OutputFormat format = OutputFormat::Csv;
  std::size_t tail_window = 5000;
  std::size_t moving_average_window = 1000;
  TabularSchedule tabular;
};

inline void validate(const ExperimentSpec& spec) {
  validate(spec.cfg);
  if (spec.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (spec.seeds.empty()) throw ConfigError("at least one seed is required");
  if (spec.algorithms.empty()) throw ConfigError("at least one algorithm is required");
  if (spec.tail_window < 1 || spec.moving_average_window < 1) throw ConfigError("windows must be positive");
  if (spec.axis) {
    if (spec.grid.empty()) throw ConfigError("sweep requires grid values");
    for (double v : spec.grid) {
      const bool ok = *spec.axis == SweepAxis::TaskArrival ? (v >= 0.0 && v <= 1.0) : (v >= 0.0 && std::isfinite(v));
      if (!ok) throw ConfigError("grid value out of range: " + detail::format_double(v));
    }
  }
}

struct EpochRecord {
  std::uint64_t epoch = 0;
  double utility = 0.0;
  std::array<double, kNumComponents> components{};
  double delay = 0.0;  // min{d, delta}
  int drops = 0;
  int queuing = 0;
  double payment = 0.0;
  int penalty = 0;
  std::optional<double> loss;

  bool operator==(const EpochRecord&) const = default;
};

inline EpochRecord make_record(std::uint64_t epoch, const StepOutcome& out, std::optional<double> loss) {
  EpochRecord r;
  r.epoch = epoch;
  r.utility = out.utility.total;
  r.components = out.utility.components;
  r.delay = out.utility.raw.delay;
  r.drops = out.utility.raw.drops;
  r.queuing = out.utility.raw.queuing;
  r.payment = out.utility.raw.payment;
  r.penalty = out.utility.raw.penalty;
  r.loss = loss;
  return r;
}

enum class Metric { Utility, Delay, Drops, Queuing, Payment, Penalty, Loss };

inline constexpr std::array<Metric, 6> kSummaryMetrics{Metric::Utility, Metric::Delay,   Metric::Drops,
                                                       Metric::Queuing, Metric::Payment, Metric::Penalty};

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::Utility: return "utility";
    case Metric::Delay: return "delay";
    case Metric::Drops: return "drops";
    case Metric::Queuing: return "queuing";
    case Metric::Payment: return "payment";
    case Metric::Penalty: return "penalty";
    case Metric::Loss: return "loss";
  }
  return "?";
}

/// NaN when the record carries no value for the metric (loss before training).
inline double metric_value(const EpochRecord& r, Metric m) {
  switch (m) {
    case Metric::Utility: return r.utility;
    case Metric::Delay: return r.delay;
    case Metric::Drops: return r.drops;
    case Metric::Queuing: return r.queuing;
    case Metric::Payment: return r.payment;
    case Metric::Penalty: return r.penalty;
    case Metric::Loss: return r.loss ? *r.loss : std::numeric_limits<double>::quiet_NaN();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

struct RunSummary {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::optional<SweepAxis> axis;
  double grid_value = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t epochs = 0;
  std::size_t tail_window = 0;
  std::array<double, kSummaryMetrics.size()> tail{};    // means over the final tail_window epochs
  std::array<double, kSummaryMetrics.size()> entire{};  // means over the whole run

  double tail_of(Metric m) const {
    for (std::size_t i = 0; i < kSummaryMetrics.size(); ++i) {
      if (kSummaryMetrics[i] == m) return tail[i];
    }
    throw ContractViolation("metric not summarized");
  }
  double entire_of(Metric m) const {
    for (std::size_t i = 0; i < kSummaryMetrics.size(); ++i) {
      if (kSummaryMetrics[i] == m) return entire[i];
    }
    throw ContractViolation("metric not summarized");
  }
};

struct MetricsSeries {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> records;

  /// Trailing moving average; entries without a value (NaN) are skipped and
  /// the average is NaN until the window holds at least one value. The window
  /// is clamped to the series length.
  std::vector<double> moving_average(Metric m, std::size_t window) const {
    window = std::max<std::size_t>(1, std::min(window, records.size()));
    std::vector<double> out(records.size());
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const double v = metric_value(records[i], m);
      if (!std::isnan(v)) {
        sum += v;
        ++count;
      }
      if (i >= window) {
        const double old = metric_value(records[i - window], m);
        if (!std::isnan(old)) {
          sum -= old;
          --count;
        }
      }
      out[i] = count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
  }

  /// Mean over records [first, records.size()), skipping missing values.
  double mean_from(Metric m, std::size_t first) const {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = first; i < records.size(); ++i) {
      const double v = metric_value(records[i], m);
      if (!std::isnan(v)) {
        sum += v;
        ++count;
      }
    }
    return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
  }

  RunSummary summarize(std::size_t tail_window) const {
    RunSummary s;
    s.algorithm = algorithm;
    s.seed = seed;
    s.epochs = records.size();
    s.tail_window = std::min(tail_window, records.size());
    const std::size_t first = records.size() - s.tail_window;
    for (std::size_t i = 0; i < kSummaryMetrics.size(); ++i) {
      s.tail[i] = mean_from(kSummaryMetrics[i], first);
      s.entire[i] = mean_from(kSummaryMetrics[i], 0);
    }
    return s;
  }
};

/// Per-record sanity rules of a finished series; one message per violation.
inline std::vector<std::string> series_violations(const MetricsSeries& series, std::uint64_t epochs,
                                                  const SystemConfig& cfg) {
  std::vector<std::string> bad;
  if (series.records.size() != epochs) bad.push_back("record count differs from epochs");
  double max_total = 0.0;
  for (double w : cfg.weights) max_total += w;
  for (const auto& r : series.records) {
    double sum = r.components[0];
    for (int k = 1; k < kNumComponents; ++k) sum += r.components[k];
    const std::string at = " at epoch " + std::to_string(r.epoch);
    if (sum != r.utility) bad.push_back("utility differs from its components" + at);
    if (!(r.utility > 0.0) || r.utility > max_total) bad.push_back("utility out of range" + at);
    if (r.delay < 0.0 || r.delay > cfg.epoch_duration) bad.push_back("delay out of range" + at);
    if (r.drops < 0 || r.queuing < 0 || r.penalty < 0 || r.penalty > 1) bad.push_back("negative count" + at);
    if (r.payment < 0.0) bad.push_back("negative payment" + at);
    if (r.loss && !std::isfinite(*r.loss)) bad.push_back("non-finite loss" + at);
    if (bad.size() > 20) break;
  }
  return bad;
}

// ---------------------------------------------------------------- runners

using StatePolicy = std::function<JointAction(const NetworkState&)>;

/// Runs a fixed state-feedback policy.
inline MetricsSeries run_policy(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t epochs,
                                const StatePolicy& policy, const std::string& name) {
  Environment env(cfg, seed);
  MetricsSeries series{name, seed, {}};
  series.records.reserve(epochs);
  for (std::uint64_t j = 1; j <= epochs; ++j) {
    const auto out = env.step(policy(env.state()));
    series.records.push_back(make_record(j, out, std::nullopt));
  }
  return series;
}

/// Online double-DQN training loop. `agent_out`, when given, receives the
/// trained agent.
inline MetricsSeries run_darling(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t epochs,
                                 DarlingAgent* agent_out = nullptr) {
  Environment env(cfg, seed);
  DarlingAgent agent(cfg, seed);
  MetricsSeries series{to_string(Algorithm::Darling), seed, {}};
  series.records.reserve(epochs);
  std::vector<double> features = encode_state(env.state(), cfg);
  for (std::uint64_t j = 1; j <= epochs; ++j) {
    const NetworkState state = env.state();
    const int a = agent.act(features);
    const auto out = env.step(action_from_index(a, cfg));
    std::vector<double> next_features = encode_state(out.next_state, cfg);
    agent.remember({features, state, a, out.utility.total, next_features, out.next_state});
    const auto loss = agent.train();
    if (j % static_cast<std::uint64_t>(cfg.target_sync_period) == 0) agent.sync_target();
    series.records.push_back(make_record(j, out, loss));
    features = std::move(next_features);
  }
  if (agent_out) *agent_out = std::move(agent);
  return series;
}

/// Online decomposed SARSA with one DQN per utility group; the next action is
/// chosen before the experience is stored so it can serve as the SARSA target.
inline MetricsSeries run_deep_sarl(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t epochs,
                                   DeepSarlAgent* agent_out = nullptr) {
  Environment env(cfg, seed);
  DeepSarlAgent agent(cfg, seed);
  MetricsSeries series{to_string(Algorithm::DeepSarl), seed, {}};
  series.records.reserve(epochs);
  std::vector<double> features = encode_state(env.state(), cfg);
  int a = agent.act(features);
  for (std::uint64_t j = 1; j <= epochs; ++j) {
    const NetworkState state = env.state();
    const auto out = env.step(action_from_index(a, cfg));
    std::vector<double> next_features = encode_state(out.next_state, cfg);
    const int next_a = agent.act(next_features);
    agent.remember({features, state, a, decompose(out.utility, cfg.decomposition), next_features,
                    out.next_state, next_a});
    const auto loss = agent.train();
    if (j % static_cast<std::uint64_t>(cfg.target_sync_period) == 0) agent.sync_target();
    series.records.push_back(make_record(j, out, loss));
    features = std::move(next_features);
    a = next_a;
  }
  if (agent_out) *agent_out = std::move(agent);
  return series;
}

inline MetricsSeries run_tabular(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t epochs, bool sarl,
                                 const TabularSchedule& schedule) {
  MetricsSeries series{to_string(sarl ? Algorithm::TabularSarl : Algorithm::TabularQ), seed, {}};
  series.records.reserve(epochs);
  std::uint64_t j = 0;
  const EpochObserver observe = [&](const StepOutcome& out) { series.records.push_back(make_record(++j, out, std::nullopt)); };
  if (sarl) {
    tabular_sarl(cfg, seed, epochs, cfg.decomposition, schedule, observe);
  } else {
    tabular_q_learning(cfg, seed, epochs, schedule, observe);
  }
  return series;
}

/// Solves the instance exactly, then runs the optimal greedy policy.
inline MetricsSeries run_value_iteration(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t epochs) {
  const Kernel k = build_kernel(cfg);
  const ValueTables vi = value_iteration(k, cfg.discount);
  const std::vector<int> policy = greedy_policy(vi.q);
  return run_policy(
      cfg, seed, epochs,
      [&](const NetworkState& s) { return action_from_index(policy[state_index(s, cfg)], cfg); },
      to_string(Algorithm::ValueIteration));
}

inline MetricsSeries run_single(const SystemConfig& cfg, Algorithm alg, std::uint64_t seed, std::uint64_t epochs,
                                const TabularSchedule& schedule = {}) {
  switch (alg) {
    case Algorithm::Darling: return run_darling(cfg, seed, epochs);
    case Algorithm::DeepSarl: return run_deep_sarl(cfg, seed, epochs);
    case Algorithm::Mobile:
      return run_policy(cfg, seed, epochs, [&](const NetworkState& s) { return mobile_execution_policy(s, cfg); },
                        to_string(alg));
    case Algorithm::Server:
      return run_policy(cfg, seed, epochs, [&](const NetworkState& s) { return server_execution_policy(s, cfg); },
                        to_string(alg));
    case Algorithm::Greedy:
      return run_policy(cfg, seed, epochs, [&](const NetworkState& s) { return greedy_execution_policy(s, cfg); },
                        to_string(alg));
    case Algorithm::TabularQ: return run_tabular(cfg, seed, epochs, false, schedule);
    case Algorithm::TabularSarl: return run_tabular(cfg, seed, epochs, true, schedule);
    case Algorithm::ValueIteration: return run_value_iteration(cfg, seed, epochs);
  }
  throw ContractViolation("unknown algorithm");
}

/// One series per (algorithm, seed), algorithms outermost.
inline std::vector<MetricsSeries> run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  std::vector<MetricsSeries> out;
  for (Algorithm alg : spec.algorithms) {
    for (std::uint64_t seed : spec.seeds) out.push_back(run_single(spec.cfg, alg, seed, spec.epochs, spec.tabular));
  }
  return out;
}

inline SystemConfig with_grid_value(SystemConfig cfg, SweepAxis axis, double v) {
  if (axis == SweepAxis::TaskArrival) {
    cfg.task_arrival_prob = v;
  } else {
    cfg.energy_arrival_rate = v;
  }
  return cfg;
}

/// Called once per finished run of a sweep, e.g. to persist its series.
using SweepObserver = std::function<void(const RunSummary&, const MetricsSeries&)>;

/// One summary row per (grid value, algorithm, seed).
inline std::vector<RunSummary> sweep(const ExperimentSpec& spec, const SweepObserver& observe = {}) {
  validate(spec);
  if (!spec.axis) throw ConfigError("sweep requires an axis");
  std::vector<RunSummary> rows;
  for (double v : spec.grid) {
    const SystemConfig cfg = with_grid_value(spec.cfg, *spec.axis, v);
    for (Algorithm alg : spec.algorithms) {
      for (std::uint64_t seed : spec.seeds) {
        const MetricsSeries series = run_single(cfg, alg, seed, spec.epochs, spec.tabular);
        RunSummary s = series.summarize(spec.tail_window);
        s.axis = spec.axis;
        s.grid_value = v;
        if (observe) observe(s, series);
        rows.push_back(std::move(s));
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------- output

namespace detail {

inline std::string g17(double v) { return format_double(v); }  // %.17g

inline std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  return f;
}

}  // namespace detail

inline const char* kMetricsCsvHeader = "epoch,utility,u1,u2,u3,u4,u5,delay,drops,queuing,payment,penalty,loss";

inline void write_metrics_csv(const MetricsSeries& series, std::ostream& out) {
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : series.records) {
    out << r.epoch << ',' << detail::g17(r.utility);
    for (double u : r.components) out << ',' << detail::g17(u);
    out << ',' << detail::g17(r.delay) << ',' << r.drops << ',' << r.queuing << ',' << detail::g17(r.payment) << ','
        << r.penalty << ',';
    if (r.loss) out << detail::g17(*r.loss);
    out << '\n';
  }
}

inline nlohmann::json to_json(const MetricsSeries& series) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : series.records) {
    records.push_back({{"epoch", r.epoch},
                       {"utility", r.utility},
                       {"components", r.components},
                       {"delay", r.delay},
                       {"drops", r.drops},
                       {"queuing", r.queuing},
                       {"payment", r.payment},
                       {"penalty", r.penalty},
                       {"loss", r.loss ? nlohmann::json(*r.loss) : nlohmann::json(nullptr)}});
  }
  return {{"algorithm", series.algorithm}, {"seed", series.seed}, {"records", records}};
}

inline MetricsSeries metrics_from_json(const nlohmann::json& j) {
  MetricsSeries s;
  s.algorithm = j.at("algorithm").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& rj : j.at("records")) {
    EpochRecord r;
    r.epoch = rj.at("epoch").get<std::uint64_t>();
    r.utility = rj.at("utility").get<double>();
    r.components = rj.at("components").get<std::array<double, kNumComponents>>();
    r.delay = rj.at("delay").get<double>();
    r.drops = rj.at("drops").get<int>();
    r.queuing = rj.at("queuing").get<int>();
    r.payment = rj.at("payment").get<double>();
    r.penalty = rj.at("penalty").get<int>();
    if (!rj.at("loss").is_null()) r.loss = rj.at("loss").get<double>();
    s.records.push_back(r);
  }
  return s;
}

inline void emit_metrics(const MetricsSeries& series, const std::string& path, OutputFormat format) {
  auto f = detail::open_output(path);
  if (format == OutputFormat::Csv) {
    write_metrics_csv(series, f);
  } else {
    f << to_json(series).dump(1) << '\n';
  }
  if (!f) throw ConfigError("failed writing '" + path + "'");
}

inline std::string summary_csv_header() {
  std::string h = "axis,value,algorithm,seed,epochs,tail_window";
  for (Metric m : kSummaryMetrics) h += ",tail_" + to_string(m);
  for (Metric m : kSummaryMetrics) h += ",mean_" + to_string(m);
  return h;
}

inline void write_summary_csv(const std::vector<RunSummary>& rows, std::ostream& out) {
  out << summary_csv_header() << '\n';
  for (const auto& s : rows) {
    out << (s.axis ? to_string(*s.axis) : "") << ',' << (s.axis ? detail::g17(s.grid_value) : "") << ','
        << s.algorithm << ',' << s.seed << ',' << s.epochs << ',' << s.tail_window;
    for (double v : s.tail) out << ',' << detail::g17(v);
    for (double v : s.entire) out << ',' << detail::g17(v);
    out << '\n';
  }
}

inline void emit_summary(const std::vector<RunSummary>& rows, const std::string& path) {
  auto f = detail::open_output(path);
  write_summary_csv(rows, f);
  if (!f) throw ConfigError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------- audits

/// Schedule used when tabular Q-learning is compared against value
/// iteration: rescaled-linear step size 1/(1 + (1-gamma) n) and a
/// 0.3 exploration floor.
inline TabularSchedule oracle_schedule(double gamma) {
  TabularSchedule s;
  s.alpha_exponent = 1.0;
  s.alpha_horizon = 1.0 / (1.0 - gamma);
  s.epsilon_floor = 0.3;
  return s;
}

inline std::vector<int> random_policy(std::size_t states, std::size_t actions, Rng& rng) {
  std::vector<int> policy(states);
  for (auto& a : policy) a = static_cast<int>(uniform_index(rng, actions));
  return policy;
}

/// Largest |sum_k Q_k - Q| over `policies` random deterministic policies.
inline double decomposition_gap(const Kernel& k, const DecompositionPattern& pattern, double gamma, int policies,
                                Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < policies; ++i) {
    const auto tables = policy_evaluation_decomposed(k, random_policy(k.states, k.actions, rng), pattern, gamma);
    for (std::size_t j = 0; j < tables.q.values.size(); ++j) {
      double sum = 0.0;
      for (const auto& qk : tables.per_agent) sum += qk.values[j];
      worst = std::max(worst, std::abs(sum - tables.q.values[j]));
    }
  }
  return worst;
}

struct OracleReport {
  nlohmann::json details;
  bool ok = true;              // exact invariants only
  double q_learning_gap = 0;   // sup |Q_learned - Q_VI|
};

/// Tabular suite on a small instance: kernel normalization, value iteration,
/// Q-learning and decomposed SARSA against it, and exact decomposed policy
/// evaluation for random policies.
inline OracleReport run_oracle_suite(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t epochs,
                                     const TabularSchedule& schedule) {
  OracleReport rep;
  auto& j = rep.details;
  const Kernel k = build_kernel(cfg);
  double row_err = 0.0;
  for (const auto& row : k.rows) {
    double sum = 0.0;
    for (const auto& t : row) sum += t.prob;
    row_err = std::max(row_err, std::abs(sum - 1.0));
  }
  j["states"] = k.states;
  j["actions"] = k.actions;
  j["kernel_row_sum_error"] = row_err;

  const ValueTables vi = value_iteration(k, cfg.discount);
  const double residual = bellman_residual(k, vi.value, cfg.discount);
  j["value_iteration"] = {{"iterations", vi.iterations}, {"bellman_residual", residual}, {"value", vi.value}};

  const TabularRun ql = tabular_q_learning(cfg, seed, epochs, schedule);
  rep.q_learning_gap = sup_norm_diff(ql.q, vi.q);
  j["q_learning"] = {{"epochs", epochs}, {"sup_norm_vs_value_iteration", rep.q_learning_gap}};

  const TabularRun sarl = tabular_sarl(cfg, seed, epochs, cfg.decomposition, schedule);
  QTable summed(sarl.q.states, sarl.q.actions);
  for (std::size_t i = 0; i < summed.values.size(); ++i) {
    for (const auto& qk : sarl.per_agent) summed.values[i] += qk.values[i];
  }
  const double sarl_gap = sup_norm_diff(summed, sarl.q);
  j["sarl"] = {{"sum_vs_monolithic", sarl_gap}, {"sum_vs_value_iteration", sup_norm_diff(summed, vi.q)}};

  Rng rng = substream(seed, streams::kAgentExplore);
  const double gap5 = decomposition_gap(k, identity_pattern(), cfg.discount, 20, rng);
  const double gap4 = decomposition_gap(k, {{0, 2}, {1}, {3}, {4}}, cfg.discount, 20, rng);
  j["decomposed_evaluation_gap"] = {{"k5", gap5}, {"k4", gap4}};

  rep.ok = row_err <= 1e-12 && residual <= 1e-9 && sarl_gap <= 1e-10 && gap5 < 1e-10 && gap4 < 1e-10;
  j["ok"] = rep.ok;
  return rep;
}

struct GradientAudit {
  double max_relative_error = 0.0;
  std::size_t compared = 0;  // entries above the magnitude floor
};

/// Compares backpropagation against central differences of <signal, out(x)>
/// for a random net, input and output signal.
inline GradientAudit gradient_audit(int in, int hidden, int out, std::uint64_t seed, double step = 1e-6,
                                    double floor = 1e-8) {
  Rng rng = substream(seed, streams::kAgentInit);
  MlpParams p = mlp_init(in, hidden, out, rng);
  std::vector<double> x(in), s(out);
  for (double& v : x) v = uniform(rng, -1.0, 1.0);
  for (double& v : s) v = uniform(rng, -1.0, 1.0);
  const Eigen::Map<const Vector> sig(s.data(), out);
  const MlpParams g = mlp_gradient(p, x, s);

  std::vector<double> analytic;
  analytic.reserve(g.size());
  MlpParams gc = g;
  gc.for_each([&](double& v) { analytic.push_back(v); });

  GradientAudit audit;
  std::size_t i = 0;
  p.for_each([&](double& theta) {
    const double saved = theta;
    theta = saved + step;
    const double up = sig.dot(mlp_forward(p, x));
    theta = saved - step;
    const double down = sig.dot(mlp_forward(p, x));
    theta = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[i++];
    const double scale = std::max(std::abs(a), std::abs(numeric));
    if (scale < floor) return;
    ++audit.compared;
    audit.max_relative_error = std::max(audit.max_relative_error, std::abs(a - numeric) / scale);
  });
  return audit;
}

}  // namespace mecoff
