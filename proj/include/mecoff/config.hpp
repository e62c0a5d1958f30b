#pragma once

// System configuration: physical layer, queues, utility weights and the
// learning hyperparameters, plus a line-oriented text format for persisting it.
//
// File format (one entry per line, '#' starts a comment):
//
//   num_bs = 2
//   weights = 3 9 5 2 1
//   decomposition = 1 3 | 2 | 4 | 5
//   channel.1.levels = -11.23 -2.08
//   channel.1.row.1 = 0.3 0.7
//   channel.1.row.2 = 0.4 0.6
//
// BS, row and utility-component indices are 1-based. Doubles are written with
// 17 significant digits so every value round-trips exactly.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mecoff/errors.hpp"
#include "mecoff/random.hpp"

namespace mecoff {

inline constexpr int kNumComponents = 5;

/// Finite-state Markov channel between the mobile user and one BS.
struct ChannelModel {
  std::vector<double> levels_db;
  std::vector<std::vector<double>> transition;  // row-stochastic, levels x levels
};

/// Partition of the five utility components into agent groups (0-based component ids).
using DecompositionPattern = std::vector<std::vector<int>>;

inline DecompositionPattern identity_pattern() { return {{0}, {1}, {2}, {3}, {4}}; }

struct SystemConfig {
  int num_bs = 6;
  std::vector<ChannelModel> channels;

  double epoch_duration = 5e-3;        // s
  double bandwidth = 0.6e6;            // Hz
  double interference_noise = 1.5e-8;  // W
  double input_bits = 1e4;
  double task_cycles = 7.375e6;
  double max_cpu_freq = 2e9;   // Hz
  double max_tx_power = 2.0;   // W
  double handover_delay = 2e-3;  // s
  double server_exec_time = 0.0;  // s
  double mec_price = 1.0;
  double energy_unit = 2e-3;            // J
  double switched_capacitance = 1e-28;  // effective switched capacitance
  int task_queue_cap = 4;
  int energy_queue_cap = 4;
  double task_arrival_prob = 0.5;
  double energy_arrival_rate = 0.8;
  std::array<double, kNumComponents> weights{3.0, 9.0, 5.0, 2.0, 1.0};
  double discount = 0.9;
  double exploration = 0.01;

  // Learning machinery for the deep agents.
  int replay_capacity = 5000;
  int batch_size = 200;
  int darling_hidden = 200;
  int sarl_hidden = 40;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int target_sync_period = 200;
  DecompositionPattern decomposition = identity_pattern();
};

inline const std::vector<double>& reference_gain_levels_db() {
  static const std::vector<double> levels{-11.23, -9.37, -7.8, -6.3, -4.68, -2.08};
  return levels;
}

/// Row-stochastic matrix whose rows are independent flat-Dirichlet draws.
inline std::vector<std::vector<double>> random_transition_matrix(Rng& rng, std::size_t n) {
  std::vector<std::vector<double>> m;
  m.reserve(n);
  for (std::size_t i = 0; i < n; ++i) m.push_back(flat_dirichlet(rng, n));
  return m;
}

/// Experiment configuration with six BSs sharing the six-level gain set;
/// transition matrices are drawn from `matrix_seed`.
inline SystemConfig reference_config(std::uint64_t matrix_seed = 2018) {
  SystemConfig cfg;
  Rng rng = substream(matrix_seed, streams::kChannelMatrices);
  cfg.channels.clear();
  for (int b = 0; b < cfg.num_bs; ++b) {
    ChannelModel ch;
    ch.levels_db = reference_gain_levels_db();
    ch.transition = random_transition_matrix(rng, ch.levels_db.size());
    cfg.channels.push_back(std::move(ch));
  }
  return cfg;
}

/// Small instance that tabular methods can enumerate: one BS with two gain
/// levels and queues of capacity two (18 states, 6 actions).
inline SystemConfig tiny_config() {
  SystemConfig cfg;
  cfg.num_bs = 1;
  cfg.task_queue_cap = 2;
  cfg.energy_queue_cap = 2;
  cfg.channels = {ChannelModel{{-11.23, -2.08}, {{0.3, 0.7}, {0.4, 0.6}}}};
  return cfg;
}

inline void validate_pattern(const DecompositionPattern& pattern) {
  if (pattern.empty()) throw ConfigError("decomposition pattern has no groups");
  std::array<int, kNumComponents> seen{};
  for (const auto& group : pattern) {
    if (group.empty()) throw ConfigError("decomposition pattern has an empty group");
    for (int c : group) {
      if (c < 0 || c >= kNumComponents) {
        throw ConfigError("decomposition component out of range: " + std::to_string(c + 1));
      }
      ++seen[c];
    }
  }
  for (int c = 0; c < kNumComponents; ++c) {
    if (seen[c] != 1) {
      throw ConfigError("decomposition pattern is not a partition: component " +
                        std::to_string(c + 1) + " appears " + std::to_string(seen[c]) +
                        " times");
    }
  }
}

inline void validate(const SystemConfig& cfg) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(cfg.num_bs >= 1, "num_bs must be >= 1");
  require(static_cast<int>(cfg.channels.size()) == cfg.num_bs,
          "expected one channel model per BS");
  for (std::size_t b = 0; b < cfg.channels.size(); ++b) {
    const auto& ch = cfg.channels[b];
    const std::string where = "channel " + std::to_string(b + 1) + ": ";
    require(!ch.levels_db.empty(), where + "no gain levels");
    require(ch.transition.size() == ch.levels_db.size(), where + "matrix row count mismatch");
    for (const auto& row : ch.transition) {
      require(row.size() == ch.levels_db.size(), where + "matrix is not square");
      double sum = 0.0;
      for (double p : row) {
        require(std::isfinite(p) && p >= 0.0, where + "negative or non-finite probability");
        sum += p;
      }
      require(std::abs(sum - 1.0) <= 1e-12, where + "row does not sum to 1");
    }
    for (double g : ch.levels_db) require(std::isfinite(g), where + "non-finite gain level");
  }
  require(cfg.epoch_duration > 0, "epoch_duration must be > 0");
  require(cfg.bandwidth > 0, "bandwidth must be > 0");
  require(cfg.interference_noise > 0, "interference_noise must be > 0");
  require(cfg.input_bits > 0, "input_bits must be > 0");
  require(cfg.task_cycles > 0, "task_cycles must be > 0");
  require(cfg.energy_unit > 0, "energy_unit must be > 0");
  require(cfg.switched_capacitance > 0, "switched_capacitance must be > 0");
  require(cfg.max_cpu_freq > 0, "max_cpu_freq must be > 0");
  require(cfg.max_tx_power > 0, "max_tx_power must be > 0");
  require(cfg.handover_delay >= 0, "handover_delay must be >= 0");
  require(cfg.server_exec_time >= 0, "server_exec_time must be >= 0");
  require(cfg.mec_price >= 0, "mec_price must be >= 0");
  require(cfg.task_arrival_prob >= 0 && cfg.task_arrival_prob <= 1,
          "task_arrival_prob must lie in [0, 1]");
  require(cfg.energy_arrival_rate >= 0, "energy_arrival_rate must be >= 0");
  require(cfg.discount >= 0 && cfg.discount < 1, "discount must lie in [0, 1)");
  require(cfg.exploration >= 0 && cfg.exploration <= 1, "exploration must lie in [0, 1]");
  require(cfg.task_queue_cap >= 1, "task_queue_cap must be >= 1");
  require(cfg.energy_queue_cap >= 1, "energy_queue_cap must be >= 1");
  for (double w : cfg.weights) require(std::isfinite(w) && w >= 0, "weights must be >= 0");
  require(cfg.replay_capacity >= 1, "replay_capacity must be >= 1");
  require(cfg.batch_size >= 1 && cfg.batch_size <= cfg.replay_capacity,
          "batch_size must lie in [1, replay_capacity]");
  require(cfg.darling_hidden >= 1 && cfg.sarl_hidden >= 1, "hidden widths must be >= 1");
  require(cfg.learning_rate > 0, "learning_rate must be > 0");
  require(cfg.target_sync_period >= 1, "target_sync_period must be >= 1");
  validate_pattern(cfg.decomposition);
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join_doubles(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ' ';
    out += format_double(xs[i]);
  }
  return out;
}

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ConfigError(key + ": not a number: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
  auto xs = parse_doubles(key, text);
  if (xs.size() != 1) throw ConfigError(key + ": expected a single number");
  return xs[0];
}

inline int parse_int(const std::string& key, const std::string& text) {
  const double v = parse_double(key, text);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key + ": expected an integer");
  return static_cast<int>(v);
}

inline DecompositionPattern parse_pattern(const std::string& text) {
  DecompositionPattern pattern;
  std::istringstream in(text);
  std::string group_text;
  while (std::getline(in, group_text, '|')) {
    std::vector<int> group;
    for (double c : parse_doubles("decomposition", group_text)) {
      if (c != std::floor(c)) throw ConfigError("decomposition: component ids are integers");
      group.push_back(static_cast<int>(c) - 1);
    }
    pattern.push_back(std::move(group));
  }
  return pattern;
}

// Scalar keys shared by the reader and the writer.
struct ScalarField {
  const char* key;
  std::function<double&(SystemConfig&)> real;
  std::function<int&(SystemConfig&)> integer;
};

inline const std::vector<ScalarField>& scalar_fields() {
  static const std::vector<ScalarField> fields = [] {
    std::vector<ScalarField> f;
    auto real = [&f](const char* key, double SystemConfig::*m) {
      f.push_back({key, [m](SystemConfig& c) -> double& { return c.*m; }, nullptr});
    };
    auto integer = [&f](const char* key, int SystemConfig::*m) {
      f.push_back({key, nullptr, [m](SystemConfig& c) -> int& { return c.*m; }});
    };
    real("epoch_duration", &SystemConfig::epoch_duration);
    real("bandwidth", &SystemConfig::bandwidth);
    real("interference_noise", &SystemConfig::interference_noise);
    real("input_bits", &SystemConfig::input_bits);
    real("task_cycles", &SystemConfig::task_cycles);
    real("max_cpu_freq", &SystemConfig::max_cpu_freq);
    real("max_tx_power", &SystemConfig::max_tx_power);
    real("handover_delay", &SystemConfig::handover_delay);
    real("server_exec_time", &SystemConfig::server_exec_time);
    real("mec_price", &SystemConfig::mec_price);
    real("energy_unit", &SystemConfig::energy_unit);
    real("switched_capacitance", &SystemConfig::switched_capacitance);
    integer("task_queue_cap", &SystemConfig::task_queue_cap);
    integer("energy_queue_cap", &SystemConfig::energy_queue_cap);
    real("task_arrival_prob", &SystemConfig::task_arrival_prob);
    real("energy_arrival_rate", &SystemConfig::energy_arrival_rate);
    real("discount", &SystemConfig::discount);
    real("exploration", &SystemConfig::exploration);
    integer("replay_capacity", &SystemConfig::replay_capacity);
    integer("batch_size", &SystemConfig::batch_size);
    integer("darling_hidden", &SystemConfig::darling_hidden);
    integer("sarl_hidden", &SystemConfig::sarl_hidden);
    real("learning_rate", &SystemConfig::learning_rate);
    real("adam_beta1", &SystemConfig::adam_beta1);
    real("adam_beta2", &SystemConfig::adam_beta2);
    real("adam_epsilon", &SystemConfig::adam_epsilon);
    integer("target_sync_period", &SystemConfig::target_sync_period);
    return f;
  }();
  return fields;
}

}  // namespace detail

inline std::string to_config_text(const SystemConfig& cfg) {
  std::ostringstream out;
  out << "# mecoff system configuration\n";
  out << "num_bs = " << cfg.num_bs << "\n";
  SystemConfig copy = cfg;
  for (const auto& f : detail::scalar_fields()) {
    out << f.key << " = ";
    if (f.real) {
      out << detail::format_double(f.real(copy));
    } else {
      out << f.integer(copy);
    }
    out << "\n";
  }
  out << "weights = "
      << detail::join_doubles(std::vector<double>(cfg.weights.begin(), cfg.weights.end()))
      << "\n";
  out << "decomposition =";
  for (std::size_t g = 0; g < cfg.decomposition.size(); ++g) {
    if (g) out << " |";
    for (int c : cfg.decomposition[g]) out << ' ' << (c + 1);
  }
  out << "\n";
  for (std::size_t b = 0; b < cfg.channels.size(); ++b) {
    const auto& ch = cfg.channels[b];
    out << "channel." << (b + 1) << ".levels = " << detail::join_doubles(ch.levels_db) << "\n";
    for (std::size_t r = 0; r < ch.transition.size(); ++r) {
      out << "channel." << (b + 1) << ".row." << (r + 1) << " = "
          << detail::join_doubles(ch.transition[r]) << "\n";
    }
  }
  return out.str();
}

/// Parses the text format. Keys not present keep their defaults; channel
/// models must be given for every BS. The result is validated.
inline SystemConfig parse_config_text(const std::string& text) {
  SystemConfig cfg;
  cfg.channels.clear();
  std::map<int, std::vector<double>> levels;
  std::map<int, std::map<int, std::vector<double>>> rows;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (key == "num_bs") {
      cfg.num_bs = detail::parse_int(key, value);
      continue;
    }
    if (key == "weights") {
      auto w = detail::parse_doubles(key, value);
      if (w.size() != kNumComponents) throw ConfigError("weights: expected 5 values");
      std::copy(w.begin(), w.end(), cfg.weights.begin());
      continue;
    }
    if (key == "decomposition") {
      cfg.decomposition = detail::parse_pattern(value);
      continue;
    }
    if (key.rfind("channel.", 0) == 0) {
      std::vector<std::string> parts;
      std::istringstream key_in(key);
      for (std::string part; std::getline(key_in, part, '.');) parts.push_back(part);
      auto index = [&](const std::string& s) {
        return s.empty() || s.find_first_not_of("0123456789") != std::string::npos ? -1
                                                                                   : std::stoi(s);
      };
      if (parts.size() == 3 && parts[2] == "levels" && index(parts[1]) >= 1) {
        levels[index(parts[1])] = detail::parse_doubles(key, value);
        continue;
      }
      if (parts.size() == 4 && parts[2] == "row" && index(parts[1]) >= 1 && index(parts[3]) >= 1) {
        rows[index(parts[1])][index(parts[3])] = detail::parse_doubles(key, value);
        continue;
      }
      throw ConfigError("line " + std::to_string(line_no) + ": malformed channel key '" + key + "'");
    }
    bool matched = false;
    for (const auto& f : detail::scalar_fields()) {
      if (key == f.key) {
        if (f.real) {
          f.real(cfg) = detail::parse_double(key, value);
        } else {
          f.integer(cfg) = detail::parse_int(key, value);
        }
        matched = true;
        break;
      }
    }
    if (!matched) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }

  if (cfg.num_bs < 1) throw ConfigError("num_bs must be >= 1");
  for (int b = 1; b <= cfg.num_bs; ++b) {
    auto lv = levels.find(b);
    if (lv == levels.end()) throw ConfigError("missing channel." + std::to_string(b) + ".levels");
    ChannelModel ch;
    ch.levels_db = lv->second;
    const auto& brows = rows[b];
    for (std::size_t r = 1; r <= ch.levels_db.size(); ++r) {
      auto it = brows.find(static_cast<int>(r));
      if (it == brows.end()) {
        throw ConfigError("missing channel." + std::to_string(b) + ".row." + std::to_string(r));
      }
      ch.transition.push_back(it->second);
    }
    if (brows.size() != ch.levels_db.size()) {
      throw ConfigError("channel." + std::to_string(b) + ": unexpected extra rows");
    }
    cfg.channels.push_back(std::move(ch));
  }
  if (levels.size() != static_cast<std::size_t>(cfg.num_bs) || rows.size() > levels.size()) {
    throw ConfigError("channel entries do not match num_bs");
  }
  validate(cfg);
  return cfg;
}

inline SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

inline void save_config(const SystemConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << to_config_text(cfg);
}

}  // namespace mecoff
