// Command-line front end: training runs, parameter sweeps, the tabular oracle
// suite, gradient audits and config generation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mecoff/harness.hpp"

namespace fs = std::filesystem;
using namespace mecoff;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> algorithms{"darling"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::uint64_t epochs = 50'000;
  std::string out_dir = "out";
  std::string format = "csv";
  std::size_t tail_window = 5000;
  std::size_t ma_window = 1000;
  double lambda_t = -1;
  double lambda_e = -1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "Config file (default: built-in reference instance)");
  cmd->add_option("-a,--algorithm", o.algorithms,
                  "darling, deep-sarl, mobile, server, greedy, tabular-q, tabular-sarl, value-iteration")
      ->delimiter(',');
  cmd->add_option("-s,--seeds", o.seeds, "Master seeds")->delimiter(',');
  cmd->add_option("-n,--epochs", o.epochs, "Decision epochs per run");
  cmd->add_option("-o,--out", o.out_dir, "Output directory");
  cmd->add_option("-f,--format", o.format, "Per-epoch metrics format: csv or json");
  cmd->add_option("--tail-window", o.tail_window, "Epochs averaged for the tail summary");
  cmd->add_option("--ma-window", o.ma_window, "Moving-average window reported on stdout");
  cmd->add_option("--lambda-t", o.lambda_t, "Override the task arrival probability");
  cmd->add_option("--lambda-e", o.lambda_e, "Override the energy arrival rate");
}

ExperimentSpec make_spec(const CommonOptions& o) {
  ExperimentSpec spec;
  spec.cfg = o.config_path.empty() ? reference_config() : load_config(o.config_path);
  if (o.lambda_t >= 0) spec.cfg.task_arrival_prob = o.lambda_t;
  if (o.lambda_e >= 0) spec.cfg.energy_arrival_rate = o.lambda_e;
  spec.algorithms.clear();
  for (const auto& a : o.algorithms) spec.algorithms.push_back(parse_algorithm(a));
  spec.seeds = o.seeds;
  spec.epochs = o.epochs;
  spec.output_dir = o.out_dir;
  spec.format = parse_format(o.format);
  spec.tail_window = o.tail_window;
  spec.moving_average_window = o.ma_window;
  return spec;
}

std::string series_path(const ExperimentSpec& spec, const MetricsSeries& s, const std::string& prefix = "") {
  const char* ext = spec.format == OutputFormat::Csv ? ".csv" : ".json";
  return (fs::path(spec.output_dir) / (prefix + s.algorithm + "_seed" + std::to_string(s.seed) + ext)).string();
}

void print_summary_line(const RunSummary& s) {
  std::printf("%-15s seed %-4llu", s.algorithm.c_str(), static_cast<unsigned long long>(s.seed));
  if (s.axis) std::printf(" %s=%-6g", to_string(*s.axis).c_str(), s.grid_value);
  std::printf(" tail utility %.6f (mean %.6f) delay %.3e drops %.4f queuing %.4f payment %.3e penalty %.4f\n",
              s.tail_of(Metric::Utility), s.entire_of(Metric::Utility), s.tail_of(Metric::Delay),
              s.tail_of(Metric::Drops), s.tail_of(Metric::Queuing), s.tail_of(Metric::Payment),
              s.tail_of(Metric::Penalty));
  std::fflush(stdout);
}

bool report_violations(const std::vector<std::string>& bad, const std::string& what) {
  for (const auto& msg : bad) std::fprintf(stderr, "%s: %s\n", what.c_str(), msg.c_str());
  return bad.empty();
}

int cmd_run(const CommonOptions& o) {
  const ExperimentSpec spec = make_spec(o);
  validate(spec);
  fs::create_directories(spec.output_dir);
  bool ok = true;
  std::vector<RunSummary> rows;
  for (Algorithm alg : spec.algorithms) {
    for (std::uint64_t seed : spec.seeds) {
      const MetricsSeries s = run_single(spec.cfg, alg, seed, spec.epochs, spec.tabular);
      ok &= report_violations(series_violations(s, spec.epochs, spec.cfg), s.algorithm);
      emit_metrics(s, series_path(spec, s), spec.format);
      rows.push_back(s.summarize(spec.tail_window));
      print_summary_line(rows.back());
      const auto ma = s.moving_average(Metric::Loss, spec.moving_average_window);
      if (!ma.empty() && !std::isnan(ma.back())) std::printf("  final loss moving average %.6g\n", ma.back());
    }
  }
  emit_summary(rows, (fs::path(spec.output_dir) / "summary.csv").string());
  return ok ? 0 : 1;
}

int cmd_sweep(const CommonOptions& o, const std::string& axis, const std::vector<double>& grid, bool keep_series) {
  ExperimentSpec spec = make_spec(o);
  spec.axis = parse_sweep_axis(axis);
  spec.grid = grid;
  validate(spec);
  fs::create_directories(spec.output_dir);
  bool ok = true;
  const auto rows = sweep(spec, [&](const RunSummary& s, const MetricsSeries& series) {
    ok &= report_violations(series_violations(series, spec.epochs, spec.cfg), series.algorithm);
    if (keep_series) {
      std::ostringstream prefix;
      prefix << to_string(*spec.axis) << "_" << detail::format_double(s.grid_value) << "_";
      emit_metrics(series, series_path(spec, series, prefix.str()), spec.format);
    }
    print_summary_line(s);
  });
  emit_summary(rows, (fs::path(spec.output_dir) / "summary.csv").string());
  return ok ? 0 : 1;
}

int cmd_oracle(const std::string& config_path, std::uint64_t seed, std::uint64_t epochs, const std::string& out) {
  const SystemConfig cfg = config_path.empty() ? tiny_config() : load_config(config_path);
  const OracleReport rep = run_oracle_suite(cfg, seed, epochs, oracle_schedule(cfg.discount));
  const auto& j = rep.details;
  std::printf("states %zu actions %zu\n", j["states"].get<std::size_t>(), j["actions"].get<std::size_t>());
  std::printf("kernel row-sum error      %.3e\n", j["kernel_row_sum_error"].get<double>());
  std::printf("value iteration residual  %.3e (%d iterations)\n",
              j["value_iteration"]["bellman_residual"].get<double>(), j["value_iteration"]["iterations"].get<int>());
  std::printf("q-learning vs VI (sup)    %.6f\n", rep.q_learning_gap);
  std::printf("sarl sum vs monolithic    %.3e\n", j["sarl"]["sum_vs_monolithic"].get<double>());
  std::printf("sarl sum vs VI (sup)      %.6f\n", j["sarl"]["sum_vs_value_iteration"].get<double>());
  std::printf("decomposed evaluation gap K=5 %.3e, K=4 %.3e\n", j["decomposed_evaluation_gap"]["k5"].get<double>(),
              j["decomposed_evaluation_gap"]["k4"].get<double>());
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw ConfigError("cannot write '" + out + "'");
    f << j.dump(1) << '\n';
  }
  std::printf("%s\n", rep.ok ? "invariants hold" : "INVARIANT FAILURE");
  return rep.ok ? 0 : 1;
}

int cmd_gradcheck(int nets, std::uint64_t seed, double tol) {
  bool ok = true;
  for (const auto& [in, hidden, out] : {std::tuple{14, 40, 35}, std::tuple{14, 200, 35}}) {
    double worst = 0.0;
    for (int i = 0; i < nets; ++i) {
      worst = std::max(worst, gradient_audit(in, hidden, out, seed + static_cast<std::uint64_t>(i)).max_relative_error);
    }
    std::printf("%d-%d-%d: max relative error %.3e over %d nets\n", in, hidden, out, worst, nets);
    ok &= worst < tol;
  }
  return ok ? 0 : 1;
}

int cmd_config(const std::string& preset, std::uint64_t matrix_seed, const std::string& out) {
  SystemConfig cfg;
  if (preset == "reference") {
    cfg = reference_config(matrix_seed);
  } else if (preset == "tiny") {
    cfg = tiny_config();
  } else {
    throw ConfigError("unknown preset '" + preset + "'");
  }
  if (out.empty() || out == "-") {
    std::cout << to_config_text(cfg);
  } else {
    save_config(cfg, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic computation offloading simulator and learners"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run = app.add_subcommand("run", "Train or evaluate algorithms, one run per seed");
  add_common(run, run_opts);

  CommonOptions sweep_opts;
  std::string axis = "task-arrival";
  std::vector<double> grid;
  bool keep_series = false;
  auto* sw = app.add_subcommand("sweep", "Grid over the task or energy arrival parameter");
  add_common(sw, sweep_opts);
  sw->add_option("--axis", axis, "task-arrival (lambda-t) or energy-arrival (lambda-e)");
  sw->add_option("--grid", grid, "Grid values")->delimiter(',')->required();
  sw->add_flag("--series", keep_series, "Also write every run's per-epoch metrics");

  std::string oracle_config, oracle_out;
  std::uint64_t oracle_seed = 1, oracle_epochs = 2'000'000;
  auto* oracle = app.add_subcommand("oracle", "Tabular oracle suite on a small instance");
  oracle->add_option("-c,--config", oracle_config, "Config file (default: the 18-state instance)");
  oracle->add_option("-s,--seed", oracle_seed, "Seed");
  oracle->add_option("-n,--epochs", oracle_epochs, "Tabular learning epochs");
  oracle->add_option("-o,--out", oracle_out, "Write the report as JSON");

  int gc_nets = 10;
  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference audit of network gradients");
  gc->add_option("--nets", gc_nets, "Random nets per shape");
  gc->add_option("-s,--seed", gc_seed, "First seed");
  gc->add_option("--tol", gc_tol, "Relative error tolerance");

  std::string preset = "reference", cfg_out;
  std::uint64_t matrix_seed = 2018;
  auto* cfgcmd = app.add_subcommand("config", "Write a config file");
  cfgcmd->add_option("--preset", preset, "reference or tiny");
  cfgcmd->add_option("--matrix-seed", matrix_seed, "Seed for the random channel matrices");
  cfgcmd->add_option("-o,--out", cfg_out, "Output path (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_opts);
    if (*sw) return cmd_sweep(sweep_opts, axis, grid, keep_series);
    if (*oracle) return cmd_oracle(oracle_config, oracle_seed, oracle_epochs, oracle_out);
    if (*gc) return cmd_gradcheck(gc_nets, gc_seed, gc_tol);
    if (*cfgcmd) return cmd_config(preset, matrix_seed, cfg_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
