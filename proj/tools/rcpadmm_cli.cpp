// rcpadmm: single solves, Monte Carlo benches and data generation.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "rcpadmm/rcpadmm.hpp"

namespace fs = std::filesystem;
using namespace rcpadmm;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int exit_code(Termination t) {
  switch (t) {
    case Termination::Converged: return 0;
    case Termination::MaxIterations: return 2;
    case Termination::NumericFailure: return 1;
  }
  return 1;
}

int run_solve(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir) {
  SolveConfig cfg = load_solve_config(config_path);
  if (seed) cfg.scenario.seed = *seed;

  std::optional<ProblemInstance> inst;
  if (cfg.data_path)
    inst.emplace(make_instance(load_regression_data(*cfg.data_path, cfg.problem.fir_length),
                               cfg.problem, cfg.kernel));
  else
    inst.emplace(make_instance(cfg.scenario, cfg.problem, cfg.kernel));

  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome out = solve_instance(*inst, cfg.solver);
  const double wall = seconds_since(t0);
  out.seed = cfg.scenario.seed;

  fs::create_directories(out_dir);
  {
    std::ofstream f(fs::path(out_dir) / "trace.csv", std::ios::binary);
    f << kTraceHeader << '\n';
    write_trace_rows(f, 0, out.result.trace);
    if (!f) throw Error("failed writing trace.csv");
  }
  json summary = run_summary(out);
  if (cfg.data_path) {
    summary.erase("seed");
    summary["data"] = *cfg.data_path;
  }
  summary["solver"] = driver_to_json(cfg.solver);
  summary["theta"] = std::vector<double>(out.result.theta.data(),
                                         out.result.theta.data() + out.result.theta.size());
  summary["wall_time_s"] = wall;
  {
    std::ofstream f(fs::path(out_dir) / "summary.json", std::ios::binary);
    f << summary.dump(2) << '\n';
    if (!f) throw Error("failed writing summary.json");
  }

  std::cout << to_string(out.result.reason) << " after " << out.result.iterations
            << " iterations, beta=" << format_double(out.result.final_beta);
  if (out.impulse_error) std::cout << ", impulse error " << format_double(*out.impulse_error);
  std::cout << '\n';
  if (!out.result.message.empty()) std::cerr << "warning: " << out.result.message << '\n';
  return exit_code(out.result.reason);
}

int run_bench(const std::string& spec_path, unsigned jobs, const std::string& out_dir) {
  const ExperimentSpec spec = load_experiment_spec(spec_path);
  const auto t0 = std::chrono::steady_clock::now();
  const auto cells = monte_carlo(spec, jobs);
  const double wall = seconds_since(t0);
  write_bench_outputs(out_dir, spec, cells, wall);

  std::printf("%-28s %8s %14s %14s %12s\n", "cell", "ok", "primal_sq", "dual_sq", "beta");
  for (const auto& cell : cells) {
    const auto avg = average_trajectory(cell);
    const auto ok = std::count_if(cell.runs.begin(), cell.runs.end(), averaged);
    if (avg.empty()) {
      std::printf("%-28s %4td/%-3zu %14s %14s %12s\n", cell.label.c_str(), ok, cell.runs.size(), "-",
                  "-", "-");
      continue;
    }
    std::printf("%-28s %4td/%-3zu %14.4e %14.4e %12.4e\n", cell.label.c_str(), ok,
                cell.runs.size(), avg.back().primal_sq, avg.back().dual_sq, avg.back().beta);
  }
  return 0;
}

int run_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out_path) {
  const json j = load_json_file(config_path);
  config_detail::check_keys(j, "", {"scenario", "data", "problem", "kernel", "solver"});
  BenchmarkScenario scn = j.contains("scenario") ? parse_scenario(j.at("scenario")) : BenchmarkScenario{};
  if (seed) scn.seed = *seed;
  const RelayRecord rec = simulate_relay(scn);
  const fs::path p(out_path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  write_data_csv(f, DataTable{rec.t, rec.u, rec.y});
  if (!f) throw Error("failed writing " + out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank-constrained FIR identification with nonconvex ADMM"};
  app.require_subcommand(1);

  std::string config, spec, out_dir = ".", data_out;
  std::optional<std::uint64_t> seed;
  unsigned jobs = default_jobs();

  auto* solve_cmd = app.add_subcommand("solve", "Run one solve and write trace.csv and summary.json");
  solve_cmd->add_option("--config", config, "Solve configuration (JSON)")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--seed", seed, "Override scenario.seed");
  solve_cmd->add_option("--out", out_dir, "Output directory");

  auto* bench_cmd = app.add_subcommand("bench", "Run a paired Monte Carlo experiment");
  bench_cmd->add_option("--spec", spec, "Experiment specification (JSON)")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", out_dir, "Output directory");

  auto* sim_cmd = app.add_subcommand("simulate", "Simulate the relay experiment and write t,u,y");
  sim_cmd->add_option("--config", config, "Configuration with a scenario section (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--seed", seed, "Override scenario.seed");
  sim_cmd->add_option("--out", data_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*solve_cmd) return run_solve(config, seed, out_dir);
    if (*bench_cmd) return run_bench(spec, jobs, out_dir);
    if (*sim_cmd) return run_simulate(config, seed, data_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
