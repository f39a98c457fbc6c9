#pragma once

// JSON configuration, single solves and paired Monte Carlo batches.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "rcpadmm/errors.hpp"
#include "rcpadmm/io.hpp"
#include "rcpadmm/penalty.hpp"
#include "rcpadmm/problem.hpp"
#include "rcpadmm/simulation.hpp"
#include "rcpadmm/solver.hpp"

namespace rcpadmm {

using json = nlohmann::json;

/// Malformed or incomplete configuration; the message names the offending key.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct ProblemSettings {
  Index fir_length = 60;
  Index hankel_cols = 20;
  Index rank = 8;
};

struct SolveConfig {
  BenchmarkScenario scenario;
  std::optional<std::string> data_path;  // replaces the simulated scenario when set
  ProblemSettings problem;
  KernelConfig kernel;
  DriverConfig solver;
};

struct ExperimentCell {
  std::string label;
  DriverConfig solver;
};

struct ExperimentSpec {
  BenchmarkScenario scenario;
  ProblemSettings problem;
  KernelConfig kernel;
  std::vector<ExperimentCell> cells;
  std::size_t runs = 100;
  std::uint64_t base_seed = 1;

  void validate() const {
    detail::require(runs >= 1, "experiment: runs must be at least 1");
    detail::require(!cells.empty(), "experiment: at least one cell is required");
    std::set<std::string> seen;
    for (const auto& c : cells) {
      detail::require(!c.label.empty(), "experiment: empty cell label");
      detail::require(seen.insert(c.label).second, "experiment: duplicate cell label '" + c.label + "'");
      c.solver.validate();
    }
  }
};

namespace config_detail {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object())
    throw ConfigError("key '" + (path.empty() ? std::string("<root>") : path) +
                      "': expected an object");
}

inline void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  expect_object(j, path);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + join(path, it.key()) + "'");
}

inline double number(const json& j, const std::string& path, const std::string& key, double def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError("key '" + join(path, key) + "': expected a number");
  return v.get<double>();
}

inline std::int64_t integer(const json& j, const std::string& path, const std::string& key,
                            std::int64_t def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError("key '" + join(path, key) + "': expected an integer");
  return v.get<std::int64_t>();
}

inline std::size_t count(const json& j, const std::string& path, const std::string& key,
                         std::size_t def) {
  const std::int64_t v = integer(j, path, key, static_cast<std::int64_t>(def));
  if (v < 0) throw ConfigError("key '" + join(path, key) + "': must be non-negative");
  return static_cast<std::size_t>(v);
}

inline bool boolean(const json& j, const std::string& path, const std::string& key, bool def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError("key '" + join(path, key) + "': expected true or false");
  return v.get<bool>();
}

inline std::string string(const json& j, const std::string& path, const std::string& key,
                          const std::string& def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError("key '" + join(path, key) + "': expected a string");
  return v.get<std::string>();
}

template <class F>
void rethrow_as_config(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError("section '" + path + "': " + e.what());
  }
}

}  // namespace config_detail

inline SotdPlant parse_plant(const json& j, const std::string& path) {
  using namespace config_detail;
  check_keys(j, path, {"b1", "b0", "a2", "a1", "a0", "delay"});
  SotdPlant p;
  p.b1 = number(j, path, "b1", p.b1);
  p.b0 = number(j, path, "b0", p.b0);
  p.a2 = number(j, path, "a2", p.a2);
  p.a1 = number(j, path, "a1", p.a1);
  p.a0 = number(j, path, "a0", p.a0);
  p.delay = number(j, path, "delay", p.delay);
  return p;
}

inline BenchmarkScenario parse_scenario(const json& j, const std::string& path = "scenario") {
  using namespace config_detail;
  check_keys(j, path,
             {"plant", "duration", "dt", "noise_variance", "relay_amplitude", "relay_hysteresis",
              "fine_step", "seed"});
  BenchmarkScenario s;
  if (j.contains("plant")) s.plant = parse_plant(j.at("plant"), join(path, "plant"));
  s.duration = number(j, path, "duration", s.duration);
  s.dt = number(j, path, "dt", s.dt);
  s.noise_variance = number(j, path, "noise_variance", s.noise_variance);
  s.relay_amplitude = number(j, path, "relay_amplitude", s.relay_amplitude);
  s.relay_hysteresis = number(j, path, "relay_hysteresis", s.relay_hysteresis);
  s.fine_step = number(j, path, "fine_step", s.fine_step);
  const std::int64_t seed = integer(j, path, "seed", static_cast<std::int64_t>(s.seed));
  if (seed < 0) throw ConfigError("key '" + join(path, "seed") + "': must be non-negative");
  s.seed = static_cast<std::uint64_t>(seed);
  rethrow_as_config(path, [&] { s.validate(); });
  return s;
}

inline ProblemSettings parse_problem(const json& j, const std::string& path = "problem") {
  using namespace config_detail;
  check_keys(j, path, {"rank", "fir_length", "hankel_cols"});
  if (!j.contains("rank")) throw ConfigError("missing key '" + join(path, "rank") + "'");
  ProblemSettings p;
  p.rank = integer(j, path, "rank", p.rank);
  p.fir_length = integer(j, path, "fir_length", p.fir_length);
  p.hankel_cols = integer(j, path, "hankel_cols", p.hankel_cols);
  rethrow_as_config(path, [&] {
    HankelDims{p.fir_length, p.hankel_cols}.validate();
    detail::require(p.rank >= 1 && p.rank < p.hankel_cols, "rank must satisfy 1 <= rank < hankel_cols");
  });
  return p;
}

inline KernelConfig parse_kernel(const json& j, const std::string& path = "kernel") {
  using namespace config_detail;
  check_keys(j, path, {"family", "gamma", "decay", "scale"});
  KernelConfig k;
  const std::string fam = string(j, path, "family", "tc");
  if (fam != "tc") throw ConfigError("key '" + join(path, "family") + "': only 'tc' is supported");
  k.gamma = number(j, path, "gamma", k.gamma);
  k.decay = number(j, path, "decay", k.decay);
  k.scale = number(j, path, "scale", k.scale);
  rethrow_as_config(path, [&] { k.validate(); });
  return k;
}

inline DriverConfig parse_solver(const json& j, const std::string& path = "solver") {
  using namespace config_detail;
  check_keys(j, path,
             {"strategy", "beta0", "rho", "beta_max", "kappa", "rho_inc", "rho_dec", "acceleration",
              "m_max", "k_max", "eps_tol"});
  DriverConfig c;
  const std::string name = string(j, path, "strategy", "self-adaptive");
  if (name == "constant") {
    c.strategy = penalty::Constant{};
  } else if (name == "multiplicative") {
    penalty::Multiplicative s;
    s.rho = number(j, path, "rho", s.rho);
    s.beta_max = number(j, path, "beta_max", s.beta_max);
    c.strategy = s;
  } else if (name == "residual") {
    penalty::ResidualBased s;
    s.kappa = number(j, path, "kappa", s.kappa);
    s.rho_inc = number(j, path, "rho_inc", s.rho_inc);
    s.rho_dec = number(j, path, "rho_dec", s.rho_dec);
    c.strategy = s;
  } else if (name == "self-adaptive") {
    penalty::SelfAdaptive s;
    s.rho_inc = number(j, path, "rho_inc", s.rho_inc);
    s.rho_dec = number(j, path, "rho_dec", s.rho_dec);
    c.strategy = s;
  } else {
    throw ConfigError("key '" + join(path, "strategy") + "': unknown strategy '" + name +
                      "' (expected constant, multiplicative, residual or self-adaptive)");
  }
  c.beta0 = number(j, path, "beta0", c.beta0);
  c.acceleration = boolean(j, path, "acceleration", c.acceleration);
  c.m_max = count(j, path, "m_max", c.m_max);
  c.k_max = count(j, path, "k_max", c.k_max);
  c.eps_tol = number(j, path, "eps_tol", c.eps_tol);
  rethrow_as_config(path, [&] { c.validate(); });
  return c;
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_json_text(text, path);
}

/// `base_dir` resolves a relative `data` path.
inline SolveConfig parse_solve_config(const json& j, const std::filesystem::path& base_dir = {}) {
  using namespace config_detail;
  check_keys(j, "", {"scenario", "data", "problem", "kernel", "solver"});
  if (!j.contains("problem")) throw ConfigError("missing key 'problem.rank'");
  SolveConfig c;
  if (j.contains("scenario")) c.scenario = parse_scenario(j.at("scenario"));
  if (j.contains("data")) {
    std::filesystem::path p(string(j, "", "data", ""));
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.data_path = p.string();
  }
  c.problem = parse_problem(j.at("problem"));
  if (j.contains("kernel")) c.kernel = parse_kernel(j.at("kernel"));
  if (j.contains("solver")) c.solver = parse_solver(j.at("solver"));
  return c;
}

inline SolveConfig load_solve_config(const std::string& path) {
  return parse_solve_config(load_json_file(path), std::filesystem::path(path).parent_path());
}

/// Cell solver sections are merged over the top-level `solver` defaults.
inline ExperimentSpec parse_experiment_spec(const json& j) {
  using namespace config_detail;
  check_keys(j, "", {"scenario", "problem", "kernel", "solver", "cells", "runs", "base_seed"});
  if (!j.contains("problem")) throw ConfigError("missing key 'problem.rank'");
  ExperimentSpec s;
  if (j.contains("scenario")) s.scenario = parse_scenario(j.at("scenario"));
  s.problem = parse_problem(j.at("problem"));
  if (j.contains("kernel")) s.kernel = parse_kernel(j.at("kernel"));
  s.runs = count(j, "", "runs", s.runs);
  if (s.runs < 1) throw ConfigError("key 'runs': must be at least 1");
  const std::int64_t seed = integer(j, "", "base_seed", static_cast<std::int64_t>(s.base_seed));
  if (seed < 0) throw ConfigError("key 'base_seed': must be non-negative");
  s.base_seed = static_cast<std::uint64_t>(seed);

  json defaults = json::object();
  if (j.contains("solver")) {
    expect_object(j.at("solver"), "solver");
    defaults = j.at("solver");
  }
  if (!j.contains("cells")) throw ConfigError("missing key 'cells'");
  const json& cells = j.at("cells");
  if (!cells.is_array() || cells.empty()) throw ConfigError("key 'cells': expected a non-empty array");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string path = "cells[" + std::to_string(i) + "]";
    check_keys(cells[i], path, {"label", "solver"});
    if (!cells[i].contains("label")) throw ConfigError("missing key '" + path + ".label'");
    ExperimentCell cell;
    cell.label = string(cells[i], path, "label", "");
    if (cell.label.empty()) throw ConfigError("key '" + path + ".label': must be non-empty");
    if (cell.label.find_first_of("/\\") != std::string::npos)
      throw ConfigError("key '" + path + ".label': must not contain path separators");
    if (!labels.insert(cell.label).second)
      throw ConfigError("key '" + path + ".label': duplicate label '" + cell.label + "'");
    json merged = defaults;
    if (cells[i].contains("solver")) {
      expect_object(cells[i].at("solver"), path + ".solver");
      merged.update(cells[i].at("solver"));
    }
    cell.solver = parse_solver(merged, path + ".solver");
    s.cells.push_back(std::move(cell));
  }
  return s;
}

inline ExperimentSpec load_experiment_spec(const std::string& path) {
  return parse_experiment_spec(load_json_file(path));
}

// ---------------------------------------------------------------------------

struct ProblemInstance {
  RcpProblem problem;
  Vector theta0;
  std::optional<Vector> theta_true;
};

inline ProblemInstance make_instance(const RegressionData& data, const ProblemSettings& ps,
                                     const KernelConfig& kernel) {
  RcpProblem problem = RcpProblem::from_data(data, ps.hankel_cols, ps.rank);
  Vector theta0 = kernel_initialize(problem, kernel);
  return {std::move(problem), std::move(theta0), std::nullopt};
}

inline ProblemInstance make_instance(const BenchmarkScenario& scn, const ProblemSettings& ps,
                                     const KernelConfig& kernel) {
  const RelayRecord rec = simulate_relay(scn);
  ProblemInstance inst = make_instance(to_regression_data(rec, ps.fir_length, scn.dt), ps, kernel);
  inst.theta_true = true_impulse_response(scn.plant, scn.dt, ps.fir_length);
  return inst;
}

inline double impulse_error(const Vector& theta, const Vector& theta_true) {
  const double scale = theta_true.norm();
  return scale > 0.0 ? (theta - theta_true).norm() / scale : (theta - theta_true).norm();
}

inline RegressionData load_regression_data(const std::string& path, Index fir_length) {
  const DataTable d = read_data_csv(path);
  detail::require(d.t.size() >= 2, "data file needs at least two samples");
  const double dt = d.t(1) - d.t(0);
  for (Index i = 1; i < d.t.size(); ++i)
    detail::require(std::abs(d.t(i) - d.t(i - 1) - dt) <= 1e-9 * std::max(1.0, std::abs(dt)),
                    "data file: sample times must be uniformly spaced");
  RegressionData data{d.u, d.y, fir_length, dt};
  data.validate();
  return data;
}

struct RunOutcome {
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  bool ok = false;  // false when the data or problem could not be built
  std::string error;
  SolveResult result;
  std::optional<double> impulse_error;
};

inline RunOutcome solve_instance(const ProblemInstance& inst, const DriverConfig& cfg) {
  RunOutcome out;
  out.result = solve(inst.problem, inst.theta0, cfg);
  out.ok = true;
  if (inst.theta_true) out.impulse_error = impulse_error(out.result.theta, *inst.theta_true);
  return out;
}

struct CellOutcome {
  std::string label;
  DriverConfig solver;
  std::vector<RunOutcome> runs;  // ordered by run_id
};

inline unsigned default_jobs() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Paired Monte Carlo: run i simulates with seed base_seed + i and solves every
/// cell on that same data. Results do not depend on `jobs`.
inline std::vector<CellOutcome> monte_carlo(const ExperimentSpec& spec, unsigned jobs = 0) {
  spec.validate();
  std::vector<CellOutcome> cells(spec.cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    cells[c].label = spec.cells[c].label;
    cells[c].solver = spec.cells[c].solver;
    cells[c].runs.resize(spec.runs);
  }

  auto run_one = [&](std::size_t i) {
    BenchmarkScenario scn = spec.scenario;
    scn.seed = spec.base_seed + i;
    std::optional<ProblemInstance> inst;
    std::string error;
    try {
      inst.emplace(make_instance(scn, spec.problem, spec.kernel));
    } catch (const std::exception& e) {
      error = e.what();
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      RunOutcome out;
      if (inst) {
        try {
          out = solve_instance(*inst, spec.cells[c].solver);
        } catch (const std::exception& e) {
          out = RunOutcome{};
          out.error = e.what();
        }
      } else {
        out.error = error;
      }
      out.run_id = i;
      out.seed = scn.seed;
      cells[c].runs[i] = std::move(out);
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(jobs == 0 ? default_jobs() : jobs, static_cast<unsigned>(spec.runs)));
  if (workers == 1) {
    for (std::size_t i = 0; i < spec.runs; ++i) run_one(i);
    return cells;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < spec.runs; i = next++) run_one(i);
    });
  for (auto& t : pool) t.join();
  return cells;
}

/// Runs that enter the iteration-indexed averages: built, solved without a
/// numeric failure, with at least one accepted iteration.
inline bool averaged(const RunOutcome& run) {
  if (!run.ok || run.result.reason == Termination::NumericFailure) return false;
  return std::any_of(run.result.trace.begin(), run.result.trace.end(),
                     [](const IterationRecord& r) { return r.accepted; });
}

inline std::vector<IterationRecord> accepted_records(const SolveResult& res) {
  std::vector<IterationRecord> out;
  for (const auto& r : res.trace)
    if (r.accepted) out.push_back(r);
  return out;
}

/// Mean over runs of the accepted records at each iteration index. A run that
/// stopped early contributes its last accepted record to later indices.
inline std::vector<AverageRow> average_trajectory(const CellOutcome& cell) {
  std::vector<std::vector<IterationRecord>> series;
  std::size_t horizon = 0;
  for (const auto& run : cell.runs) {
    if (!averaged(run)) continue;
    series.push_back(accepted_records(run.result));
    horizon = std::max(horizon, series.back().size());
  }
  std::vector<AverageRow> rows;
  if (series.empty()) return rows;
  const double n = static_cast<double>(series.size());
  for (std::size_t k = 0; k < horizon; ++k) {
    AverageRow row;
    row.iter = k;
    for (const auto& s : series) {
      const IterationRecord& r = s[std::min(k, s.size() - 1)];
      row.primal_sq += r.primal_sq;
      row.dual_sq += r.dual_sq;
      row.combined += r.combined;
      row.beta += r.beta;
    }
    row.primal_sq /= n;
    row.dual_sq /= n;
    row.combined /= n;
    row.beta /= n;
    rows.push_back(row);
  }
  return rows;
}

inline json driver_to_json(const DriverConfig& c) {
  json j;
  j["strategy"] = strategy_name(c.strategy);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, penalty::Multiplicative>) {
          j["rho"] = s.rho;
          j["beta_max"] = s.beta_max;
        } else if constexpr (std::is_same_v<T, penalty::ResidualBased>) {
          j["kappa"] = s.kappa;
          j["rho_inc"] = s.rho_inc;
          j["rho_dec"] = s.rho_dec;
        } else if constexpr (std::is_same_v<T, penalty::SelfAdaptive>) {
          j["rho_inc"] = s.rho_inc;
          j["rho_dec"] = s.rho_dec;
        }
      },
      c.strategy);
  j["beta0"] = c.beta0;
  j["acceleration"] = c.acceleration;
  j["m_max"] = c.m_max;
  j["k_max"] = c.k_max;
  j["eps_tol"] = c.eps_tol;
  return j;
}

inline json run_summary(const RunOutcome& run) {
  json j;
  j["run_id"] = run.run_id;
  j["seed"] = run.seed;
  if (!run.ok) {
    j["termination"] = "error";
    j["message"] = run.error;
    return j;
  }
  const SolveResult& r = run.result;
  j["termination"] = to_string(r.reason);
  if (!r.message.empty()) j["message"] = r.message;
  j["iterations"] = r.iterations;
  j["evaluations"] = r.trace.size();
  j["final_beta"] = r.final_beta;
  const auto acc = accepted_records(r);
  if (!acc.empty()) {
    j["final_primal_sq"] = acc.back().primal_sq;
    j["final_dual_sq"] = acc.back().dual_sq;
    j["final_combined"] = acc.back().combined;
  }
  if (run.impulse_error) j["impulse_error"] = *run.impulse_error;
  return j;
}

inline json cell_summary(const CellOutcome& cell) {
  json j;
  j["label"] = cell.label;
  j["solver"] = driver_to_json(cell.solver);
  std::map<std::string, std::size_t> reasons;
  double err_sum = 0.0;
  std::size_t err_n = 0;
  json per_run = json::array();
  for (const auto& run : cell.runs) {
    reasons[run.ok ? to_string(run.result.reason) : "error"]++;
    if (averaged(run) && run.impulse_error) {
      err_sum += *run.impulse_error;
      ++err_n;
    }
    per_run.push_back(run_summary(run));
  }
  j["runs"] = cell.runs.size();
  j["termination_counts"] = reasons;
  const auto avg = average_trajectory(cell);
  j["averaged_runs"] = std::count_if(cell.runs.begin(), cell.runs.end(), averaged);
  if (!avg.empty()) {
    j["final_mean_primal_sq"] = avg.back().primal_sq;
    j["final_mean_dual_sq"] = avg.back().dual_sq;
    j["final_mean_combined"] = avg.back().combined;
    j["final_mean_beta"] = avg.back().beta;
  }
  if (err_n > 0) j["mean_impulse_error"] = err_sum / static_cast<double>(err_n);
  j["per_run"] = std::move(per_run);
  return j;
}

inline void write_cell_trace_csv(std::ostream& os, const CellOutcome& cell) {
  os << kTraceHeader << '\n';
  for (const auto& run : cell.runs)
    if (run.ok) write_trace_rows(os, run.run_id, run.result.trace);
}

/// Writes <label>_trace.csv and <label>_average.csv per cell plus summary.json.
inline void write_bench_outputs(const std::filesystem::path& dir, const ExperimentSpec& spec,
                                const std::vector<CellOutcome>& cells, double wall_time_s) {
  std::filesystem::create_directories(dir);
  json summary;
  summary["runs"] = spec.runs;
  summary["base_seed"] = spec.base_seed;
  summary["wall_time_s"] = wall_time_s;
  summary["cells"] = json::array();
  for (const auto& cell : cells) {
    {
      std::ofstream f(dir / (cell.label + "_trace.csv"), std::ios::binary);
      write_cell_trace_csv(f, cell);
      if (!f) throw Error("failed writing trace for cell '" + cell.label + "'");
    }
    {
      std::ofstream f(dir / (cell.label + "_average.csv"), std::ios::binary);
      write_average_csv(f, average_trajectory(cell));
      if (!f) throw Error("failed writing averages for cell '" + cell.label + "'");
    }
    summary["cells"].push_back(cell_summary(cell));
  }
  std::ofstream f(dir / "summary.json", std::ios::binary);
  f << summary.dump(2) << '\n';
  if (!f) throw Error("failed writing summary.json");
}

}  // namespace rcpadmm
