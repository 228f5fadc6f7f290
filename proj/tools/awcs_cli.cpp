// awcs: solve one scenario, run Monte Carlo sweeps, cross-check AWCS against
// brute force, and print message traces.
//
// Exit codes: 0 feasible (or all checks passed), 2 no solution / infeasible
// schedule / failed checks, 1 error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "awcs/experiments.hpp"
#include "awcs/protocol.hpp"
#include "awcs/random_csp.hpp"

namespace fs = std::filesystem;
using namespace awcs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

std::string default_out_dir() {
  const char* env = std::getenv("AWCS_OUT_DIR");
  return env && *env ? env : "out";
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

struct ScenarioArgs {
  std::string path;
  std::uint64_t seed = 1;
  int n_cr = 7;
  int n_pu = 2;
  double threshold_mw = 1e-9;
  double step_mw = 2.0;
  std::string mode;
  int frame_slots = 0;
};

void add_scenario_flags(CLI::App* cmd, ScenarioArgs& a) {
  cmd->add_option("--scenario", a.path, "scenario file (YAML); generated when absent");
  cmd->add_option("--seed", a.seed, "generator and delay seed");
  cmd->add_option("--n-cr", a.n_cr, "CR count when generating")->check(CLI::PositiveNumber);
  cmd->add_option("--n-pu", a.n_pu, "PU count when generating")->check(CLI::NonNegativeNumber);
  cmd->add_option("--threshold", a.threshold_mw, "PU interference cap in mW when generating");
  cmd->add_option("--step", a.step_mw, "power step in mW when generating");
  cmd->add_option("--mode", a.mode, "cdma-eq | cdma-uneq | stdma")
      ->check(CLI::IsMember({"cdma-eq", "cdma-uneq", "stdma"}));
  cmd->add_option("--frame-slots", a.frame_slots, "STDMA frame length override");
}

Scenario make_scenario(const ScenarioArgs& a) {
  Scenario s;
  if (!a.path.empty()) {
    s = load_scenario(a.path);
  } else {
    ScenarioParams p;
    p.n_cr = a.n_cr;
    p.n_pu = a.n_pu;
    p.pu_cap_min_mw = p.pu_cap_max_mw = a.threshold_mw;
    p.power_step_mw = a.step_mw;
    s = generate_scenario(a.seed, p);
  }
  if (!a.mode.empty()) s.mode = parse_mode(a.mode);
  if (a.frame_slots > 0) s.frame_slots = a.frame_slots;
  validate(s);
  return s;
}

int exit_for(const ProtocolRun& run) {
  return run.feasible() ? kExitOk : kExitInfeasible;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AWCS QoS provisioning for cognitive radios"};
  app.require_subcommand(1);
  std::string out_dir = default_out_dir();
  app.add_option("--out", out_dir, "output directory (default $AWCS_OUT_DIR or ./out)");

  // solve
  auto* solve = app.add_subcommand("solve", "run the protocol on one scenario");
  ScenarioArgs solve_args;
  int solve_delay = 0;
  int frame_index = 0;
  bool quiet = false;
  bool save_scenario = false;
  add_scenario_flags(solve, solve_args);
  solve->add_option("--delay-max", solve_delay, "uniform message delay bound")
      ->check(CLI::NonNegativeNumber);
  solve->add_option("--frame-index", frame_index, "STDMA frame to schedule")
      ->check(CLI::NonNegativeNumber);
  solve->add_flag("--quiet", quiet, "do not echo the result record");
  solve->add_flag("--save-scenario", save_scenario, "also write the scenario used");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep to CSV and SVG");
  std::string config_path;
  std::optional<int> sweep_runs;
  std::optional<std::uint64_t> sweep_seed;
  std::vector<int> sweep_delays;
  std::string sweep_mode;
  unsigned threads = 0;
  sweep->add_option("--config", config_path, "sweep config (YAML)");
  sweep->add_option("--runs", sweep_runs, "runs per grid point")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_seed, "base seed");
  sweep->add_option("--delay-max", sweep_delays, "delay bounds to sweep")->expected(1, -1);
  sweep->add_option("--mode", sweep_mode, "cdma-eq | cdma-uneq | stdma")
      ->check(CLI::IsMember({"cdma-eq", "cdma-uneq", "stdma"}));
  sweep->add_option("--threads", threads, "worker threads (0: all cores)");

  // validate
  auto* val = app.add_subcommand("validate", "compare AWCS with brute-force enumeration");
  int val_runs = 200;
  std::uint64_t val_seed = 1;
  bool val_multi = false;
  bool inject_fault = false;
  val->add_option("--runs", val_runs, "number of instances")->check(CLI::NonNegativeNumber);
  val->add_option("--seed", val_seed, "base seed");
  val->add_flag("--multi", val_multi, "two local variables per agent");
  val->add_flag("--inject-fault", inject_fault)->group("");

  // trace
  auto* trace = app.add_subcommand("trace", "cycle-by-cycle message log");
  std::string builtin;
  ScenarioArgs trace_args;
  int trace_delay = 0;
  trace->add_option("--builtin", builtin, "pair | triangle")
      ->check(CLI::IsMember({"pair", "triangle"}));
  add_scenario_flags(trace, trace_args);
  trace->add_option("--delay-max", trace_delay, "uniform message delay bound")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*solve) {
      const Scenario s = make_scenario(solve_args);
      ProtocolOptions o;
      o.seed = solve_args.seed;
      o.frame_index = frame_index;
      if (solve_delay > 0) o.delay = DelayPolicy::uniform(solve_delay);
      const ProtocolRun run = run_protocol(s, o);
      std::ostringstream record;
      write_result_record(record, s, run, o);
      const fs::path dir = ensure_dir(out_dir);
      const fs::path file = dir / fmt::format("result_{}_{}.yaml", to_string(s.mode), s.seed);
      std::ofstream(file, std::ios::binary) << record.str();
      if (save_scenario) {
        std::ofstream sc(dir / fmt::format("scenario_{}.yaml", s.seed), std::ios::binary);
        write_scenario(sc, s);
      }
      if (!quiet) std::cout << record.str();
      std::cerr << fmt::format("{} (seed {}), record in {}\n", to_string(run.outcome), s.seed,
                               file.string());
      return exit_for(run);
    }

    if (*sweep) {
      SweepConfig c = config_path.empty() ? SweepConfig{} : load_sweep_config(config_path);
      if (sweep_runs) c.runs_per_point = *sweep_runs;
      if (sweep_seed) c.base_seed = *sweep_seed;
      if (!sweep_delays.empty()) c.delay_max = sweep_delays;
      if (!sweep_mode.empty()) c.mode = parse_mode(sweep_mode);
      if (threads > 0) c.threads = threads;
      c.validate();
      const auto result = run_monte_carlo(c);
      const fs::path dir = ensure_dir(out_dir);
      emit_csv(result, (dir / "sweep.csv").string());
      const auto plots = emit_plots(result, dir.string());
      std::cout << fmt::format("base_seed {}  mode {}  runs/point {}  points {}\n", c.base_seed,
                               to_string(c.mode), c.runs_per_point, result.points.size());
      std::ofstream trends(dir / "trends.txt", std::ios::binary);
      for (const auto& t : assert_trends(result)) {
        const auto line = fmt::format("{:<8} {:<40} rho={:+.3f}\n", to_string(t.status), t.name, t.rho);
        std::cout << line;
        trends << line;
      }
      for (const auto& a : result.anomalies) std::cout << "anomaly: " << a << '\n';
      std::cout << fmt::format("wrote {} rows to {}, {} plots\n", result.rows.size(),
                               (dir / "sweep.csv").string(), plots.size());
      return kExitOk;
    }

    if (*val) {
      if (val_runs == 0) {
        std::cerr << "warning: zero instances requested, nothing was checked\n";
        std::cout << "0/0 matched\n";
        return kExitOk;
      }
      int matched = 0;
      std::cout << fmt::format("{:>5} {:>20} {:>6} {:>6} {:>5} {:>12} {}\n", "case", "seed", "agents",
                               "values", "sat", "status", "result");
      for (int i = 0; i < val_runs; ++i) {
        const auto o = validate_case(validation_case(val_seed, i, val_multi), inject_fault);
        matched += o.matched;
        std::cout << fmt::format("{:>5} {:>20} {:>6} {:>6} {:>5} {:>12} {}\n", i, o.seed, o.agents,
                                 o.values, o.satisfiable ? "yes" : "no", to_string(o.status),
                                 o.matched ? "pass" : "FAIL");
      }
      std::cout << fmt::format("{}/{} matched\n", matched, val_runs);
      return matched == val_runs ? kExitOk : kExitInfeasible;
    }

    if (*trace) {
      if (!builtin.empty()) {
        CspRunOptions o;
        o.trace = &std::cout;
        o.seed = trace_args.seed;
        if (trace_delay > 0) o.delay = DelayPolicy::uniform(trace_delay);
        std::cout << "# ltc,src,dst,kind,payload\n";
        const auto r = solve_with_awcs(builtin_instance(builtin), o);
        return r.status == RunStatus::quiescent ? kExitOk : kExitInfeasible;
      }
      const Scenario s = make_scenario(trace_args);
      ProtocolOptions o;
      o.seed = trace_args.seed;
      o.trace = &std::cout;
      if (trace_delay > 0) o.delay = DelayPolicy::uniform(trace_delay);
      std::cout << fmt::format("# seed {} mode {}\n# ltc,src,dst,kind,payload\n", s.seed,
                               to_string(s.mode));
      const auto run = run_protocol(s, o);
      std::cout << "# outcome " << to_string(run.outcome) << '\n';
      return exit_for(run);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
