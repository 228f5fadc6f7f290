#pragma once

// Monte Carlo sweeps over the protocol: grid of (CR count, PU interference
// threshold, quantization step, delay bound), per-run rows, per-point
// aggregates, rank-correlation trend checks, CSV and SVG output.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "awcs/protocol.hpp"
#include "awcs/radio.hpp"

namespace awcs {

struct SweepConfig {
  int runs_per_point = 100;
  std::uint64_t base_seed = 1;
  std::vector<int> n_cr{7, 12, 18, 24, 30};
  std::vector<double> thresholds_mw{3e-10, 1e-9, 3e-9, 1e-8, 3e-8};
  std::vector<double> steps_mw{2.0};
  std::vector<int> delay_max{0};
  Mode mode = Mode::cdma_equal;
  ScenarioParams scenario;  // everything not swept
  std::uint64_t cycle_cap = 200000;
  unsigned threads = 0;  // 0: one per hardware thread

  void validate() const;  // throws std::invalid_argument naming the field
};

SweepConfig load_sweep_config(const std::string& path);

struct GridPoint {
  int n_cr = 0;
  double threshold_mw = 0;
  double step_mw = 0;
  int delay_max = 0;

  friend auto operator<=>(const GridPoint&, const GridPoint&) = default;
};

struct RunRow {
  std::uint64_t seed = 0;
  int n_cr = 0;
  int n_pu = 0;
  double threshold_mw = 0;
  double step_mw = 0;
  int delay_max = 0;
  Mode mode = Mode::cdma_equal;
  std::uint64_t cycles = 0;
  std::uint64_t messages_ok = 0;
  std::uint64_t messages_nogood = 0;  // nogood and no-solution broadcasts
  std::uint64_t messages_pu = 0;      // PU violations and STDMA conflict notices
  std::uint64_t nccc = 0;
  double avg_power_mw = 0;
  double sum_log_rate = 0;
  bool feasible = false;

  // Not part of the CSV.
  Outcome outcome = Outcome::feasible;
  bool pu_safe = true;
  bool qos = true;
  bool phase1_bounded = true;

  GridPoint point() const { return {n_cr, threshold_mw, step_mw, delay_max}; }
  std::uint64_t messages() const { return messages_ok + messages_nogood + messages_pu; }
};

// One full protocol run at a grid point.
RunRow run_point(const SweepConfig& config, const GridPoint& point, std::uint64_t seed);

struct Summary {
  double mean = 0;
  double median = 0;
  double std = 0;  // population
};

Summary summarize(std::vector<double> values);

struct PointAggregate {
  GridPoint point;
  std::size_t runs = 0;
  Summary avg_power_mw;
  Summary cycles;
  Summary messages_per_cr;
  Summary nccc;
};

struct SweepResult {
  std::vector<RunRow> rows;  // grid order, then run order
  std::vector<PointAggregate> points;
  std::vector<std::string> anomalies;  // one line per anomalous run
};

// Points in ascending (n_cr, threshold, step, delay) order.
std::vector<GridPoint> grid(const SweepConfig& config);

// Seed of the r-th run at every grid point: the same geometry is reused
// across points so trends compare like with like.
std::uint64_t run_seed(std::uint64_t base_seed, int run);

SweepResult run_monte_carlo(const SweepConfig& config);

// Groups rows by grid point (ascending) and summarizes each.
std::vector<PointAggregate> aggregate(const std::vector<RunRow>& rows);

extern const char* const kCsvHeader;

void emit_csv(std::ostream& out, const std::vector<RunRow>& rows);
void emit_csv(const SweepResult& result, const std::string& path);
std::vector<RunRow> parse_csv(std::istream& in);

// Spearman rank correlation with average ranks; NaN when either side is
// constant or fewer than two points.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

enum class TrendStatus { pass, fail, skipped };

const char* to_string(TrendStatus s);

struct TrendCheck {
  std::string name;
  std::string metric;
  std::string axis;
  int expected_sign = 1;
  std::vector<double> axis_values;
  std::vector<double> medians;
  double rho = 0;
  TrendStatus status = TrendStatus::skipped;
};

inline constexpr double kTrendMinCorrelation = 0.8;

// Median of `metric` per distinct axis value, pooled over the other axes;
// passes when the rank correlation has the expected sign and magnitude of
// at least kTrendMinCorrelation. Fewer than three axis values: skipped.
// metric: avg_power_mw, cycles, messages, messages_per_cr, nccc.
// axis: n_cr, threshold, step, delay_max.
TrendCheck check_trend(const std::vector<RunRow>& rows, const std::string& name,
                       const std::string& metric, const std::string& axis, int expected_sign,
                       int only_n_cr = 0);

// Every direction the sweep axes allow.
std::vector<TrendCheck> assert_trends(const SweepResult& result);

// Static line chart: one polyline per series. Log-scaled x when asked.
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

void write_svg_plot(std::ostream& out, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series,
                    bool log_x);

// Writes <metric>_vs_<axis>.svg for every swept axis with at least two
// values; returns the file names written.
std::vector<std::string> emit_plots(const SweepResult& result, const std::string& dir);

}  // namespace awcs
