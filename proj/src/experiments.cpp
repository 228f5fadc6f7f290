#include "awcs/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "awcs/rng.hpp"

namespace awcs {

void SweepConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("sweep config: " + field + " " + why);
  };
  if (runs_per_point < 1) bad("runs_per_point", "must be at least 1");
  if (n_cr.empty()) bad("n_cr", "must not be empty");
  if (thresholds_mw.empty()) bad("thresholds_mw", "must not be empty");
  if (steps_mw.empty()) bad("steps_mw", "must not be empty");
  if (delay_max.empty()) bad("delay_max", "must not be empty");
  for (int n : n_cr) {
    if (n < 1) bad("n_cr", "entries must be at least 1");
  }
  for (double t : thresholds_mw) {
    if (!(t > 0)) bad("thresholds_mw", "entries must be positive");
  }
  for (double d : steps_mw) {
    if (!(d > 0) || d > scenario.power_budget_mw) bad("steps_mw", "entries must be in (0, budget]");
  }
  for (int d : delay_max) {
    if (d < 0) bad("delay_max", "entries must be non-negative");
  }
  if (cycle_cap < 1) bad("cycle_cap", "must be at least 1");
}

namespace {

template <typename T>
std::vector<T> read_list(const YAML::Node& node, const std::string& key) {
  if (node.IsSequence()) return node.as<std::vector<T>>();
  if (node.IsScalar()) return {node.as<T>()};
  throw std::invalid_argument("sweep config: " + key + " must be a value or a list");
}

void read_scenario_overrides(const YAML::Node& node, ScenarioParams& p) {
  const std::map<std::string, double*> reals{
      {"area_side_m", &p.area_side_m},
      {"pair_distance_min_m", &p.pair_distance_min_m},
      {"pair_distance_max_m", &p.pair_distance_max_m},
      {"pu_guard_m", &p.pu_guard_m},
      {"power_budget_mw", &p.power_budget_mw},
      {"noise_floor_mw", &p.noise_floor_mw},
      {"spreading_gain", &p.spreading_gain},
      {"pu_tx_power_mw", &p.pu_tx_power_mw},
      {"sinr_threshold_min", &p.sinr_threshold_min},
      {"sinr_threshold_max", &p.sinr_threshold_max},
      {"rate_min_bps", &p.rate_min_bps},
      {"rate_max_bps", &p.rate_max_bps},
      {"rate_step_bps", &p.rate_step_bps},
  };
  const std::map<std::string, int*> ints{
      {"n_pu", &p.n_pu},
      {"demand_min", &p.demand_min},
      {"demand_max", &p.demand_max},
      {"frame_slots", &p.frame_slots},
  };
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    try {
      if (auto it = reals.find(key); it != reals.end()) {
        *it->second = kv.second.as<double>();
      } else if (auto jt = ints.find(key); jt != ints.end()) {
        *jt->second = kv.second.as<int>();
      } else {
        throw std::invalid_argument("sweep config: unknown field scenario." + key);
      }
    } catch (const YAML::Exception&) {
      throw std::invalid_argument("sweep config: scenario." + key + " has the wrong type");
    }
  }
}

}  // namespace

SweepConfig load_sweep_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw std::runtime_error("cannot read sweep config " + path);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument("sweep config " + path + ": " + e.what());
  }
  SweepConfig c;
  if (!root || root.IsNull()) return c;
  if (!root.IsMap()) throw std::invalid_argument("sweep config " + path + ": expected a mapping");
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    const auto& v = kv.second;
    try {
      if (key == "runs_per_point") c.runs_per_point = v.as<int>();
      else if (key == "base_seed") c.base_seed = v.as<std::uint64_t>();
      else if (key == "n_cr") c.n_cr = read_list<int>(v, key);
      else if (key == "thresholds_mw") c.thresholds_mw = read_list<double>(v, key);
      else if (key == "steps_mw") c.steps_mw = read_list<double>(v, key);
      else if (key == "delay_max") c.delay_max = read_list<int>(v, key);
      else if (key == "mode") c.mode = parse_mode(v.as<std::string>());
      else if (key == "cycle_cap") c.cycle_cap = v.as<std::uint64_t>();
      else if (key == "threads") c.threads = v.as<unsigned>();
      else if (key == "scenario") read_scenario_overrides(v, c.scenario);
      else throw std::invalid_argument("sweep config: unknown field " + key);
    } catch (const YAML::Exception&) {
      throw std::invalid_argument("sweep config: " + key + " has the wrong type");
    }
  }
  c.validate();
  return c;
}

std::vector<GridPoint> grid(const SweepConfig& config) {
  std::set<GridPoint> points;
  for (int n : config.n_cr) {
    for (double t : config.thresholds_mw) {
      for (double d : config.steps_mw) {
        for (int delay : config.delay_max) points.insert({n, t, d, delay});
      }
    }
  }
  return {points.begin(), points.end()};
}

std::uint64_t run_seed(std::uint64_t base_seed, int run) {
  return derive_seed(base_seed, {static_cast<std::uint64_t>(run)});
}

RunRow run_point(const SweepConfig& config, const GridPoint& point, std::uint64_t seed) {
  ScenarioParams p = config.scenario;
  p.n_cr = point.n_cr;
  p.pu_cap_min_mw = p.pu_cap_max_mw = point.threshold_mw;
  p.power_step_mw = point.step_mw;
  p.mode = config.mode;
  const Scenario s = generate_scenario(seed, p);

  ProtocolOptions o;
  o.seed = seed;
  o.cycle_cap = config.cycle_cap;
  if (point.delay_max > 0) o.delay = DelayPolicy::uniform(point.delay_max);
  const ProtocolRun run = run_protocol(s, o);

  RunRow r;
  r.seed = seed;
  r.n_cr = point.n_cr;
  r.n_pu = p.n_pu;
  r.threshold_mw = point.threshold_mw;
  r.step_mw = point.step_mw;
  r.delay_max = point.delay_max;
  r.mode = config.mode;
  const auto& m = run.metrics;
  r.cycles = m.cycles;
  r.messages_ok = m.messages(MessageKind::ok);
  r.messages_nogood = m.messages(MessageKind::nogood) + m.messages(MessageKind::no_solution);
  r.messages_pu = m.messages(MessageKind::pu_violation) + m.messages(MessageKind::conflict);
  r.nccc = m.nccc;
  r.avg_power_mw = run.avg_power_mw();
  r.sum_log_rate = run.sum_log_rate();
  r.feasible = run.feasible();
  r.outcome = run.outcome;
  r.pu_safe = pu_safe_all(s, run.powers_uw);
  r.qos = qos_met(s, run);
  for (std::size_t i = 0; i < s.crs.size(); ++i) {
    const auto& cr = s.crs[i];
    if (run.phase1.reports_uw[i].size() > power_domain(cr.power_budget_mw, cr.power_step_mw).size()) {
      r.phase1_bounded = false;
    }
  }
  return r;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double sq = 0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / n);
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  s.median = values.size() % 2 ? values[h] : (values[h - 1] + values[h]) / 2;
  return s;
}

std::vector<PointAggregate> aggregate(const std::vector<RunRow>& rows) {
  std::map<GridPoint, std::vector<const RunRow*>> by_point;
  for (const auto& r : rows) by_point[r.point()].push_back(&r);
  std::vector<PointAggregate> out;
  for (const auto& [point, members] : by_point) {
    std::vector<double> power, cycles, mpc, nccc;
    for (const RunRow* r : members) {
      power.push_back(r->avg_power_mw);
      cycles.push_back(static_cast<double>(r->cycles));
      mpc.push_back(static_cast<double>(r->messages()) / r->n_cr);
      nccc.push_back(static_cast<double>(r->nccc));
    }
    out.push_back({point, members.size(), summarize(power), summarize(cycles), summarize(mpc),
                   summarize(nccc)});
  }
  return out;
}

SweepResult run_monte_carlo(const SweepConfig& config) {
  config.validate();
  const auto points = grid(config);
  const std::size_t runs = static_cast<std::size_t>(config.runs_per_point);
  const std::size_t jobs = points.size() * runs;

  SweepResult result;
  result.rows.resize(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      try {
        result.rows[j] = run_point(config, points[j / runs],
                                   run_seed(config.base_seed, static_cast<int>(j % runs)));
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  unsigned n_threads = config.threads ? config.threads : std::thread::hardware_concurrency();
  n_threads = std::clamp<unsigned>(n_threads, 1, static_cast<unsigned>(std::max<std::size_t>(jobs, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (const auto& r : result.rows) {
    std::string why;
    if (r.outcome == Outcome::cycle_cap || r.outcome == Outcome::stalled) why += to_string(r.outcome);
    if (!r.pu_safe) why += why.empty() ? "pu_unsafe" : ",pu_unsafe";
    if (!r.qos) why += why.empty() ? "qos_violated" : ",qos_violated";
    if (!r.phase1_bounded) why += why.empty() ? "phase1_unbounded" : ",phase1_unbounded";
    if (!why.empty()) {
      result.anomalies.push_back(fmt::format("seed={} n_cr={} threshold={} step={} delay_max={}: {}",
                                             r.seed, r.n_cr, r.threshold_mw, r.step_mw,
                                             r.delay_max, why));
    }
  }
  result.points = aggregate(result.rows);
  return result;
}

// ---- CSV ----

const char* const kCsvHeader =
    "seed,n_cr,n_pu,threshold,step,delay_max,mode,cycles,messages_ok,messages_nogood,"
    "messages_pu,nccc,avg_power_mw,sum_log_rate,feasible";

void emit_csv(std::ostream& out, const std::vector<RunRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.seed, r.n_cr, r.n_pu,
                       r.threshold_mw, r.step_mw, r.delay_max, to_string(r.mode), r.cycles,
                       r.messages_ok, r.messages_nogood, r.messages_pu, r.nccc, r.avg_power_mw,
                       r.sum_log_rate, r.feasible ? 1 : 0);
  }
}

void emit_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  emit_csv(out, result.rows);
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<RunRow> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("CSV is empty");
  if (line != kCsvHeader) throw std::invalid_argument("CSV header does not match");
  std::vector<RunRow> rows;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 15) throw std::invalid_argument(fmt::format("CSV line {}: expected 15 fields", n));
    try {
      RunRow r;
      r.seed = std::stoull(f[0]);
      r.n_cr = std::stoi(f[1]);
      r.n_pu = std::stoi(f[2]);
      r.threshold_mw = std::stod(f[3]);
      r.step_mw = std::stod(f[4]);
      r.delay_max = std::stoi(f[5]);
      r.mode = parse_mode(f[6]);
      r.cycles = std::stoull(f[7]);
      r.messages_ok = std::stoull(f[8]);
      r.messages_nogood = std::stoull(f[9]);
      r.messages_pu = std::stoull(f[10]);
      r.nccc = std::stoull(f[11]);
      r.avg_power_mw = std::stod(f[12]);
      r.sum_log_rate = std::stod(f[13]);
      r.feasible = f[14] == "1";
      rows.push_back(r);
    } catch (const std::logic_error& e) {
      throw std::invalid_argument(fmt::format("CSV line {}: {}", n, e.what()));
    }
  }
  return rows;
}

// ---- trends ----

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2 + 1;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double metric_of(const RunRow& r, const std::string& metric) {
  if (metric == "avg_power_mw") return r.avg_power_mw;
  if (metric == "cycles") return static_cast<double>(r.cycles);
  if (metric == "messages") return static_cast<double>(r.messages());
  if (metric == "messages_per_cr") return static_cast<double>(r.messages()) / r.n_cr;
  if (metric == "nccc") return static_cast<double>(r.nccc);
  throw std::invalid_argument("unknown metric " + metric);
}

double axis_of(const RunRow& r, const std::string& axis) {
  if (axis == "n_cr") return r.n_cr;
  if (axis == "threshold") return r.threshold_mw;
  if (axis == "step") return r.step_mw;
  if (axis == "delay_max") return r.delay_max;
  throw std::invalid_argument("unknown axis " + axis);
}

double median_of(std::vector<double> v) { return summarize(std::move(v)).median; }

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman needs equal lengths");
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

const char* to_string(TrendStatus s) {
  switch (s) {
    case TrendStatus::pass: return "pass";
    case TrendStatus::fail: return "fail";
    case TrendStatus::skipped: return "skipped";
  }
  return "?";
}

TrendCheck check_trend(const std::vector<RunRow>& rows, const std::string& name,
                       const std::string& metric, const std::string& axis, int expected_sign,
                       int only_n_cr) {
  TrendCheck t{name, metric, axis, expected_sign, {}, {}, 0, TrendStatus::skipped};
  std::map<double, std::vector<double>> by_axis;
  for (const auto& r : rows) {
    if (only_n_cr != 0 && r.n_cr != only_n_cr) continue;
    by_axis[axis_of(r, axis)].push_back(metric_of(r, metric));
  }
  for (auto& [x, values] : by_axis) {
    t.axis_values.push_back(x);
    t.medians.push_back(median_of(values));
  }
  if (t.axis_values.size() < 3) return t;
  t.rho = spearman(t.axis_values, t.medians);
  const bool ok = !std::isnan(t.rho) && t.rho * expected_sign >= kTrendMinCorrelation;
  t.status = ok ? TrendStatus::pass : TrendStatus::fail;
  return t;
}

std::vector<TrendCheck> assert_trends(const SweepResult& result) {
  const auto& rows = result.rows;
  std::vector<TrendCheck> out;
  out.push_back(check_trend(rows, "power rises with threshold", "avg_power_mw", "threshold", +1));
  out.push_back(check_trend(rows, "power falls with CR count", "avg_power_mw", "n_cr", -1));
  out.push_back(check_trend(rows, "cycles rise with CR count", "cycles", "n_cr", +1));
  out.push_back(check_trend(rows, "cycles fall with threshold", "cycles", "threshold", -1));
  out.push_back(check_trend(rows, "messages per CR fall with threshold", "messages_per_cr",
                            "threshold", -1));
  out.push_back(check_trend(rows, "messages fall with step (7 CRs)", "messages", "step", -1, 7));
  out.push_back(check_trend(rows, "messages rise with delay", "messages", "delay_max", +1));
  out.push_back(check_trend(rows, "nccc rises with delay", "nccc", "delay_max", +1));
  return out;
}

// ---- plots ----

void write_svg_plot(std::ostream& out, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series,
                    bool log_x) {
  constexpr double W = 640, H = 420, L = 70, R = 150, T = 40, B = 50;
  static const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                        "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = 0, y1 = -x0;
  for (const auto& s : series) {
    for (double x : s.x) {
      x0 = std::min(x0, tx(x));
      x1 = std::max(x1, tx(x));
    }
    for (double y : s.y) {
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y1 = y0 + 1;
  auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      W, H);
  out << fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", W, H);
  out << fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                     (W - R + L) / 2, title);
  out << fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n"
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{3}\" stroke=\"black\"/>\n",
      L, H - B, W - R, T);
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4;
    out << fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", L - 6,
                       py(yv) + 4, yv);
  }
  std::set<double> ticks;
  for (const auto& s : series) ticks.insert(s.x.begin(), s.x.end());
  for (double x : ticks) {
    out << fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:.3g}</text>\n", px(x),
                       H - B + 16, x);
  }
  out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (W - R + L) / 2,
                     H - 12, x_label);
  out << fmt::format(
      "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
      (H - B + T) / 2, y_label);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      pts += fmt::format("{}{:.1f},{:.1f}", i ? " " : "", px(s.x[i]), py(s.y[i]));
    }
    out << fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
                       color, pts);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"{}\"/>\n", px(s.x[i]),
                         py(s.y[i]), color);
    }
    const double ly = T + 16.0 * static_cast<double>(k);
    out << fmt::format(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>"
        "<text x=\"{4}\" y=\"{5}\">{6}</text>\n",
        W - R + 10, ly, W - R + 30, color, W - R + 36, ly + 4, s.label);
  }
  out << "</svg>\n";
}

std::vector<std::string> emit_plots(const SweepResult& result, const std::string& dir) {
  static const std::vector<std::string> kAxes{"n_cr", "threshold", "step", "delay_max"};
  static const std::vector<std::string> kMetrics{"avg_power_mw", "cycles", "messages_per_cr",
                                                 "messages", "nccc"};
  std::vector<std::string> written;
  for (const auto& axis : kAxes) {
    std::set<double> xs;
    for (const auto& r : result.rows) xs.insert(axis_of(r, axis));
    if (xs.size() < 2) continue;
    // one line per CR count, or per threshold on the CR-count axis
    const std::string split = axis == "n_cr" ? "threshold" : "n_cr";
    for (const auto& metric : kMetrics) {
      std::map<double, std::map<double, std::vector<double>>> cells;
      for (const auto& r : result.rows) {
        cells[axis_of(r, split)][axis_of(r, axis)].push_back(metric_of(r, metric));
      }
      std::vector<PlotSeries> series;
      for (const auto& [key, by_x] : cells) {
        PlotSeries s{fmt::format("{} {:g}", split, key), {}, {}};
        for (const auto& [x, values] : by_x) {
          s.x.push_back(x);
          s.y.push_back(median_of(values));
        }
        series.push_back(std::move(s));
      }
      const std::string name = metric + "_vs_" + axis + ".svg";
      const auto path = (std::filesystem::path(dir) / name).string();
      std::ofstream out(path, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open " + path + " for writing");
      write_svg_plot(out, "median " + metric + " vs " + axis, axis, metric, series,
                     axis == "threshold");
      written.push_back(name);
    }
  }
  return written;
}

}  // namespace awcs
