#include "awcs/radio.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "awcs/rng.hpp"

namespace awcs {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::cdma_equal: return "cdma-eq";
    case Mode::cdma_unequal: return "cdma-uneq";
    case Mode::stdma: return "stdma";
  }
  return "?";
}

Mode parse_mode(const std::string& text) {
  if (text == "cdma-eq") return Mode::cdma_equal;
  if (text == "cdma-uneq") return Mode::cdma_unequal;
  if (text == "stdma") return Mode::stdma;
  throw std::invalid_argument("mode must be cdma-eq, cdma-uneq or stdma, got '" + text + "'");
}

Domain power_domain(double power_budget_mw, double step_mw) {
  const Value top = to_microwatts(power_budget_mw);
  const Value step = to_microwatts(step_mw);
  if (step <= 0 || step > top) throw std::invalid_argument("power step must be in (0, P_max]");
  std::vector<Value> levels;
  for (Value v = top; v > 0; v -= step) levels.push_back(v);
  levels.push_back(0);
  return Domain(std::move(levels));
}

Domain rate_domain(const CrLink& link) {
  const auto lo = static_cast<Value>(std::llround(link.rate_min_bps));
  const auto hi = static_cast<Value>(std::llround(link.rate_max_bps));
  const auto step = static_cast<Value>(std::llround(link.rate_step_bps));
  if (lo <= 0 || hi < lo || step <= 0) throw std::invalid_argument("bad rate bounds");
  std::vector<Value> levels;
  for (Value r = hi; r > lo; r -= step) levels.push_back(r);
  levels.push_back(lo);
  return Domain(std::move(levels));
}

double rate_sinr_requirement(double rate_bps, const CrLink& link) {
  if (rate_bps < link.rate_min_bps || rate_bps > link.rate_max_bps) {
    throw std::invalid_argument("rate outside [R_min, R_max]");
  }
  return link.sinr_threshold * (rate_bps / link.rate_min_bps);
}

double objective_log_rate(std::span<const double> rates_bps) {
  double total = 0.0;
  for (double r : rates_bps) {
    if (!(r > 0.0)) throw std::invalid_argument("log-rate objective needs positive rates");
    total += std::log(r);
  }
  return total;
}

void fill_gains(Scenario& s) {
  const Eigen::Index n = s.n_cr();
  const Eigen::Index m = s.n_pu();
  const double b = s.spreading_gain;
  s.gains.cr_to_cr.resize(n, n);
  s.gains.cr_to_pu.resize(m, n);
  s.gains.pu_floor_mw = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rx = s.crs[static_cast<std::size_t>(i)].rx;
    for (Eigen::Index j = 0; j < n; ++j) {
      s.gains.cr_to_cr(i, j) = path_gain((s.crs[static_cast<std::size_t>(j)].tx - rx).norm(), b);
    }
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto& pu = s.pus[static_cast<std::size_t>(k)];
      s.gains.pu_floor_mw(i) += path_gain((pu.tx - rx).norm(), b) * pu.tx_power_mw;
    }
  }
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& rx = s.pus[static_cast<std::size_t>(k)].rx;
    for (Eigen::Index i = 0; i < n; ++i) {
      s.gains.cr_to_pu(k, i) = path_gain((s.crs[static_cast<std::size_t>(i)].tx - rx).norm(), b);
    }
  }
}

namespace {

Eigen::Vector2d uniform_point(std::mt19937_64& rng, double side) {
  return {uniform_real(rng, 0.0, side), uniform_real(rng, 0.0, side)};
}

// Receiver at a uniform distance and angle from tx, inside the square.
bool place_receiver(std::mt19937_64& rng, const Eigen::Vector2d& tx, double dmin, double dmax,
                    double side, Eigen::Vector2d& rx) {
  const double d = uniform_real(rng, dmin, dmax);
  const double theta = uniform_real(rng, 0.0, 2.0 * M_PI);
  rx = tx + d * Eigen::Vector2d(std::cos(theta), std::sin(theta));
  return rx.x() >= 0.0 && rx.y() >= 0.0 && rx.x() <= side && rx.y() <= side;
}

}  // namespace

Scenario generate_scenario(std::uint64_t seed, const ScenarioParams& p) {
  if (p.n_cr < 1) throw std::invalid_argument("n_cr must be at least 1");
  if (p.n_pu < 0) throw std::invalid_argument("n_pu must be non-negative");
  if (p.pair_distance_min_m < kMinDistance || p.pair_distance_max_m < p.pair_distance_min_m) {
    throw std::invalid_argument("pair distance range must satisfy 1 <= min <= max");
  }
  Scenario s;
  s.seed = seed;
  s.mode = p.mode;
  s.noise_floor_mw = p.noise_floor_mw;
  s.spreading_gain = p.spreading_gain;
  s.frame_slots = p.frame_slots;

  for (int k = 0; k < p.n_pu; ++k) {
    std::mt19937_64 rng(derive_seed(seed, {2, static_cast<std::uint64_t>(k)}));
    PuLink pu;
    pu.id = k;
    int tries = 0;
    do {
      if (++tries > p.max_placement_retries) throw std::runtime_error("could not place PU link");
      pu.tx = uniform_point(rng, p.area_side_m);
    } while (!place_receiver(rng, pu.tx, p.pair_distance_min_m, p.pair_distance_max_m,
                             p.area_side_m, pu.rx));
    pu.interference_cap_mw = uniform_real(rng, p.pu_cap_min_mw, p.pu_cap_max_mw);
    pu.tx_power_mw = p.pu_tx_power_mw;
    s.pus.push_back(pu);
  }

  auto clear_of_pus = [&](const Eigen::Vector2d& a) {
    for (const auto& pu : s.pus) {
      if ((pu.tx - a).norm() < p.pu_guard_m || (pu.rx - a).norm() < p.pu_guard_m) return false;
    }
    return true;
  };

  for (int i = 0; i < p.n_cr; ++i) {
    std::mt19937_64 rng(derive_seed(seed, {1, static_cast<std::uint64_t>(i)}));
    CrLink cr;
    cr.id = i;
    int tries = 0;
    for (;;) {
      if (++tries > p.max_placement_retries) throw std::runtime_error("could not place CR link");
      cr.tx = uniform_point(rng, p.area_side_m);
      if (!clear_of_pus(cr.tx)) continue;
      if (!place_receiver(rng, cr.tx, p.pair_distance_min_m, p.pair_distance_max_m,
                          p.area_side_m, cr.rx)) {
        continue;
      }
      if (!clear_of_pus(cr.rx)) continue;
      bool apart = true;
      for (const auto& other : s.crs) {
        for (const auto* a : {&cr.tx, &cr.rx}) {
          for (const auto* b : {&other.tx, &other.rx}) {
            if ((*a - *b).norm() < kMinDistance) apart = false;
          }
        }
      }
      if (apart) break;
    }
    cr.power_budget_mw = p.power_budget_mw;
    cr.power_step_mw = p.power_step_mw;
    cr.sinr_threshold = uniform_real(rng, p.sinr_threshold_min, p.sinr_threshold_max);
    cr.demand_slots = p.demand_min + static_cast<int>(uniform_below(
        rng, static_cast<std::uint64_t>(p.demand_max - p.demand_min + 1)));
    cr.rate_min_bps = p.rate_min_bps;
    cr.rate_max_bps = p.rate_max_bps;
    cr.rate_step_bps = p.rate_step_bps;
    s.crs.push_back(cr);
  }
  fill_gains(s);
  validate(s);
  return s;
}

void validate(const Scenario& s) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (s.crs.empty()) fail("crs", "at least one CR link is required");
  if (!(s.noise_floor_mw > 0)) fail("noise_floor_mw", "must be positive");
  if (!(s.spreading_gain > 0)) fail("spreading_gain", "must be positive");
  if (s.mode == Mode::stdma && s.frame_slots < 1) fail("frame_slots", "must be at least 1");
  std::set<AgentId> ids;
  for (std::size_t i = 0; i < s.crs.size(); ++i) {
    const auto& c = s.crs[i];
    const std::string at = fmt::format("crs[{}]", i);
    if (c.id < 0 || !ids.insert(c.id).second) fail(at + ".id", "must be unique and non-negative");
    if (!(c.power_step_mw > 0) || c.power_step_mw > c.power_budget_mw) {
      fail(at + ".power_step_mw", "must satisfy 0 < step <= power_budget_mw");
    }
    if (!(c.sinr_threshold > 0)) fail(at + ".sinr_threshold", "must be positive");
    if (s.mode == Mode::stdma && c.demand_slots < 1) fail(at + ".demand_slots", "must be >= 1");
    if (!(c.rate_min_bps > 0) || c.rate_max_bps < c.rate_min_bps || !(c.rate_step_bps > 0)) {
      fail(at + ".rate_min_bps", "need 0 < R_min <= R_max and a positive rate step");
    }
  }
  std::set<AgentId> pu_ids;
  for (std::size_t k = 0; k < s.pus.size(); ++k) {
    const std::string at = fmt::format("pus[{}]", k);
    if (s.pus[k].id < 0 || !pu_ids.insert(s.pus[k].id).second) fail(at + ".id", "must be unique");
    if (!(s.pus[k].interference_cap_mw > 0)) fail(at + ".interference_cap_mw", "must be positive");
  }
  const auto n = s.n_cr();
  const auto& g = s.gains;
  if (g.cr_to_cr.rows() != n || g.cr_to_cr.cols() != n) fail("gains.cr_to_cr", "must be n_cr x n_cr");
  if (g.cr_to_pu.rows() != s.n_pu() || g.cr_to_pu.cols() != n) {
    fail("gains.cr_to_pu", "must be n_pu x n_cr");
  }
  if (g.pu_floor_mw.size() != n) fail("gains.pu_floor_mw", "must have n_cr entries");
  if (!(g.cr_to_cr.array() > 0).all()) fail("gains.cr_to_cr", "entries must be positive");
  if (g.cr_to_pu.size() > 0 && !(g.cr_to_pu.array() > 0).all()) {
    fail("gains.cr_to_pu", "entries must be positive");
  }
  if ((g.pu_floor_mw.array() < 0).any()) fail("gains.pu_floor_mw", "entries must be non-negative");
}

namespace {

Eigen::Vector2d read_point(const YAML::Node& node, const std::string& field) {
  if (!node || !node.IsSequence() || node.size() != 2) {
    throw std::invalid_argument(field + ": expected [x, y]");
  }
  return {node[0].as<double>(), node[1].as<double>()};
}

template <typename T>
T read_or(const YAML::Node& node, const char* key, T fallback, const std::string& where) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw std::invalid_argument(where + "." + key + ": wrong type");
  }
}

Eigen::MatrixXd read_matrix(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) throw std::invalid_argument(field + ": expected a list of rows");
  const auto rows = static_cast<Eigen::Index>(node.size());
  Eigen::Index cols = rows == 0 ? 0 : static_cast<Eigen::Index>(node[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = node[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::invalid_argument(field + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].as<double>();
  }
  return m;
}

std::string num(double v) { return fmt::format("{}", v); }

std::string point(const Eigen::Vector2d& p) { return fmt::format("[{}, {}]", p.x(), p.y()); }

}  // namespace

Scenario parse_scenario(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  if (!root.IsMap()) throw std::invalid_argument("scenario: expected a mapping at top level");
  Scenario s;
  s.seed = read_or<std::uint64_t>(root, "seed", 0, "scenario");
  s.mode = parse_mode(read_or<std::string>(root, "mode", "cdma-eq", "scenario"));
  s.noise_floor_mw = read_or(root, "noise_floor_mw", s.noise_floor_mw, "scenario");
  s.spreading_gain = read_or(root, "spreading_gain", s.spreading_gain, "scenario");
  s.frame_slots = read_or(root, "frame_slots", s.frame_slots, "scenario");

  const YAML::Node crs = root["crs"];
  if (!crs || !crs.IsSequence()) throw std::invalid_argument("crs: expected a list of CR links");
  for (std::size_t i = 0; i < crs.size(); ++i) {
    const auto n = crs[i];
    const std::string at = fmt::format("crs[{}]", i);
    CrLink c;
    c.id = read_or<AgentId>(n, "id", static_cast<AgentId>(i), at);
    c.tx = read_point(n["tx"], at + ".tx");
    c.rx = read_point(n["rx"], at + ".rx");
    c.power_budget_mw = read_or(n, "power_budget_mw", c.power_budget_mw, at);
    c.power_step_mw = read_or(n, "power_step_mw", c.power_step_mw, at);
    c.sinr_threshold = read_or(n, "sinr_threshold", c.sinr_threshold, at);
    c.demand_slots = read_or(n, "demand_slots", c.demand_slots, at);
    c.rate_min_bps = read_or(n, "rate_min_bps", c.rate_min_bps, at);
    c.rate_max_bps = read_or(n, "rate_max_bps", c.rate_max_bps, at);
    c.rate_step_bps = read_or(n, "rate_step_bps", c.rate_step_bps, at);
    s.crs.push_back(c);
  }
  if (const YAML::Node pus = root["pus"]) {
    if (!pus.IsSequence()) throw std::invalid_argument("pus: expected a list of PU links");
    for (std::size_t k = 0; k < pus.size(); ++k) {
      const auto n = pus[k];
      const std::string at = fmt::format("pus[{}]", k);
      PuLink p;
      p.id = read_or<AgentId>(n, "id", static_cast<AgentId>(k), at);
      p.tx = read_point(n["tx"], at + ".tx");
      p.rx = read_point(n["rx"], at + ".rx");
      p.interference_cap_mw = read_or(n, "interference_cap_mw", p.interference_cap_mw, at);
      p.tx_power_mw = read_or(n, "tx_power_mw", p.tx_power_mw, at);
      s.pus.push_back(p);
    }
  }
  fill_gains(s);
  if (const YAML::Node g = root["gains"]) {
    if (g["cr_to_cr"]) s.gains.cr_to_cr = read_matrix(g["cr_to_cr"], "gains.cr_to_cr");
    if (g["cr_to_pu"]) s.gains.cr_to_pu = read_matrix(g["cr_to_pu"], "gains.cr_to_pu");
    if (g["pu_floor_mw"]) {
      const auto v = g["pu_floor_mw"];
      s.gains.pu_floor_mw.resize(static_cast<Eigen::Index>(v.size()));
      for (std::size_t i = 0; i < v.size(); ++i) {
        s.gains.pu_floor_mw(static_cast<Eigen::Index>(i)) = v[i].as<double>();
      }
    }
    if (s.n_pu() == 0 && s.gains.cr_to_pu.rows() == 0) s.gains.cr_to_pu.resize(0, s.n_cr());
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void write_scenario(std::ostream& out, const Scenario& s) {
  out << "# cognitive-radio scenario\n"
         "# units: positions m, powers mW, rates bit/s, gains and SINR thresholds are ratios\n";
  out << "seed: " << s.seed << '\n';
  out << "mode: " << to_string(s.mode) << '\n';
  out << "noise_floor_mw: " << num(s.noise_floor_mw) << '\n';
  out << "spreading_gain: " << num(s.spreading_gain) << '\n';
  out << "frame_slots: " << s.frame_slots << '\n';
  out << "crs:\n";
  for (const auto& c : s.crs) {
    out << "  - id: " << c.id << '\n'
        << "    tx: " << point(c.tx) << '\n'
        << "    rx: " << point(c.rx) << '\n'
        << "    power_budget_mw: " << num(c.power_budget_mw) << '\n'
        << "    power_step_mw: " << num(c.power_step_mw) << '\n'
        << "    sinr_threshold: " << num(c.sinr_threshold) << '\n'
        << "    demand_slots: " << c.demand_slots << '\n'
        << "    rate_min_bps: " << num(c.rate_min_bps) << '\n'
        << "    rate_max_bps: " << num(c.rate_max_bps) << '\n'
        << "    rate_step_bps: " << num(c.rate_step_bps) << '\n';
  }
  out << "pus:" << (s.pus.empty() ? " []\n" : "\n");
  for (const auto& p : s.pus) {
    out << "  - id: " << p.id << '\n'
        << "    tx: " << point(p.tx) << '\n'
        << "    rx: " << point(p.rx) << '\n'
        << "    interference_cap_mw: " << num(p.interference_cap_mw) << '\n'
        << "    tx_power_mw: " << num(p.tx_power_mw) << '\n';
  }
  auto row = [](const auto& r) {
    std::string line = "[";
    for (Eigen::Index c = 0; c < r.size(); ++c) line += (c ? ", " : "") + num(r(c));
    return line + "]";
  };
  out << "gains:\n  cr_to_cr:\n";
  for (Eigen::Index r = 0; r < s.gains.cr_to_cr.rows(); ++r) {
    out << "    - " << row(s.gains.cr_to_cr.row(r)) << '\n';
  }
  out << "  cr_to_pu:" << (s.gains.cr_to_pu.rows() == 0 ? " []\n" : "\n");
  for (Eigen::Index r = 0; r < s.gains.cr_to_pu.rows(); ++r) {
    out << "    - " << row(s.gains.cr_to_pu.row(r)) << '\n';
  }
  out << "  pu_floor_mw: " << row(s.gains.pu_floor_mw) << '\n';
}

}  // namespace awcs
