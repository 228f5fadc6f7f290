#pragma once

// Cognitive-radio scenario model: node placements, power-law path gains,
// SINR and primary-user interference arithmetic, quantized power and rate
// domains, and seeded scenario generation.
//
// Units: positions in meters, powers in mW (domain values in integer uW),
// rates in bits/s, gains and SINR are plain ratios.

#include <cstdint>
#include <cmath>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "awcs/dcsp.hpp"

namespace awcs {

inline constexpr double kMicrowattsPerMilliwatt = 1000.0;
inline constexpr double kMinDistance = 1.0;      // meters; shorter distances are clamped
inline constexpr double kSinrTolerance = 1e-9;   // relative slack on SINR thresholds

inline Value to_microwatts(double mw) { return static_cast<Value>(std::llround(mw * kMicrowattsPerMilliwatt)); }
inline double to_milliwatts(Value uw) { return static_cast<double>(uw) / kMicrowattsPerMilliwatt; }

enum class Mode { cdma_equal, cdma_unequal, stdma };

std::string to_string(Mode m);
Mode parse_mode(const std::string& text);  // cdma-eq | cdma-uneq | stdma

struct CrLink {
  AgentId id = 0;
  Eigen::Vector2d tx = Eigen::Vector2d::Zero();
  Eigen::Vector2d rx = Eigen::Vector2d::Zero();
  double power_budget_mw = 100.0;
  double power_step_mw = 2.0;
  double sinr_threshold = 1e-3;
  int demand_slots = 1;
  double rate_min_bps = 64000;
  double rate_max_bps = 256000;
  double rate_step_bps = 32000;
};

struct PuLink {
  AgentId id = 0;
  Eigen::Vector2d tx = Eigen::Vector2d::Zero();
  Eigen::Vector2d rx = Eigen::Vector2d::Zero();
  double interference_cap_mw = 1e-9;
  double tx_power_mw = 100.0;
};

struct GainTable {
  Eigen::MatrixXd cr_to_cr;    // (i, j): CR j's transmitter to CR i's receiver
  Eigen::MatrixXd cr_to_pu;    // (k, i): CR i's transmitter to PU k's receiver
  Eigen::VectorXd pu_floor_mw; // PU transmitter interference at each CR receiver
};

struct Scenario {
  std::vector<CrLink> crs;
  std::vector<PuLink> pus;
  GainTable gains;
  double noise_floor_mw = 1e-6;
  double spreading_gain = 128.0;
  Mode mode = Mode::cdma_equal;
  int frame_slots = 20;
  std::uint64_t seed = 0;

  Eigen::Index n_cr() const { return static_cast<Eigen::Index>(crs.size()); }
  Eigen::Index n_pu() const { return static_cast<Eigen::Index>(pus.size()); }
};

template <typename Scalar>
Scalar path_gain(Scalar distance, Scalar spreading_gain) {
  if (!(distance > Scalar(0))) throw std::invalid_argument("path_gain needs a positive distance");
  const Scalar d = distance < Scalar(kMinDistance) ? Scalar(kMinDistance) : distance;
  const Scalar d2 = d * d;
  return Scalar(1) / (spreading_gain * d2 * d2);
}

// g_ii p_i / (noise + pu_floor_i + sum_{j != i} g_ij p_j)
template <typename Derived>
typename Derived::Scalar sinr(const Scenario& s, Eigen::Index i,
                              const Eigen::MatrixBase<Derived>& powers_mw) {
  using Scalar = typename Derived::Scalar;
  const auto& g = s.gains.cr_to_cr;
  const Scalar signal = g(i, i) * powers_mw(i);
  const Scalar interference = g.row(i).dot(powers_mw) - signal;
  return signal / (Scalar(s.noise_floor_mw) + Scalar(s.gains.pu_floor_mw(i)) + interference);
}

// sum_i h_ki p_i
template <typename Derived>
typename Derived::Scalar pu_interference(const Scenario& s, Eigen::Index k,
                                         const Eigen::MatrixBase<Derived>& powers_mw) {
  return s.gains.cr_to_pu.row(k).dot(powers_mw);
}

inline bool meets_sinr(double achieved, double required) {
  return achieved >= required * (1.0 - kSinrTolerance);
}

template <typename Derived>
bool pu_safe(const Scenario& s, Eigen::Index k, const Eigen::MatrixBase<Derived>& powers_mw) {
  return pu_interference(s, k, powers_mw) <= s.pus[static_cast<std::size_t>(k)].interference_cap_mw;
}

// [P_max, P_max - step, ..., smallest positive level, 0] in uW.
Domain power_domain(double power_budget_mw, double step_mw);

// [R_max, R_max - step, ..., R_min] in bits/s (R_min always present).
Domain rate_domain(const CrLink& link);

// gamma_i * R / R_min
double rate_sinr_requirement(double rate_bps, const CrLink& link);

// sum ln R_i; every rate must be positive.
double objective_log_rate(std::span<const double> rates_bps);

struct ScenarioParams {
  int n_cr = 7;
  int n_pu = 2;
  double area_side_m = 1000.0;
  double pair_distance_min_m = 10.0;
  double pair_distance_max_m = 100.0;
  double pu_guard_m = 50.0;  // minimum CR-node to PU-node separation
  double power_budget_mw = 100.0;
  double power_step_mw = 2.0;
  double noise_floor_mw = 1e-6;
  double spreading_gain = 128.0;
  double pu_tx_power_mw = 100.0;
  double pu_cap_min_mw = 1e-9;
  double pu_cap_max_mw = 1e-9;
  double sinr_threshold_min = 5e-4;
  double sinr_threshold_max = 2e-3;
  int demand_min = 1;
  int demand_max = 3;
  int frame_slots = 20;
  double rate_min_bps = 64000;
  double rate_max_bps = 256000;
  double rate_step_bps = 32000;
  Mode mode = Mode::cdma_equal;
  int max_placement_retries = 1000;
};

// Each CR and PU draws its geometry from its own seed substream, so the
// first n nodes are the same whatever n_cr is and whatever the caps are.
Scenario generate_scenario(std::uint64_t seed, const ScenarioParams& params);

// Recomputes every gain from positions and the spreading gain.
void fill_gains(Scenario& s);

// Throws std::invalid_argument naming the offending field.
void validate(const Scenario& s);

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& yaml_text);
void write_scenario(std::ostream& out, const Scenario& s);

}  // namespace awcs
