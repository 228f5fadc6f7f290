#pragma once

// Independent reference computations shared by the tests.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "awcs/radio.hpp"
#include "awcs/random_csp.hpp"

namespace awcs::testing {

// Plain recursive enumeration over every complete assignment.
inline bool any_solution(const CspInstance& inst) {
  const std::size_t n = inst.variable_count();
  std::vector<Assignment> current(n);
  std::function<bool(std::size_t)> go = [&](std::size_t i) {
    if (i == n) return satisfies(inst, current);
    for (Value v : inst.domains[i].values()) {
      current[i] = {inst.variable(i), v, 0};
      if (go(i + 1)) return true;
    }
    return false;
  };
  return go(0);
}

// Scenario with explicit gains; CR ids 0..n-1, PU ids 0..k-1.
inline Scenario manual_scenario(const Eigen::MatrixXd& cr_to_cr, const Eigen::MatrixXd& cr_to_pu,
                                const std::vector<double>& pu_caps_mw,
                                const std::vector<double>& sinr_thresholds) {
  Scenario s;
  const auto n = cr_to_cr.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    CrLink c;
    c.id = static_cast<AgentId>(i);
    c.sinr_threshold = sinr_thresholds[static_cast<std::size_t>(i)];
    s.crs.push_back(c);
  }
  for (std::size_t k = 0; k < pu_caps_mw.size(); ++k) {
    PuLink p;
    p.id = static_cast<AgentId>(k);
    p.interference_cap_mw = pu_caps_mw[k];
    s.pus.push_back(p);
  }
  s.gains.cr_to_cr = cr_to_cr;
  s.gains.cr_to_pu = cr_to_pu;
  s.gains.pu_floor_mw = Eigen::VectorXd::Zero(n);
  return s;
}

// SINR of link i written out term by term.
inline double naive_sinr(const Scenario& s, int i, const std::vector<double>& p_mw) {
  double interference = s.noise_floor_mw + s.gains.pu_floor_mw(i);
  for (int j = 0; j < static_cast<int>(p_mw.size()); ++j) {
    if (j != i) interference += s.gains.cr_to_cr(i, j) * p_mw[static_cast<std::size_t>(j)];
  }
  return s.gains.cr_to_cr(i, i) * p_mw[static_cast<std::size_t>(i)] / interference;
}

}  // namespace awcs::testing
