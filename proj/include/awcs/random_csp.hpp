#pragma once

// Small abstract DCSP instances: seeded random binary CSPs, a couple of named
// fixtures, the brute-force enumerator used as an oracle, and helpers that
// turn an instance into a population of AWCS agents.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "awcs/awcs_multi.hpp"
#include "awcs/awcs_single.hpp"
#include "awcs/mailer.hpp"

namespace awcs {

struct CspInstance {
  int agents = 0;
  int locals_per_agent = 1;
  std::vector<Domain> domains;  // index agent * locals_per_agent + local
  std::vector<ConstraintPtr> constraints;

  std::size_t variable_count() const { return domains.size(); }
  VarId variable(std::size_t index) const;
  std::size_t index_of(VarId var) const;
  const Domain& domain(VarId var) const { return domains[index_of(var)]; }
};

struct RandomCspParams {
  int agents = 4;
  int locals_per_agent = 1;
  int values = 3;
  double density = 0.5;    // probability that a pair of variables is constrained
  double tightness = 0.3;  // probability that a value pair is forbidden
};

CspInstance random_binary_csp(std::uint64_t seed, const RandomCspParams& params);

// "pair": two agents, two colors, x0 != x1 (solvable).
// "triangle": three agents, two colors, pairwise != (unsatisfiable).
CspInstance builtin_instance(const std::string& name);

// All constraints satisfied by a complete assignment.
bool satisfies(const CspInstance& instance, const std::vector<Assignment>& assignment);

// First satisfying assignment in domain order, by exhaustive enumeration.
std::optional<std::vector<Value>> brute_force_solve(const CspInstance& instance);

struct CspRunOptions {
  bool multi = false;  // one MultiAgent per agent, else one SingleAgent per variable
  AwcsOptions awcs;
  DelayPolicy delay;
  std::uint64_t seed = 1;
  std::uint64_t cycle_cap = 100000;
  std::ostream* trace = nullptr;
};

struct CspRunResult {
  RunStatus status = RunStatus::active;
  std::vector<Assignment> assignment;  // in the instance's variable naming
  RunMetrics metrics;
  std::uint64_t inconsistent_sends = 0;
};

CspRunResult solve_with_awcs(const CspInstance& instance, const CspRunOptions& options);

// Seeded oracle cross-check. Single-variable cases use 3-6 agents with 2-5
// values; multi-variable cases 2-4 agents with 2 locals of 2-4 values.
struct ValidationCase {
  std::uint64_t seed = 0;
  CspInstance instance;
  CspRunOptions options;
};

ValidationCase validation_case(std::uint64_t base_seed, int index, bool multi);

struct ValidationOutcome {
  std::uint64_t seed = 0;
  int agents = 0;
  int values = 0;
  bool satisfiable = false;
  RunStatus status = RunStatus::active;
  bool matched = false;
};

// Matched: quiescent on a satisfying assignment when the enumerator finds
// one, a NoSolution broadcast otherwise. `drop_constraints` hands the
// agents an unconstrained problem (negative control for the harness).
ValidationOutcome validate_case(const ValidationCase& c, bool drop_constraints = false);

}  // namespace awcs
