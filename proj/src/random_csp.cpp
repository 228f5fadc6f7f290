#include "awcs/random_csp.hpp"

#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "awcs/rng.hpp"

namespace awcs {

VarId CspInstance::variable(std::size_t index) const {
  const auto per = static_cast<std::size_t>(locals_per_agent);
  return {static_cast<AgentId>(index / per), static_cast<std::int32_t>(index % per)};
}

std::size_t CspInstance::index_of(VarId var) const {
  return static_cast<std::size_t>(var.owner) * static_cast<std::size_t>(locals_per_agent) +
         static_cast<std::size_t>(var.local);
}

namespace {

Domain label_domain(int values) {
  std::vector<Value> v;
  for (int i = values - 1; i >= 0; --i) v.push_back(i);
  return Domain(std::move(v));
}

ConstraintPtr not_equal(int id, VarId a, VarId b) {
  return std::make_shared<const Constraint>(
      id, std::vector<VarId>{a, b}, [](std::span<const Value> x) { return x[0] != x[1]; });
}

}  // namespace

CspInstance random_binary_csp(std::uint64_t seed, const RandomCspParams& params) {
  if (params.agents < 1 || params.locals_per_agent < 1 || params.values < 1) {
    throw std::invalid_argument("random CSP needs positive sizes");
  }
  std::mt19937_64 rng(seed);
  CspInstance inst;
  inst.agents = params.agents;
  inst.locals_per_agent = params.locals_per_agent;
  const std::size_t n = static_cast<std::size_t>(params.agents * params.locals_per_agent);
  for (std::size_t i = 0; i < n; ++i) inst.domains.push_back(label_domain(params.values));

  const auto d = static_cast<std::size_t>(params.values);
  int next_id = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (uniform01(rng) >= params.density) continue;
      auto forbidden = std::make_shared<std::vector<char>>(d * d, 0);
      for (auto& f : *forbidden) f = uniform01(rng) < params.tightness ? 1 : 0;
      inst.constraints.push_back(std::make_shared<const Constraint>(
          next_id++, std::vector<VarId>{inst.variable(i), inst.variable(j)},
          [forbidden, d](std::span<const Value> x) {
            return (*forbidden)[static_cast<std::size_t>(x[0]) * d +
                                static_cast<std::size_t>(x[1])] == 0;
          }));
    }
  }
  return inst;
}

CspInstance builtin_instance(const std::string& name) {
  CspInstance inst;
  inst.locals_per_agent = 1;
  if (name == "pair") {
    inst.agents = 2;
    inst.domains.assign(2, label_domain(2));
    inst.constraints.push_back(not_equal(0, {0, 0}, {1, 0}));
  } else if (name == "triangle") {
    inst.agents = 3;
    inst.domains.assign(3, label_domain(2));
    inst.constraints.push_back(not_equal(0, {0, 0}, {1, 0}));
    inst.constraints.push_back(not_equal(1, {1, 0}, {2, 0}));
    inst.constraints.push_back(not_equal(2, {0, 0}, {2, 0}));
  } else {
    throw std::invalid_argument("unknown builtin instance '" + name + "'");
  }
  return inst;
}

bool satisfies(const CspInstance& instance, const std::vector<Assignment>& assignment) {
  std::map<VarId, Value> values;
  for (const auto& a : assignment) values[a.var] = a.value;
  CheckCounter unused;
  for (const auto& c : instance.constraints) {
    auto verdict = evaluate(
        *c,
        [&](VarId v) -> const Value* {
          auto it = values.find(v);
          return it == values.end() ? nullptr : &it->second;
        },
        unused);
    if (verdict != Verdict::satisfied) return false;
  }
  return true;
}

std::optional<std::vector<Value>> brute_force_solve(const CspInstance& instance) {
  const std::size_t n = instance.variable_count();
  std::vector<std::size_t> pos(n, 0);
  std::vector<Value> values(n);
  // constraints become checkable once their last variable (in index order) is set
  std::vector<std::vector<const Constraint*>> due(n);
  for (const auto& c : instance.constraints) {
    std::size_t last = 0;
    for (VarId v : c->scope()) last = std::max(last, instance.index_of(v));
    due[last].push_back(c.get());
  }
  std::vector<Value> operands;
  auto ok_at = [&](std::size_t i) {
    for (const Constraint* c : due[i]) {
      operands.clear();
      for (VarId v : c->scope()) operands.push_back(values[instance.index_of(v)]);
      if (!c->test(operands)) return false;
    }
    return true;
  };
  if (n == 0) return std::vector<Value>{};
  std::size_t i = 0;
  for (;;) {
    if (pos[i] < instance.domains[i].size()) {
      values[i] = instance.domains[i][pos[i]];
      if (ok_at(i)) {
        if (i + 1 == n) return values;
        ++i;
        pos[i] = 0;
        continue;
      }
      ++pos[i];
      continue;
    }
    if (i == 0) return std::nullopt;
    --i;
    ++pos[i];
  }
}

CspRunResult solve_with_awcs(const CspInstance& instance, const CspRunOptions& options) {
  std::vector<std::unique_ptr<Agent>> agents;
  // Maps the simulated variable back to the instance's naming.
  std::map<VarId, VarId> rename;
  const std::size_t n = instance.variable_count();

  if (options.multi) {
    for (AgentId a = 0; a < instance.agents; ++a) {
      std::vector<Domain> domains;
      for (int k = 0; k < instance.locals_per_agent; ++k) {
        domains.push_back(instance.domain({a, k}));
        rename[{a, k}] = {a, k};
      }
      std::vector<ConstraintPtr> mine;
      for (const auto& c : instance.constraints) {
        for (VarId v : c->scope()) {
          if (v.owner == a) {
            mine.push_back(c);
            break;
          }
        }
      }
      agents.push_back(std::make_unique<MultiAgent>(a, std::move(domains), std::move(mine),
                                                    options.awcs));
    }
  } else {
    // One agent per variable, numbered by variable index.
    std::vector<ConstraintPtr> flat;
    for (const auto& c : instance.constraints) {
      if (instance.locals_per_agent == 1) {
        flat.push_back(c);
        continue;
      }
      std::vector<VarId> scope;
      for (VarId v : c->scope()) scope.push_back({static_cast<AgentId>(instance.index_of(v)), 0});
      flat.push_back(std::make_shared<const Constraint>(c->with_scope(std::move(scope))));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = static_cast<AgentId>(i);
      rename[{id, 0}] = instance.variable(i);
      std::vector<ConstraintPtr> mine;
      std::set<AgentId> neighbors;
      for (const auto& c : flat) {
        if (!c->in_scope({id, 0})) continue;
        mine.push_back(c);
        for (VarId v : c->scope()) {
          if (v.owner != id) neighbors.insert(v.owner);
        }
      }
      agents.push_back(std::make_unique<SingleAgent>(
          id, instance.domains[i], std::move(mine),
          std::vector<AgentId>(neighbors.begin(), neighbors.end()), options.awcs));
    }
  }

  std::vector<const MultiAgent*> multis;
  for (const auto& a : agents) {
    if (const auto* m = dynamic_cast<const MultiAgent*>(a.get())) multis.push_back(m);
  }

  auto to_instance = [&](std::vector<Assignment> raw) {
    for (auto& a : raw) a.var = rename.at(a.var);
    return raw;
  };

  SimulatorOptions sim_options;
  sim_options.cycle_cap = options.cycle_cap;
  sim_options.trace = options.trace;
  sim_options.global_check = [&](const std::vector<Assignment>& raw) {
    return satisfies(instance, to_instance(raw));
  };
  Simulator sim(std::move(agents), Mailer(options.delay, options.seed), sim_options);

  CspRunResult result;
  result.status = sim.run();
  result.assignment = to_instance(sim.assignments());
  result.metrics = sim.metrics();
  for (const auto* m : multis) result.inconsistent_sends += m->inconsistent_sends();
  return result;
}

ValidationCase validation_case(std::uint64_t base_seed, int index, bool multi) {
  ValidationCase c;
  c.seed = derive_seed(base_seed, {static_cast<std::uint64_t>(index)});
  std::mt19937_64 rng(c.seed);
  RandomCspParams p;
  if (multi) {
    p.agents = 2 + static_cast<int>(uniform_below(rng, 3));
    p.values = 2 + static_cast<int>(uniform_below(rng, 3));
    p.locals_per_agent = 2;
  } else {
    p.agents = 3 + static_cast<int>(uniform_below(rng, 4));
    p.values = 2 + static_cast<int>(uniform_below(rng, 4));
  }
  c.instance = random_binary_csp(rng(), p);
  c.options.multi = multi;
  c.options.delay = DelayPolicy::uniform(index % 4);
  c.options.seed = rng();
  c.options.cycle_cap = 100000;
  return c;
}

ValidationOutcome validate_case(const ValidationCase& c, bool drop_constraints) {
  ValidationOutcome o;
  o.seed = c.seed;
  o.agents = c.instance.agents;
  o.values = static_cast<int>(c.instance.domains.front().size());
  o.satisfiable = brute_force_solve(c.instance).has_value();
  CspInstance given = c.instance;
  if (drop_constraints) given.constraints.clear();
  const auto run = solve_with_awcs(given, c.options);
  o.status = run.status;
  o.matched = o.satisfiable ? run.status == RunStatus::quiescent && satisfies(c.instance, run.assignment)
                            : run.status == RunStatus::no_solution;
  return o;
}

}  // namespace awcs
