#include "awcs/protocol.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "awcs/awcs_multi.hpp"
#include "awcs/rng.hpp"

namespace awcs {

const char* to_string(Phase p) {
  switch (p) {
    case Phase::pu_negotiation: return "pu_negotiation";
    case Phase::cr_awcs: return "cr_awcs";
    case Phase::stdma_schedule: return "stdma_schedule";
    case Phase::done: return "done";
    case Phase::infeasible: return "infeasible";
  }
  return "?";
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::feasible: return "feasible";
    case Outcome::no_solution: return "no_solution";
    case Outcome::infeasible_schedule: return "infeasible_schedule";
    case Outcome::cycle_cap: return "cycle_cap";
    case Outcome::stalled: return "stalled";
  }
  return "?";
}

namespace {

std::size_t index(Eigen::Index i) { return static_cast<std::size_t>(i); }

SimulatorOptions sim_options(const ProtocolOptions& o, const char* label) {
  SimulatorOptions so;
  so.cycle_cap = o.cycle_cap;
  so.trace = o.trace;
  so.trace_label = label;
  return so;
}

// ---- Phase 1 agents ----

class CrReporter final : public Agent {
 public:
  CrReporter(AgentId id, Domain domain, std::vector<AgentId> pus)
      : id_(id), domain_(std::move(domain)), pus_(std::move(pus)) {}

  AgentId id() const override { return id_; }
  std::vector<Outgoing> start() override { return report(); }

  std::vector<Outgoing> receive(std::span<const Delivery> batch) override {
    const bool violated = std::any_of(batch.begin(), batch.end(), [](const Delivery& d) {
      return std::holds_alternative<PuViolationMsg>(*d.msg);
    });
    if (!violated || level_ + 1 >= domain_.size()) return {};
    ++level_;  // one quantization level per batch, however many PUs complained
    return report();
  }

  bool is_consistent() const override { return true; }
  std::vector<Assignment> assignments() const override { return {{{id_, 0}, power(), 0}}; }
  std::uint64_t constraint_checks() const override { return 0; }

  Value power() const { return domain_[level_]; }
  const std::vector<Value>& reports() const { return reports_; }

 private:
  std::vector<Outgoing> report() {
    reports_.push_back(power());
    std::vector<Outgoing> out;
    for (AgentId pu : pus_) out.push_back({pu, OkMsg{{{{id_, 0}, power(), 0}}}});
    return out;
  }

  AgentId id_;
  Domain domain_;
  std::vector<AgentId> pus_;
  std::size_t level_ = 0;
  std::vector<Value> reports_;
};

// Keeps every CR's latest reported power and checks the aggregate once per
// batch. A violated check notifies every CR currently reported above zero.
class PuMonitor final : public Agent {
 public:
  PuMonitor(AgentId id, const Scenario& s, Eigen::Index k, std::map<AgentId, Eigen::Index> cr_index)
      : id_(id), scenario_(s), k_(k), cr_index_(std::move(cr_index)),
        reported_mw_(Eigen::VectorXd::Zero(s.n_cr())) {}

  AgentId id() const override { return id_; }
  std::vector<Outgoing> start() override { return {}; }

  std::vector<Outgoing> receive(std::span<const Delivery> batch) override {
    for (const auto& d : batch) {
      const auto* ok = std::get_if<OkMsg>(d.msg);
      if (ok == nullptr) continue;
      for (const auto& a : ok->assignments) reported_mw_(cr_index_.at(a.var.owner)) = to_milliwatts(a.value);
    }
    ++checks_;
    std::vector<Outgoing> out;
    if (is_consistent()) return out;
    for (const auto& [id, i] : cr_index_) {
      if (reported_mw_(i) > 0.0) out.push_back({id, PuViolationMsg{id_}});
    }
    return out;
  }

  bool is_consistent() const override {
    return pu_interference(scenario_, k_, reported_mw_) <=
           scenario_.pus[index(k_)].interference_cap_mw;
  }
  std::vector<Assignment> assignments() const override { return {}; }
  std::uint64_t constraint_checks() const override { return checks_; }

 private:
  AgentId id_;
  const Scenario& scenario_;
  Eigen::Index k_;
  std::map<AgentId, Eigen::Index> cr_index_;
  Eigen::VectorXd reported_mw_;
  std::uint64_t checks_ = 0;
};

std::map<AgentId, Eigen::Index> cr_index_map(const Scenario& s) {
  std::map<AgentId, Eigen::Index> m;
  for (Eigen::Index i = 0; i < s.n_cr(); ++i) m[s.crs[index(i)].id] = i;
  return m;
}

AgentId pu_agent_base(const Scenario& s) {
  AgentId top = 0;
  for (const auto& c : s.crs) top = std::max(top, c.id);
  return top + 1;
}

double noise_only_sinr(const Scenario& s, Eigen::Index i, double p_mw) {
  return s.gains.cr_to_cr(i, i) * p_mw / (s.noise_floor_mw + s.gains.pu_floor_mw(i));
}

// SINR of CR i when exactly the CRs in `scope` transmit at the given levels.
// Scope position 0 is CR i itself.
class SinrPredicate {
 public:
  SinrPredicate(const Scenario& s, Eigen::Index i, std::vector<Eigen::Index> scope_cr,
                double required)
      : s_(&s), i_(i), scope_cr_(std::move(scope_cr)), required_(required) {}

  bool operator()(std::span<const Value> values) const {
    thread_local Eigen::VectorXd p;
    p.setZero(s_->n_cr());
    for (std::size_t k = 0; k < scope_cr_.size(); ++k) p(scope_cr_[k]) = to_milliwatts(values[k]);
    return meets_sinr(sinr(*s_, i_, p), required_);
  }

 private:
  const Scenario* s_;
  Eigen::Index i_;
  std::vector<Eigen::Index> scope_cr_;
  double required_;
};

struct PowerGame {
  std::vector<Eigen::Index> members;  // CR indices taking part
  std::vector<std::vector<Eigen::Index>> interferers;  // per member
};

// Runs single-variable AWCS on power for `game`. Returns the final powers
// per CR index (0 outside the game).
CdmaResult run_power_awcs(const Scenario& s, std::span<const Value> caps_uw,
                          const PowerGame& game, const ProtocolOptions& options,
                          std::uint64_t stream, const char* label) {
  std::vector<ConstraintPtr> constraints;
  std::map<Eigen::Index, std::vector<ConstraintPtr>> mine;
  std::map<Eigen::Index, std::set<AgentId>> neighbors;
  for (std::size_t m = 0; m < game.members.size(); ++m) {
    const Eigen::Index i = game.members[m];
    std::vector<VarId> scope{{s.crs[index(i)].id, 0}};
    std::vector<Eigen::Index> scope_cr{i};
    for (Eigen::Index j : game.interferers[m]) {
      scope.push_back({s.crs[index(j)].id, 0});
      scope_cr.push_back(j);
    }
    auto c = std::make_shared<const Constraint>(
        static_cast<int>(i), scope,
        SinrPredicate(s, i, scope_cr, s.crs[index(i)].sinr_threshold));
    for (Eigen::Index j : scope_cr) {
      mine[j].push_back(c);
      for (Eigen::Index k : scope_cr) {
        if (k != j) neighbors[j].insert(s.crs[index(k)].id);
      }
    }
  }
  CdmaResult r;
  r.powers_uw.assign(index(s.n_cr()), 0);
  r.rates_bps.assign(index(s.n_cr()), 0);
  std::vector<Domain> domains;
  bool empty = false;
  for (Eigen::Index i : game.members) {
    auto d = phase2_power_domain(s, i, caps_uw[index(i)], s.crs[index(i)].sinr_threshold);
    if (!d) empty = true;
    else domains.push_back(std::move(*d));
  }
  auto tight = empty ? std::nullopt
                     : tighten_power_floors(s, std::move(domains), game.members, game.interferers);
  if (!tight) {
    r.status = RunStatus::no_solution;
    return r;
  }
  std::vector<std::unique_ptr<Agent>> agents;
  for (std::size_t m = 0; m < game.members.size(); ++m) {
    const Eigen::Index i = game.members[m];
    auto& nb = neighbors[i];
    agents.push_back(std::make_unique<SingleAgent>(s.crs[index(i)].id, std::move((*tight)[m]),
                                                   mine[i], std::vector<AgentId>(nb.begin(), nb.end()),
                                                   options.awcs));
  }
  Simulator sim(std::move(agents), Mailer(options.delay, derive_seed(options.seed, {stream})),
                sim_options(options, label));
  r.status = sim.run();
  r.metrics = sim.metrics();
  const auto ids = cr_index_map(s);
  for (const auto& a : sim.assignments()) {
    const Eigen::Index i = ids.at(a.var.owner);
    r.powers_uw[index(i)] = a.value;
    r.rates_bps[index(i)] = static_cast<Value>(std::llround(s.crs[index(i)].rate_min_bps));
  }
  return r;
}

}  // namespace

// ---- Phase 1 ----

PuNegotiation phase1_pu_negotiation(const Scenario& s, const ProtocolOptions& options) {
  const AgentId base = pu_agent_base(s);
  std::vector<AgentId> pu_ids;
  for (Eigen::Index k = 0; k < s.n_pu(); ++k) pu_ids.push_back(base + static_cast<AgentId>(k));

  std::vector<std::unique_ptr<Agent>> agents;
  std::vector<const CrReporter*> reporters;
  for (const auto& cr : s.crs) {
    auto a = std::make_unique<CrReporter>(cr.id, power_domain(cr.power_budget_mw, cr.power_step_mw),
                                          pu_ids);
    reporters.push_back(a.get());
    agents.push_back(std::move(a));
  }
  const auto ids = cr_index_map(s);
  for (Eigen::Index k = 0; k < s.n_pu(); ++k) {
    agents.push_back(std::make_unique<PuMonitor>(pu_ids[index(k)], s, k, ids));
  }
  Simulator sim(std::move(agents), Mailer(options.delay, derive_seed(options.seed, {1})),
                sim_options(options, "pu "));
  PuNegotiation r;
  r.status = sim.run();
  r.metrics = sim.metrics();
  for (const auto* rep : reporters) {
    r.caps_uw.push_back(rep->power());
    r.reports_uw.push_back(rep->reports());
  }
  return r;
}

std::vector<bool> admission(const Scenario& s, std::span<const Value> caps_uw) {
  std::vector<bool> silenced(index(s.n_cr()), false);
  for (Eigen::Index i = 0; i < s.n_cr(); ++i) {
    const Value cap = caps_uw[index(i)];
    silenced[index(i)] =
        cap <= 0 || !meets_sinr(noise_only_sinr(s, i, to_milliwatts(cap)),
                                s.crs[index(i)].sinr_threshold);
  }
  return silenced;
}

std::optional<Domain> phase2_power_domain(const Scenario& s, Eigen::Index i, Value cap_uw,
                                          double required_sinr) {
  const auto& cr = s.crs[index(i)];
  const Domain all = power_domain(cr.power_budget_mw, cr.power_step_mw);
  std::vector<Value> levels;
  for (Value v : all.values()) {
    if (v <= 0 || v > cap_uw) continue;
    if (meets_sinr(noise_only_sinr(s, i, to_milliwatts(v)), required_sinr)) levels.push_back(v);
  }
  if (levels.empty()) return std::nullopt;
  return Domain(std::move(levels));
}

std::optional<std::vector<Domain>> tighten_power_floors(
    const Scenario& s, std::vector<Domain> domains, std::span<const Eigen::Index> members,
    const std::vector<std::vector<Eigen::Index>>& interferers) {
  std::map<Eigen::Index, std::size_t> slot;
  for (std::size_t m = 0; m < members.size(); ++m) slot[members[m]] = m;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(s.n_cr());
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const Eigen::Index i = members[m];
      p.setZero();
      for (Eigen::Index j : interferers[m]) p(j) = to_milliwatts(domains[slot.at(j)].back());
      std::vector<Value> kept;
      for (Value v : domains[m].values()) {
        p(i) = to_milliwatts(v);
        if (meets_sinr(sinr(s, i, p), s.crs[index(i)].sinr_threshold)) kept.push_back(v);
      }
      if (kept.empty()) return std::nullopt;
      if (kept.size() != domains[m].size()) {
        domains[m] = Domain(std::move(kept));
        changed = true;
      }
    }
  }
  return domains;
}

// ---- Phase 2 ----

CdmaResult phase2_cdma_equal(const Scenario& s, std::span<const Value> caps_uw,
                             const std::vector<bool>& silenced, const ProtocolOptions& options) {
  PowerGame game;
  for (Eigen::Index i = 0; i < s.n_cr(); ++i) {
    if (!silenced[index(i)]) game.members.push_back(i);
  }
  for (Eigen::Index i : game.members) {
    std::vector<Eigen::Index> others;
    for (Eigen::Index j : game.members) {
      if (j != i) others.push_back(j);
    }
    game.interferers.push_back(std::move(others));
  }
  return run_power_awcs(s, caps_uw, game, options, 2, "cdma ");
}

CdmaResult phase2_cdma_unequal(const Scenario& s, std::span<const Value> caps_uw,
                               const std::vector<bool>& silenced, const ProtocolOptions& options) {
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < s.n_cr(); ++i) {
    if (!silenced[index(i)]) active.push_back(i);
  }
  std::map<Eigen::Index, std::vector<ConstraintPtr>> mine;
  int next_id = 0;
  for (Eigen::Index i : active) {
    const CrLink link = s.crs[index(i)];
    const AgentId id = link.id;
    // rate <= what the power alone supports over noise
    auto intra = std::make_shared<const Constraint>(
        next_id++, std::vector<VarId>{{id, 0}, {id, 1}},
        [&s, i, link](std::span<const Value> v) {
          return meets_sinr(noise_only_sinr(s, i, to_milliwatts(v[0])),
                            rate_sinr_requirement(static_cast<double>(v[1]), link));
        });
    mine[i].push_back(intra);

    std::vector<VarId> scope{{id, 1}, {id, 0}};
    std::vector<Eigen::Index> scope_cr{i};
    for (Eigen::Index j : active) {
      if (j == i) continue;
      scope.push_back({s.crs[index(j)].id, 0});
      scope_cr.push_back(j);
    }
    auto inter = std::make_shared<const Constraint>(
        next_id++, scope, [&s, i, link, scope_cr](std::span<const Value> v) {
          thread_local Eigen::VectorXd p;
          p.setZero(s.n_cr());
          for (std::size_t k = 0; k < scope_cr.size(); ++k) p(scope_cr[k]) = to_milliwatts(v[k + 1]);
          return meets_sinr(sinr(s, i, p), rate_sinr_requirement(static_cast<double>(v[0]), link));
        });
    for (Eigen::Index j : scope_cr) mine[j].push_back(inter);
  }

  CdmaResult r;
  r.powers_uw.assign(index(s.n_cr()), 0);
  r.rates_bps.assign(index(s.n_cr()), 0);
  // every rate needs at least the R_min threshold, so the floors carry over
  std::vector<Domain> powers;
  std::vector<std::vector<Eigen::Index>> others;
  bool empty = false;
  for (Eigen::Index i : active) {
    auto d = phase2_power_domain(s, i, caps_uw[index(i)], s.crs[index(i)].sinr_threshold);
    if (!d) empty = true;
    else powers.push_back(std::move(*d));
    others.emplace_back();
    for (Eigen::Index j : active) {
      if (j != i) others.back().push_back(j);
    }
  }
  auto tight = empty ? std::nullopt : tighten_power_floors(s, std::move(powers), active, others);
  if (!tight) {
    r.status = RunStatus::no_solution;
    return r;
  }
  std::vector<std::unique_ptr<Agent>> agents;
  for (std::size_t m = 0; m < active.size(); ++m) {
    const auto& cr = s.crs[index(active[m])];
    std::vector<Domain> domains{std::move((*tight)[m]), rate_domain(cr)};
    agents.push_back(
        std::make_unique<MultiAgent>(cr.id, std::move(domains), mine[active[m]], options.awcs));
  }
  Simulator sim(std::move(agents), Mailer(options.delay, derive_seed(options.seed, {3})),
                sim_options(options, "cdma "));
  r.status = sim.run();
  r.metrics = sim.metrics();
  const auto ids = cr_index_map(s);
  for (const auto& a : sim.assignments()) {
    const Eigen::Index i = ids.at(a.var.owner);
    (a.var.local == 0 ? r.powers_uw : r.rates_bps)[index(i)] = a.value;
  }
  return r;
}

// ---- STDMA ----

std::size_t InterferingPartition::set_of(AgentId cr) const {
  for (std::size_t k = 0; k < sets.size(); ++k) {
    if (std::binary_search(sets[k].begin(), sets[k].end(), cr)) return k;
  }
  throw std::out_of_range("CR " + std::to_string(cr) + " is in no set");
}

InterferingPartition partition_from_conflicts(std::span<const AgentId> ids,
                                              std::span<const std::pair<AgentId, AgentId>> edges) {
  std::map<AgentId, AgentId> parent;
  for (AgentId id : ids) parent[id] = id;
  auto find = [&](AgentId x) {
    while (parent.at(x) != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : edges) {
    AgentId ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::map<AgentId, std::vector<AgentId>> by_root;
  for (const auto& [id, _] : parent) by_root[find(id)].push_back(id);
  InterferingPartition p;
  for (auto& [root, members] : by_root) {
    std::sort(members.begin(), members.end());
    p.heads.push_back(members.front());
    p.sets.push_back(std::move(members));
  }
  return p;
}

namespace {

class ConflictProber final : public Agent {
 public:
  ConflictProber(const Scenario& s, Eigen::Index i, Value cap, std::vector<AgentId> peers,
                 const std::map<AgentId, Eigen::Index>& ids)
      : s_(s), i_(i), cap_(cap), peers_(std::move(peers)), ids_(ids) {}

  AgentId id() const override { return s_.crs[index(i_)].id; }
  std::vector<Outgoing> start() override {
    std::vector<Outgoing> out;
    for (AgentId p : peers_) out.push_back({p, OkMsg{{{{id(), 0}, cap_, 0}}}});
    return out;
  }
  std::vector<Outgoing> receive(std::span<const Delivery> batch) override {
    std::vector<Outgoing> out;
    for (const auto& d : batch) {
      if (const auto* ok = std::get_if<OkMsg>(d.msg)) {
        const Eigen::Index j = ids_.at(d.src);
        Eigen::VectorXd p = Eigen::VectorXd::Zero(s_.n_cr());
        p(i_) = to_milliwatts(cap_);
        p(j) = to_milliwatts(ok->assignments.front().value);
        ++checks_;
        if (!meets_sinr(sinr(s_, i_, p), s_.crs[index(i_)].sinr_threshold)) {
          edges.emplace_back(id(), d.src);
          out.push_back({d.src, ConflictMsg{id()}});
        }
      } else if (const auto* c = std::get_if<ConflictMsg>(d.msg)) {
        edges.emplace_back(c->victim, id());
      }
    }
    return out;
  }
  bool is_consistent() const override { return true; }
  std::vector<Assignment> assignments() const override { return {{{id(), 0}, cap_, 0}}; }
  std::uint64_t constraint_checks() const override { return checks_; }

  std::vector<std::pair<AgentId, AgentId>> edges;

 private:
  const Scenario& s_;
  Eigen::Index i_;
  Value cap_;
  std::vector<AgentId> peers_;
  const std::map<AgentId, Eigen::Index>& ids_;
  std::uint64_t checks_ = 0;
};

}  // namespace

ConflictProbe stdma_build_partition(const Scenario& s, std::span<const Value> caps_uw,
                                    const std::vector<bool>& silenced,
                                    const ProtocolOptions& options) {
  const auto ids = cr_index_map(s);
  std::vector<AgentId> active;
  for (Eigen::Index i = 0; i < s.n_cr(); ++i) {
    if (!silenced[index(i)]) active.push_back(s.crs[index(i)].id);
  }
  std::vector<std::unique_ptr<Agent>> agents;
  std::vector<const ConflictProber*> probers;
  for (AgentId id : active) {
    std::vector<AgentId> peers;
    for (AgentId other : active) {
      if (other != id) peers.push_back(other);
    }
    const Eigen::Index i = ids.at(id);
    auto a = std::make_unique<ConflictProber>(s, i, caps_uw[index(i)], std::move(peers), ids);
    probers.push_back(a.get());
    agents.push_back(std::move(a));
  }
  ConflictProbe r;
  std::set<std::pair<AgentId, AgentId>> edges;
  if (!agents.empty()) {
    Simulator sim(std::move(agents), Mailer(options.delay, derive_seed(options.seed, {4})),
                  sim_options(options, "probe "));
    r.status = sim.run();
    r.metrics = sim.metrics();
    // the victim's record is authoritative; the notified side mirrors it
    for (const auto* p : probers) edges.insert(p->edges.begin(), p->edges.end());
  } else {
    r.status = RunStatus::quiescent;
  }
  r.edges.assign(edges.begin(), edges.end());
  std::vector<AgentId> all;
  for (const auto& c : s.crs) all.push_back(c.id);
  r.partition = partition_from_conflicts(all, r.edges);
  return r;
}

GroupPower stdma_group_power(const Scenario& s, const InterferingPartition& partition,
                             std::span<const Value> caps_uw, const std::vector<bool>& silenced,
                             const ProtocolOptions& options) {
  const auto ids = cr_index_map(s);
  GroupPower g;
  g.group_of_set.assign(partition.sets.size(), 0);

  PowerGame game;
  for (Eigen::Index i = 0; i < s.n_cr(); ++i) {
    if (!silenced[index(i)]) game.members.push_back(i);
  }
  for (Eigen::Index i : game.members) {
    const std::size_t own = partition.set_of(s.crs[index(i)].id);
    std::vector<Eigen::Index> others;
    for (Eigen::Index j : game.members) {
      if (j != i && partition.set_of(s.crs[index(j)].id) != own) others.push_back(j);
    }
    game.interferers.push_back(std::move(others));
  }
  auto r = run_power_awcs(s, caps_uw, game, options, 5, "group ");
  g.metrics = r.metrics;
  g.status = r.status;
  if (r.status == RunStatus::quiescent) {
    g.powers_uw = std::move(r.powers_uw);
    return g;
  }
  // no concurrent power assignment: each set transmits alone at its caps
  g.degraded = true;
  std::iota(g.group_of_set.begin(), g.group_of_set.end(), 0);
  g.powers_uw.assign(index(s.n_cr()), 0);
  for (Eigen::Index i : game.members) g.powers_uw[index(i)] = caps_uw[index(i)];
  return g;
}

int FrameSchedule::slots_granted(AgentId cr) const {
  int n = 0;
  for (const auto& slot : slots) n += static_cast<int>(std::count(slot.begin(), slot.end(), cr));
  return n;
}

InfeasibleSchedule::InfeasibleSchedule(int needed, int available)
    : std::runtime_error(fmt::format("frame needs {} slots but only {} are available (deficit {})",
                                     needed, available, needed - available)),
      needed_(needed),
      available_(available) {}

FrameSchedule stdma_schedule(const InterferingPartition& partition,
                             std::span<const AgentId> cr_ids, std::span<const int> demands,
                             std::span<const int> group_of_set, int frame_slots, int frame_index) {
  if (frame_index < 0) throw std::invalid_argument("frame index must be non-negative");
  const std::size_t n_sets = partition.sets.size();
  FrameSchedule f;
  f.rotation_index = frame_index;
  f.cr_ids.assign(cr_ids.begin(), cr_ids.end());

  std::vector<std::size_t> order(n_sets);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return partition.heads[a] < partition.heads[b]; });
  if (n_sets > 0) {
    const auto shift = static_cast<std::size_t>(frame_index) % n_sets;
    std::rotate(order.begin(), order.end() - static_cast<std::ptrdiff_t>(shift), order.end());
  }
  for (std::size_t k : order) f.set_order.push_back(partition.heads[k]);

  std::map<AgentId, int> demand;
  for (std::size_t i = 0; i < cr_ids.size(); ++i) demand[cr_ids[i]] = demands[i];

  struct SlotState {
    std::set<std::size_t> sets;
    int group = -1;
  };
  std::vector<SlotState> state;
  for (std::size_t k : order) {
    const int group = group_of_set[k];
    for (AgentId cr : partition.sets[k]) {
      int need = demand.count(cr) ? demand[cr] : 0;
      for (std::size_t t = 0; need > 0; ++t) {
        if (t == state.size()) {
          state.push_back({});
          f.slots.emplace_back();
        }
        auto& st = state[t];
        if (st.sets.contains(k) || (st.group != -1 && st.group != group)) continue;
        st.sets.insert(k);
        st.group = group;
        f.slots[t].push_back(cr);
        --need;
      }
    }
  }
  if (f.used_slots() > frame_slots) throw InfeasibleSchedule(f.used_slots(), frame_slots);

  // distinct activity patterns in order of first use
  std::map<std::vector<AgentId>, std::size_t> seen;
  for (auto& slot : f.slots) {
    std::sort(slot.begin(), slot.end());
    auto [it, fresh] = seen.try_emplace(slot, f.slots_per_pattern.size());
    if (fresh) {
      f.slots_per_pattern.push_back(0);
      for (auto& row : f.patterns) row.push_back(0);
      if (f.patterns.empty()) f.patterns.assign(cr_ids.size(), {});
      if (f.patterns.front().size() < f.slots_per_pattern.size()) {
        for (auto& row : f.patterns) row.resize(f.slots_per_pattern.size(), 0);
      }
      for (AgentId cr : slot) {
        const auto pos = std::find(cr_ids.begin(), cr_ids.end(), cr) - cr_ids.begin();
        f.patterns[static_cast<std::size_t>(pos)][it->second] = 1;
      }
    }
    ++f.slots_per_pattern[it->second];
  }
  return f;
}

// ---- whole protocol ----

double ProtocolRun::avg_power_mw() const {
  if (powers_uw.empty()) return 0.0;
  double total = 0.0;
  for (Value p : powers_uw) total += to_milliwatts(p);
  return total / static_cast<double>(powers_uw.size());
}

double ProtocolRun::sum_log_rate() const {
  std::vector<double> rates;
  for (std::size_t i = 0; i < powers_uw.size(); ++i) {
    if (powers_uw[i] > 0 && i < rates_bps.size()) rates.push_back(static_cast<double>(rates_bps[i]));
  }
  return rates.empty() ? 0.0 : objective_log_rate(rates);
}

ProtocolRun run_protocol(const Scenario& s, const ProtocolOptions& options) {
  validate(s);
  ProtocolRun run;
  const std::size_t n = index(s.n_cr());
  auto fail = [&](Outcome o) {
    run.outcome = o;
    run.phase = Phase::infeasible;
    run.powers_uw.assign(n, 0);
    run.rates_bps.assign(n, 0);
    return run;
  };
  auto status_outcome = [](RunStatus st) {
    switch (st) {
      case RunStatus::no_solution: return Outcome::no_solution;
      case RunStatus::cycle_cap: return Outcome::cycle_cap;
      default: return Outcome::stalled;
    }
  };

  run.phase1 = phase1_pu_negotiation(s, options);
  run.metrics = run.phase1.metrics;
  if (run.phase1.status != RunStatus::quiescent) return fail(status_outcome(run.phase1.status));
  const auto& caps = run.phase1.caps_uw;
  run.silenced = admission(s, caps);
  run.phase = Phase::cr_awcs;

  if (s.mode == Mode::cdma_equal || s.mode == Mode::cdma_unequal) {
    auto r = s.mode == Mode::cdma_equal ? phase2_cdma_equal(s, caps, run.silenced, options)
                                        : phase2_cdma_unequal(s, caps, run.silenced, options);
    run.metrics += r.metrics;
    if (r.status != RunStatus::quiescent) return fail(status_outcome(r.status));
    run.powers_uw = std::move(r.powers_uw);
    run.rates_bps = std::move(r.rates_bps);
    run.phase = Phase::done;
    return run;
  }

  auto probe = stdma_build_partition(s, caps, run.silenced, options);
  run.metrics += probe.metrics;
  if (probe.status != RunStatus::quiescent) return fail(status_outcome(probe.status));
  run.partition = probe.partition;
  auto group = stdma_group_power(s, *run.partition, caps, run.silenced, options);
  run.metrics += group.metrics;
  run.degraded = group.degraded;
  run.powers_uw = group.powers_uw;
  run.rates_bps.assign(n, 0);
  std::vector<AgentId> ids;
  std::vector<int> demands;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back(s.crs[i].id);
    demands.push_back(run.silenced[i] ? 0 : s.crs[i].demand_slots);
    if (!run.silenced[i]) run.rates_bps[i] = static_cast<Value>(std::llround(s.crs[i].rate_min_bps));
  }
  run.phase = Phase::stdma_schedule;
  try {
    run.schedule = stdma_schedule(*run.partition, ids, demands, group.group_of_set, s.frame_slots,
                                  options.frame_index);
  } catch (const InfeasibleSchedule& e) {
    run.schedule_deficit = e.deficit();
    return fail(Outcome::infeasible_schedule);
  }
  run.phase = Phase::done;
  return run;
}

bool pu_safe_all(const Scenario& s, std::span<const Value> powers_uw) {
  Eigen::VectorXd p(s.n_cr());
  for (Eigen::Index i = 0; i < s.n_cr(); ++i) p(i) = to_milliwatts(powers_uw[index(i)]);
  for (Eigen::Index k = 0; k < s.n_pu(); ++k) {
    if (!pu_safe(s, k, p)) return false;
  }
  return true;
}

bool qos_met(const Scenario& s, const ProtocolRun& run) {
  const auto n = s.n_cr();
  auto required = [&](Eigen::Index i) {
    const auto& cr = s.crs[index(i)];
    if (s.mode != Mode::cdma_unequal) return cr.sinr_threshold;
    const auto r = static_cast<double>(run.rates_bps[index(i)]);
    if (r < cr.rate_min_bps || r > cr.rate_max_bps) return std::numeric_limits<double>::infinity();
    return rate_sinr_requirement(r, cr);
  };
  if (s.mode != Mode::stdma) {
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p(i) = to_milliwatts(run.powers_uw[index(i)]);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (p(i) > 0 && !meets_sinr(sinr(s, i, p), required(i))) return false;
    }
    return true;
  }
  if (!run.schedule) return true;
  const auto ids = cr_index_map(s);
  for (const auto& slot : run.schedule->slots) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    for (AgentId cr : slot) p(ids.at(cr)) = to_milliwatts(run.powers_uw[index(ids.at(cr))]);
    for (AgentId cr : slot) {
      const Eigen::Index i = ids.at(cr);
      if (!meets_sinr(sinr(s, i, p), required(i))) return false;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!run.silenced[index(i)] && run.schedule->slots_granted(s.crs[index(i)].id) < s.crs[index(i)].demand_slots) {
      return false;
    }
  }
  return true;
}

void write_result_record(std::ostream& out, const Scenario& s, const ProtocolRun& run,
                         const ProtocolOptions& options) {
  auto list = [](const auto& v) {
    std::string line = "[";
    for (std::size_t i = 0; i < v.size(); ++i) line += fmt::format("{}{}", i ? ", " : "", v[i]);
    return line + "]";
  };
  std::vector<double> powers_mw;
  for (Value p : run.powers_uw) powers_mw.push_back(to_milliwatts(p));
  std::vector<double> caps_mw;
  for (Value p : run.phase1.caps_uw) caps_mw.push_back(to_milliwatts(p));
  std::vector<AgentId> ids;
  for (const auto& c : s.crs) ids.push_back(c.id);
  std::vector<int> silenced;
  for (bool b : run.silenced) silenced.push_back(b ? 1 : 0);

  out << "# protocol result; powers mW, rates bit/s\n";
  out << "seed: " << s.seed << '\n';
  out << "config:\n"
      << "  mode: " << to_string(s.mode) << '\n'
      << "  delay: " << to_string(options.delay) << '\n'
      << "  delay_seed: " << options.seed << '\n'
      << "  cycle_cap: " << options.cycle_cap << '\n'
      << "  frame_index: " << options.frame_index << '\n'
      << "  nogood_learning: " << (options.awcs.nogood_learning ? "true" : "false") << '\n'
      << "  n_cr: " << s.n_cr() << '\n'
      << "  n_pu: " << s.n_pu() << '\n';
  out << "outcome: " << to_string(run.outcome) << '\n';
  out << "phase: " << to_string(run.phase) << '\n';
  out << "cr_ids: " << list(ids) << '\n';
  out << "pu_caps_mw: " << list(caps_mw) << '\n';
  out << "silenced: " << list(silenced) << '\n';
  out << "powers_mw: " << list(powers_mw) << '\n';
  out << "rates_bps: " << list(run.rates_bps) << '\n';
  if (run.partition) {
    out << "partition:\n";
    for (std::size_t k = 0; k < run.partition->sets.size(); ++k) {
      out << "  - head: " << run.partition->heads[k] << '\n'
          << "    members: " << list(run.partition->sets[k]) << '\n';
    }
    out << "degraded: " << (run.degraded ? "true" : "false") << '\n';
  }
  if (run.schedule) {
    out << "schedule:\n"
        << "  set_order: " << list(run.schedule->set_order) << '\n'
        << "  slots_per_pattern: " << list(run.schedule->slots_per_pattern) << '\n'
        << "  slots:\n";
    for (const auto& slot : run.schedule->slots) out << "    - " << list(slot) << '\n';
  }
  if (run.outcome == Outcome::infeasible_schedule) {
    out << "schedule_deficit: " << run.schedule_deficit << '\n';
  }
  const auto& m = run.metrics;
  out << "metrics:\n"
      << "  cycles: " << m.cycles << '\n'
      << "  messages_ok: " << m.messages(MessageKind::ok) << '\n'
      << "  messages_nogood: " << m.messages(MessageKind::nogood) << '\n'
      << "  messages_no_solution: " << m.messages(MessageKind::no_solution) << '\n'
      << "  messages_pu_violation: " << m.messages(MessageKind::pu_violation) << '\n'
      << "  messages_conflict: " << m.messages(MessageKind::conflict) << '\n'
      << "  nccc: " << m.nccc << '\n'
      << "  constraint_checks: " << m.total_checks() << '\n'
      << "  avg_power_mw: " << fmt::format("{}", run.avg_power_mw()) << '\n'
      << "  sum_log_rate: " << fmt::format("{}", run.sum_log_rate()) << '\n';
}

}  // namespace awcs
