#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "awcs/protocol.hpp"
#include "oracle.hpp"

using namespace awcs;
using awcs::testing::manual_scenario;
using awcs::testing::naive_sinr;

namespace {

std::vector<double> levels_mw(double budget, double step) {
  const Domain d = power_domain(budget, step);
  std::vector<double> out;
  for (Value v : d.values()) out.push_back(to_milliwatts(v));
  return out;
}

// Two links with random direct and cross gains, no PUs.
Scenario random_pair(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> direct(-7.5, -6.0), cross(-8.0, -5.0), gamma(-1.5, 0.3);
  Eigen::MatrixXd g(2, 2);
  g << std::pow(10, direct(rng)), std::pow(10, cross(rng)), std::pow(10, cross(rng)),
      std::pow(10, direct(rng));
  return manual_scenario(g, Eigen::MatrixXd(0, 2), {}, {std::pow(10, gamma(rng)), std::pow(10, gamma(rng))});
}

std::vector<bool> none_silenced(const Scenario& s) { return std::vector<bool>(s.crs.size(), false); }

std::vector<Value> full_caps(const Scenario& s) {
  return std::vector<Value>(s.crs.size(), to_microwatts(s.crs[0].power_budget_mw));
}

}  // namespace

TEST_CASE("loose PU caps cost nothing") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(2, 3, 1e-9);
  auto s = manual_scenario(Eigen::MatrixXd::Identity(3, 3) * 1e-6 + Eigen::MatrixXd::Constant(3, 3, 1e-12), h,
                           {1e6, 1e6}, {1e-3, 1e-3, 1e-3});
  const auto r = phase1_pu_negotiation(s, {});
  CHECK(r.status == RunStatus::quiescent);
  CHECK(r.caps_uw == std::vector<Value>(3, 100000));
  CHECK(r.metrics.messages(MessageKind::pu_violation) == 0);
}

TEST_CASE("a single CR settles at the largest level its PU tolerates") {
  Eigen::MatrixXd h(1, 1);
  h << 0.001;
  auto s = manual_scenario(Eigen::MatrixXd::Constant(1, 1, 1e-6), h, {0.05}, {1e-3});
  const auto r = phase1_pu_negotiation(s, {});
  double expected = 0;
  for (double p : levels_mw(100, 2)) {
    if (0.001 * p <= 0.05) {
      expected = p;
      break;
    }
  }
  CHECK(expected == 50.0);
  CHECK(r.caps_uw[0] == to_microwatts(expected));
  // one report per level from 100 down to 50
  CHECK(r.reports_uw[0].size() == 26);
}

TEST_CASE("an impossible PU cap silences the CR") {
  Eigen::MatrixXd h(1, 1);
  h << 0.001;
  auto s = manual_scenario(Eigen::MatrixXd::Constant(1, 1, 1e-6), h, {1e-6}, {1e-3});
  const auto r = phase1_pu_negotiation(s, {});
  CHECK(r.caps_uw[0] == 0);
  CHECK(admission(s, r.caps_uw) == std::vector<bool>{true});
  const auto run = run_protocol(s, {});
  CHECK(run.feasible());
  CHECK(run.powers_uw[0] == 0);
  CHECK(run.sum_log_rate() == 0.0);
}

TEST_CASE("phase-1 reports only go down and stay within the domain size") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    ScenarioParams p;
    p.n_cr = 7 + static_cast<int>(seed % 10);
    p.pu_cap_min_mw = 3e-10;
    p.pu_cap_max_mw = 3e-9;
    const auto s = generate_scenario(seed, p);
    ProtocolOptions o;
    o.seed = seed;
    o.delay = DelayPolicy::uniform(static_cast<std::int64_t>(seed % 6));
    const auto r = phase1_pu_negotiation(s, o);
    REQUIRE(r.status == RunStatus::quiescent);
    const auto bound = power_domain(p.power_budget_mw, p.power_step_mw).size();
    for (const auto& reports : r.reports_uw) {
      CHECK(reports.size() <= bound);
      for (std::size_t k = 1; k < reports.size(); ++k) CHECK(reports[k] < reports[k - 1]);
    }
    CHECK(pu_safe_all(s, r.caps_uw));
  }
}

TEST_CASE("admission silences CRs that fail even without interference") {
  Eigen::MatrixXd g(2, 2);
  g << 1e-8, 1e-12, 1e-12, 1e-8;
  auto s = manual_scenario(g, Eigen::MatrixXd(0, 2), {}, {1e-3, 1.0});
  const std::vector<Value> caps{100000, 100000};
  // CR0: 1e-8 * 100 / 1e-6 = 1 >= 1e-3; CR1 needs 1.0 and also gets 1.0
  CHECK(admission(s, caps) == std::vector<bool>{false, false});
  s.crs[1].sinr_threshold = 1.5;
  CHECK(admission(s, caps) == std::vector<bool>{false, true});
  const std::vector<Value> zero{0, 100000};
  CHECK(admission(s, zero)[0]);
}

TEST_CASE("phase-2 domains keep levels that clear the threshold over noise") {
  auto s = manual_scenario(Eigen::MatrixXd::Constant(1, 1, 1e-8), Eigen::MatrixXd(0, 1), {}, {0.5});
  // needs p >= 0.5 * 1e-6 / 1e-8 = 50 mW
  const auto d = phase2_power_domain(s, 0, 80000, 0.5);
  REQUIRE(d);
  CHECK(d->front() == 80000);
  CHECK(d->back() == 50000);
  CHECK_FALSE(phase2_power_domain(s, 0, 40000, 0.5));
}

TEST_CASE("CDMA: far-apart CRs keep their caps") {
  Eigen::MatrixXd g = Eigen::MatrixXd::Constant(4, 4, 1e-15);
  g.diagonal().setConstant(1e-6);
  auto s = manual_scenario(g, Eigen::MatrixXd(0, 4), {}, {1e-3, 1e-3, 1e-3, 1e-3});
  const std::vector<Value> caps{100000, 60000, 20000, 2000};
  const auto r = phase2_cdma_equal(s, caps, none_silenced(s), {});
  CHECK(r.status == RunStatus::quiescent);
  CHECK(r.powers_uw == caps);
}

TEST_CASE("CDMA equal rate agrees with the power-grid oracle") {
  std::mt19937_64 rng(31);
  int sat = 0, unsat = 0;
  const auto grid = levels_mw(100, 2);
  for (int t = 0; t < 150; ++t) {
    const auto s = random_pair(rng);
    const auto caps = full_caps(s);
    std::set<std::pair<Value, Value>> good;
    for (double a : grid) {
      for (double b : grid) {
        if (a <= 0 || b <= 0) continue;
        if (naive_sinr(s, 0, {a, b}) >= s.crs[0].sinr_threshold * (1 - kSinrTolerance) &&
            naive_sinr(s, 1, {a, b}) >= s.crs[1].sinr_threshold * (1 - kSinrTolerance)) {
          good.insert({to_microwatts(a), to_microwatts(b)});
        }
      }
    }
    ProtocolOptions o;
    o.seed = static_cast<std::uint64_t>(t);
    o.delay = DelayPolicy::uniform(t % 3);
    const auto r = phase2_cdma_equal(s, caps, none_silenced(s), o);
    CAPTURE(t);
    if (good.empty()) {
      ++unsat;
      CHECK(r.status == RunStatus::no_solution);
    } else {
      ++sat;
      REQUIRE(r.status == RunStatus::quiescent);
      CHECK(good.contains({r.powers_uw[0], r.powers_uw[1]}));
    }
  }
  CHECK(sat > 10);
  CHECK(unsat > 10);
}

TEST_CASE("CDMA unequal rate: a lone CR takes its cap and top rate") {
  auto s = manual_scenario(Eigen::MatrixXd::Constant(1, 1, 1e-6), Eigen::MatrixXd(0, 1), {}, {1e-3});
  const std::vector<Value> caps{40000};
  const auto r = phase2_cdma_unequal(s, caps, {false}, {});
  CHECK(r.status == RunStatus::quiescent);
  CHECK(r.powers_uw[0] == 40000);
  CHECK(r.rates_bps[0] == 256000);
}

TEST_CASE("CDMA unequal rate agrees with the power-by-rate grid oracle") {
  std::mt19937_64 rng(57);
  int sat = 0, unsat = 0;
  const auto grid = levels_mw(100, 10);
  for (int t = 0; t < 60; ++t) {
    auto s = random_pair(rng);
    for (auto& c : s.crs) c.power_step_mw = 10;
    const auto rates = rate_domain(s.crs[0]);
    std::set<std::vector<Value>> good;
    for (double a : grid) {
      for (double b : grid) {
        if (a <= 0 || b <= 0) continue;
        for (Value ra : rates.values()) {
          for (Value rb : rates.values()) {
            const double need_a = s.crs[0].sinr_threshold * static_cast<double>(ra) / 64000.0;
            const double need_b = s.crs[1].sinr_threshold * static_cast<double>(rb) / 64000.0;
            if (naive_sinr(s, 0, {a, b}) >= need_a * (1 - kSinrTolerance) &&
                naive_sinr(s, 1, {a, b}) >= need_b * (1 - kSinrTolerance)) {
              good.insert({to_microwatts(a), ra, to_microwatts(b), rb});
            }
          }
        }
      }
    }
    ProtocolOptions o;
    o.seed = static_cast<std::uint64_t>(t);
    const auto r = phase2_cdma_unequal(s, full_caps(s), none_silenced(s), o);
    CAPTURE(t);
    if (good.empty()) {
      ++unsat;
      CHECK(r.status == RunStatus::no_solution);
    } else {
      ++sat;
      REQUIRE(r.status == RunStatus::quiescent);
      CHECK(good.contains({r.powers_uw[0], r.rates_bps[0], r.powers_uw[1], r.rates_bps[1]}));
    }
  }
  CHECK(sat > 5);
  CHECK(unsat > 5);
}

TEST_CASE("CDMA unequal rate: R_min out of reach alone means no solution") {
  auto s = manual_scenario(Eigen::MatrixXd::Constant(1, 1, 1e-9), Eigen::MatrixXd(0, 1), {}, {1.0});
  const auto r = phase2_cdma_unequal(s, full_caps(s), {false}, {});
  CHECK(r.status == RunStatus::no_solution);
}

TEST_CASE("power floors: everyone at their floor is a solution") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 200; ++t) {
    const auto s = random_pair(rng);
    std::vector<Domain> ds;
    bool empty = false;
    for (Eigen::Index i = 0; i < 2; ++i) {
      auto d = phase2_power_domain(s, i, 100000, s.crs[static_cast<std::size_t>(i)].sinr_threshold);
      if (!d) empty = true;
      else ds.push_back(*d);
    }
    if (empty) continue;
    const std::vector<Eigen::Index> members{0, 1};
    const auto tight = tighten_power_floors(s, ds, members, {{1}, {0}});
    if (!tight) continue;
    const std::vector<double> p{to_milliwatts((*tight)[0].back()), to_milliwatts((*tight)[1].back())};
    CHECK(naive_sinr(s, 0, p) >= s.crs[0].sinr_threshold * (1 - kSinrTolerance));
    CHECK(naive_sinr(s, 1, p) >= s.crs[1].sinr_threshold * (1 - kSinrTolerance));
    CHECK((*tight)[0].front() == ds[0].front());
  }
}

TEST_CASE("partition: connected components with lowest-id heads") {
  const std::vector<AgentId> ids{1, 2, 3, 4, 5, 6, 7};
  const std::vector<std::pair<AgentId, AgentId>> edges{{2, 1}, {4, 2}, {3, 6}, {7, 5}};
  const auto p = partition_from_conflicts(ids, edges);
  REQUIRE(p.sets.size() == 3);
  CHECK(p.sets[0] == std::vector<AgentId>{1, 2, 4});
  CHECK(p.sets[1] == std::vector<AgentId>{3, 6});
  CHECK(p.sets[2] == std::vector<AgentId>{5, 7});
  CHECK(p.heads == std::vector<AgentId>{1, 3, 5});
  CHECK(p.set_of(6) == 1);

  const std::vector<AgentId> abc{1, 2, 3};
  const std::vector<std::pair<AgentId, AgentId>> chain{{1, 2}, {2, 3}};
  CHECK(partition_from_conflicts(abc, chain).sets.size() == 1);
  CHECK(partition_from_conflicts(abc, {}).sets.size() == 3);
}

TEST_CASE("STDMA frames rotate the heads one set per frame") {
  const std::vector<AgentId> ids{1, 2, 3, 4, 5, 6, 7};
  const std::vector<std::pair<AgentId, AgentId>> edges{{2, 1}, {4, 2}, {3, 6}, {7, 5}};
  const auto p = partition_from_conflicts(ids, edges);
  const std::vector<int> demand(7, 1);
  const std::vector<int> one_group(3, 0);
  auto order = [&](int f) { return stdma_schedule(p, ids, demand, one_group, 20, f).set_order; };
  CHECK(order(0) == std::vector<AgentId>{1, 3, 5});
  CHECK(order(1) == std::vector<AgentId>{5, 1, 3});
  CHECK(order(2) == std::vector<AgentId>{3, 5, 1});
  for (int f = 0; f < 7; ++f) CHECK(order(f) == order(f + 3));
}

TEST_CASE("STDMA schedules grant every demand within the frame") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + static_cast<int>(rng() % 8);
    std::vector<AgentId> ids;
    std::vector<int> demand;
    for (int i = 0; i < n; ++i) {
      ids.push_back(i * 3 + 1);
      demand.push_back(static_cast<int>(rng() % 4));
    }
    std::vector<std::pair<AgentId, AgentId>> edges;
    for (int e = 0; e < n / 2; ++e) edges.emplace_back(ids[rng() % n], ids[rng() % n]);
    const auto p = partition_from_conflicts(ids, edges);
    std::vector<int> groups;
    for (std::size_t k = 0; k < p.sets.size(); ++k) groups.push_back(static_cast<int>(rng() % 2));
    const int frame = static_cast<int>(rng() % 5);
    try {
      const auto f = stdma_schedule(p, ids, demand, groups, 12, frame);
      int total = 0;
      for (int y : f.slots_per_pattern) total += y;
      CHECK(total == f.used_slots());
      CHECK(total <= 12);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        int granted = 0;
        for (std::size_t k = 0; k < f.slots_per_pattern.size(); ++k) granted += f.patterns[i][k] * f.slots_per_pattern[k];
        CHECK(granted >= demand[i]);
        CHECK(f.slots_granted(ids[i]) == granted);
      }
      for (const auto& slot : f.slots) {
        std::set<std::size_t> sets;
        std::set<int> gs;
        for (AgentId cr : slot) {
          CHECK(sets.insert(p.set_of(cr)).second);  // one member per set
          gs.insert(groups[p.set_of(cr)]);
        }
        CHECK(gs.size() <= 1);
      }
    } catch (const InfeasibleSchedule& e) {
      CHECK(e.deficit() > 0);
    }
  }
}

TEST_CASE("an overfull frame names its deficit") {
  const std::vector<AgentId> ids{1, 2};
  const std::vector<std::pair<AgentId, AgentId>> edges{{1, 2}};
  const auto p = partition_from_conflicts(ids, edges);
  const std::vector<int> demand{3, 4};
  const std::vector<int> groups{0};
  try {
    stdma_schedule(p, ids, demand, groups, 5, 0);
    FAIL("expected an infeasible schedule");
  } catch (const InfeasibleSchedule& e) {
    CHECK(e.deficit() == 2);
    CHECK(e.needed() == 7);
    CHECK(std::string(e.what()).find("deficit 2") != std::string::npos);
  }
}

TEST_CASE("STDMA probe: isolated CRs form singletons and keep their caps") {
  Eigen::MatrixXd g = Eigen::MatrixXd::Constant(3, 3, 1e-16);
  g.diagonal().setConstant(1e-6);
  auto s = manual_scenario(g, Eigen::MatrixXd(0, 3), {}, {1e-3, 1e-3, 1e-3});
  s.mode = Mode::stdma;
  const std::vector<Value> caps{100000, 50000, 30000};
  const auto probe = stdma_build_partition(s, caps, none_silenced(s), {});
  CHECK(probe.edges.empty());
  CHECK(probe.partition.sets.size() == 3);
  const auto gp = stdma_group_power(s, probe.partition, caps, none_silenced(s), {});
  CHECK_FALSE(gp.degraded);
  CHECK(gp.powers_uw == caps);
}

TEST_CASE("STDMA probe: a strong cross link is reported by its victim") {
  Eigen::MatrixXd g(3, 3);
  g << 1e-6, 1.0, 1e-16,  //
      1e-16, 1e-6, 1e-16,  //
      1e-16, 1e-16, 1e-6;
  auto s = manual_scenario(g, Eigen::MatrixXd(0, 3), {}, {1e-3, 1e-3, 1e-3});
  s.mode = Mode::stdma;
  const auto probe = stdma_build_partition(s, full_caps(s), none_silenced(s), {});
  CHECK(probe.edges == std::vector<std::pair<AgentId, AgentId>>{{0, 1}});
  CHECK(probe.metrics.messages(MessageKind::conflict) == 1);
  CHECK(probe.partition.sets.front() == std::vector<AgentId>{0, 1});
  const auto run = run_protocol(s, {});
  REQUIRE(run.schedule);
  CHECK(run.schedule->used_slots() == 2);
  CHECK(qos_met(s, run));
}

TEST_CASE("whole protocol: PU safety, QoS and caps on generated scenarios") {
  for (Mode mode : {Mode::cdma_equal, Mode::cdma_unequal, Mode::stdma}) {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
      ScenarioParams p;
      p.mode = mode;
      p.n_cr = 5 + static_cast<int>(seed);
      p.pu_cap_min_mw = 3e-10;
      p.pu_cap_max_mw = 1e-8;
      const auto s = generate_scenario(seed, p);
      ProtocolOptions o;
      o.seed = seed;
      o.delay = DelayPolicy::uniform(static_cast<std::int64_t>(seed % 3));
      const auto run = run_protocol(s, o);
      CAPTURE(seed);
      CHECK(run.outcome != Outcome::cycle_cap);
      CHECK(run.outcome != Outcome::stalled);
      CHECK(pu_safe_all(s, run.powers_uw));
      CHECK(qos_met(s, run));
      for (std::size_t i = 0; i < s.crs.size(); ++i) {
        CHECK(run.powers_uw[i] <= run.phase1.caps_uw[i]);
        if (run.silenced[i]) CHECK(run.powers_uw[i] == 0);
      }
      if (run.feasible()) CHECK(run.phase == Phase::done);
    }
  }
}

TEST_CASE("result records repeat byte for byte") {
  ScenarioParams p;
  p.mode = Mode::stdma;
  p.pu_cap_min_mw = p.pu_cap_max_mw = 1e-9;
  const auto s = generate_scenario(8, p);
  ProtocolOptions o;
  o.delay = DelayPolicy::uniform(4);
  o.seed = 8;
  std::ostringstream a, b;
  write_result_record(a, s, run_protocol(s, o), o);
  write_result_record(b, s, run_protocol(s, o), o);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("seed: 8") != std::string::npos);
  CHECK(a.str().find("schedule:") != std::string::npos);
}
