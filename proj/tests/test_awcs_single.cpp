#include <doctest.h>

#include <sstream>

#include "awcs/awcs_single.hpp"
#include "awcs/random_csp.hpp"
#include "oracle.hpp"

using namespace awcs;

namespace {

ConstraintPtr not_equal(int id, VarId a, VarId b) {
  return std::make_shared<const Constraint>(
      id, std::vector<VarId>{a, b}, [](std::span<const Value> v) { return v[0] != v[1]; });
}

template <typename T>
const T* find_msg(const std::vector<Outgoing>& out, AgentId dst) {
  for (const auto& o : out) {
    if (o.dst == dst) {
      if (const auto* m = std::get_if<T>(&o.msg)) return m;
    }
  }
  return nullptr;
}

}  // namespace

TEST_CASE("an agent starts at its preferred value and announces it") {
  SingleAgent a(0, Domain({2, 1, 0}), {not_equal(0, {0, 0}, {1, 0})}, {1});
  CHECK(a.current_value() == 2);
  const auto out = a.start();
  REQUIRE(out.size() == 1);
  CHECK(std::get<OkMsg>(out[0].msg).assignments[0].value == 2);
}

TEST_CASE("higher-priority agents ignore conflicts with lower ones") {
  SingleAgent a(0, Domain({1, 0}), {not_equal(0, {0, 0}, {1, 0})}, {1});
  const auto out = a.handle_ok({{1, 0}, 1, 0});
  CHECK(out.empty());
  CHECK(a.current_value() == 1);
  CHECK(a.is_consistent());
}

TEST_CASE("a lower agent repairs to a consistent value") {
  SingleAgent a(1, Domain({1, 0}), {not_equal(0, {0, 0}, {1, 0})}, {0});
  const auto out = a.handle_ok({{0, 0}, 1, 0});
  CHECK(a.current_value() == 0);
  CHECK(a.current_priority() == 0);
  REQUIRE(find_msg<OkMsg>(out, 0) != nullptr);
}

TEST_CASE("a dead end yields a nogood and a priority raise") {
  SingleAgent a(2, Domain({1, 0}), {not_equal(0, {0, 0}, {2, 0}), not_equal(1, {1, 0}, {2, 0})},
                {0, 1});
  a.handle_ok({{0, 0}, 1, 0});
  const auto out = a.handle_ok({{1, 0}, 0, 3});
  const auto* ng = find_msg<NogoodMsg>(out, 0);
  REQUIRE(ng != nullptr);
  CHECK(find_msg<NogoodMsg>(out, 1) != nullptr);
  CHECK(ng->nogood == Nogood({{{0, 0}, 1, 0}, {{1, 0}, 0, 3}}));
  CHECK(a.current_priority() == 4);
  CHECK(a.nogood_sent().size() == 1);
  // resending the same nogood is suppressed
  const auto again = a.backtrack();
  CHECK(find_msg<NogoodMsg>(again, 0) == nullptr);
}

TEST_CASE("an empty nogood broadcasts no-solution and halts") {
  // unary constraint forbidding every value
  auto never = std::make_shared<const Constraint>(0, std::vector<VarId>{{0, 0}},
                                                  [](std::span<const Value>) { return false; });
  SingleAgent a(0, Domain({1, 0}), {never}, {});
  const auto out = a.check_agent_view();
  REQUIRE(out.size() == 1);
  CHECK(out[0].dst == kBroadcast);
  CHECK(std::holds_alternative<NoSolutionMsg>(out[0].msg));
  CHECK(a.halted());
}

TEST_CASE("a nogood from a stranger adds it as a neighbor") {
  SingleAgent a(0, Domain({1, 0}), {}, {});
  const auto out = a.handle_nogood(3, Nogood({{{0, 0}, 1, 0}, {{3, 0}, 0, 1}}));
  CHECK(a.neighbors().contains(3));
  CHECK(a.current_value() == 0);
  CHECK(find_msg<OkMsg>(out, 3) != nullptr);
}

TEST_CASE("fixtures: pair solves, triangle is refuted") {
  const auto pair = builtin_instance("pair");
  const auto r = solve_with_awcs(pair, {});
  CHECK(r.status == RunStatus::quiescent);
  CHECK(satisfies(pair, r.assignment));
  CHECK(solve_with_awcs(builtin_instance("triangle"), {}).status == RunStatus::no_solution);
}

TEST_CASE("single-variable search matches exhaustive enumeration") {
  for (int i = 0; i < 120; ++i) {
    const auto c = validation_case(99, i, false);
    const bool truth = testing::any_solution(c.instance);
    const auto r = solve_with_awcs(c.instance, c.options);
    CAPTURE(i);
    if (truth) {
      CHECK(r.status == RunStatus::quiescent);
      CHECK(satisfies(c.instance, r.assignment));
    } else {
      CHECK(r.status == RunStatus::no_solution);
    }
  }
}

TEST_CASE("search without nogood learning still solves satisfiable fixtures") {
  CspRunOptions o;
  o.awcs.nogood_learning = false;
  const auto r = solve_with_awcs(builtin_instance("pair"), o);
  CHECK(r.status == RunStatus::quiescent);
}

TEST_CASE("runs are reproducible per seed") {
  const auto c = validation_case(5, 17, false);
  auto opts = c.options;
  opts.delay = DelayPolicy::uniform(4);
  std::ostringstream t1, t2;
  opts.trace = &t1;
  const auto a = solve_with_awcs(c.instance, opts);
  opts.trace = &t2;
  const auto b = solve_with_awcs(c.instance, opts);
  CHECK(t1.str() == t2.str());
  CHECK(a.metrics.cycles == b.metrics.cycles);
  CHECK(a.metrics.nccc == b.metrics.nccc);
}
