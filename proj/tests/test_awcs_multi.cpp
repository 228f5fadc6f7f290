#include <doctest.h>

#include "awcs/awcs_multi.hpp"
#include "awcs/random_csp.hpp"
#include "oracle.hpp"

using namespace awcs;

namespace {

ConstraintPtr not_equal(int id, VarId a, VarId b) {
  return std::make_shared<const Constraint>(
      id, std::vector<VarId>{a, b}, [](std::span<const Value> v) { return v[0] != v[1]; });
}

}  // namespace

TEST_CASE("repair order picks the highest-priority violating local") {
  std::vector<LocalVariable> locals{{{0, 0}, Domain({1, 0}), 1, 0},
                                    {{0, 1}, Domain({1, 0}), 1, 2},
                                    {{0, 2}, Domain({1, 0}), 1, 2}};
  const std::vector<std::size_t> violating{0, 2, 1};
  CHECK(local_repair_order(locals, violating) == 1);
  CHECK_THROWS(local_repair_order(locals, std::span<const std::size_t>{}));
}

TEST_CASE("intra-agent constraints are settled before anything is sent") {
  MultiAgent a(0, {Domain({1, 0}), Domain({1, 0})}, {not_equal(0, {0, 0}, {0, 1})});
  const auto out = a.start();
  CHECK(out.empty());  // nobody else is related
  CHECK(a.locals()[0].value != a.locals()[1].value);
  CHECK(a.is_consistent());
}

TEST_CASE("ok messages carry only the locals a neighbor depends on") {
  MultiAgent a(0, {Domain({1, 0}), Domain({1, 0})}, {not_equal(0, {0, 1}, {1, 0})});
  const auto out = a.start();
  REQUIRE(out.size() == 1);
  CHECK(out[0].dst == 1);
  const auto& first = std::get<OkMsg>(out[0].msg).assignments;
  REQUIRE(first.size() == 1);
  CHECK(first[0].var == VarId{0, 1});
  a.set_local(1, 0, 0);
  const auto later = a.check_agent_view_multi();
  REQUIRE(later.size() == 1);
  const auto& sent = std::get<OkMsg>(later[0].msg).assignments;
  REQUIRE(sent.size() == 1);
  CHECK(sent[0].var == VarId{0, 1});
}

TEST_CASE("multi-variable search matches exhaustive enumeration") {
  for (int i = 0; i < 60; ++i) {
    const auto c = validation_case(77, i, true);
    const bool truth = testing::any_solution(c.instance);
    const auto r = solve_with_awcs(c.instance, c.options);
    CAPTURE(i);
    if (truth) {
      CHECK(r.status == RunStatus::quiescent);
      CHECK(satisfies(c.instance, r.assignment));
    } else {
      CHECK(r.status == RunStatus::no_solution);
    }
    CHECK(r.inconsistent_sends == 0);
  }
}

TEST_CASE("constraints must mention the agent") {
  CHECK_THROWS_AS(MultiAgent(0, {Domain({1, 0})}, {not_equal(0, {1, 0}, {2, 0})}),
                  std::invalid_argument);
  CHECK_THROWS_AS(MultiAgent(0, {Domain({1, 0})}, {not_equal(0, {0, 3}, {2, 0})}),
                  std::invalid_argument);
}
