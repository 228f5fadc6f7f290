#include <doctest.h>

#include "awcs/random_csp.hpp"
#include "oracle.hpp"

using namespace awcs;

using awcs::testing::any_solution;

TEST_CASE("built-in fixtures") {
  CHECK(brute_force_solve(builtin_instance("pair")).has_value());
  CHECK_FALSE(brute_force_solve(builtin_instance("triangle")).has_value());
  CHECK_THROWS_AS(builtin_instance("square"), std::invalid_argument);
}

TEST_CASE("enumerator agrees with exhaustive search") {
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    RandomCspParams p;
    p.agents = 2 + static_cast<int>(seed % 4);
    p.values = 2 + static_cast<int>(seed % 3);
    p.locals_per_agent = 1 + static_cast<int>(seed % 2);
    p.tightness = 0.4;
    const auto inst = random_binary_csp(seed, p);
    const auto found = brute_force_solve(inst);
    CHECK(found.has_value() == any_solution(inst));
    if (found) {
      std::vector<Assignment> a;
      for (std::size_t i = 0; i < found->size(); ++i) a.push_back({inst.variable(i), (*found)[i], 0});
      CHECK(satisfies(inst, a));
    }
  }
}

TEST_CASE("random instances are reproducible") {
  RandomCspParams p;
  const auto a = random_binary_csp(42, p);
  const auto b = random_binary_csp(42, p);
  REQUIRE(a.constraints.size() == b.constraints.size());
  for (std::size_t i = 0; i < a.constraints.size(); ++i) {
    CHECK(std::vector<VarId>(a.constraints[i]->scope().begin(), a.constraints[i]->scope().end()) ==
          std::vector<VarId>(b.constraints[i]->scope().begin(), b.constraints[i]->scope().end()));
  }
  CHECK(brute_force_solve(a) == brute_force_solve(b));
}

TEST_CASE("validation cases stay inside the advertised sizes") {
  for (int i = 0; i < 50; ++i) {
    const auto single = validation_case(3, i, false);
    CHECK(single.instance.agents >= 3);
    CHECK(single.instance.agents <= 6);
    CHECK(single.instance.domains.front().size() >= 2);
    CHECK(single.instance.domains.front().size() <= 5);
    const auto multi = validation_case(3, i, true);
    CHECK(multi.instance.agents >= 2);
    CHECK(multi.instance.agents <= 4);
    CHECK(multi.instance.locals_per_agent == 2);
    CHECK(multi.instance.domains.front().size() <= 4);
  }
}

TEST_CASE("dropping constraints is caught by the oracle") {
  int mismatches = 0;
  for (int i = 0; i < 30; ++i) mismatches += !validate_case(validation_case(1, i, false), true).matched;
  CHECK(mismatches > 0);
}
