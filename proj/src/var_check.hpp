#pragma once

// Per-variable constraint bookkeeping shared by the single- and
// multi-variable agents. A snapshot gathers, once per check, the operands of
// every constraint and nogood that mentions the variable, so that scanning a
// domain only substitutes the variable's own value.

#include <map>
#include <set>
#include <span>
#include <vector>

#include "awcs/dcsp.hpp"

namespace awcs::detail {

using Culprits = std::map<VarId, Assignment>;

class VariableCheck {
 public:
  // known(var) -> const Assignment* for every variable other than self.
  template <typename Known>
  void prepare(const PriorityKey& self, std::span<const ConstraintPtr> constraints,
               const std::set<Nogood>& nogoods, Known&& known) {
    self_ = self.var;
    constraints_.clear();
    nogoods_.clear();
    for (const auto& c : constraints) {
      const auto scope = c->scope();
      PreparedConstraint pc;
      pc.constraint = c.get();
      pc.operands.resize(scope.size());
      pc.full = true;
      pc.higher = true;
      bool has_self = false;
      for (std::size_t i = 0; i < scope.size(); ++i) {
        if (scope[i] == self.var) {
          pc.self_positions.push_back(i);
          has_self = true;
          continue;
        }
        const Assignment* a = known(scope[i]);
        if (a == nullptr) {
          pc.full = pc.higher = false;
          break;
        }
        pc.operands[i] = a->value;
        pc.others.push_back(*a);
        if (!outranks({a->priority, a->var}, self)) pc.higher = false;
      }
      if (has_self && pc.full) constraints_.push_back(std::move(pc));
    }
    for (const auto& ng : nogoods) {
      const Assignment* mine = ng.find(self.var);
      if (mine == nullptr) continue;
      PreparedNogood pn;
      pn.self_value = mine->value;
      pn.higher = true;
      bool matches = true;
      for (const auto& m : ng.members()) {
        if (m.var == self.var) continue;
        const Assignment* a = known(m.var);
        if (a == nullptr || a->value != m.value) {
          matches = false;
          break;
        }
        pn.others.push_back(*a);
        if (!outranks({a->priority, a->var}, self)) pn.higher = false;
      }
      if (matches) nogoods_.push_back(std::move(pn));
    }
  }

  // No higher-priority constraint or nogood is violated by self = v.
  bool consistent(Value v, CheckCounter& counter) {
    for (auto& pc : constraints_) {
      if (pc.higher && violated(pc, v, counter)) return false;
    }
    for (const auto& pn : nogoods_) {
      counter.increment();
      if (pn.higher && pn.self_value == v) return false;
    }
    return true;
  }

  // Number of fully determined constraints and nogoods violated by self = v.
  std::size_t conflicts(Value v, CheckCounter& counter) {
    std::size_t n = 0;
    for (auto& pc : constraints_) {
      if (violated(pc, v, counter)) ++n;
    }
    for (const auto& pn : nogoods_) {
      counter.increment();
      if (pn.self_value == v) ++n;
    }
    return n;
  }

  // Adds the higher-priority assignments taking part in any violation of
  // self = v.
  void collect_culprits(Value v, Culprits& out, CheckCounter& counter) {
    for (auto& pc : constraints_) {
      if (!pc.higher || !violated(pc, v, counter)) continue;
      for (const auto& a : pc.others) out.insert_or_assign(a.var, a);
    }
    for (const auto& pn : nogoods_) {
      counter.increment();
      if (!pn.higher || pn.self_value != v) continue;
      for (const auto& a : pn.others) out.insert_or_assign(a.var, a);
    }
  }

  std::vector<Value> consistent_values(const Domain& domain, CheckCounter& counter) {
    std::vector<Value> out;
    for (Value v : domain.values()) {
      if (consistent(v, counter)) out.push_back(v);
    }
    return out;
  }

  Value min_conflict(std::span<const Value> candidates, CheckCounter& counter) {
    Value best = candidates.front();
    std::size_t best_n = static_cast<std::size_t>(-1);
    for (Value v : candidates) {
      std::size_t n = conflicts(v, counter);
      if (n < best_n) {
        best_n = n;
        best = v;
        if (n == 0) break;
      }
    }
    return best;
  }

 private:
  struct PreparedConstraint {
    const Constraint* constraint = nullptr;
    std::vector<Value> operands;
    std::vector<std::size_t> self_positions;
    std::vector<Assignment> others;
    bool full = false;    // every other scope variable known
    bool higher = false;  // ... and every one of them outranks self
  };
  struct PreparedNogood {
    Value self_value = 0;
    std::vector<Assignment> others;
    bool higher = false;
  };

  static bool violated(PreparedConstraint& pc, Value v, CheckCounter& counter) {
    for (auto pos : pc.self_positions) pc.operands[pos] = v;
    counter.increment();
    return !pc.constraint->test(pc.operands);
  }

  VarId self_;
  std::vector<PreparedConstraint> constraints_;
  std::vector<PreparedNogood> nogoods_;
};

}  // namespace awcs::detail
