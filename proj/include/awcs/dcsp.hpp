#pragma once

// Distributed-CSP substrate: variables, domains, constraints, agent views,
// nogoods and the priority order shared by every AWCS agent.

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace awcs {

using AgentId = std::int32_t;

// Integer quantum of the owning variable's unit (microwatts for power,
// bits/s for rate, plain labels for abstract CSPs).
using Value = std::int64_t;

using Priority = std::int64_t;

struct VarId {
  AgentId owner = 0;
  std::int32_t local = 0;

  friend auto operator<=>(const VarId&, const VarId&) = default;
};

std::string to_string(const VarId& var);

// Finite domain in descending preference order. The first element is the
// preferred (largest) value.
class Domain {
 public:
  Domain() = default;
  explicit Domain(std::vector<Value> values);

  std::span<const Value> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  Value front() const { return values_.front(); }
  Value back() const { return values_.back(); }
  Value operator[](std::size_t i) const { return values_[i]; }
  bool contains(Value v) const;
  std::optional<std::size_t> position(Value v) const;

  // Levels <= cap, order preserved. Empty when cap is below every level.
  Domain truncated_at(Value cap) const;

  friend bool operator==(const Domain&, const Domain&) = default;

 private:
  std::vector<Value> values_;
};

struct Assignment {
  VarId var;
  Value value = 0;
  Priority priority = 0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

// Priority triple used to order variables. A key is "higher" when its
// priority value is larger; ties go to the lower agent id, then the lower
// local index.
struct PriorityKey {
  Priority priority = 0;
  VarId var;
};

// Returns greater when a has higher priority than b.
std::strong_ordering priority_order(const PriorityKey& a, const PriorityKey& b);

inline bool outranks(const PriorityKey& a, const PriorityKey& b) {
  return priority_order(a, b) == std::strong_ordering::greater;
}

// Latest known assignment per variable. Replacing an entry takes the new
// value but never lowers the stored priority.
class AgentView {
 public:
  using Map = std::map<VarId, Assignment>;

  void update(const Assignment& a);
  const Assignment* find(VarId var) const;
  bool contains(VarId var) const { return entries_.contains(var); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  Priority max_priority() const;  // 0 for an empty view
  void clear() { entries_.clear(); }

  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

 private:
  Map entries_;
};

// Set of assignments known to admit no consistent extension. Equality and
// ordering look only at (variable, value); the carried priorities are
// metadata used when a receiver learns about a new neighbor.
class Nogood {
 public:
  Nogood() = default;
  explicit Nogood(std::vector<Assignment> members);

  std::span<const Assignment> members() const { return members_; }
  bool empty() const { return members_.empty(); }
  std::size_t size() const { return members_.size(); }
  const Assignment* find(VarId var) const;
  bool mentions(VarId var) const { return find(var) != nullptr; }

  friend bool operator==(const Nogood& a, const Nogood& b);
  friend std::strong_ordering operator<=>(const Nogood& a, const Nogood& b);

 private:
  std::vector<Assignment> members_;  // sorted by var, unique vars
};

std::string to_string(const Nogood& ng);

enum class Verdict { satisfied, violated, undetermined };

class CheckCounter {
 public:
  void increment(std::uint64_t n = 1) { count_ += n; }
  std::uint64_t count() const { return count_; }
  void reset() { count_ = 0; }

 private:
  std::uint64_t count_ = 0;
};

class Constraint {
 public:
  // Receives the scope's values in scope order; true means satisfied.
  using Predicate = std::function<bool(std::span<const Value>)>;

  Constraint(int id, std::vector<VarId> scope, Predicate predicate);

  int id() const { return id_; }
  std::span<const VarId> scope() const { return scope_; }
  bool in_scope(VarId var) const;
  bool test(std::span<const Value> values) const { return predicate_(values); }

  // Same predicate over a renamed scope (same arity).
  Constraint with_scope(std::vector<VarId> scope) const;

 private:
  int id_;
  std::vector<VarId> scope_;
  Predicate predicate_;
};

using ConstraintPtr = std::shared_ptr<const Constraint>;

// Evaluates a constraint against any lookup VarId -> const Value* (nullptr
// for unknown). Counts one check per full-scope evaluation.
template <typename Lookup>
  requires std::is_invocable_r_v<const Value*, Lookup, VarId>
Verdict evaluate(const Constraint& c, Lookup&& lookup, CheckCounter& counter) {
  Value small[16];
  std::vector<Value> large;
  const auto scope = c.scope();
  Value* out = small;
  if (scope.size() > std::size(small)) {
    large.resize(scope.size());
    out = large.data();
  }
  for (std::size_t i = 0; i < scope.size(); ++i) {
    const Value* v = lookup(scope[i]);
    if (v == nullptr) return Verdict::undetermined;
    out[i] = *v;
  }
  counter.increment();
  return c.test(std::span<const Value>(out, scope.size())) ? Verdict::satisfied
                                                           : Verdict::violated;
}

Verdict evaluate(const Constraint& c, const AgentView& view, CheckCounter& counter);

// Values v of `var` (domain order) such that no constraint is violated by
// view + {var = v}; undetermined does not block.
std::vector<Value> consistent_values(const Domain& domain, VarId var, const AgentView& view,
                                     std::span<const ConstraintPtr> constraints,
                                     CheckCounter& counter);

// Candidate violating the fewest constraints under view + {var = v}. Ties
// go to the earliest candidate.
Value min_conflict_value(std::span<const Value> candidates, VarId var, const AgentView& view,
                         std::span<const ConstraintPtr> lower_priority_constraints,
                         CheckCounter& counter);

}  // namespace awcs
