#include "awcs/dcsp.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace awcs {

std::string to_string(const VarId& var) { return fmt::format("{}.{}", var.owner, var.local); }

Domain::Domain(std::vector<Value> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("domain must not be empty");
  for (std::size_t i = 1; i < values_.size(); ++i) {
    if (!(values_[i] < values_[i - 1])) {
      throw std::invalid_argument("domain values must be strictly descending");
    }
  }
}

bool Domain::contains(Value v) const { return position(v).has_value(); }

std::optional<std::size_t> Domain::position(Value v) const {
  // descending order: binary search with a reversed comparator
  auto it = std::lower_bound(values_.begin(), values_.end(), v, std::greater<>());
  if (it == values_.end() || *it != v) return std::nullopt;
  return static_cast<std::size_t>(it - values_.begin());
}

Domain Domain::truncated_at(Value cap) const {
  Domain d;
  for (Value v : values_) {
    if (v <= cap) d.values_.push_back(v);
  }
  return d;
}

std::strong_ordering priority_order(const PriorityKey& a, const PriorityKey& b) {
  if (a.priority != b.priority) return a.priority <=> b.priority;
  // lower id wins, so the comparison is reversed
  if (a.var.owner != b.var.owner) return b.var.owner <=> a.var.owner;
  return b.var.local <=> a.var.local;
}

void AgentView::update(const Assignment& a) {
  auto [it, inserted] = entries_.try_emplace(a.var, a);
  if (!inserted) {
    it->second.value = a.value;
    it->second.priority = std::max(it->second.priority, a.priority);
  }
}

const Assignment* AgentView::find(VarId var) const {
  auto it = entries_.find(var);
  return it == entries_.end() ? nullptr : &it->second;
}

Priority AgentView::max_priority() const {
  Priority p = 0;
  for (const auto& [_, a] : entries_) p = std::max(p, a.priority);
  return p;
}

Nogood::Nogood(std::vector<Assignment> members) : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end(),
            [](const Assignment& a, const Assignment& b) { return a.var < b.var; });
  for (std::size_t i = 1; i < members_.size(); ++i) {
    if (members_[i].var == members_[i - 1].var) {
      throw std::invalid_argument("nogood mentions " + to_string(members_[i].var) + " twice");
    }
  }
}

const Assignment* Nogood::find(VarId var) const {
  auto it = std::lower_bound(members_.begin(), members_.end(), var,
                             [](const Assignment& a, const VarId& v) { return a.var < v; });
  return (it != members_.end() && it->var == var) ? &*it : nullptr;
}

bool operator==(const Nogood& a, const Nogood& b) {
  return std::equal(a.members_.begin(), a.members_.end(), b.members_.begin(), b.members_.end(),
                    [](const Assignment& x, const Assignment& y) {
                      return x.var == y.var && x.value == y.value;
                    });
}

std::strong_ordering operator<=>(const Nogood& a, const Nogood& b) {
  return std::lexicographical_compare_three_way(
      a.members_.begin(), a.members_.end(), b.members_.begin(), b.members_.end(),
      [](const Assignment& x, const Assignment& y) {
        if (auto c = x.var <=> y.var; c != 0) return c;
        return x.value <=> y.value;
      });
}

std::string to_string(const Nogood& ng) {
  std::string s = "{";
  for (std::size_t i = 0; i < ng.members().size(); ++i) {
    const auto& m = ng.members()[i];
    if (i > 0) s += ' ';
    s += fmt::format("{}={}", to_string(m.var), m.value);
  }
  return s + "}";
}

Constraint::Constraint(int id, std::vector<VarId> scope, Predicate predicate)
    : id_(id), scope_(std::move(scope)), predicate_(std::move(predicate)) {
  if (scope_.empty()) throw std::invalid_argument("constraint scope must not be empty");
  if (!predicate_) throw std::invalid_argument("constraint predicate must be callable");
}

Constraint Constraint::with_scope(std::vector<VarId> scope) const {
  if (scope.size() != scope_.size()) throw std::invalid_argument("rescoping must keep the arity");
  return Constraint(id_, std::move(scope), predicate_);
}

bool Constraint::in_scope(VarId var) const {
  return std::find(scope_.begin(), scope_.end(), var) != scope_.end();
}

Verdict evaluate(const Constraint& c, const AgentView& view, CheckCounter& counter) {
  return evaluate(
      c,
      [&](VarId v) -> const Value* {
        const Assignment* a = view.find(v);
        return a ? &a->value : nullptr;
      },
      counter);
}

namespace {

// view + {var = candidate}
auto substituted(const AgentView& view, VarId var, const Value& candidate) {
  return [&view, var, &candidate](VarId v) -> const Value* {
    if (v == var) return &candidate;
    const Assignment* a = view.find(v);
    return a ? &a->value : nullptr;
  };
}

}  // namespace

std::vector<Value> consistent_values(const Domain& domain, VarId var, const AgentView& view,
                                     std::span<const ConstraintPtr> constraints,
                                     CheckCounter& counter) {
  std::vector<Value> out;
  for (Value v : domain.values()) {
    bool ok = true;
    for (const auto& c : constraints) {
      if (evaluate(*c, substituted(view, var, v), counter) == Verdict::violated) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(v);
  }
  return out;
}

Value min_conflict_value(std::span<const Value> candidates, VarId var, const AgentView& view,
                         std::span<const ConstraintPtr> lower_priority_constraints,
                         CheckCounter& counter) {
  if (candidates.empty()) throw std::invalid_argument("min_conflict_value needs a candidate");
  Value best = candidates.front();
  std::size_t best_count = std::numeric_limits<std::size_t>::max();
  for (Value v : candidates) {
    std::size_t count = 0;
    for (const auto& c : lower_priority_constraints) {
      if (evaluate(*c, substituted(view, var, v), counter) == Verdict::violated) ++count;
    }
    if (count < best_count) {
      best_count = count;
      best = v;
    }
  }
  return best;
}

}  // namespace awcs
