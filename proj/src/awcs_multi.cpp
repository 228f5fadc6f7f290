#include "awcs/awcs_multi.hpp"

#include <algorithm>

#include "var_check.hpp"

namespace awcs {

std::size_t local_repair_order(std::span<const LocalVariable> locals,
                               std::span<const std::size_t> violating) {
  if (violating.empty()) throw std::invalid_argument("local_repair_order needs a violating local");
  std::size_t best = violating.front();
  for (std::size_t k : violating) {
    const auto& a = locals[k];
    const auto& b = locals[best];
    if (outranks({a.priority, a.var}, {b.priority, b.var})) best = k;
  }
  return best;
}

MultiAgent::MultiAgent(AgentId id, std::vector<Domain> domains,
                       std::vector<ConstraintPtr> constraints, AwcsOptions options)
    : id_(id), constraints_(std::move(constraints)), options_(options) {
  if (domains.empty()) throw std::invalid_argument("agent needs at least one local variable");
  for (std::size_t k = 0; k < domains.size(); ++k) {
    VarId var{id_, static_cast<std::int32_t>(k)};
    Value first = domains[k].front();
    locals_.push_back({var, std::move(domains[k]), first, 0});
  }
  by_local_.resize(locals_.size());
  related_.resize(locals_.size());
  for (const auto& c : constraints_) {
    bool mine = false;
    for (const auto& v : c->scope()) {
      if (v.owner != id_) continue;
      if (v.local < 0 || static_cast<std::size_t>(v.local) >= locals_.size()) {
        throw std::invalid_argument("constraint mentions unknown local " + to_string(v));
      }
      mine = true;
    }
    if (!mine) {
      throw std::invalid_argument("constraint " + std::to_string(c->id()) +
                                  " does not mention agent " + std::to_string(id_));
    }
    for (std::size_t k = 0; k < locals_.size(); ++k) {
      if (!c->in_scope(locals_[k].var)) continue;
      by_local_[k].push_back(c);
      for (const auto& v : c->scope()) {
        if (v.owner != id_) related_[k].insert(v.owner);
      }
    }
  }
  for (const auto& r : related_) related_all_.insert(r.begin(), r.end());
}

MultiAgent::~MultiAgent() = default;

void MultiAgent::set_local(std::int32_t local, Value value, Priority priority) {
  auto& l = locals_.at(static_cast<std::size_t>(local));
  if (!l.domain.contains(value)) throw std::invalid_argument("value outside the domain");
  l.value = value;
  l.priority = std::max(l.priority, priority);
}

std::vector<Assignment> MultiAgent::assignments() const {
  std::vector<Assignment> out;
  for (const auto& l : locals_) out.push_back({l.var, l.value, l.priority});
  return out;
}

void MultiAgent::prepare(std::size_t k, detail::VariableCheck& check) const {
  std::vector<Assignment> mine = assignments();
  const auto& self = locals_[k];
  check.prepare({self.priority, self.var}, by_local_[k], nogoods_,
                [&](VarId v) -> const Assignment* {
                  if (v.owner == id_) return &mine[static_cast<std::size_t>(v.local)];
                  return view_.find(v);
                });
}

bool MultiAgent::local_consistent(std::size_t k, CheckCounter& counter) const {
  detail::VariableCheck check;
  prepare(k, check);
  return check.consistent(locals_[k].value, counter);
}

bool MultiAgent::is_consistent() const {
  if (halted_) return true;
  CheckCounter scratch;
  for (std::size_t k = 0; k < locals_.size(); ++k) {
    if (!local_consistent(k, scratch)) return false;
  }
  return true;
}

bool MultiAgent::locals_intra_consistent() const {
  std::vector<Value> operands;
  for (const auto& c : constraints_) {
    const auto scope = c->scope();
    if (!std::all_of(scope.begin(), scope.end(), [&](VarId v) { return v.owner == id_; })) {
      continue;
    }
    operands.clear();
    for (VarId v : scope) operands.push_back(locals_[static_cast<std::size_t>(v.local)].value);
    if (!c->test(operands)) return false;
  }
  return true;
}

bool MultiAgent::violates_intra(std::size_t k) const {
  std::vector<Value> operands;
  for (const auto& c : by_local_[k]) {
    const auto scope = c->scope();
    if (!std::all_of(scope.begin(), scope.end(), [&](VarId v) { return v.owner == id_; })) {
      continue;
    }
    operands.clear();
    for (VarId v : scope) operands.push_back(locals_[static_cast<std::size_t>(v.local)].value);
    if (!c->test(operands)) return true;
  }
  return false;
}

void MultiAgent::absorb_ok(AgentId sender, const Assignment& a) {
  if (a.var.owner == id_) return;
  if (related_all_.insert(sender).second) pending_new_.insert(sender);
  view_.update(a);
}

void MultiAgent::absorb_nogood(const Nogood& ng) {
  if (options_.nogood_learning) nogoods_.insert(ng);
  for (const auto& m : ng.members()) {
    if (m.var.owner == id_) {
      // every other owner in the nogood now needs this local
      auto& mine = related_[static_cast<std::size_t>(m.var.local)];
      for (const auto& o : ng.members()) {
        if (o.var.owner == id_ || !mine.insert(o.var.owner).second) continue;
        related_all_.insert(o.var.owner);
        pending_new_.insert(o.var.owner);
      }
      continue;
    }
    if (!view_.contains(m.var)) view_.update(m);
    if (related_all_.insert(m.var.owner).second) pending_new_.insert(m.var.owner);
  }
}

Priority MultiAgent::max_related_priority(std::size_t k) const {
  Priority p = view_.max_priority();
  for (std::size_t j = 0; j < locals_.size(); ++j) {
    if (j != k) p = std::max(p, locals_[j].priority);
  }
  return p;
}

std::vector<Outgoing> MultiAgent::communicate_changes() {
  std::vector<std::size_t> changed;
  for (std::size_t k = 0; k < locals_.size(); ++k) {
    const auto& l = locals_[k];
    if (k >= last_sent_.size() || last_sent_[k].value != l.value ||
        last_sent_[k].priority != l.priority) {
      changed.push_back(k);
    }
  }
  std::vector<Outgoing> out;
  if (changed.empty() && pending_new_.empty()) return out;
  if (!locals_intra_consistent()) ++inconsistent_sends_;

  for (AgentId r : related_all_) {
    OkMsg msg;
    if (pending_new_.contains(r)) {
      for (const auto& l : locals_) msg.assignments.push_back({l.var, l.value, l.priority});
    } else {
      for (std::size_t k : changed) {
        if (related_[k].contains(r)) {
          msg.assignments.push_back({locals_[k].var, locals_[k].value, locals_[k].priority});
        }
      }
    }
    if (!msg.assignments.empty()) out.push_back({r, std::move(msg)});
  }
  pending_new_.clear();
  last_sent_ = assignments();
  return out;
}

std::vector<Outgoing> MultiAgent::start() { return check_agent_view_multi(); }

std::vector<Outgoing> MultiAgent::receive(std::span<const Delivery> batch) {
  if (halted_) return {};
  for (const auto& d : batch) {
    if (const auto* ok = std::get_if<OkMsg>(d.msg)) {
      for (const auto& a : ok->assignments) absorb_ok(d.src, a);
    } else if (const auto* ng = std::get_if<NogoodMsg>(d.msg)) {
      absorb_nogood(ng->nogood);
    } else if (std::holds_alternative<NoSolutionMsg>(*d.msg)) {
      halted_ = true;
      return {};
    }
  }
  return check_agent_view_multi();
}

std::vector<Outgoing> MultiAgent::handle_ok_multi(const Assignment& assignment) {
  if (halted_) return {};
  absorb_ok(assignment.var.owner, assignment);
  return check_agent_view_multi();
}

std::vector<Outgoing> MultiAgent::handle_nogood(AgentId /*sender*/, const Nogood& nogood) {
  if (halted_) return {};
  absorb_nogood(nogood);
  return check_agent_view_multi();
}

std::vector<Outgoing> MultiAgent::check_agent_view_multi() {
  if (halted_) return {};
  std::vector<Outgoing> out;
  std::set<std::size_t> stuck;
  std::size_t escapes = 0;
  const std::size_t kMaxEscapes = 4 * locals_.size();
  detail::VariableCheck check;
  const std::size_t guard = 100000 * locals_.size();
  for (std::size_t iter = 0;; ++iter) {
    if (iter > guard) throw std::logic_error("local repair loop did not settle");
    std::vector<std::size_t> violating;
    for (std::size_t k = 0; k < locals_.size(); ++k) {
      if (!stuck.contains(k) && !local_consistent(k, checks_)) violating.push_back(k);
    }
    if (violating.empty()) break;

    const std::size_t k = local_repair_order(locals_, violating);
    auto& x = locals_[k];
    prepare(k, check);
    auto candidates = check.consistent_values(x.domain, checks_);
    if (!candidates.empty()) {
      x.value = check.min_conflict(candidates, checks_);
      stuck.clear();
      continue;
    }

    detail::Culprits culprits;
    for (Value v : x.domain.values()) check.collect_culprits(v, culprits, checks_);
    std::vector<Assignment> members;
    for (const auto& [_, a] : culprits) members.push_back(a);
    Nogood nogood(std::move(members));
    if (nogood.empty()) {
      halted_ = true;
      out.push_back({kBroadcast, NoSolutionMsg{}});
      return out;
    }
    if (options_.nogood_learning) {
      if (nogood_sent_.contains(nogood)) {
        // An old nogood normally means waiting for the others to move. A
        // local that also breaks an intra-agent constraint would keep the
        // whole agent silent, so it steps above its siblings instead.
        if (escapes < kMaxEscapes && violates_intra(k)) {
          ++escapes;
          x.priority = std::max(x.priority, 1 + max_related_priority(k));
          x.value = check.min_conflict(x.domain.values(), checks_);
          stuck.clear();
        } else {
          stuck.insert(k);
        }
        continue;
      }
      nogood_sent_.insert(nogood);
    }
    absorb_nogood(nogood);  // own members now relate to the other owners
    std::set<AgentId> recipients;
    for (const auto& m : nogood.members()) {
      if (m.var.owner != id_) recipients.insert(m.var.owner);
    }
    for (AgentId r : recipients) out.push_back({r, NogoodMsg{id_, nogood}});

    x.priority = std::max(x.priority, 1 + max_related_priority(k));
    x.value = check.min_conflict(x.domain.values(), checks_);
    stuck.clear();
  }
  // a local waiting on an old nogood does not block the others, but the
  // agent never publishes locals that contradict each other
  if (locals_intra_consistent()) {
    auto oks = communicate_changes();
    out.insert(out.end(), std::make_move_iterator(oks.begin()), std::make_move_iterator(oks.end()));
  }
  return out;
}

}  // namespace awcs
