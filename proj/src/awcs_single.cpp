#include "awcs/awcs_single.hpp"

#include <algorithm>

#include "var_check.hpp"

namespace awcs {

SingleAgent::SingleAgent(AgentId id, Domain domain, std::vector<ConstraintPtr> constraints,
                         std::vector<AgentId> neighbors, AwcsOptions options)
    : id_(id),
      domain_(std::move(domain)),
      constraints_(std::move(constraints)),
      options_(options),
      value_(domain_.front()),
      neighbors_(neighbors.begin(), neighbors.end()),
      check_(std::make_unique<detail::VariableCheck>()) {
  neighbors_.erase(id_);
  for (const auto& c : constraints_) {
    if (!c->in_scope(variable())) {
      throw std::invalid_argument("constraint " + std::to_string(c->id()) +
                                  " does not mention agent " + std::to_string(id_));
    }
  }
}

SingleAgent::~SingleAgent() = default;

void SingleAgent::set_current(Value value, Priority priority) {
  if (!domain_.contains(value)) throw std::invalid_argument("value outside the domain");
  value_ = value;
  priority_ = std::max(priority_, priority);
}

std::vector<Assignment> SingleAgent::assignments() const {
  return {Assignment{variable(), value_, priority_}};
}

std::vector<Outgoing> SingleAgent::ok_to_neighbors() const {
  std::vector<Outgoing> out;
  out.reserve(neighbors_.size());
  for (AgentId n : neighbors_) out.push_back({n, OkMsg{{Assignment{variable(), value_, priority_}}}});
  return out;
}

std::vector<Outgoing> SingleAgent::start() { return ok_to_neighbors(); }

void SingleAgent::prepare(detail::VariableCheck& check) const {
  check.prepare(key(), constraints_, nogood_list_,
                [this](VarId v) -> const Assignment* { return view_.find(v); });
}

bool SingleAgent::is_consistent() const {
  if (halted_) return true;
  detail::VariableCheck check;
  prepare(check);
  CheckCounter scratch;
  return check.consistent(value_, scratch);
}

void SingleAgent::absorb_ok(AgentId sender, const Assignment& a,
                            std::vector<AgentId>& new_neighbors) {
  if (a.var.owner == id_) return;
  // an ok? from an agent we did not know means it added us after a nogood
  if (neighbors_.insert(sender).second) new_neighbors.push_back(sender);
  view_.update(a);
}

void SingleAgent::absorb_nogood(const Nogood& ng, std::vector<AgentId>& new_neighbors) {
  if (options_.nogood_learning) nogood_list_.insert(ng);
  for (const auto& m : ng.members()) {
    AgentId k = m.var.owner;
    if (k == id_ || neighbors_.contains(k)) continue;
    neighbors_.insert(k);
    new_neighbors.push_back(k);
    view_.update(m);
  }
}

std::vector<Outgoing> SingleAgent::finish(std::vector<Outgoing> out,
                                          const std::vector<AgentId>& new_neighbors) const {
  if (new_neighbors.empty()) return out;
  bool announced = std::any_of(out.begin(), out.end(), [](const Outgoing& o) {
    return std::holds_alternative<OkMsg>(o.msg);
  });
  if (!announced) {
    for (AgentId n : new_neighbors) {
      out.push_back({n, OkMsg{{Assignment{variable(), value_, priority_}}}});
    }
  }
  return out;
}

std::vector<Outgoing> SingleAgent::receive(std::span<const Delivery> batch) {
  if (halted_) return {};
  std::vector<AgentId> fresh;
  for (const auto& d : batch) {
    if (const auto* ok = std::get_if<OkMsg>(d.msg)) {
      for (const auto& a : ok->assignments) absorb_ok(d.src, a, fresh);
    } else if (const auto* ng = std::get_if<NogoodMsg>(d.msg)) {
      absorb_nogood(ng->nogood, fresh);
    } else if (std::holds_alternative<NoSolutionMsg>(*d.msg)) {
      halted_ = true;
      return {};
    }
  }
  return finish(check_agent_view(), fresh);
}

std::vector<Outgoing> SingleAgent::handle_ok(const Assignment& assignment) {
  if (halted_) return {};
  std::vector<AgentId> fresh;
  absorb_ok(assignment.var.owner, assignment, fresh);
  return finish(check_agent_view(), fresh);
}

std::vector<Outgoing> SingleAgent::handle_nogood(AgentId /*sender*/, const Nogood& nogood) {
  if (halted_) return {};
  std::vector<AgentId> fresh;
  absorb_nogood(nogood, fresh);
  return finish(check_agent_view(), fresh);
}

std::vector<Outgoing> SingleAgent::check_agent_view() {
  if (halted_) return {};
  std::vector<Outgoing> out;
  bool moved = false;
  // After a priority raise only unary nogoods can still bind, so the second
  // pass either settles or proves the problem unsolvable.
  for (int pass = 0; pass < 3; ++pass) {
    prepare(*check_);
    if (check_->consistent(value_, checks_)) break;
    auto candidates = check_->consistent_values(domain_, checks_);
    if (!candidates.empty()) {
      value_ = check_->min_conflict(candidates, checks_);
      moved = true;
      break;
    }
    const auto step = backtrack_step(out);
    if (step == Step::halted) return out;
    if (step == Step::stale) break;
    moved = true;
  }
  if (moved) {
    auto oks = ok_to_neighbors();
    out.insert(out.end(), std::make_move_iterator(oks.begin()), std::make_move_iterator(oks.end()));
  }
  return out;
}

std::vector<Outgoing> SingleAgent::backtrack() {
  if (halted_) return {};
  prepare(*check_);
  std::vector<Outgoing> out;
  if (backtrack_step(out) == Step::moved) {
    auto oks = ok_to_neighbors();
    out.insert(out.end(), std::make_move_iterator(oks.begin()), std::make_move_iterator(oks.end()));
  }
  return out;
}

SingleAgent::Step SingleAgent::backtrack_step(std::vector<Outgoing>& out) {
  detail::Culprits culprits;
  for (Value v : domain_.values()) check_->collect_culprits(v, culprits, checks_);

  std::vector<Assignment> members;
  members.reserve(culprits.size());
  for (const auto& [_, a] : culprits) members.push_back(a);
  Nogood nogood(std::move(members));

  if (nogood.empty()) {
    halted_ = true;
    out.push_back({kBroadcast, NoSolutionMsg{}});
    return Step::halted;
  }
  if (options_.nogood_learning) {
    if (nogood_sent_.contains(nogood)) return Step::stale;
    nogood_sent_.insert(nogood);
    nogood_list_.insert(nogood);
  }

  std::set<AgentId> recipients;
  for (const auto& m : nogood.members()) recipients.insert(m.var.owner);
  for (AgentId r : recipients) out.push_back({r, NogoodMsg{id_, nogood}});

  priority_ = std::max(priority_, 1 + view_.max_priority());
  // every view entry is now lower priority, so conflicts count all of them
  prepare(*check_);
  value_ = check_->min_conflict(domain_.values(), checks_);
  return Step::moved;
}

}  // namespace awcs
