#pragma once

// AWCS for agents owning several local variables. The agent repairs its
// locals one at a time and talks to other agents only once the locals are
// mutually consistent.

#include <map>
#include <memory>
#include <set>
#include <vector>

#include "awcs/awcs_single.hpp"
#include "awcs/dcsp.hpp"
#include "awcs/message.hpp"

namespace awcs {

struct LocalVariable {
  VarId var;
  Domain domain;
  Value value = 0;
  Priority priority = 0;
};

// Index of the local that outranks every other one in `violating`
// (positions into `locals`).
std::size_t local_repair_order(std::span<const LocalVariable> locals,
                               std::span<const std::size_t> violating);

class MultiAgent final : public Agent {
 public:
  // One domain per local variable, local indices 0..n-1. `constraints` are
  // all constraints mentioning any local.
  MultiAgent(AgentId id, std::vector<Domain> domains, std::vector<ConstraintPtr> constraints,
             AwcsOptions options = {});
  ~MultiAgent() override;

  AgentId id() const override { return id_; }
  std::vector<Outgoing> start() override;
  std::vector<Outgoing> receive(std::span<const Delivery> batch) override;
  bool is_consistent() const override;
  std::vector<Assignment> assignments() const override;
  std::uint64_t constraint_checks() const override { return checks_.count(); }

  std::vector<Outgoing> handle_ok_multi(const Assignment& assignment);
  std::vector<Outgoing> handle_nogood(AgentId sender, const Nogood& nogood);
  std::vector<Outgoing> check_agent_view_multi();

  std::span<const LocalVariable> locals() const { return locals_; }
  const AgentView& agent_view() const { return view_; }
  const std::set<Nogood>& local_nogoods() const { return nogoods_; }
  const std::set<AgentId>& related_agents() const { return related_all_; }
  bool halted() const { return halted_; }
  // Incremented every time a batch of ok? leaves the agent while some local
  // was still inconsistent with another local. Stays zero by construction.
  std::uint64_t inconsistent_sends() const { return inconsistent_sends_; }

  void set_local(std::int32_t local, Value value, Priority priority);

 private:
  bool local_consistent(std::size_t k, CheckCounter& counter) const;
  bool locals_intra_consistent() const;
  bool violates_intra(std::size_t k) const;
  void prepare(std::size_t k, detail::VariableCheck& check) const;
  void absorb_ok(AgentId sender, const Assignment& a);
  void absorb_nogood(const Nogood& ng);
  std::vector<Outgoing> communicate_changes();
  Priority max_related_priority(std::size_t k) const;

  AgentId id_;
  std::vector<LocalVariable> locals_;
  std::vector<ConstraintPtr> constraints_;
  std::vector<std::vector<ConstraintPtr>> by_local_;
  std::vector<std::set<AgentId>> related_;  // per local, other agents
  std::set<AgentId> related_all_;
  AwcsOptions options_;
  AgentView view_;
  std::set<Nogood> nogoods_;
  std::set<Nogood> nogood_sent_;
  std::vector<Assignment> last_sent_;
  std::set<AgentId> pending_new_;  // related agents that never heard from us
  bool halted_ = false;
  std::uint64_t inconsistent_sends_ = 0;
  CheckCounter checks_;
};

}  // namespace awcs
