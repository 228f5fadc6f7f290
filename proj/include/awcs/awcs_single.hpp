#pragma once

// Asynchronous weak commitment search for agents owning one variable.

#include <memory>
#include <set>
#include <vector>

#include "awcs/dcsp.hpp"
#include "awcs/message.hpp"

namespace awcs {

namespace detail {
class VariableCheck;
}

struct AwcsOptions {
  // When false, received nogoods are not stored and duplicate suppression
  // is off: agents still bump priorities but learn nothing.
  bool nogood_learning = true;
};

class SingleAgent final : public Agent {
 public:
  // `constraints` are the constraints whose scope contains this agent's
  // variable (local index 0). `neighbors` are the agents sharing one of them.
  SingleAgent(AgentId id, Domain domain, std::vector<ConstraintPtr> constraints,
              std::vector<AgentId> neighbors, AwcsOptions options = {});
  ~SingleAgent() override;

  AgentId id() const override { return id_; }
  std::vector<Outgoing> start() override;
  std::vector<Outgoing> receive(std::span<const Delivery> batch) override;
  bool is_consistent() const override;
  std::vector<Assignment> assignments() const override;
  std::uint64_t constraint_checks() const override { return checks_.count(); }

  std::vector<Outgoing> handle_ok(const Assignment& assignment);
  std::vector<Outgoing> handle_nogood(AgentId sender, const Nogood& nogood);
  std::vector<Outgoing> check_agent_view();
  std::vector<Outgoing> backtrack();

  VarId variable() const { return {id_, 0}; }
  const Domain& domain() const { return domain_; }
  Value current_value() const { return value_; }
  Priority current_priority() const { return priority_; }
  const AgentView& agent_view() const { return view_; }
  const std::set<Nogood>& nogood_list() const { return nogood_list_; }
  const std::set<Nogood>& nogood_sent() const { return nogood_sent_; }
  const std::set<AgentId>& neighbors() const { return neighbors_; }
  bool halted() const { return halted_; }

  // Test hook: place the agent in a given state without messaging.
  void set_current(Value value, Priority priority);

 private:
  enum class Step { moved, stale, halted };

  // Derives and sends the nogood for the current view; on success raises
  // the priority and picks a min-conflict value. Requires a prepared check.
  Step backtrack_step(std::vector<Outgoing>& out);
  PriorityKey key() const { return {priority_, variable()}; }
  void absorb_ok(AgentId sender, const Assignment& a, std::vector<AgentId>& new_neighbors);
  void absorb_nogood(const Nogood& ng, std::vector<AgentId>& new_neighbors);
  std::vector<Outgoing> finish(std::vector<Outgoing> out,
                               const std::vector<AgentId>& new_neighbors) const;
  void prepare(detail::VariableCheck& check) const;
  std::vector<Outgoing> ok_to_neighbors() const;

  AgentId id_;
  Domain domain_;
  std::vector<ConstraintPtr> constraints_;
  AwcsOptions options_;
  Value value_;
  Priority priority_ = 0;
  AgentView view_;
  std::set<Nogood> nogood_list_;
  std::set<Nogood> nogood_sent_;
  std::set<AgentId> neighbors_;
  bool halted_ = false;
  CheckCounter checks_;
  std::unique_ptr<detail::VariableCheck> check_;
};

}  // namespace awcs
