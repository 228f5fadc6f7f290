#pragma once

// Deterministic discrete-event transport for DCSP agents: a global logical
// time counter, per-ordered-pair FIFO queues with seeded random delays, and
// the run metrics (cycles, messages by kind, non-concurrent constraint
// checks).

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "awcs/message.hpp"

namespace awcs {

struct DelayPolicy {
  enum class Kind { none, fixed, uniform };
  Kind kind = Kind::none;
  std::int64_t steps = 0;  // fixed delay, or the uniform upper bound

  static DelayPolicy none() { return {}; }
  static DelayPolicy fixed(std::int64_t d) { return {Kind::fixed, d}; }
  static DelayPolicy uniform(std::int64_t d_max) { return {Kind::uniform, d_max}; }

  std::int64_t max_delay() const { return kind == Kind::none ? 0 : steps; }
};

std::string to_string(const DelayPolicy& p);

struct Envelope {
  AgentId src = 0;
  AgentId dst = 0;
  DcspMessage payload;
  std::uint64_t send_ltc = 0;
  std::uint64_t deliver_ltc = 0;
  std::uint64_t carried_ltc = 0;
  std::uint64_t carried_nccc = 0;
};

struct RunMetrics {
  std::uint64_t cycles = 0;
  std::array<std::uint64_t, kMessageKinds> messages_by_kind{};
  std::uint64_t nccc = 0;
  std::map<AgentId, std::uint64_t> checks_by_agent;

  std::uint64_t messages(MessageKind k) const {
    return messages_by_kind[static_cast<std::size_t>(k)];
  }
  std::uint64_t total_messages() const;
  std::uint64_t total_checks() const;

  // Appends a later, sequential phase: counters add up.
  RunMetrics& operator+=(const RunMetrics& later);
};

// Receiver's counter after processing a message: concurrent work is not
// counted twice.
inline std::uint64_t nccc_account(std::uint64_t receiver_counter, std::uint64_t carried_nccc,
                                  std::uint64_t local_checks) {
  return std::max(receiver_counter, carried_nccc) + local_checks;
}

class Mailer {
 public:
  Mailer(DelayPolicy policy, std::uint64_t seed);

  // Stamps deliver_ltc and enqueues. The draft's send_ltc is overwritten
  // with the current ltc.
  void send(Envelope draft);

  std::uint64_t ltc() const { return ltc_; }
  bool empty() const { return in_flight_ == 0; }
  std::size_t in_flight() const { return in_flight_; }
  std::uint64_t next_delivery() const;  // requires !empty()

  // Moves the clock forward (never backward).
  void advance_to(std::uint64_t tick);
  // Raises the clock if a carried logical time is ahead of it.
  void observe(std::uint64_t carried_ltc);

  // Removes every envelope due at or before the current ltc, ordered by
  // (dst, src, send order).
  std::vector<Envelope> pop_due();

  const std::array<std::uint64_t, kMessageKinds>& sent_by_kind() const { return sent_; }
  const DelayPolicy& policy() const { return policy_; }

 private:
  std::int64_t sample_delay();

  DelayPolicy policy_;
  std::mt19937_64 rng_;
  std::uint64_t ltc_ = 0;
  std::map<std::pair<AgentId, AgentId>, std::deque<Envelope>> queues_;
  std::map<std::pair<AgentId, AgentId>, std::uint64_t> last_deliver_;
  std::size_t in_flight_ = 0;
  std::array<std::uint64_t, kMessageKinds> sent_{};
};

enum class RunStatus { active, quiescent, no_solution, stalled, cycle_cap };

const char* to_string(RunStatus s);

struct SimulatorOptions {
  std::uint64_t cycle_cap = 100000;
  // Omniscient global check over all current assignments; quiescence also
  // requires it when set.
  std::function<bool(const std::vector<Assignment>&)> global_check;
  // Line-oriented event trace (ltc,src,dst,kind,payload-summary).
  std::ostream* trace = nullptr;
  std::string trace_label;
};

class Simulator {
 public:
  Simulator(std::vector<std::unique_ptr<Agent>> agents, Mailer mailer, SimulatorOptions options);

  void start();
  RunStatus advance_cycle();
  RunStatus run();  // start() + advance_cycle() until not active

  bool quiescence_check() const;
  RunMetrics metrics() const;
  std::vector<Assignment> assignments() const;

  Agent& agent(AgentId id);
  const Agent& agent(AgentId id) const;
  const Mailer& mailer() const { return mailer_; }
  std::size_t size() const { return agents_.size(); }

 private:
  void dispatch(AgentId src, std::vector<Outgoing> out);
  std::size_t index_of(AgentId id) const;

  std::vector<std::unique_ptr<Agent>> agents_;
  std::map<AgentId, std::size_t> index_;
  Mailer mailer_;
  SimulatorOptions options_;
  std::vector<std::uint64_t> stamp_;
  std::vector<std::uint64_t> nccc_;
  std::vector<std::uint64_t> checks_seen_;
  std::uint64_t cycles_ = 0;
  bool started_ = false;
  bool no_solution_emitted_ = false;
  bool no_solution_delivered_ = false;
};

}  // namespace awcs
