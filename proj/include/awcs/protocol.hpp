#pragma once

// The QoS provisioning protocol: PU interference negotiation, then AWCS
// among the cognitive radios (CDMA equal rate, CDMA unequal rate), or the
// STDMA pipeline of conflict partitioning, group power tuning and circular
// round-robin frame scheduling.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "awcs/awcs_single.hpp"
#include "awcs/mailer.hpp"
#include "awcs/radio.hpp"

namespace awcs {

struct ProtocolOptions {
  DelayPolicy delay;
  std::uint64_t seed = 1;           // mailer delay stream
  std::uint64_t cycle_cap = 200000; // per phase
  int frame_index = 0;              // STDMA rotation
  AwcsOptions awcs;
  std::ostream* trace = nullptr;
};

enum class Phase { pu_negotiation, cr_awcs, stdma_schedule, done, infeasible };
enum class Outcome { feasible, no_solution, infeasible_schedule, cycle_cap, stalled };

const char* to_string(Phase p);
const char* to_string(Outcome o);

// ---- Phase 1 ----

struct PuNegotiation {
  RunStatus status = RunStatus::active;
  std::vector<Value> caps_uw;            // per CR index
  std::vector<std::vector<Value>> reports_uw;  // every reported level, per CR
  RunMetrics metrics;
};

PuNegotiation phase1_pu_negotiation(const Scenario& s, const ProtocolOptions& options);

// CRs that cannot reach their SINR threshold at their cap even without
// other CRs transmitting (a zero cap included).
std::vector<bool> admission(const Scenario& s, std::span<const Value> caps_uw);

// Positive levels up to the cap at which the CR clears its threshold over
// noise alone; higher levels first. Empty when there is none.
std::optional<Domain> phase2_power_domain(const Scenario& s, Eigen::Index i, Value cap_uw,
                           double required_sinr);

// Raises each member's lowest usable level until it clears its threshold
// with every interferer at that interferer's own lowest level. Levels below
// the floor appear in no solution. Returns nullopt when some domain empties;
// otherwise everyone at their floor is a solution.
std::optional<std::vector<Domain>> tighten_power_floors(
    const Scenario& s, std::vector<Domain> domains, std::span<const Eigen::Index> members,
    const std::vector<std::vector<Eigen::Index>>& interferers);

// ---- Phase 2 (CDMA) ----

struct CdmaResult {
  RunStatus status = RunStatus::active;
  std::vector<Value> powers_uw;  // per CR index, 0 when silenced
  std::vector<Value> rates_bps;  // per CR index, 0 when silenced
  RunMetrics metrics;
};

CdmaResult phase2_cdma_equal(const Scenario& s, std::span<const Value> caps_uw,
                             const std::vector<bool>& silenced, const ProtocolOptions& options);

CdmaResult phase2_cdma_unequal(const Scenario& s, std::span<const Value> caps_uw,
                               const std::vector<bool>& silenced, const ProtocolOptions& options);

// ---- STDMA ----

struct InterferingPartition {
  std::vector<std::vector<AgentId>> sets;  // ascending members, ordered by head
  std::vector<AgentId> heads;              // heads[s] = min of sets[s]

  std::size_t set_of(AgentId cr) const;
};

// Connected components of the conflict graph over `ids`.
InterferingPartition partition_from_conflicts(std::span<const AgentId> ids,
                                              std::span<const std::pair<AgentId, AgentId>> edges);

struct ConflictProbe {
  InterferingPartition partition;
  std::vector<std::pair<AgentId, AgentId>> edges;  // (victim, interferer)
  RunMetrics metrics;
  RunStatus status = RunStatus::active;
};

// Active CRs announce their caps; a victim whose pairwise SINR at both caps
// falls short sends a one-bit conflict notice. Silenced CRs form singletons.
ConflictProbe stdma_build_partition(const Scenario& s, std::span<const Value> caps_uw,
                                    const std::vector<bool>& silenced,
                                    const ProtocolOptions& options);

struct GroupPower {
  std::vector<Value> powers_uw;  // per CR index
  std::vector<int> group_of_set; // concurrency group per partition set
  bool degraded = false;         // every set fell back to its own group
  RunMetrics metrics;
  RunStatus status = RunStatus::active;
};

GroupPower stdma_group_power(const Scenario& s, const InterferingPartition& partition,
                             std::span<const Value> caps_uw, const std::vector<bool>& silenced,
                             const ProtocolOptions& options);

struct FrameSchedule {
  std::vector<AgentId> cr_ids;                  // row order of patterns
  std::vector<std::vector<std::uint8_t>> patterns;  // q[i][s]
  std::vector<int> slots_per_pattern;           // y_s
  std::vector<std::vector<AgentId>> slots;      // active CRs per used slot
  std::vector<AgentId> set_order;               // heads in this frame's order
  int rotation_index = 0;

  int used_slots() const { return static_cast<int>(slots.size()); }
  int slots_granted(AgentId cr) const;
};

class InfeasibleSchedule : public std::runtime_error {
 public:
  InfeasibleSchedule(int needed, int available);
  int deficit() const { return needed_ - available_; }
  int needed() const { return needed_; }

 private:
  int needed_;
  int available_;
};

// Heads ascending, rotated right by frame_index. Each set's members (by id)
// take the earliest slots where nobody from their own set and nobody from
// another concurrency group is active. `demands` is indexed like
// `cr_ids`; a zero demand is not scheduled.
FrameSchedule stdma_schedule(const InterferingPartition& partition,
                             std::span<const AgentId> cr_ids, std::span<const int> demands,
                             std::span<const int> group_of_set, int frame_slots, int frame_index);

// ---- whole protocol ----

struct ProtocolRun {
  Phase phase = Phase::pu_negotiation;
  Outcome outcome = Outcome::feasible;
  PuNegotiation phase1;
  std::vector<bool> silenced;
  std::vector<Value> powers_uw;
  std::vector<Value> rates_bps;
  std::optional<InterferingPartition> partition;
  std::optional<FrameSchedule> schedule;
  bool degraded = false;
  int schedule_deficit = 0;
  RunMetrics metrics;  // all phases summed

  bool feasible() const { return outcome == Outcome::feasible; }
  double avg_power_mw() const;
  double sum_log_rate() const;  // over CRs that were not silenced
};

ProtocolRun run_protocol(const Scenario& s, const ProtocolOptions& options);

// Independent checks of a terminal state.
bool pu_safe_all(const Scenario& s, std::span<const Value> powers_uw);
bool qos_met(const Scenario& s, const ProtocolRun& run);

void write_result_record(std::ostream& out, const Scenario& s, const ProtocolRun& run,
                         const ProtocolOptions& options);

}  // namespace awcs
