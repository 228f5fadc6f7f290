#pragma once

#include <string>
#include <variant>
#include <vector>

#include "awcs/dcsp.hpp"

namespace awcs {

// ok?: one or more assignments of the sender's variables.
struct OkMsg {
  std::vector<Assignment> assignments;
};

struct NogoodMsg {
  AgentId sender = 0;
  Nogood nogood;
};

// Empty nogood was derived somewhere; the instance has no solution.
struct NoSolutionMsg {};

// One-bit signal from a primary user whose interference cap is exceeded.
struct PuViolationMsg {
  AgentId pu = 0;
};

// One-bit signal from a victim CR whose SINR requirement cannot be met while
// the recipient transmits in the same slot.
struct ConflictMsg {
  AgentId victim = 0;
};

using DcspMessage = std::variant<OkMsg, NogoodMsg, NoSolutionMsg, PuViolationMsg, ConflictMsg>;

enum class MessageKind { ok, nogood, no_solution, pu_violation, conflict };
inline constexpr std::size_t kMessageKinds = 5;

inline MessageKind kind_of(const DcspMessage& m) { return static_cast<MessageKind>(m.index()); }

const char* to_string(MessageKind kind);
std::string summarize(const DcspMessage& m);

inline constexpr AgentId kBroadcast = -1;

struct Outgoing {
  AgentId dst = 0;
  DcspMessage msg;
};

struct Delivery {
  AgentId src = 0;
  const DcspMessage* msg = nullptr;
};

// A logical actor driven by the mailer. Handlers see a whole batch of
// deliveries at once and return the messages they produce.
class Agent {
 public:
  virtual ~Agent() = default;

  virtual AgentId id() const = 0;
  virtual std::vector<Outgoing> start() = 0;
  virtual std::vector<Outgoing> receive(std::span<const Delivery> batch) = 0;

  // Current value is consistent with everything the agent knows about.
  virtual bool is_consistent() const = 0;
  virtual std::vector<Assignment> assignments() const = 0;
  virtual std::uint64_t constraint_checks() const = 0;
};

}  // namespace awcs
