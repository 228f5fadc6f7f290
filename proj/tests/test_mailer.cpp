#include <doctest.h>

#include <map>
#include <sstream>

#include "awcs/mailer.hpp"

using namespace awcs;

namespace {

Envelope draft(AgentId src, AgentId dst, Value v) {
  Envelope e;
  e.src = src;
  e.dst = dst;
  e.payload = OkMsg{{{{src, 0}, v, 0}}};
  return e;
}

Value value_of(const Envelope& e) { return std::get<OkMsg>(e.payload).assignments[0].value; }

// Forwards a counter to the next agent in a ring until it reaches `limit`.
class Relay final : public Agent {
 public:
  Relay(AgentId id, AgentId next, Value limit, int work) : id_(id), next_(next), limit_(limit), work_(work) {}
  AgentId id() const override { return id_; }
  std::vector<Outgoing> start() override {
    if (id_ != 0) return {};
    return {{next_, OkMsg{{{{id_, 0}, 1, 0}}}}};
  }
  std::vector<Outgoing> receive(std::span<const Delivery> batch) override {
    std::vector<Outgoing> out;
    for (const auto& d : batch) {
      const Value v = std::get<OkMsg>(*d.msg).assignments[0].value;
      checks_ += static_cast<std::uint64_t>(work_);
      if (v < limit_) out.push_back({next_, OkMsg{{{{id_, 0}, v + 1, 0}}}});
    }
    return out;
  }
  bool is_consistent() const override { return true; }
  std::vector<Assignment> assignments() const override { return {}; }
  std::uint64_t constraint_checks() const override { return checks_; }

 private:
  AgentId id_, next_;
  Value limit_;
  int work_;
  std::uint64_t checks_ = 0;
};

std::vector<std::unique_ptr<Agent>> ring(int n, Value limit, int work) {
  std::vector<std::unique_ptr<Agent>> agents;
  for (int i = 0; i < n; ++i) agents.push_back(std::make_unique<Relay>(i, (i + 1) % n, limit, work));
  return agents;
}

}  // namespace

TEST_CASE("fixed delay stamps ltc + 1 + d") {
  Mailer m(DelayPolicy::fixed(3), 1);
  m.send(draft(0, 1, 0));
  CHECK(m.next_delivery() == 4);
  m.advance_to(3);
  CHECK(m.pop_due().empty());
  m.advance_to(4);
  CHECK(m.pop_due().size() == 1);
  CHECK(m.empty());
}

TEST_CASE("random delays never reorder a sender-receiver pair") {
  Mailer m(DelayPolicy::uniform(10), 123);
  for (Value v = 0; v < 200; ++v) {
    m.send(draft(0, 1, v));
    m.send(draft(2, 1, v));
    if (v % 7 == 0) m.advance_to(m.ltc() + 1);
  }
  std::map<AgentId, Value> last;
  while (!m.empty()) {
    m.advance_to(m.next_delivery());
    for (const auto& e : m.pop_due()) {
      auto [it, fresh] = last.try_emplace(e.src, -1);
      CHECK(value_of(e) == it->second + 1);
      it->second = value_of(e);
      CHECK(e.deliver_ltc >= e.send_ltc + 1);
    }
  }
  CHECK(last[0] == 199);
  CHECK(last[2] == 199);
}

TEST_CASE("due envelopes come out grouped by receiver") {
  Mailer m(DelayPolicy::none(), 1);
  m.send(draft(0, 2, 0));
  m.send(draft(1, 0, 0));
  m.send(draft(0, 1, 0));
  m.send(draft(3, 1, 0));
  m.advance_to(1);
  const auto due = m.pop_due();
  std::vector<std::pair<AgentId, AgentId>> order;
  for (const auto& e : due) order.emplace_back(e.dst, e.src);
  CHECK(order == std::vector<std::pair<AgentId, AgentId>>{{0, 1}, {1, 0}, {1, 3}, {2, 0}});
}

TEST_CASE("mailer rejects bad input") {
  CHECK_THROWS_AS(Mailer(DelayPolicy::fixed(-1), 1), std::invalid_argument);
  Mailer m(DelayPolicy::none(), 1);
  CHECK_THROWS_AS(m.send(draft(1, 1, 0)), std::invalid_argument);
  CHECK_THROWS_AS(m.next_delivery(), std::logic_error);
}

TEST_CASE("non-concurrent check accounting") {
  CHECK(nccc_account(3, 5, 2) == 7);
  CHECK(nccc_account(9, 5, 0) == 9);
}

TEST_CASE("a relay ring accumulates sequential checks") {
  Simulator sim(ring(3, 6, 2), Mailer(DelayPolicy::none(), 1), {});
  CHECK(sim.run() == RunStatus::quiescent);
  const auto m = sim.metrics();
  CHECK(m.cycles == 6);
  CHECK(m.messages(MessageKind::ok) == 6);
  // each hop adds its work on top of the carried counter
  CHECK(m.nccc == 12);
  CHECK(m.total_checks() == 12);
}

TEST_CASE("the cycle cap stops a run") {
  SimulatorOptions o;
  o.cycle_cap = 3;
  Simulator sim(ring(2, 100, 1), Mailer(DelayPolicy::none(), 1), o);
  CHECK(sim.run() == RunStatus::cycle_cap);
  CHECK(sim.metrics().cycles == 3);
}

TEST_CASE("traces repeat exactly for a seed") {
  auto trace_of = [](std::uint64_t seed) {
    std::ostringstream t;
    SimulatorOptions o;
    o.trace = &t;
    Simulator sim(ring(4, 20, 1), Mailer(DelayPolicy::uniform(5), seed), o);
    sim.run();
    return t.str();
  };
  CHECK(trace_of(8) == trace_of(8));
  CHECK(trace_of(8).find("# quiescent") != std::string::npos);
}

TEST_CASE("metrics of sequential phases add up") {
  RunMetrics a, b;
  a.cycles = 2;
  a.nccc = 5;
  a.messages_by_kind[0] = 3;
  a.checks_by_agent[1] = 4;
  b.cycles = 1;
  b.nccc = 2;
  b.messages_by_kind[0] = 1;
  b.checks_by_agent[1] = 1;
  a += b;
  CHECK(a.cycles == 3);
  CHECK(a.nccc == 7);
  CHECK(a.total_messages() == 4);
  CHECK(a.total_checks() == 5);
}
