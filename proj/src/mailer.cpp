#include "awcs/mailer.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "awcs/rng.hpp"

namespace awcs {

std::string to_string(const DelayPolicy& p) {
  switch (p.kind) {
    case DelayPolicy::Kind::none: return "none";
    case DelayPolicy::Kind::fixed: return fmt::format("fixed({})", p.steps);
    case DelayPolicy::Kind::uniform: return fmt::format("uniform(0,{})", p.steps);
  }
  return "?";
}

std::uint64_t RunMetrics::total_messages() const {
  std::uint64_t n = 0;
  for (auto m : messages_by_kind) n += m;
  return n;
}

std::uint64_t RunMetrics::total_checks() const {
  std::uint64_t n = 0;
  for (const auto& [_, c] : checks_by_agent) n += c;
  return n;
}

RunMetrics& RunMetrics::operator+=(const RunMetrics& later) {
  cycles += later.cycles;
  for (std::size_t i = 0; i < kMessageKinds; ++i) messages_by_kind[i] += later.messages_by_kind[i];
  nccc += later.nccc;
  for (const auto& [a, c] : later.checks_by_agent) checks_by_agent[a] += c;
  return *this;
}

Mailer::Mailer(DelayPolicy policy, std::uint64_t seed) : policy_(policy), rng_(seed) {
  if (policy_.kind != DelayPolicy::Kind::none && policy_.steps < 0) {
    throw std::invalid_argument("message delay must be non-negative");
  }
}

std::int64_t Mailer::sample_delay() {
  switch (policy_.kind) {
    case DelayPolicy::Kind::none: return 0;
    case DelayPolicy::Kind::fixed: return policy_.steps;
    case DelayPolicy::Kind::uniform:
      return static_cast<std::int64_t>(
          uniform_below(rng_, static_cast<std::uint64_t>(policy_.steps) + 1));
  }
  return 0;
}

void Mailer::send(Envelope draft) {
  if (draft.src == draft.dst) throw std::invalid_argument("an agent cannot mail itself");
  const auto pair = std::make_pair(draft.src, draft.dst);
  draft.send_ltc = ltc_;
  std::uint64_t deliver = ltc_ + 1 + static_cast<std::uint64_t>(sample_delay());
  auto [it, _] = last_deliver_.try_emplace(pair, 0);
  deliver = std::max(deliver, it->second);  // FIFO clamp
  it->second = deliver;
  draft.deliver_ltc = deliver;
  ++sent_[static_cast<std::size_t>(kind_of(draft.payload))];
  queues_[pair].push_back(std::move(draft));
  ++in_flight_;
}

std::uint64_t Mailer::next_delivery() const {
  std::uint64_t best = ~std::uint64_t{0};
  for (const auto& [_, q] : queues_) {
    if (!q.empty()) best = std::min(best, q.front().deliver_ltc);
  }
  if (best == ~std::uint64_t{0}) throw std::logic_error("no message in flight");
  return best;
}

void Mailer::advance_to(std::uint64_t tick) { ltc_ = std::max(ltc_, tick); }

void Mailer::observe(std::uint64_t carried_ltc) { ltc_ = std::max(ltc_, carried_ltc); }

std::vector<Envelope> Mailer::pop_due() {
  std::vector<Envelope> due;
  for (auto& [_, q] : queues_) {
    while (!q.empty() && q.front().deliver_ltc <= ltc_) {
      due.push_back(std::move(q.front()));
      q.pop_front();
      --in_flight_;
    }
  }
  // queues_ iterate in (src, dst) order; regroup by receiver keeping FIFO
  std::stable_sort(due.begin(), due.end(), [](const Envelope& a, const Envelope& b) {
    return a.dst < b.dst;
  });
  return due;
}

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::active: return "active";
    case RunStatus::quiescent: return "quiescent";
    case RunStatus::no_solution: return "no_solution";
    case RunStatus::stalled: return "stalled";
    case RunStatus::cycle_cap: return "cycle_cap";
  }
  return "?";
}

Simulator::Simulator(std::vector<std::unique_ptr<Agent>> agents, Mailer mailer,
                     SimulatorOptions options)
    : agents_(std::move(agents)), mailer_(std::move(mailer)), options_(std::move(options)) {
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (!index_.emplace(agents_[i]->id(), i).second) {
      throw std::invalid_argument("duplicate agent id " + std::to_string(agents_[i]->id()));
    }
  }
  stamp_.assign(agents_.size(), 0);
  nccc_.assign(agents_.size(), 0);
  checks_seen_.assign(agents_.size(), 0);
}

std::size_t Simulator::index_of(AgentId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("unknown agent " + std::to_string(id));
  return it->second;
}

Agent& Simulator::agent(AgentId id) { return *agents_[index_of(id)]; }
const Agent& Simulator::agent(AgentId id) const { return *agents_[index_of(id)]; }

void Simulator::dispatch(AgentId src, std::vector<Outgoing> out) {
  const std::size_t si = index_of(src);
  for (auto& o : out) {
    if (std::holds_alternative<NoSolutionMsg>(o.msg)) no_solution_emitted_ = true;
    Envelope e;
    e.src = src;
    e.carried_ltc = stamp_[si];
    e.carried_nccc = nccc_[si];
    if (o.dst == kBroadcast) {
      for (const auto& a : agents_) {
        if (a->id() == src) continue;
        e.dst = a->id();
        e.payload = o.msg;
        mailer_.send(e);
      }
    } else {
      index_of(o.dst);
      e.dst = o.dst;
      e.payload = std::move(o.msg);
      mailer_.send(std::move(e));
    }
  }
}

void Simulator::start() {
  if (started_) return;
  started_ = true;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    auto out = agents_[i]->start();
    const auto checks = agents_[i]->constraint_checks();
    nccc_[i] = nccc_account(nccc_[i], 0, checks - checks_seen_[i]);
    checks_seen_[i] = checks;
    dispatch(agents_[i]->id(), std::move(out));
  }
}

bool Simulator::quiescence_check() const {
  if (!mailer_.empty()) return false;
  for (const auto& a : agents_) {
    if (!a->is_consistent()) return false;
  }
  return !options_.global_check || options_.global_check(assignments());
}

std::vector<Assignment> Simulator::assignments() const {
  std::vector<Assignment> all;
  for (const auto& a : agents_) {
    auto mine = a->assignments();
    all.insert(all.end(), mine.begin(), mine.end());
  }
  return all;
}

RunMetrics Simulator::metrics() const {
  RunMetrics m;
  m.cycles = cycles_;
  m.messages_by_kind = mailer_.sent_by_kind();
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    m.nccc = std::max(m.nccc, nccc_[i]);
    m.checks_by_agent[agents_[i]->id()] = agents_[i]->constraint_checks();
  }
  return m;
}

RunStatus Simulator::advance_cycle() {
  if (!started_) start();
  if (no_solution_delivered_) return RunStatus::no_solution;
  if (mailer_.empty()) {
    if (no_solution_emitted_) return RunStatus::no_solution;
    return quiescence_check() ? RunStatus::quiescent : RunStatus::stalled;
  }
  if (cycles_ >= options_.cycle_cap) return RunStatus::cycle_cap;

  mailer_.advance_to(mailer_.next_delivery());
  auto due = mailer_.pop_due();
  ++cycles_;
  if (options_.trace) {
    *options_.trace << fmt::format("# {}cycle {} ltc {}\n", options_.trace_label, cycles_,
                                   mailer_.ltc());
  }

  std::size_t begin = 0;
  while (begin < due.size()) {
    std::size_t end = begin;
    while (end < due.size() && due[end].dst == due[begin].dst) ++end;
    const AgentId dst = due[begin].dst;
    const std::size_t di = index_of(dst);

    std::vector<Delivery> batch;
    std::uint64_t carried_ltc = 0;
    std::uint64_t carried_nccc = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& e = due[i];
      batch.push_back({e.src, &e.payload});
      carried_ltc = std::max(carried_ltc, e.carried_ltc);
      carried_nccc = std::max(carried_nccc, e.carried_nccc);
      mailer_.observe(e.carried_ltc);
      if (std::holds_alternative<NoSolutionMsg>(e.payload)) no_solution_delivered_ = true;
      if (options_.trace) {
        *options_.trace << fmt::format("{},{},{},{},{}\n", mailer_.ltc(), e.src, e.dst,
                                       to_string(kind_of(e.payload)), summarize(e.payload));
      }
    }

    auto out = agents_[di]->receive(batch);
    const auto checks = agents_[di]->constraint_checks();
    nccc_[di] = nccc_account(nccc_[di], carried_nccc, checks - checks_seen_[di]);
    checks_seen_[di] = checks;
    stamp_[di] = std::max(stamp_[di], carried_ltc) + 1;
    dispatch(dst, std::move(out));
    begin = end;
  }

  if (no_solution_delivered_) return RunStatus::no_solution;
  if (mailer_.empty()) {
    if (no_solution_emitted_) return RunStatus::no_solution;
    return quiescence_check() ? RunStatus::quiescent : RunStatus::stalled;
  }
  return RunStatus::active;
}

RunStatus Simulator::run() {
  start();
  RunStatus s = RunStatus::active;
  while (s == RunStatus::active) s = advance_cycle();
  if (options_.trace) *options_.trace << "# " << options_.trace_label << to_string(s) << '\n';
  return s;
}

}  // namespace awcs
