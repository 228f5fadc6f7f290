#include "awcs/message.hpp"

#include <fmt/format.h>

namespace awcs {

const char* to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::ok: return "ok";
    case MessageKind::nogood: return "nogood";
    case MessageKind::no_solution: return "no_solution";
    case MessageKind::pu_violation: return "pu_violation";
    case MessageKind::conflict: return "conflict";
  }
  return "?";
}

namespace {

struct Summarizer {
  std::string operator()(const OkMsg& m) const {
    std::string s;
    for (const auto& a : m.assignments) {
      if (!s.empty()) s += ' ';
      s += fmt::format("{}={}@{}", to_string(a.var), a.value, a.priority);
    }
    return s;
  }
  std::string operator()(const NogoodMsg& m) const {
    return fmt::format("from {} {}", m.sender, to_string(m.nogood));
  }
  std::string operator()(const NoSolutionMsg&) const { return "empty nogood"; }
  std::string operator()(const PuViolationMsg& m) const { return fmt::format("pu {}", m.pu); }
  std::string operator()(const ConflictMsg& m) const { return fmt::format("victim {}", m.victim); }
};

}  // namespace

std::string summarize(const DcspMessage& m) { return std::visit(Summarizer{}, m); }

}  // namespace awcs
