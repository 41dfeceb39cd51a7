#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ptsim {

// Exit codes used by the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitTrace = 2,
  kExitInvariant = 3,
};

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration or API misuse (exit code 1).
struct ConfigError : SimError {
  using SimError::SimError;
};

// Malformed or invalid trace input (exit code 2). Carries the 1-based line
// of the offending record when known.
struct TraceFormatError : SimError {
  explicit TraceFormatError(const std::string& msg, std::uint64_t line = 0)
      : SimError(msg), line(line) {}
  std::uint64_t line;
};

// A protocol invariant was violated (exit code 3). The event index is filled
// in by the run loop so audit failures print a minimal counterexample.
struct ProtocolError : SimError {
  explicit ProtocolError(const std::string& msg) : SimError(msg) {}
  std::int64_t event_index = -1;
};

inline void protocol_check(bool ok, const std::string& msg) {
  if (!ok) throw ProtocolError(msg);
}

}  // namespace ptsim
