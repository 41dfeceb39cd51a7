#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ptsim/metrics.hpp"
#include "ptsim/simulator.hpp"
#include "ptsim/workloads.hpp"

namespace ptsim {

// Everything a single run needs. Exactly one of scenario/trace_path is set.
struct ExperimentConfig {
  int nodes = 8;
  int cores = 18;
  CostParams costs;
  AddressLayout layout;
  ReplicationPolicy policy;

  std::optional<std::string> scenario;
  std::map<std::string, double> params;
  std::optional<std::string> trace_path;
  std::uint64_t seed = 42;

  AuditMode audit = AuditMode::kSampled;
  int audit_interval = 64;
  std::size_t tlb_capacity = 1088;
  bool interference = false;
  SyscallOverheads overheads;

  std::string run_id;           // derived from scenario/trace + seed if empty
  std::string events_path;      // optional per-event JSONL stream
  std::string dump_trace_path;  // optional serialized trace

  void validate() const;
  std::string derived_run_id() const;
};

struct RunOutcome {
  MetricsReport report;
  RunRow row;
  int exit_code = kExitOk;
  std::string error;
  std::int64_t violation_index = -1;  // event index for exit code 3

  bool ok() const { return exit_code == kExitOk; }
};

// Scenario generation or trace parsing (TraceFormatError propagates).
std::vector<TraceEvent> build_events(const ExperimentConfig& config);

// Run on an already-built event sequence. Catches protocol violations
// (exit 3) but lets configuration errors propagate (usage, exit 1).
RunOutcome run_on_events(const ExperimentConfig& config,
                         const std::vector<TraceEvent>& events);

// build_events + run_on_events + optional dump/event-stream files.
// Trace format errors come back as exit code 2.
RunOutcome run_experiment(const ExperimentConfig& config);

struct CompareOutcome {
  std::string csv;
  std::vector<RunOutcome> runs;
  int exit_code = kExitOk;
  std::string error;
};

// One row per policy over the same generated trace and seed, with normalized
// columns against the no-replication row (or the first row if none is not in
// the list). Runs execute in parallel; output order follows the list.
CompareOutcome compare_policies(const ExperimentConfig& base,
                                const std::vector<std::string>& policy_tokens);

// "none", "eager", "lazy", with optional "+opt"/"+noopt" and "+dN" suffixes,
// e.g. "lazy+opt+d9". Unspecified knobs inherit from `base`.
ReplicationPolicy parse_policy_token(const std::string& token,
                                     const ReplicationPolicy& base);
std::string policy_label(const ReplicationPolicy& policy);

// key=value file ('#' comments) carrying topology, costs, layout, TLB and
// overhead settings; applied on top of config defaults.
void apply_config_file(ExperimentConfig& config, const std::string& path);

// JSONL rendering of one event summary (the metrics event stream).
std::string event_summary_json(const EventSummary& s);

}  // namespace ptsim
