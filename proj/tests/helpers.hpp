#pragma once

// Shared test utilities: simulator factories, a CSV field reader, and the
// randomized trace generator used by the fuzz suites.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ptsim/experiment.hpp"
#include "ptsim/simulator.hpp"
#include "ptsim/workloads.hpp"

namespace ptsim::testing {

inline SimOptions sim_options(ReplicationMode mode, int prefetch = 0,
                              bool tlb_filter = false,
                              AuditMode audit = AuditMode::kFull) {
  SimOptions opt;
  opt.policy.mode = mode;
  opt.policy.prefetch_degree = prefetch;
  opt.policy.tlb_filter = tlb_filter;
  opt.audit = audit;
  return opt;
}

inline Simulator make_sim(int nodes, int cores, ReplicationMode mode,
                          int prefetch = 0, bool tlb_filter = false,
                          AuditMode audit = AuditMode::kFull) {
  return Simulator(build_topology(nodes, cores),
                   sim_options(mode, prefetch, tlb_filter, audit));
}

inline std::vector<EventSummary> run_events(
    Simulator& sim, const std::vector<TraceEvent>& events) {
  std::vector<EventSummary> out;
  out.reserve(events.size());
  for (const TraceEvent& ev : events) out.push_back(sim.apply(ev));
  return out;
}

// Minimal RFC 4180 reader, independent of the writer.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

inline std::map<std::string, std::string> csv_row(const std::string& text,
                                                  std::size_t row = 0) {
  auto rows = parse_csv(text);
  std::map<std::string, std::string> out;
  for (std::size_t c = 0; c < rows.at(0).size(); ++c)
    out[rows[0][c]] = rows.at(row + 1)[c];
  return out;
}

// Randomized but always-well-formed trace over a small working set: one
// thread pinned per node up front, then a mix of spawns, exits, migrations,
// mmaps, partial munmaps, mprotects and accesses (a few of them wild).
struct RandomTraceOptions {
  std::size_t events = 10000;
  std::uint64_t max_live_vmas = 6;
  std::uint64_t max_vma_pages = 8;
  bool wild_accesses = true;
  bool allow_munmap = true;
  bool allow_thread_churn = true;
};

std::vector<TraceEvent> random_trace(std::uint64_t seed,
                                     const MachineTopology& topo,
                                     const AddressLayout& layout,
                                     const RandomTraceOptions& opt);

}  // namespace ptsim::testing
