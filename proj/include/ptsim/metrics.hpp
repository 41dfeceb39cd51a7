#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ptsim/errors.hpp"
#include "ptsim/types.hpp"

namespace ptsim {

// Counter ids accepted by MetricsReport::record. Node-scoped counters take a
// node context; the rest ignore it.
enum class Counter {
  kPtPages,          // node-scoped, current page-table pages (signed delta)
  kPtPagesAllocated,
  kPtPagesFreed,
  kPteCopies,
  kRingLinks,
  kWalkLocal,    // node context abused as level
  kWalkRemote,   // node context abused as level
  kFaultLocalHit,
  kFaultCopied,
  kFaultFresh,
  kFaultSegv,
  kFaultProt,
  kCoherenceLocal,
  kCoherenceRemote,
  kShootdownCalls,
  kShootdownTargets,
  kIpiLocal,
  kIpiRemote,
  kTlbHits,
  kTlbMisses,
  kTlbInvalidations,
  kFramesAllocated,
  kFramesFreed,
  kTraceErrors,
  kEvents,
};

// Cost categories; each charged unit lands in exactly one.
enum class CostKind { kWalk, kData, kFault, kCoherence, kIpi, kTlb, kOverhead };

// Trace-visible operation classes for per-class call/cost accounting.
enum class OpClass {
  kSpawn, kExit, kMigrate, kMmap, kMunmap, kMprotect, kAccess, kSpin
};
std::string op_class_name(OpClass op);

// Central counter registry for one run. Counters only grow (page counts are
// a current level and may shrink, but their allocated/freed components are
// monotone). Two identical runs produce bitwise-identical reports.
class MetricsReport {
 public:
  explicit MetricsReport(int node_count = 0, int levels = 4);

  void record(Counter id, std::uint64_t amount, int node = -1);
  void record_pt_page_delta(NodeId node, int delta);
  void record_cost(CostKind kind, Cost amount);
  void record_op(OpClass op, Cost total_cost);

  // Raw reads used by tests and the acceptance suite.
  std::uint64_t get(Counter id) const;
  std::uint64_t pt_pages(NodeId node) const { return pt_pages_node_.at(node); }
  std::uint64_t pt_pages_total() const;
  std::uint64_t footprint_bytes(NodeId node) const {
    return pt_pages(node) * 4096;
  }
  Cost cost(CostKind kind) const;
  Cost cost_total() const;
  std::uint64_t op_calls(OpClass op) const;
  Cost op_cost(OpClass op) const;
  std::uint64_t walks_local_total() const;
  std::uint64_t walks_remote_total() const;

  // Final-state snapshot columns, filled by the simulator when a run ends.
  void set_ring_histogram(std::vector<std::uint64_t> hist);  // hist[k-1] = pages in rings of size k
  void set_root_replicas(std::uint64_t n) { root_replicas_ = n; }
  std::uint64_t ring_hist(int size) const;
  std::uint64_t root_replicas() const { return root_replicas_; }

  int node_count() const { return node_count_; }
  int levels() const { return levels_; }

  // Stable name -> value view; names are the CSV columns.
  std::map<std::string, std::uint64_t> rows() const;

 private:
  int node_count_;
  int levels_;
  std::map<Counter, std::uint64_t> scalars_;
  std::vector<std::uint64_t> pt_pages_node_;
  std::vector<std::uint64_t> walk_local_level_;
  std::vector<std::uint64_t> walk_remote_level_;
  std::map<CostKind, Cost> costs_;
  std::map<OpClass, std::uint64_t> op_calls_;
  std::map<OpClass, Cost> op_costs_;
  std::vector<std::uint64_t> ring_hist_;
  std::uint64_t root_replicas_ = 0;
};

// One row of the run CSV: identification plus the counters.
struct RunRow {
  std::string run_id;
  std::string policy;
  int prefetch = 0;
  bool tlb_opt = false;
  std::map<std::string, std::uint64_t> counters;
};

// RFC 4180 CSV with the stable column order: run_id, policy, prefetch,
// tlb_opt, then counters alphabetically. With normalize set, appends
// norm_<counter> columns dividing each row by the baseline row.
std::string report_csv(const std::vector<RunRow>& rows, int baseline_row = -1);

}  // namespace ptsim
