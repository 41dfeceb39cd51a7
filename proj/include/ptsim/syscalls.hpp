#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ptsim/metrics.hpp"
#include "ptsim/types.hpp"
#include "ptsim/vmem.hpp"

namespace ptsim {

enum class TraceOp { kSpawn, kExit, kMigrate, kMmap, kMunmap, kMprotect, kAccess, kSpin };

std::string trace_op_name(TraceOp op);
std::optional<TraceOp> trace_op_from_string(const std::string& s);

enum class AccessKind { kRead, kWrite };

// One line of the trace. Fields beyond seq/proc/thread/op are op-specific:
//   spawn:    node
//   migrate:  node
//   mmap:     len, prot, [node] owner override, [addr] fixed placement
//   munmap:   vma id, or addr+len
//   mprotect: addr, len, prot
//   access:   addr, kind
//   spin:     iters
struct TraceEvent {
  std::uint64_t seq = 0;
  ProcId proc = 0;
  ThreadId thread = 0;
  TraceOp op = TraceOp::kSpin;

  NodeId node = kNoNode;
  std::uint64_t len = 0;
  Prot prot;
  std::optional<Vaddr> addr;
  std::int64_t vma = -1;
  AccessKind kind = AccessKind::kRead;
  std::uint64_t iters = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

// Per-event cost breakdown and effects; the JSONL event stream serializes
// this, and the cost-additivity audit recomputes total from the parts.
struct EventSummary {
  std::uint64_t seq = 0;
  OpClass op = OpClass::kSpin;
  Cost cost_walk = 0;
  Cost cost_data = 0;
  Cost cost_fault = 0;
  Cost cost_coherence = 0;
  Cost cost_ipi = 0;
  Cost cost_tlb = 0;
  Cost cost_overhead = 0;
  Cost total = 0;

  std::uint64_t ipis_local = 0;
  std::uint64_t ipis_remote = 0;
  std::uint64_t invalidations = 0;
  std::uint64_t replica_updates = 0;
  std::uint64_t copied_ptes = 0;
  std::string outcome;      // access events: hit/local_hit/copied/fresh/...
  std::string trace_error;  // non-empty when the event was rejected

  Cost parts_sum() const {
    return cost_walk + cost_data + cost_fault + cost_coherence + cost_ipi +
           cost_tlb + cost_overhead;
  }
};

}  // namespace ptsim
