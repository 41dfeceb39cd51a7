#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ptsim/metrics.hpp"
#include "ptsim/mmu.hpp"
#include "ptsim/policy.hpp"
#include "ptsim/syscalls.hpp"
#include "ptsim/topology.hpp"
#include "ptsim/vmem.hpp"

namespace ptsim {

enum class AuditMode { kOff, kSampled, kFull };

// Constants charged on top of the modeled memory accesses. All default to 0;
// the cost model stays purely access-based unless configured otherwise.
struct SyscallOverheads {
  Cost mmap_call = 0;
  Cost munmap_call = 0;
  Cost mprotect_call = 0;
  Cost fault_software = 0;
};

struct SimOptions {
  AddressLayout layout;
  ReplicationPolicy policy;
  AuditMode audit = AuditMode::kSampled;
  int audit_interval = 64;          // events between sampled audits
  std::size_t tlb_capacity = 1088;  // bounded mode only (L2 1024 + L1 64)
  bool interference = false;        // price remote accesses at the interfered rate
  SyscallOverheads overheads;
  Vaddr va_base = Vaddr{1} << 32;   // first address handed out by mmap
};

// The trace-driven engine. Applies events strictly in order; all "threads"
// are placement state interleaved by this single-threaded executor, so two
// simulators never share mutable state and runs parallelize trivially.
class Simulator {
 public:
  Simulator(const MachineTopology& topo, const SimOptions& options);

  // --- trace execution -----------------------------------------------------
  EventSummary apply(const TraceEvent& ev);
  std::uint64_t events_applied() const { return events_applied_; }

  // --- syscall layer -------------------------------------------------------
  EventSummary op_thread_spawn(ProcId proc, ThreadId thread, NodeId node);
  EventSummary op_thread_exit(ProcId proc, ThreadId thread);
  EventSummary op_migrate(ProcId proc, ThreadId thread, NodeId new_node);
  EventSummary op_mmap(ProcId proc, ThreadId thread, std::uint64_t length,
                       Prot prot, NodeId owner_override = kNoNode,
                       std::optional<Vaddr> fixed_addr = std::nullopt);
  EventSummary op_munmap(ProcId proc, ThreadId thread, VirtRange range);
  EventSummary op_munmap_vma(ProcId proc, ThreadId thread, std::int64_t vma_id);
  EventSummary op_mprotect(ProcId proc, ThreadId thread, VirtRange range,
                           Prot new_prot);
  EventSummary op_access(ProcId proc, ThreadId thread, Vaddr vaddr,
                         AccessKind kind);
  EventSummary op_spin(ProcId proc, ThreadId thread, std::uint64_t iters);

  // --- mmu layer -----------------------------------------------------------
  // Translation lookup in one core's TLB. Charges the (usually free) hit cost.
  const TlbEntry* tlb_lookup(CoreId core, Vpn vpn, EventSummary& s);
  // Walk the node's replica tree (the single tree under no-replication).
  WalkResult walk(ProcessSpace& space, NodeId node, Vaddr vaddr,
                  EventSummary& s);
  FaultResult handle_fault(ProcessSpace& space, ThreadId thread, Vaddr vaddr,
                           AccessKind kind, EventSummary& s);
  // Deliver one synchronous shootdown to the target cores, invalidating the
  // VPN range. The initiator drops its own entries at zero IPI cost.
  void apply_shootdown(ProcessSpace& space, const std::vector<CoreId>& targets,
                       CoreId initiator, Vpn lo, Vpn hi, EventSummary& s);
  // OR-reduction of accessed/dirty bits over all replicas of the VPN's PTE.
  std::optional<std::pair<bool, bool>> aggregate_ad_bits(ProcessSpace& space,
                                                         Vpn vpn) const;

  // --- state access --------------------------------------------------------
  const MachineTopology& topology() const { return topo_; }
  const AddressLayout& layout() const { return options_.layout; }
  const ReplicationPolicy& policy() const { return options_.policy; }
  const SimOptions& options() const { return options_; }
  MetricsReport& metrics() { return metrics_; }
  const MetricsReport& metrics() const { return metrics_; }
  ProcessSpace& space(ProcId proc);
  bool has_space(ProcId proc) const { return spaces_.count(proc) != 0; }
  const std::map<ProcId, std::unique_ptr<ProcessSpace>>& spaces() const {
    return spaces_;
  }
  CoreTlb& tlb(CoreId core) { return tlbs_.at(core); }
  const CoreTlb& tlb(CoreId core) const { return tlbs_.at(core); }
  NodeId frame_node(FrameId frame) const { return frame_nodes_.at(frame); }

  // Fills the end-of-run snapshot columns (ring histogram, root replicas).
  void finalize_metrics();

  // --- audit ---------------------------------------------------------------
  // Exhaustive protocol sweep; throws ProtocolError on the first violation.
  void audit_now() const;

 private:
  struct PathCharge;

  // Page-table plumbing. charge_from is the CPU performing the work (it may
  // differ from the tree's node when a remote faulter grows the owner tree).
  PageTablePage* ensure_root(ProcessSpace& space, NodeId node, EventSummary& s,
                             NodeId charge_from = kNoNode);
  PageTablePage* find_root(const ProcessSpace& space, NodeId node) const;
  // Walk root's tree on behalf of a CPU on from_node, charging per level.
  WalkResult walk_tree(PageTablePage* root, NodeId from_node,
                       const SplitAddress& split, EventSummary& s);
  PageTablePage* descend(PageTablePage* root, const SplitAddress& split,
                         int down_to_level) const;
  // Creates any missing pages from the root of `node`'s tree down to the
  // leaf for vaddr, placing them on `place_on` and ring-linking each new page
  // to `counterpart_root`'s same-span page when one exists.
  PageTablePage* ensure_path(ProcessSpace& space, NodeId tree_node,
                             NodeId place_on, const SplitAddress& split,
                             Vaddr vaddr, EventSummary& s, CostKind cost_kind,
                             NodeId charge_from);
  void write_pte(PageTablePage* leaf, int index, const Pte& pte);
  void clear_pte(PageTablePage* leaf, int index);
  void reclaim_if_empty(ProcessSpace& space, PageTablePage* page);
  FrameId alloc_frame(NodeId node);

  // Fault-path helpers; accessed/dirty bits are set later by finish_access.
  FaultResult fault_lazy(ProcessSpace& space, const Vma& vma, NodeId node,
                         Vaddr vaddr, EventSummary& s);
  FaultResult fault_no_replication(ProcessSpace& space, const Vma& vma,
                                   NodeId node, Vaddr vaddr, EventSummary& s);
  FaultResult fault_eager(ProcessSpace& space, const Vma& vma, NodeId node,
                          Vaddr vaddr, EventSummary& s);
  void finish_access(ProcessSpace& space, NodeId node, CoreId core, Vpn vpn,
                     AccessKind kind);

  // Shared munmap/mprotect machinery: visit resident leaf pages of the
  // owner tree (single tree under no-replication) intersecting the range.
  void for_each_resident_leaf(ProcessSpace& space, VirtRange range,
                              const std::function<void(PageTablePage*, int)>& fn);

  CoreId pick_core(NodeId node);
  void release_core(CoreId core);
  EventSummary trace_error(EventSummary s, const std::string& what);
  void charge(EventSummary& s, CostKind kind, Cost amount);
  void maybe_audit();
  void audit_space(const ProcessSpace& space) const;
  // Bounded rolling audit used by sampled mode on large states.
  void audit_bounded();
  void check_page(const ProcessSpace& space, const PageTablePage* page) const;
  void check_tlb_entry(const ProcessSpace& space, NodeId node, Vpn vpn,
                       const TlbEntry& entry) const;

  MachineTopology topo_;
  SimOptions options_;
  MetricsReport metrics_;
  std::map<ProcId, std::unique_ptr<ProcessSpace>> spaces_;
  std::vector<CoreTlb> tlbs_;
  std::vector<bool> core_busy_;
  std::vector<CoreId> node_rr_;  // per-node round-robin spawn cursor
  std::vector<NodeId> frame_nodes_;
  std::uint64_t events_applied_ = 0;
  std::uint64_t audit_page_cursor_ = 0;
};

}  // namespace ptsim
