#pragma once

#include <string>
#include <vector>

#include "ptsim/topology.hpp"
#include "ptsim/vmem.hpp"

namespace ptsim {

enum class ReplicationMode {
  kNoReplication,  // single tree, first-touch page placement
  kEager,          // complete coherent replicas on every node
  kLazy,           // on-demand partial replication with sharer rings
};

std::string mode_to_string(ReplicationMode mode);

// Policy knobs. prefetch_degree and tlb_filter only apply to the lazy mode.
struct ReplicationPolicy {
  ReplicationMode mode = ReplicationMode::kNoReplication;
  int prefetch_degree = 0;  // copy the aligned block of 2^d leaf entries
  bool tlb_filter = false;  // scope shootdowns to sharer nodes

  bool lazy() const { return mode == ReplicationMode::kLazy; }
  int effective_degree() const { return lazy() ? prefetch_degree : 0; }
  bool filters_shootdowns() const { return lazy() && tlb_filter; }
};

// Half-open slot-index range within one leaf page.
struct IndexRange {
  int lo = 0;
  int hi = 0;
  int size() const { return hi - lo; }
  bool contains(int i) const { return i >= lo && i < hi; }
};

// The aligned block of 2^d leaf slots containing pte_index, clamped to the
// leaf page and to the slots whose pages fall inside the enclosing VMA.
// d = bits_per_level yields the whole page when the VMA allows it.
IndexRange prefetch_window(const AddressLayout& layout, int pte_index, int d,
                           const VirtRange& table_span,
                           const VirtRange& vma_span);

// Nodes whose replica of this page must be updated when it changes.
std::vector<NodeId> coherence_targets(const PageTablePage& page,
                                      const ReplicationPolicy& policy,
                                      const MachineTopology& topo);

// Cores that must receive a shootdown IPI when PTEs in this leaf page are
// modified: every core running a thread of the process, minus the initiator,
// restricted to sharer nodes when the policy filters.
std::vector<CoreId> shootdown_targets(const ProcessSpace& space,
                                      const PageTablePage& page,
                                      const ReplicationPolicy& policy,
                                      const MachineTopology& topo,
                                      CoreId initiator);

}  // namespace ptsim
