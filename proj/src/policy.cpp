#include "ptsim/policy.hpp"

#include <algorithm>
#include <set>

namespace ptsim {

std::string mode_to_string(ReplicationMode mode) {
  switch (mode) {
    case ReplicationMode::kNoReplication: return "none";
    case ReplicationMode::kEager: return "eager";
    case ReplicationMode::kLazy: return "lazy";
  }
  return "?";
}

IndexRange prefetch_window(const AddressLayout& layout, int pte_index, int d,
                           const VirtRange& table_span,
                           const VirtRange& vma_span) {
  const int fanout = layout.fanout();
  if (pte_index < 0 || pte_index >= fanout)
    throw ConfigError("prefetch_window: pte_index out of range");
  if (d < 0 || d > layout.bits_per_level)
    throw ConfigError("prefetch_window: degree out of range");

  const int block = 1 << d;
  IndexRange win{pte_index & ~(block - 1), 0};
  win.hi = win.lo + block;
  win.lo = std::max(win.lo, 0);
  win.hi = std::min(win.hi, fanout);

  // Clamp to the slots the VMA covers. The requested index is inside the VMA
  // by precondition, so the intersection is never empty.
  const std::uint64_t page = layout.page_size();
  if (vma_span.start > table_span.start) {
    int first = static_cast<int>((vma_span.start - table_span.start) / page);
    win.lo = std::max(win.lo, first);
  }
  if (vma_span.end() < table_span.end()) {
    int last = static_cast<int>((vma_span.end() - table_span.start) / page);
    win.hi = std::min(win.hi, last);
  }
  protocol_check(win.contains(pte_index),
                 "prefetch_window: requested index fell outside both clamps");
  return win;
}

std::vector<NodeId> coherence_targets(const PageTablePage& page,
                                      const ReplicationPolicy& policy,
                                      const MachineTopology& topo) {
  std::vector<NodeId> nodes;
  switch (policy.mode) {
    case ReplicationMode::kNoReplication:
      nodes.push_back(page.node);
      break;
    case ReplicationMode::kEager:
      nodes.resize(topo.node_count);
      for (int n = 0; n < topo.node_count; ++n) nodes[n] = n;
      break;
    case ReplicationMode::kLazy:
      for (const PageTablePage* p : ring_members(page, topo.node_count))
        nodes.push_back(p->node);
      std::sort(nodes.begin(), nodes.end());
      break;
  }
  return nodes;
}

std::vector<CoreId> shootdown_targets(const ProcessSpace& space,
                                      const PageTablePage& page,
                                      const ReplicationPolicy& policy,
                                      const MachineTopology& topo,
                                      CoreId initiator) {
  std::set<NodeId> sharers;
  if (policy.filters_shootdowns())
    for (const PageTablePage* p : ring_members(page, topo.node_count))
      sharers.insert(p->node);

  std::vector<CoreId> cores;
  for (const auto& [tid, info] : space.threads()) {
    if (info.core == initiator) continue;
    if (policy.filters_shootdowns() && !sharers.count(info.node)) continue;
    cores.push_back(info.core);
  }
  std::sort(cores.begin(), cores.end());
  return cores;
}

}  // namespace ptsim
