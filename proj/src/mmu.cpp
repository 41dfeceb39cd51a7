#include "ptsim/simulator.hpp"

namespace ptsim {

// ---------------------------------------------------------------------------
// CoreTlb
// ---------------------------------------------------------------------------

const TlbEntry* CoreTlb::lookup(Vpn vpn) {
  auto it = index_.find(vpn);
  if (it == index_.end()) return nullptr;
  order_.splice(order_.begin(), order_, it->second);
  return &order_.front().second;
}

void CoreTlb::insert(Vpn vpn, TlbEntry entry) {
  auto it = index_.find(vpn);
  if (it != index_.end()) {
    it->second->second = entry;
    order_.splice(order_.begin(), order_, it->second);
    return;
  }
  if (capacity_ != 0 && index_.size() >= capacity_) {
    index_.erase(order_.back().first);
    order_.pop_back();
  }
  order_.emplace_front(vpn, entry);
  index_[vpn] = order_.begin();
}

std::uint64_t CoreTlb::invalidate_range(Vpn lo, Vpn hi) {
  std::uint64_t removed = 0;
  for (auto it = order_.begin(); it != order_.end();) {
    if (it->first >= lo && it->first < hi) {
      index_.erase(it->first);
      it = order_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

std::uint64_t CoreTlb::clear() {
  std::uint64_t n = index_.size();
  order_.clear();
  index_.clear();
  return n;
}

// ---------------------------------------------------------------------------
// Simulator: construction and small helpers
// ---------------------------------------------------------------------------

Simulator::Simulator(const MachineTopology& topo, const SimOptions& options)
    : topo_(topo),
      options_(options),
      metrics_(topo.node_count, options.layout.levels),
      core_busy_(topo.total_cores(), false),
      node_rr_(topo.node_count, 0) {
  options_.layout.validate();
  topo_.costs.validate();
  if (options_.policy.prefetch_degree < 0 ||
      options_.policy.prefetch_degree > options_.layout.bits_per_level)
    throw ConfigError("prefetch degree out of range");
  // Audited runs use unbounded TLBs: the protocol invariants must hold for
  // any capacity, and unbounded is the adversarial case for staleness.
  std::size_t cap =
      options_.audit == AuditMode::kOff ? options_.tlb_capacity : 0;
  tlbs_.reserve(topo_.total_cores());
  for (CoreId c = 0; c < topo_.total_cores(); ++c) tlbs_.emplace_back(c, cap);
}

ProcessSpace& Simulator::space(ProcId proc) {
  auto it = spaces_.find(proc);
  if (it == spaces_.end())
    it = spaces_
             .emplace(proc, std::make_unique<ProcessSpace>(
                                proc, options_.va_base))
             .first;
  return *it->second;
}

void Simulator::charge(EventSummary& s, CostKind kind, Cost amount) {
  if (amount == 0) return;
  metrics_.record_cost(kind, amount);
  switch (kind) {
    case CostKind::kWalk: s.cost_walk += amount; break;
    case CostKind::kData: s.cost_data += amount; break;
    case CostKind::kFault: s.cost_fault += amount; break;
    case CostKind::kCoherence: s.cost_coherence += amount; break;
    case CostKind::kIpi: s.cost_ipi += amount; break;
    case CostKind::kTlb: s.cost_tlb += amount; break;
    case CostKind::kOverhead: s.cost_overhead += amount; break;
  }
  s.total += amount;
}

CoreId Simulator::pick_core(NodeId node) {
  CoreId base = topo_.first_core_of_node(node);
  for (int i = 0; i < topo_.cores_per_node; ++i) {
    CoreId c = base + (node_rr_[node] + i) % topo_.cores_per_node;
    if (!core_busy_[c]) {
      core_busy_[c] = true;
      node_rr_[node] = (c - base + 1) % topo_.cores_per_node;
      return c;
    }
  }
  return kNoCore;
}

void Simulator::release_core(CoreId core) { core_busy_[core] = false; }

FrameId Simulator::alloc_frame(NodeId node) {
  frame_nodes_.push_back(node);
  metrics_.record(Counter::kFramesAllocated, 1);
  return frame_nodes_.size() - 1;
}

// ---------------------------------------------------------------------------
// Page-table plumbing
// ---------------------------------------------------------------------------

PageTablePage* Simulator::find_root(const ProcessSpace& space,
                                    NodeId node) const {
  const auto& roots = space.roots();
  if (options_.policy.mode == ReplicationMode::kNoReplication)
    return roots.empty() ? nullptr : roots.begin()->second;
  auto it = roots.find(node);
  return it == roots.end() ? nullptr : it->second;
}

PageTablePage* Simulator::ensure_root(ProcessSpace& space, NodeId node,
                                      EventSummary& s, NodeId charge_from) {
  PageTablePage* existing = find_root(space, node);
  if (existing) return existing;
  if (charge_from == kNoNode) charge_from = node;

  const VirtRange whole{0, options_.layout.vaddr_limit()};
  auto make_root = [&](NodeId on) {
    PageTablePage* r = space.alloc_page(options_.layout.levels - 1, on, whole,
                                        options_.layout.fanout());
    space.roots()[on] = r;
    metrics_.record_pt_page_delta(on, +1);
    charge(s, CostKind::kFault,
           access_cost(topo_, charge_from, on, options_.interference));
    return r;
  };

  switch (options_.policy.mode) {
    case ReplicationMode::kNoReplication:
      return make_root(node);
    case ReplicationMode::kEager: {
      // Mirrored system-wide from the start.
      PageTablePage* first = nullptr;
      for (NodeId n = 0; n < topo_.node_count; ++n) {
        PageTablePage* r = make_root(n);
        if (first) {
          ring_link(*first, *r);
          metrics_.record(Counter::kRingLinks, 1);
        } else {
          first = r;
        }
      }
      return space.roots().at(node);
    }
    case ReplicationMode::kLazy: {
      // First fault taken on this node: read an existing root remotely (when
      // one exists) and link the new replica into the root ring.
      PageTablePage* peer =
          space.roots().empty() ? nullptr : space.roots().begin()->second;
      if (peer)
        charge(s, CostKind::kFault,
               access_cost(topo_, charge_from, peer->node,
                           options_.interference));
      PageTablePage* r = make_root(node);
      if (peer) {
        ring_link(*peer, *r);
        metrics_.record(Counter::kRingLinks, 1);
      }
      return r;
    }
  }
  return nullptr;
}

PageTablePage* Simulator::descend(PageTablePage* root,
                                  const SplitAddress& split,
                                  int down_to_level) const {
  PageTablePage* cur = root;
  while (cur && cur->level > down_to_level) {
    int slot = split.indices[options_.layout.levels - 1 - cur->level];
    cur = cur->children[slot];
  }
  return cur;
}

PageTablePage* Simulator::ensure_path(ProcessSpace& space, NodeId tree_node,
                                      NodeId place_on,
                                      const SplitAddress& split, Vaddr vaddr,
                                      EventSummary& s, CostKind cost_kind,
                                      NodeId charge_from) {
  PageTablePage* counterpart_root = nullptr;
  if (options_.policy.lazy()) {
    // Link fresh pages to the owner's same-span page: the copy relationship
    // is what defines ring membership, never span coincidence.
    const Vma* vma = space.vma_lookup(vaddr);
    if (vma && vma->owner != tree_node)
      counterpart_root = find_root(space, vma->owner);
  }

  PageTablePage* cur = find_root(space, tree_node);
  protocol_check(cur != nullptr, "ensure_path: missing root");
  const AddressLayout& lay = options_.layout;
  for (int level = lay.levels - 1; level >= 1; --level) {
    int slot = split.indices[lay.levels - 1 - level];
    PageTablePage* child = cur->children[slot];
    if (!child) {
      std::uint64_t child_span = lay.span_bytes(level - 1);
      VirtRange span{cur->span.start + slot * child_span, child_span};
      child = space.alloc_page(level - 1, place_on, span, lay.fanout());
      child->parent = cur;
      child->parent_slot = slot;
      cur->children[slot] = child;
      cur->set_present_bit(slot, true);
      cur->live_entries++;
      metrics_.record_pt_page_delta(place_on, +1);
      charge(s, cost_kind,
             access_cost(topo_, charge_from, place_on, options_.interference));
    }
    if (counterpart_root) {
      // Join the sharer ring whether the page is fresh or predates the
      // sharing ("if they were not linked before, for example, due to other
      // PTEs in the same page-table").
      PageTablePage* counterpart = descend(counterpart_root, split, level - 1);
      if (counterpart && counterpart != child &&
          ring_merge(*counterpart, *child))
        metrics_.record(Counter::kRingLinks, 1);
    }
    cur = child;
  }
  return cur;
}

void Simulator::write_pte(PageTablePage* leaf, int index, const Pte& pte) {
  Pte& slot = leaf->ptes[index];
  if (!slot.present && pte.present) {
    leaf->live_entries++;
    leaf->set_present_bit(index, true);
  } else if (slot.present && !pte.present) {
    leaf->live_entries--;
    leaf->set_present_bit(index, false);
  }
  slot = pte;
}

void Simulator::clear_pte(PageTablePage* leaf, int index) {
  write_pte(leaf, index, Pte{});
}

void Simulator::reclaim_if_empty(ProcessSpace& space, PageTablePage* page) {
  while (page && page->parent && page->live_entries == 0) {
    PageTablePage* parent = page->parent;
    metrics_.record_pt_page_delta(page->node, -1);
    space.free_page(page);
    page = parent;
  }
}

// ---------------------------------------------------------------------------
// MMU operations
// ---------------------------------------------------------------------------

const TlbEntry* Simulator::tlb_lookup(CoreId core, Vpn vpn, EventSummary& s) {
  const TlbEntry* hit = tlbs_[core].lookup(vpn);
  if (hit) charge(s, CostKind::kTlb, topo_.costs.tlb_hit);
  return hit;
}

WalkResult Simulator::walk_tree(PageTablePage* root, NodeId from_node,
                                const SplitAddress& split, EventSummary& s) {
  WalkResult res;
  const AddressLayout& lay = options_.layout;
  PageTablePage* cur = root;
  if (!cur) {
    res.missing_level = lay.levels - 1;
    return res;
  }
  Cost before = s.total;
  while (true) {
    charge(s, CostKind::kWalk,
           access_cost(topo_, from_node, cur->node, options_.interference));
    metrics_.record(cur->node == from_node ? Counter::kWalkLocal
                                           : Counter::kWalkRemote,
                    1, cur->level);
    res.levels_visited++;
    int slot = split.indices[lay.levels - 1 - cur->level];
    if (cur->is_leaf()) {
      res.leaf = cur;
      res.pte_index = slot;
      res.pte_present = cur->ptes[slot].present;
      break;
    }
    PageTablePage* child = cur->children[slot];
    if (!child) {
      res.missing_level = cur->level - 1;
      break;
    }
    cur = child;
  }
  res.charged = s.total - before;
  return res;
}

WalkResult Simulator::walk(ProcessSpace& space, NodeId node, Vaddr vaddr,
                           EventSummary& s) {
  SplitAddress split = split_vaddr(options_.layout, vaddr);
  return walk_tree(find_root(space, node), node, split, s);
}

FaultResult Simulator::handle_fault(ProcessSpace& space, ThreadId thread,
                                    Vaddr vaddr, AccessKind kind,
                                    EventSummary& s) {
  FaultResult result;
  const ThreadInfo& info = space.threads().at(thread);
  const NodeId node = info.node;

  const Vma* vma = space.vma_lookup(vaddr);
  if (!vma) {
    metrics_.record(Counter::kFaultSegv, 1);
    result.error = FaultError::kSegv;
    return result;
  }
  Prot needed{kind == AccessKind::kWrite ? Prot::kWrite : Prot::kRead};
  if (!vma->prot.covers(needed)) {
    metrics_.record(Counter::kFaultProt, 1);
    result.error = FaultError::kProtection;
    return result;
  }

  Cost before = s.total;
  switch (options_.policy.mode) {
    case ReplicationMode::kLazy:
      result = fault_lazy(space, *vma, node, vaddr, s);
      break;
    case ReplicationMode::kNoReplication:
      result = fault_no_replication(space, *vma, node, vaddr, s);
      break;
    case ReplicationMode::kEager:
      result = fault_eager(space, *vma, node, vaddr, s);
      break;
  }
  if (!result.faulted()) {
    finish_access(space, node, info.core, options_.layout.vpn_of(vaddr), kind);
    result.outcome.charged = s.total - before;
  }
  return result;
}

FaultResult Simulator::fault_lazy(ProcessSpace& space, const Vma& vma,
                                  NodeId node, Vaddr vaddr, EventSummary& s) {
  FaultResult result;
  const AddressLayout& lay = options_.layout;
  SplitAddress split = split_vaddr(lay, vaddr);
  ensure_root(space, node, s);

  WalkResult local = walk(space, node, vaddr, s);
  if (local.pte_present) {
    metrics_.record(Counter::kFaultLocalHit, 1);
    result.outcome.kind = FaultKind::kLocalHit;
    return result;
  }
  charge(s, CostKind::kOverhead, options_.overheads.fault_software);

  const NodeId owner = vma.owner;

  if (owner != node) {
    // Consult the owner's replica; it holds every valid PTE of the VMA.
    WalkResult at_owner = walk_tree(find_root(space, owner), node, split, s);
    if (at_owner.pte_present) {
      PageTablePage* leaf = ensure_path(space, node, node, split, vaddr, s,
                                        CostKind::kFault, node);
      IndexRange window =
          prefetch_window(lay, at_owner.pte_index,
                          options_.policy.effective_degree(), leaf->span,
                          vma.range);
      std::uint64_t copied = 0;
      for (int i = window.lo; i < window.hi; ++i) {
        const Pte& src = at_owner.leaf->ptes[i];
        if (!src.present || leaf->ptes[i].present) continue;
        // Neighbors ride along at no extra charge; physically copying
        // consecutive entries from one page is below the model's resolution.
        write_pte(leaf, i, src);
        ++copied;
      }
      metrics_.record(Counter::kPteCopies, copied);
      metrics_.record(Counter::kFaultCopied, 1);
      result.outcome.kind = FaultKind::kCopiedFromOwner;
      result.outcome.copied_count = copied;
      s.copied_ptes += copied;
      return result;
    }
  }

  // First touch anywhere: create the PTE in the owner's tree and the faulting
  // node's tree, then fill every existing sharer of the leaf so all replicas
  // agree.
  ensure_root(space, owner, s, node);
  PageTablePage* owner_leaf = ensure_path(space, owner, owner, split, vaddr, s,
                                          CostKind::kFault, node);
  PageTablePage* local_leaf = owner_leaf;
  if (owner != node)
    local_leaf =
        ensure_path(space, node, node, split, vaddr, s, CostKind::kFault, node);

  Pte pte;
  pte.present = true;
  pte.prot = vma.prot;
  pte.frame = alloc_frame(node);
  int idx = split.indices[lay.levels - 1];
  for (PageTablePage* member : ring_members(*owner_leaf, topo_.node_count)) {
    if (member->ptes[idx].present) continue;
    write_pte(member, idx, pte);
    charge(s, CostKind::kFault,
           access_cost(topo_, node, member->node, options_.interference));
    if (member != owner_leaf && member != local_leaf)
      metrics_.record(Counter::kPteCopies, 1);
  }
  metrics_.record(Counter::kFaultFresh, 1);
  result.outcome.kind = FaultKind::kFreshAllocation;
  return result;
}

FaultResult Simulator::fault_no_replication(ProcessSpace& space,
                                            const Vma& vma, NodeId node,
                                            Vaddr vaddr, EventSummary& s) {
  FaultResult result;
  const AddressLayout& lay = options_.layout;
  SplitAddress split = split_vaddr(lay, vaddr);
  ensure_root(space, node, s);

  WalkResult local = walk(space, node, vaddr, s);
  if (local.pte_present) {
    metrics_.record(Counter::kFaultLocalHit, 1);
    result.outcome.kind = FaultKind::kLocalHit;
    return result;
  }
  charge(s, CostKind::kOverhead, options_.overheads.fault_software);

  // Single tree; table pages and frames are placed where first touched.
  NodeId tree_node = space.roots().begin()->first;
  PageTablePage* leaf = ensure_path(space, tree_node, node, split, vaddr, s,
                                    CostKind::kFault, node);
  Pte pte;
  pte.present = true;
  pte.prot = vma.prot;
  pte.frame = alloc_frame(node);
  int idx = split.indices[lay.levels - 1];
  write_pte(leaf, idx, pte);
  charge(s, CostKind::kFault,
         access_cost(topo_, node, leaf->node, options_.interference));
  metrics_.record(Counter::kFaultFresh, 1);
  result.outcome.kind = FaultKind::kFreshAllocation;
  return result;
}

FaultResult Simulator::fault_eager(ProcessSpace& space, const Vma& vma,
                                   NodeId node, Vaddr vaddr, EventSummary& s) {
  FaultResult result;
  const AddressLayout& lay = options_.layout;
  SplitAddress split = split_vaddr(lay, vaddr);
  ensure_root(space, node, s);

  WalkResult local = walk(space, node, vaddr, s);
  if (local.pte_present) {
    metrics_.record(Counter::kFaultLocalHit, 1);
    result.outcome.kind = FaultKind::kLocalHit;
    return result;
  }
  charge(s, CostKind::kOverhead, options_.overheads.fault_software);

  // Mirror the whole path and the new PTE on every node immediately.
  std::vector<PageTablePage*> cur(topo_.node_count);
  for (NodeId n = 0; n < topo_.node_count; ++n)
    cur[n] = space.roots().at(n);
  for (int level = lay.levels - 1; level >= 1; --level) {
    int slot = split.indices[lay.levels - 1 - level];
    PageTablePage* rep = nullptr;
    for (NodeId n = 0; n < topo_.node_count; ++n)
      if (cur[n]->children[slot]) {
        rep = cur[n]->children[slot];
        break;
      }
    for (NodeId n = 0; n < topo_.node_count; ++n) {
      PageTablePage* child = cur[n]->children[slot];
      if (!child) {
        std::uint64_t child_span = lay.span_bytes(level - 1);
        VirtRange span{cur[n]->span.start + slot * child_span, child_span};
        child = space.alloc_page(level - 1, n, span, lay.fanout());
        child->parent = cur[n];
        child->parent_slot = slot;
        cur[n]->children[slot] = child;
        cur[n]->set_present_bit(slot, true);
        cur[n]->live_entries++;
        metrics_.record_pt_page_delta(n, +1);
        charge(s, CostKind::kFault,
               access_cost(topo_, node, n, options_.interference));
        if (rep) {
          ring_link(*rep, *child);
          metrics_.record(Counter::kRingLinks, 1);
        } else {
          rep = child;
        }
      }
      cur[n] = child;
    }
  }

  Pte pte;
  pte.present = true;
  pte.prot = vma.prot;
  pte.frame = alloc_frame(node);
  int idx = split.indices[lay.levels - 1];
  for (NodeId n = 0; n < topo_.node_count; ++n) {
    write_pte(cur[n], idx, pte);
    charge(s, CostKind::kFault,
           access_cost(topo_, node, n, options_.interference));
    if (n != node) metrics_.record(Counter::kPteCopies, 1);
  }
  metrics_.record(Counter::kFaultFresh, 1);
  result.outcome.kind = FaultKind::kFreshAllocation;
  return result;
}

void Simulator::finish_access(ProcessSpace& space, NodeId node, CoreId core,
                              Vpn vpn, AccessKind kind) {
  SplitAddress split =
      split_vaddr(options_.layout, options_.layout.addr_of_vpn(vpn));
  PageTablePage* leaf = descend(find_root(space, node), split, 0);
  protocol_check(leaf != nullptr, "finish_access: leaf page missing");
  Pte& pte = leaf->ptes[split.indices[options_.layout.levels - 1]];
  protocol_check(pte.present, "finish_access: PTE absent after fault");
  pte.accessed = true;
  if (kind == AccessKind::kWrite) pte.dirty = true;
  tlbs_[core].insert(vpn, TlbEntry{pte.frame, pte.prot});
}

void Simulator::apply_shootdown(ProcessSpace& space,
                                const std::vector<CoreId>& targets,
                                CoreId initiator, Vpn lo, Vpn hi,
                                EventSummary& s) {
  const NodeId from = topo_.node_of_core(initiator);
  metrics_.record(Counter::kShootdownCalls, 1);
  metrics_.record(Counter::kShootdownTargets, targets.size());
  for (CoreId core : targets) {
    NodeId target_node = topo_.node_of_core(core);
    std::uint64_t n = tlbs_[core].invalidate_range(lo, hi);
    metrics_.record(Counter::kTlbInvalidations, n);
    s.invalidations += n;
    charge(s, CostKind::kIpi, ipi_cost(topo_, from, target_node));
    if (target_node == from) {
      metrics_.record(Counter::kIpiLocal, 1);
      s.ipis_local++;
    } else {
      metrics_.record(Counter::kIpiRemote, 1);
      s.ipis_remote++;
    }
  }
  // The initiating core invalidates its own TLB with a privileged
  // instruction; no IPI is charged.
  std::uint64_t own = tlbs_[initiator].invalidate_range(lo, hi);
  metrics_.record(Counter::kTlbInvalidations, own);
  s.invalidations += own;

  if (options_.audit != AuditMode::kOff) {
    // No core anywhere may retain a translation for the shot range: targets
    // were just invalidated, and filtered-out cores must never have held one.
    for (const CoreTlb& tlb : tlbs_) {
      tlb.for_each([&](Vpn vpn, const TlbEntry&) {
        protocol_check(vpn < lo || vpn >= hi,
                       "stale TLB entry survived a shootdown");
      });
    }
  }
  (void)space;
}

std::optional<std::pair<bool, bool>> Simulator::aggregate_ad_bits(
    ProcessSpace& space, Vpn vpn) const {
  const AddressLayout& lay = options_.layout;
  Vaddr vaddr = lay.addr_of_vpn(vpn);
  const Vma* vma = space.vma_lookup(vaddr);
  if (!vma) return std::nullopt;
  NodeId tree = options_.policy.mode == ReplicationMode::kNoReplication
                    ? (space.roots().empty() ? kNoNode
                                             : space.roots().begin()->first)
                    : vma->owner;
  if (tree == kNoNode) return std::nullopt;
  PageTablePage* root = find_root(space, tree);
  if (!root) return std::nullopt;
  SplitAddress split = split_vaddr(lay, vaddr);
  PageTablePage* leaf = descend(root, split, 0);
  if (!leaf) return std::nullopt;
  int idx = split.indices[lay.levels - 1];
  if (!leaf->ptes[idx].present) return std::nullopt;

  bool accessed = false, dirty = false;
  for (const PageTablePage* member : ring_members(*leaf, topo_.node_count)) {
    const Pte& pte = member->ptes[idx];
    if (!pte.present) continue;
    accessed = accessed || pte.accessed;
    dirty = dirty || pte.dirty;
  }
  return std::make_pair(accessed, dirty);
}

void Simulator::finalize_metrics() {
  std::vector<std::uint64_t> hist(topo_.node_count, 0);
  std::uint64_t roots = 0;
  for (const auto& [pid, space] : spaces_) {
    for (const auto& [id, page] : space->pages()) {
      int size = static_cast<int>(ring_members(*page, topo_.node_count).size());
      hist[size - 1]++;
      if (!page->parent) roots++;
    }
  }
  metrics_.set_ring_histogram(std::move(hist));
  metrics_.set_root_replicas(roots);
}

}  // namespace ptsim
