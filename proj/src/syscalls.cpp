#include <algorithm>
#include <set>

#include "ptsim/simulator.hpp"

namespace ptsim {

std::string trace_op_name(TraceOp op) {
  switch (op) {
    case TraceOp::kSpawn: return "spawn";
    case TraceOp::kExit: return "exit";
    case TraceOp::kMigrate: return "migrate";
    case TraceOp::kMmap: return "mmap";
    case TraceOp::kMunmap: return "munmap";
    case TraceOp::kMprotect: return "mprotect";
    case TraceOp::kAccess: return "access";
    case TraceOp::kSpin: return "spin";
  }
  return "?";
}

std::optional<TraceOp> trace_op_from_string(const std::string& s) {
  if (s == "spawn") return TraceOp::kSpawn;
  if (s == "exit") return TraceOp::kExit;
  if (s == "migrate") return TraceOp::kMigrate;
  if (s == "mmap") return TraceOp::kMmap;
  if (s == "munmap") return TraceOp::kMunmap;
  if (s == "mprotect") return TraceOp::kMprotect;
  if (s == "access") return TraceOp::kAccess;
  if (s == "spin") return TraceOp::kSpin;
  return std::nullopt;
}

EventSummary Simulator::trace_error(EventSummary s, const std::string& what) {
  s.trace_error = what;
  metrics_.record(Counter::kTraceErrors, 1);
  return s;
}

// ---------------------------------------------------------------------------
// Thread placement
// ---------------------------------------------------------------------------

EventSummary Simulator::op_thread_spawn(ProcId proc, ThreadId thread,
                                        NodeId node) {
  EventSummary s;
  s.op = OpClass::kSpawn;
  ProcessSpace& sp = space(proc);
  if (node < 0 || node >= topo_.node_count) {
    s = trace_error(s, "spawn: node out of range");
  } else if (sp.threads().count(thread)) {
    s = trace_error(s, "spawn: thread id already exists");
  } else {
    CoreId core = pick_core(node);
    if (core == kNoCore) {
      s = trace_error(s, "spawn: no free core on node (one thread per core)");
    } else {
      sp.threads()[thread] = ThreadInfo{node, core};
    }
  }
  metrics_.record_op(OpClass::kSpawn, s.total);
  return s;
}

EventSummary Simulator::op_thread_exit(ProcId proc, ThreadId thread) {
  EventSummary s;
  s.op = OpClass::kExit;
  ProcessSpace& sp = space(proc);
  auto it = sp.threads().find(thread);
  if (it == sp.threads().end()) {
    s = trace_error(s, "exit: unknown thread");
  } else {
    tlbs_[it->second.core].clear();
    release_core(it->second.core);
    sp.threads().erase(it);
  }
  metrics_.record_op(OpClass::kExit, s.total);
  return s;
}

EventSummary Simulator::op_migrate(ProcId proc, ThreadId thread,
                                   NodeId new_node) {
  EventSummary s;
  s.op = OpClass::kMigrate;
  ProcessSpace& sp = space(proc);
  auto it = sp.threads().find(thread);
  if (it == sp.threads().end()) {
    s = trace_error(s, "migrate: unknown thread");
  } else if (new_node < 0 || new_node >= topo_.node_count) {
    s = trace_error(s, "migrate: node out of range");
  } else {
    CoreId target = pick_core(new_node);
    if (target == kNoCore) {
      s = trace_error(s, "migrate: no free core on target node");
    } else {
      // Context migration drops cached translations; page tables are left
      // untouched under every policy and repopulate through faults.
      tlbs_[it->second.core].clear();
      release_core(it->second.core);
      it->second = ThreadInfo{new_node, target};
    }
  }
  metrics_.record_op(OpClass::kMigrate, s.total);
  return s;
}

EventSummary Simulator::op_spin(ProcId proc, ThreadId thread,
                                std::uint64_t iters) {
  EventSummary s;
  s.op = OpClass::kSpin;
  (void)iters;  // private computation, invisible to the memory system
  ProcessSpace& sp = space(proc);
  if (!sp.threads().count(thread)) s = trace_error(s, "spin: unknown thread");
  metrics_.record_op(OpClass::kSpin, s.total);
  return s;
}

// ---------------------------------------------------------------------------
// mmap / munmap / mprotect
// ---------------------------------------------------------------------------

EventSummary Simulator::op_mmap(ProcId proc, ThreadId thread,
                                std::uint64_t length, Prot prot,
                                NodeId owner_override,
                                std::optional<Vaddr> fixed_addr) {
  EventSummary s;
  s.op = OpClass::kMmap;
  ProcessSpace& sp = space(proc);
  const AddressLayout& lay = options_.layout;
  auto tit = sp.threads().find(thread);
  if (tit == sp.threads().end()) {
    s = trace_error(s, "mmap: unknown thread");
    metrics_.record_op(OpClass::kMmap, s.total);
    return s;
  }
  if (length == 0) {
    s = trace_error(s, "mmap: zero length");
    metrics_.record_op(OpClass::kMmap, s.total);
    return s;
  }
  std::uint64_t page = lay.page_size();
  std::uint64_t len = (length + page - 1) / page * page;

  Vaddr addr;
  if (fixed_addr) {
    addr = *fixed_addr;
    if (addr % page != 0) {
      s = trace_error(s, "mmap: fixed address not page aligned");
      metrics_.record_op(OpClass::kMmap, s.total);
      return s;
    }
  } else {
    addr = sp.cursor();
  }
  if (addr >= lay.vaddr_limit() || len > lay.vaddr_limit() - addr) {
    s = trace_error(s, "mmap: address space exhausted");
    metrics_.record_op(OpClass::kMmap, s.total);
    return s;
  }

  NodeId owner =
      owner_override != kNoNode ? owner_override : tit->second.node;
  if (owner < 0 || owner >= topo_.node_count) {
    s = trace_error(s, "mmap: owner node out of range");
    metrics_.record_op(OpClass::kMmap, s.total);
    return s;
  }

  Vma v;
  v.range = VirtRange{addr, len};
  v.prot = prot;
  v.owner = owner;
  try {
    Vma& placed = sp.add_vma(v);
    s.outcome = "vma=" + std::to_string(placed.id);
  } catch (const ConfigError&) {
    s = trace_error(s, "mmap: fixed address overlaps an existing VMA");
    metrics_.record_op(OpClass::kMmap, s.total);
    return s;
  }
  sp.advance_cursor(std::max(sp.cursor(), addr + len));
  // Demand paging: no page tables, no frames until the first touch.
  charge(s, CostKind::kOverhead, options_.overheads.mmap_call);
  metrics_.record_op(OpClass::kMmap, s.total);
  return s;
}

// Visit (leaf page of the governing tree, slot) for every resident PTE in
// range. The governing tree is the VMA owner's (which holds every valid PTE)
// or the single tree under no-replication.
void Simulator::for_each_resident_leaf(
    ProcessSpace& space, VirtRange range,
    const std::function<void(PageTablePage*, int)>& fn) {
  const AddressLayout& lay = options_.layout;
  const std::uint64_t page = lay.page_size();
  const std::uint64_t leaf_span = lay.leaf_span_bytes();

  for (auto it = space.vmas().begin(); it != space.vmas().end(); ++it) {
    const Vma& vma = it->second;
    if (!vma.range.overlaps(range)) continue;
    Vaddr lo = std::max(vma.range.start, range.start);
    Vaddr hi = std::min(vma.range.end(), range.end());

    NodeId tree = options_.policy.mode == ReplicationMode::kNoReplication
                      ? (space.roots().empty() ? kNoNode
                                               : space.roots().begin()->first)
                      : vma.owner;
    PageTablePage* root = tree == kNoNode ? nullptr : find_root(space, tree);
    if (!root) continue;

    for (Vaddr chunk = lo - (lo % leaf_span); chunk < hi; chunk += leaf_span) {
      SplitAddress split = split_vaddr(lay, std::max(chunk, lo));
      PageTablePage* leaf = descend(root, split, 0);
      if (!leaf) continue;
      Vaddr seg_lo = std::max(chunk, lo);
      Vaddr seg_hi = std::min(chunk + leaf_span, hi);
      int first = static_cast<int>((seg_lo - leaf->span.start) / page);
      int last = static_cast<int>((seg_hi - leaf->span.start) / page);
      for (int i = first; i < last; ++i)
        if (leaf->ptes[i].present) fn(leaf, i);
    }
  }
}

EventSummary Simulator::op_munmap_vma(ProcId proc, ThreadId thread,
                                      std::int64_t vma_id) {
  const Vma* vma = space(proc).vma_by_id(vma_id);
  if (!vma) {
    EventSummary s;
    s.op = OpClass::kMunmap;
    s = trace_error(s, "munmap: unknown vma id");
    metrics_.record_op(OpClass::kMunmap, s.total);
    return s;
  }
  return op_munmap(proc, thread, vma->range);
}

EventSummary Simulator::op_munmap(ProcId proc, ThreadId thread,
                                  VirtRange range) {
  EventSummary s;
  s.op = OpClass::kMunmap;
  ProcessSpace& sp = space(proc);
  const AddressLayout& lay = options_.layout;
  auto tit = sp.threads().find(thread);

  auto bail = [&](const std::string& why) {
    s = trace_error(s, why);
    metrics_.record_op(OpClass::kMunmap, s.total);
    return s;
  };
  if (tit == sp.threads().end()) return bail("munmap: unknown thread");
  if (range.length == 0 || range.start % lay.page_size() != 0 ||
      range.length % lay.page_size() != 0)
    return bail("munmap: range not page aligned");

  // The whole range must be mapped; unmapping a hole is a trace error and
  // nothing is modified.
  Vaddr covered = range.start;
  while (covered < range.end()) {
    const Vma* v = sp.vma_lookup(covered);
    if (!v) return bail("munmap: range covers an unmapped hole");
    covered = v->range.end();
  }

  const NodeId inode = tit->second.node;
  const CoreId icore = tit->second.core;

  // Plan phase: capture affected leaf pages and the shootdown audience
  // before any PTE is touched (reclamation below mutates the rings).
  std::vector<PageTablePage*> affected;
  std::set<CoreId> audience;
  for_each_resident_leaf(sp, range, [&](PageTablePage* leaf, int) {
    if (!affected.empty() && affected.back() == leaf) return;
    if (std::find(affected.begin(), affected.end(), leaf) != affected.end())
      return;
    affected.push_back(leaf);
    for (CoreId c :
         shootdown_targets(sp, *leaf, options_.policy, topo_, icore))
      audience.insert(c);
  });

  // Clear every replica of every resident PTE in range.
  std::vector<PageTablePage*> touched_pages;
  for (PageTablePage* leaf : affected) {
    for (PageTablePage* member : ring_members(*leaf, topo_.node_count))
      if (std::find(touched_pages.begin(), touched_pages.end(), member) ==
          touched_pages.end())
        touched_pages.push_back(member);
  }
  std::uint64_t cleared = 0;
  for_each_resident_leaf(sp, range, [&](PageTablePage* leaf, int idx) {
    metrics_.record(Counter::kFramesFreed, 1);
    for (PageTablePage* member : ring_members(*leaf, topo_.node_count)) {
      if (!member->ptes[idx].present) continue;
      clear_pte(member, idx);
      ++cleared;
      s.replica_updates++;
      metrics_.record(member->node == inode ? Counter::kCoherenceLocal
                                            : Counter::kCoherenceRemote,
                      1);
      charge(s, CostKind::kCoherence,
             access_cost(topo_, inode, member->node, options_.interference));
    }
  });

  // One synchronous shootdown per call, spanning the whole range.
  if (cleared > 0) {
    std::vector<CoreId> targets(audience.begin(), audience.end());
    apply_shootdown(sp, targets, icore, lay.vpn_of(range.start),
                    lay.vpn_of(range.end()), s);
  }

  // Free page-table pages that became empty, cascading upward.
  for (PageTablePage* page : touched_pages) {
    // Pages are reclaimed deepest-first; a parent freed by a previous
    // iteration cannot appear here because rings never span levels.
    if (page->live_entries == 0) reclaim_if_empty(sp, page);
  }

  // Shrink or remove the VMAs.
  std::vector<Vma> pieces;
  std::vector<Vaddr> doomed;
  for (const auto& [start, v] : sp.vmas()) {
    if (!v.range.overlaps(range)) continue;
    doomed.push_back(start);
    if (v.range.start < range.start) {
      Vma left = v;
      left.id = -1;
      left.range = VirtRange{v.range.start, range.start - v.range.start};
      pieces.push_back(left);
    }
    if (v.range.end() > range.end()) {
      Vma right = v;
      right.id = -1;
      right.range = VirtRange{range.end(), v.range.end() - range.end()};
      pieces.push_back(right);
    }
  }
  for (Vaddr a : doomed) sp.remove_vma(a);
  for (const Vma& p : pieces) sp.add_vma(p);

  charge(s, CostKind::kOverhead, options_.overheads.munmap_call);
  metrics_.record_op(OpClass::kMunmap, s.total);
  return s;
}

EventSummary Simulator::op_mprotect(ProcId proc, ThreadId thread,
                                    VirtRange range, Prot new_prot) {
  EventSummary s;
  s.op = OpClass::kMprotect;
  ProcessSpace& sp = space(proc);
  const AddressLayout& lay = options_.layout;
  auto tit = sp.threads().find(thread);

  auto bail = [&](const std::string& why) {
    s = trace_error(s, why);
    metrics_.record_op(OpClass::kMprotect, s.total);
    return s;
  };
  if (tit == sp.threads().end()) return bail("mprotect: unknown thread");
  if (range.length == 0 || range.start % lay.page_size() != 0 ||
      range.length % lay.page_size() != 0)
    return bail("mprotect: range not page aligned");
  Vaddr covered = range.start;
  while (covered < range.end()) {
    const Vma* v = sp.vma_lookup(covered);
    if (!v) return bail("mprotect: range outside mapped VMAs");
    covered = v->range.end();
  }

  const NodeId inode = tit->second.node;
  const CoreId icore = tit->second.core;

  // Update the protection of every resident PTE whose bits actually change,
  // in every replica. Unchanged PTEs cause no writes and no shootdown.
  std::set<CoreId> audience;
  std::uint64_t changed = 0;
  for_each_resident_leaf(sp, range, [&](PageTablePage* leaf, int idx) {
    if (leaf->ptes[idx].prot == new_prot) return;
    for (CoreId c :
         shootdown_targets(sp, *leaf, options_.policy, topo_, icore))
      audience.insert(c);
    for (PageTablePage* member : ring_members(*leaf, topo_.node_count)) {
      if (!member->ptes[idx].present) continue;
      member->ptes[idx].prot = new_prot;
      ++changed;
      s.replica_updates++;
      metrics_.record(member->node == inode ? Counter::kCoherenceLocal
                                            : Counter::kCoherenceRemote,
                      1);
      charge(s, CostKind::kCoherence,
             access_cost(topo_, inode, member->node, options_.interference));
    }
  });

  if (changed > 0) {
    std::vector<CoreId> targets(audience.begin(), audience.end());
    apply_shootdown(sp, targets, icore, lay.vpn_of(range.start),
                    lay.vpn_of(range.end()), s);
  }

  // Split VMAs at the range boundaries and retag protection. Pieces keep
  // their owner; ids are fresh.
  std::vector<Vma> pieces;
  std::vector<Vaddr> doomed;
  for (auto& [start, v] : sp.vmas()) {
    if (!v.range.overlaps(range)) continue;
    Vaddr lo = std::max(v.range.start, range.start);
    Vaddr hi = std::min(v.range.end(), range.end());
    if (v.range.start == lo && v.range.end() == hi && v.prot == new_prot)
      continue;
    doomed.push_back(start);
    Vma piece = v;
    if (v.range.start < lo) {
      Vma left = v;
      left.id = -1;
      left.range = VirtRange{v.range.start, lo - v.range.start};
      pieces.push_back(left);
    }
    piece.id = v.range.start == lo && v.range.end() == hi ? v.id : -1;
    piece.range = VirtRange{lo, hi - lo};
    piece.prot = new_prot;
    pieces.push_back(piece);
    if (v.range.end() > hi) {
      Vma right = v;
      right.id = -1;
      right.range = VirtRange{hi, v.range.end() - hi};
      pieces.push_back(right);
    }
  }
  for (Vaddr a : doomed) sp.remove_vma(a);
  for (const Vma& p : pieces) sp.add_vma(p);

  charge(s, CostKind::kOverhead, options_.overheads.mprotect_call);
  metrics_.record_op(OpClass::kMprotect, s.total);
  return s;
}

// ---------------------------------------------------------------------------
// access
// ---------------------------------------------------------------------------

EventSummary Simulator::op_access(ProcId proc, ThreadId thread, Vaddr vaddr,
                                  AccessKind kind) {
  EventSummary s;
  s.op = OpClass::kAccess;
  ProcessSpace& sp = space(proc);
  auto tit = sp.threads().find(thread);
  if (tit == sp.threads().end()) {
    s = trace_error(s, "access: unknown thread");
    metrics_.record_op(OpClass::kAccess, s.total);
    return s;
  }
  const NodeId node = tit->second.node;
  const CoreId core = tit->second.core;

  if (vaddr >= options_.layout.vaddr_limit()) {
    metrics_.record(Counter::kFaultSegv, 1);
    s = trace_error(s, "access: non-canonical address (segfault)");
    s.outcome = "segfault";
    metrics_.record_op(OpClass::kAccess, s.total);
    return s;
  }

  const Vpn vpn = options_.layout.vpn_of(vaddr);
  const TlbEntry* hit = tlb_lookup(core, vpn, s);
  if (hit) {
    metrics_.record(Counter::kTlbHits, 1);
    Prot needed{kind == AccessKind::kWrite ? Prot::kWrite : Prot::kRead};
    if (!hit->prot.covers(needed)) {
      metrics_.record(Counter::kFaultProt, 1);
      s = trace_error(s, "access: protection violation");
      s.outcome = "protection_fault";
      metrics_.record_op(OpClass::kAccess, s.total);
      return s;
    }
    s.outcome = "tlb_hit";
    finish_access(sp, node, core, vpn, kind);
    charge(s, CostKind::kData,
           access_cost(topo_, node, frame_node(hit->frame),
                       options_.interference));
    metrics_.record_op(OpClass::kAccess, s.total);
    return s;
  }

  metrics_.record(Counter::kTlbMisses, 1);
  FaultResult fr = handle_fault(sp, thread, vaddr, kind, s);
  if (fr.error == FaultError::kSegv) {
    s = trace_error(s, "access: address outside any VMA (segfault)");
    s.outcome = "segfault";
  } else if (fr.error == FaultError::kProtection) {
    s = trace_error(s, "access: protection violation");
    s.outcome = "protection_fault";
  } else {
    switch (fr.outcome.kind) {
      case FaultKind::kLocalHit: s.outcome = "local_hit"; break;
      case FaultKind::kCopiedFromOwner: s.outcome = "copied"; break;
      case FaultKind::kFreshAllocation: s.outcome = "fresh"; break;
    }
    const TlbEntry* entry = tlbs_[core].lookup(vpn);
    protocol_check(entry != nullptr, "access: TLB not filled after fault");
    charge(s, CostKind::kData,
           access_cost(topo_, node, frame_node(entry->frame),
                       options_.interference));
  }
  metrics_.record_op(OpClass::kAccess, s.total);
  return s;
}

// ---------------------------------------------------------------------------
// Trace dispatch
// ---------------------------------------------------------------------------

EventSummary Simulator::apply(const TraceEvent& ev) {
  EventSummary s;
  switch (ev.op) {
    case TraceOp::kSpawn:
      s = op_thread_spawn(ev.proc, ev.thread, ev.node);
      break;
    case TraceOp::kExit:
      s = op_thread_exit(ev.proc, ev.thread);
      break;
    case TraceOp::kMigrate:
      s = op_migrate(ev.proc, ev.thread, ev.node);
      break;
    case TraceOp::kMmap:
      s = op_mmap(ev.proc, ev.thread, ev.len, ev.prot, ev.node, ev.addr);
      break;
    case TraceOp::kMunmap:
      if (ev.vma >= 0)
        s = op_munmap_vma(ev.proc, ev.thread, ev.vma);
      else if (ev.addr)
        s = op_munmap(ev.proc, ev.thread, VirtRange{*ev.addr, ev.len});
      else {
        s.op = OpClass::kMunmap;
        s = trace_error(s, "munmap: needs vma id or addr+len");
        metrics_.record_op(OpClass::kMunmap, s.total);
      }
      break;
    case TraceOp::kMprotect:
      if (!ev.addr) {
        s.op = OpClass::kMprotect;
        s = trace_error(s, "mprotect: missing addr");
        metrics_.record_op(OpClass::kMprotect, s.total);
      } else {
        s = op_mprotect(ev.proc, ev.thread, VirtRange{*ev.addr, ev.len},
                        ev.prot);
      }
      break;
    case TraceOp::kAccess:
      if (!ev.addr) {
        s.op = OpClass::kAccess;
        s = trace_error(s, "access: missing addr");
        metrics_.record_op(OpClass::kAccess, s.total);
      } else {
        s = op_access(ev.proc, ev.thread, *ev.addr, ev.kind);
      }
      break;
    case TraceOp::kSpin:
      s = op_spin(ev.proc, ev.thread, ev.iters);
      break;
  }
  s.seq = ev.seq;
  metrics_.record(Counter::kEvents, 1);
  events_applied_++;
  maybe_audit();
  return s;
}

void Simulator::maybe_audit() {
  switch (options_.audit) {
    case AuditMode::kOff:
      return;
    case AuditMode::kSampled:
      if (events_applied_ % options_.audit_interval != 0) return;
      audit_bounded();
      return;
    case AuditMode::kFull:
      audit_now();
      return;
  }
}

}  // namespace ptsim
