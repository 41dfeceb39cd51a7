#include <algorithm>
#include <set>
#include <string>

#include "ptsim/simulator.hpp"

namespace ptsim {

// Protocol checks. Full audits sweep everything after every event; sampled
// audits bound their work (a rotating window of pages plus the most recently
// used TLB entries) so long runs stay fast, and the run loop finishes with
// one exhaustive sweep at the end.

void Simulator::check_page(const ProcessSpace& space,
                           const PageTablePage* page) const {
  const AddressLayout& lay = options_.layout;
  const bool replicated =
      options_.policy.mode != ReplicationMode::kNoReplication;

  // Ring consistency: the cycle closes, members are one-per-node and agree
  // on level and span.
  auto members = ring_members(*page, topo_.node_count);
  std::set<NodeId> nodes;
  for (const PageTablePage* m : members) {
    protocol_check(nodes.insert(m->node).second,
                   "ring holds two replicas on one node");
    protocol_check(m->level == page->level && m->span == page->span,
                   "ring member level/span mismatch");
  }

  if (!page->is_leaf()) {
    // Each replica tree is node-local above the leaves.
    page->for_each_present([&](int slot) {
      const PageTablePage* child = page->children[slot];
      protocol_check(child != nullptr, "interior mask out of sync");
      protocol_check(child->parent == page, "child/parent link broken");
      if (replicated)
        protocol_check(child->node == page->node,
                       "replica tree crosses nodes");
    });
    return;
  }

  page->for_each_present([&](int slot) {
    const Pte& pte = page->ptes[slot];
    protocol_check(pte.present, "leaf mask out of sync");
    Vaddr vaddr = page->span.start + slot * lay.page_size();
    const Vma* vma = space.vma_lookup(vaddr);
    protocol_check(vma != nullptr, "present PTE outside any VMA");
    protocol_check(pte.prot == vma->prot, "PTE protection diverged from VMA");

    if (replicated) {
      // Owner invariant: if any replica holds a valid PTE, the owner's
      // replica holds it too, with identical frame and protection.
      PageTablePage* owner_root = find_root(space, vma->owner);
      protocol_check(owner_root != nullptr,
                     "valid PTE but owner node has no root");
      SplitAddress split = split_vaddr(lay, vaddr);
      PageTablePage* owner_leaf = descend(owner_root, split, 0);
      protocol_check(owner_leaf != nullptr,
                     "valid PTE but owner tree lacks the leaf page");
      const Pte& owner_pte = owner_leaf->ptes[slot];
      protocol_check(owner_pte.present,
                     "valid PTE missing from the owner replica");
      protocol_check(
          owner_pte.frame == pte.frame && owner_pte.prot == pte.prot,
          "replica disagrees with the owner PTE");
    }
  });
}

void Simulator::check_tlb_entry(const ProcessSpace& space, NodeId node,
                                Vpn vpn, const TlbEntry& entry) const {
  const AddressLayout& lay = options_.layout;
  PageTablePage* root = find_root(space, node);
  protocol_check(root != nullptr, "TLB entry cached with no local root");
  SplitAddress split = split_vaddr(lay, lay.addr_of_vpn(vpn));
  PageTablePage* leaf = descend(root, split, 0);
  protocol_check(leaf != nullptr, "TLB entry with no local leaf page");
  const Pte& pte = leaf->ptes[split.indices[lay.levels - 1]];
  protocol_check(pte.present, "TLB entry caches a non-present PTE");
  protocol_check(pte.frame == entry.frame, "TLB frame snapshot is stale");
  protocol_check(pte.prot.covers(entry.prot),
                 "TLB protection snapshot is stale");
}

void Simulator::audit_space(const ProcessSpace& space) const {
  for (const auto& [id, page] : space.pages()) check_page(space, page.get());

  // TLB safety: every cached translation is backed by a present node-local
  // PTE at least as permissive as the cached snapshot. Accessed/dirty bits
  // may diverge between replicas; frames and protection may not.
  for (const auto& [tid, info] : space.threads()) {
    tlbs_[info.core].for_each([&](Vpn vpn, const TlbEntry& entry) {
      check_tlb_entry(space, info.node, vpn, entry);
    });
  }
}

void Simulator::audit_now() const {
  for (const auto& [pid, space] : spaces_) audit_space(*space);
  // Cores without a live thread were cleared at exit/migration time.
  std::set<CoreId> occupied;
  for (const auto& [pid, space] : spaces_)
    for (const auto& [tid, info] : space->threads()) occupied.insert(info.core);
  for (CoreId c = 0; c < topo_.total_cores(); ++c)
    if (!occupied.count(c))
      protocol_check(tlbs_[c].size() == 0, "idle core retained TLB entries");
}

void Simulator::audit_bounded() {
  // Work is charged per present PTE checked, so a window of dense leaves
  // costs the same as many sparse ones.
  constexpr std::uint64_t kUnitBudget = 4096;
  constexpr std::size_t kTlbBudget = 64;  // most recent entries per core

  for (const auto& [pid, space] : spaces_) {
    const auto& pages = space->pages();
    if (!pages.empty()) {
      std::uint64_t units = 0;
      std::size_t visited = 0;
      auto it = pages.upper_bound(audit_page_cursor_);
      while (units < kUnitBudget && visited < pages.size()) {
        if (it == pages.end()) it = pages.begin();
        check_page(*space, it->second.get());
        units += 1 + it->second->live_entries;
        audit_page_cursor_ = it->first;
        ++it;
        ++visited;
      }
    }
    for (const auto& [tid, info] : space->threads()) {
      tlbs_[info.core].for_each_recent(
          kTlbBudget, [&](Vpn vpn, const TlbEntry& entry) {
            check_tlb_entry(*space, info.node, vpn, entry);
          });
    }
  }
}

}  // namespace ptsim
