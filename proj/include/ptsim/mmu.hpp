#pragma once

#include <cstdint>
#include <list>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ptsim/types.hpp"
#include "ptsim/vmem.hpp"

namespace ptsim {

struct TlbEntry {
  FrameId frame = 0;
  Prot prot;
};

// Per-core translation cache. Bounded mode evicts in LRU order; capacity 0
// means unbounded (used by audit runs, since the protocol invariants must
// hold regardless of capacity).
class CoreTlb {
 public:
  explicit CoreTlb(CoreId core = kNoCore, std::size_t capacity = 0)
      : core_(core), capacity_(capacity) {}

  CoreId core() const { return core_; }
  std::size_t size() const { return index_.size(); }

  // Refreshes LRU position on hit.
  const TlbEntry* lookup(Vpn vpn);
  void insert(Vpn vpn, TlbEntry entry);
  // Removes cached translations for vpns in [lo, hi); returns removed count.
  std::uint64_t invalidate_range(Vpn lo, Vpn hi);
  std::uint64_t clear();

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [vpn, entry] : order_) fn(vpn, entry);
  }
  // Most recently used entries first, at most limit of them.
  template <typename Fn>
  void for_each_recent(std::size_t limit, Fn&& fn) const {
    std::size_t seen = 0;
    for (const auto& [vpn, entry] : order_) {
      if (seen++ >= limit) break;
      fn(vpn, entry);
    }
  }

 private:
  CoreId core_;
  std::size_t capacity_;
  std::list<std::pair<Vpn, TlbEntry>> order_;  // front = most recent
  std::unordered_map<Vpn, std::list<std::pair<Vpn, TlbEntry>>::iterator> index_;
};

enum class FaultKind { kLocalHit, kCopiedFromOwner, kFreshAllocation };

// Result of one page-fault (TLB-miss resolution). copied_count counts PTEs
// brought into the faulting node's replica, including prefetched neighbors.
struct FaultOutcome {
  FaultKind kind = FaultKind::kLocalHit;
  std::uint64_t copied_count = 0;
  Cost charged = 0;
};

enum class FaultError { kNone, kSegv, kProtection };

struct FaultResult {
  FaultOutcome outcome;
  FaultError error = FaultError::kNone;
  bool faulted() const { return error != FaultError::kNone; }
};

// Outcome of a tree walk on one node's replica.
struct WalkResult {
  PageTablePage* leaf = nullptr;  // set when the walk reached the leaf page
  int pte_index = -1;
  int missing_level = -1;  // level of the first absent page, -1 if none
  bool pte_present = false;
  Cost charged = 0;
  int levels_visited = 0;
};

}  // namespace ptsim
