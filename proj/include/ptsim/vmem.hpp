#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ptsim/errors.hpp"
#include "ptsim/types.hpp"

namespace ptsim {

// ---------------------------------------------------------------------------
// Address layout
// ---------------------------------------------------------------------------

// Radix page-table geometry. Defaults model x86_64: 4 levels, 512-way
// fanout, 4KB pages (48-bit canonical space). 5-level layouts are supported
// through configuration.
struct AddressLayout {
  int levels = 4;
  int bits_per_level = 9;
  int offset_bits = 12;

  int fanout() const { return 1 << bits_per_level; }
  std::uint64_t page_size() const { return std::uint64_t{1} << offset_bits; }
  int vaddr_bits() const { return levels * bits_per_level + offset_bits; }
  Vaddr vaddr_limit() const { return Vaddr{1} << vaddr_bits(); }
  Vpn vpn_of(Vaddr va) const { return va >> offset_bits; }
  Vaddr addr_of_vpn(Vpn vpn) const { return vpn << offset_bits; }
  // Bytes translated by one page-table page at the given level (leaf = 0).
  std::uint64_t span_bytes(int level) const {
    return page_size() << (bits_per_level * (level + 1));
  }
  std::uint64_t leaf_span_bytes() const { return span_bytes(0); }

  void validate() const;
};

struct SplitAddress {
  std::vector<std::uint32_t> indices;  // root-first, one per level
  std::uint64_t offset;                // byte offset within the page
};

// Decompose a canonical virtual address into per-level slot indices plus the
// page offset. Recomposition via join_vaddr is exact.
SplitAddress split_vaddr(const AddressLayout& layout, Vaddr vaddr);
Vaddr join_vaddr(const AddressLayout& layout, const SplitAddress& split);

// ---------------------------------------------------------------------------
// Protection
// ---------------------------------------------------------------------------

struct Prot {
  std::uint8_t bits = 0;

  static constexpr std::uint8_t kRead = 1;
  static constexpr std::uint8_t kWrite = 2;
  static constexpr std::uint8_t kExec = 4;

  bool readable() const { return bits & kRead; }
  bool writable() const { return bits & kWrite; }
  bool executable() const { return bits & kExec; }
  bool covers(Prot needed) const { return (bits & needed.bits) == needed.bits; }

  friend bool operator==(Prot a, Prot b) { return a.bits == b.bits; }
  friend bool operator!=(Prot a, Prot b) { return a.bits != b.bits; }
};

inline constexpr Prot prot_none{};
inline constexpr Prot prot_r{Prot::kRead};
inline constexpr Prot prot_rw{Prot::kRead | Prot::kWrite};
inline constexpr Prot prot_rx{Prot::kRead | Prot::kExec};
inline constexpr Prot prot_rwx{Prot::kRead | Prot::kWrite | Prot::kExec};

std::string prot_to_string(Prot p);          // "none", "r", "rw", "rwx", ...
std::optional<Prot> prot_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// VMAs
// ---------------------------------------------------------------------------

struct VirtRange {
  Vaddr start = 0;
  std::uint64_t length = 0;

  Vaddr end() const { return start + length; }
  bool contains(Vaddr va) const { return va >= start && va < end(); }
  bool overlaps(const VirtRange& o) const {
    return start < o.end() && o.start < end();
  }
  friend bool operator==(const VirtRange& a, const VirtRange& b) {
    return a.start == b.start && a.length == b.length;
  }
};

// A mapped virtual range with uniform protection. The owner is the socket
// whose thread requested the allocation and never changes; the owner's
// replica tree is guaranteed to contain every valid PTE of the range.
struct Vma {
  std::int64_t id = -1;
  VirtRange range;
  Prot prot;
  NodeId owner = kNoNode;
};

// ---------------------------------------------------------------------------
// Page-table pages and sharer rings
// ---------------------------------------------------------------------------

struct Pte {
  bool present = false;
  Prot prot;
  FrameId frame = 0;
  bool accessed = false;
  bool dirty = false;
};

// One node-resident 4KB page of the radix tree. Replicas of the same logical
// page (same level, same covering span, different nodes) are linked into a
// singly linked circular sharer ring via ring_next; a page starts out as a
// singleton ring pointing at itself.
struct PageTablePage {
  std::uint64_t id = 0;
  int level = 0;  // 0 = leaf
  NodeId node = kNoNode;
  VirtRange span;
  PageTablePage* parent = nullptr;
  int parent_slot = -1;
  PageTablePage* ring_next = nullptr;

  std::vector<PageTablePage*> children;     // interior levels only
  std::vector<Pte> ptes;                    // leaf level only
  std::vector<std::uint64_t> present_mask;  // bit per present PTE / live child
  int live_entries = 0;  // present PTEs (leaf) or non-null children (interior)

  PageTablePage(std::uint64_t id, int level, NodeId node, VirtRange span,
                int fanout);

  bool is_leaf() const { return level == 0; }
  void set_present_bit(int slot, bool value);
  // Invokes fn(slot) for every present leaf PTE / non-null child slot.
  template <typename Fn>
  void for_each_present(Fn&& fn) const {
    for (std::size_t w = 0; w < present_mask.size(); ++w) {
      std::uint64_t word = present_mask[w];
      while (word) {
        int bit = __builtin_ctzll(word);
        fn(static_cast<int>(w * 64 + bit));
        word &= word - 1;
      }
    }
  }
};

// Splice a fresh singleton page into an existing ring. The fresh page must
// share level and span with the ring and bring a node not yet present.
void ring_link(PageTablePage& existing, PageTablePage& fresh);

// Merge the rings containing a and b. Returns false (a no-op) when the two
// pages already share a ring; member nodes must otherwise be disjoint. This
// is how a page that predates the sharing joins the ring when the first PTE
// of its span is copied over.
bool ring_merge(PageTablePage& a, PageTablePage& b);

// Remove a page from its ring, leaving it a singleton. Scans at most one
// full cycle to find the predecessor.
void ring_unlink(PageTablePage& page);

// All replicas in ring order starting at page (page itself included).
// A cycle longer than max_members is a protocol bug.
std::vector<PageTablePage*> ring_members(PageTablePage& page, int max_members);
std::vector<const PageTablePage*> ring_members(const PageTablePage& page,
                                               int max_members);

// ---------------------------------------------------------------------------
// Process address space
// ---------------------------------------------------------------------------

struct ThreadInfo {
  NodeId node = kNoNode;
  CoreId core = kNoCore;
};

// All mutable per-process state: VMAs, per-node replica roots, the arena of
// page-table pages, and thread placement. Mutated only by the single-threaded
// event loop.
class ProcessSpace {
 public:
  explicit ProcessSpace(ProcId pid, Vaddr va_base) : pid_(pid), cursor_(va_base) {}

  ProcId pid() const { return pid_; }

  // VMAs, keyed by start address. add_vma assigns the id when v.id < 0.
  const std::map<Vaddr, Vma>& vmas() const { return vmas_; }
  Vma& add_vma(Vma v);
  void remove_vma(Vaddr start);
  const Vma* vma_lookup(Vaddr va) const;
  Vma* vma_lookup(Vaddr va);
  const Vma* vma_by_id(std::int64_t id) const;

  // Monotone virtual-range cursor; no reuse within a run.
  Vaddr cursor() const { return cursor_; }
  void advance_cursor(Vaddr to) { cursor_ = to; }

  // Replica roots and threads.
  std::map<NodeId, PageTablePage*>& roots() { return roots_; }
  const std::map<NodeId, PageTablePage*>& roots() const { return roots_; }
  std::map<ThreadId, ThreadInfo>& threads() { return threads_; }
  const std::map<ThreadId, ThreadInfo>& threads() const { return threads_; }

  // Page arena. Pages keep stable addresses; ids are dense and deterministic.
  PageTablePage* alloc_page(int level, NodeId node, VirtRange span, int fanout);
  void free_page(PageTablePage* page);
  const std::map<std::uint64_t, std::unique_ptr<PageTablePage>>& pages() const {
    return pages_;
  }

 private:
  ProcId pid_;
  std::map<Vaddr, Vma> vmas_;
  std::map<std::int64_t, Vaddr> vma_index_;
  std::map<NodeId, PageTablePage*> roots_;
  std::map<ThreadId, ThreadInfo> threads_;
  std::map<std::uint64_t, std::unique_ptr<PageTablePage>> pages_;
  std::uint64_t next_page_id_ = 0;
  std::int64_t next_vma_id_ = 0;
  Vaddr cursor_;

  friend class Simulator;
};

}  // namespace ptsim
