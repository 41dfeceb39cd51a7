#include "ptsim/vmem.hpp"

#include <algorithm>
#include <set>

namespace ptsim {

void AddressLayout::validate() const {
  if (levels < 1 || bits_per_level < 1 || offset_bits < 1)
    throw ConfigError("address layout fields must be positive");
  if (vaddr_bits() > 64)
    throw ConfigError("address layout exceeds 64 bits");
}

SplitAddress split_vaddr(const AddressLayout& layout, Vaddr vaddr) {
  if (vaddr >= layout.vaddr_limit())
    throw ConfigError("split_vaddr: address outside the canonical range");
  SplitAddress out;
  out.indices.resize(layout.levels);
  out.offset = vaddr & (layout.page_size() - 1);
  Vpn vpn = layout.vpn_of(vaddr);
  for (int i = layout.levels - 1; i >= 0; --i) {
    out.indices[i] = static_cast<std::uint32_t>(vpn & (layout.fanout() - 1));
    vpn >>= layout.bits_per_level;
  }
  return out;
}

Vaddr join_vaddr(const AddressLayout& layout, const SplitAddress& split) {
  Vpn vpn = 0;
  for (int i = 0; i < layout.levels; ++i)
    vpn = (vpn << layout.bits_per_level) | split.indices[i];
  return layout.addr_of_vpn(vpn) | split.offset;
}

std::string prot_to_string(Prot p) {
  if (p.bits == 0) return "none";
  std::string s;
  if (p.readable()) s += 'r';
  if (p.writable()) s += 'w';
  if (p.executable()) s += 'x';
  return s;
}

std::optional<Prot> prot_from_string(const std::string& s) {
  if (s == "none") return prot_none;
  Prot p;
  for (char c : s) {
    switch (c) {
      case 'r': p.bits |= Prot::kRead; break;
      case 'w': p.bits |= Prot::kWrite; break;
      case 'x': p.bits |= Prot::kExec; break;
      default: return std::nullopt;
    }
  }
  if (s.empty()) return std::nullopt;
  return p;
}

PageTablePage::PageTablePage(std::uint64_t id, int level, NodeId node,
                             VirtRange span, int fanout)
    : id(id), level(level), node(node), span(span), ring_next(this) {
  if (level == 0)
    ptes.resize(fanout);
  else
    children.assign(fanout, nullptr);
  present_mask.assign((fanout + 63) / 64, 0);
}

void PageTablePage::set_present_bit(int slot, bool value) {
  std::uint64_t& word = present_mask[slot / 64];
  std::uint64_t bit = std::uint64_t{1} << (slot % 64);
  if (value)
    word |= bit;
  else
    word &= ~bit;
}

void ring_link(PageTablePage& existing, PageTablePage& fresh) {
  protocol_check(fresh.ring_next == &fresh,
                 "ring_link: page is already a member of a ring");
  protocol_check(fresh.level == existing.level && fresh.span == existing.span,
                 "ring_link: level/span mismatch between ring members");
  for (PageTablePage* p = &existing;;) {
    protocol_check(p->node != fresh.node,
                   "ring_link: node already present in the sharer ring");
    p = p->ring_next;
    if (p == &existing) break;
  }
  fresh.ring_next = existing.ring_next;
  existing.ring_next = &fresh;
}

bool ring_merge(PageTablePage& a, PageTablePage& b) {
  protocol_check(a.level == b.level && a.span == b.span,
                 "ring_merge: level/span mismatch");
  std::set<NodeId> nodes;
  for (PageTablePage* p = &a;;) {
    if (p == &b) return false;  // already one ring
    nodes.insert(p->node);
    p = p->ring_next;
    if (p == &a) break;
  }
  for (PageTablePage* p = &b;;) {
    protocol_check(!nodes.count(p->node),
                   "ring_merge: node present in both rings");
    p = p->ring_next;
    if (p == &b) break;
  }
  std::swap(a.ring_next, b.ring_next);
  return true;
}

void ring_unlink(PageTablePage& page) {
  if (page.ring_next == &page) return;
  PageTablePage* prev = &page;
  while (prev->ring_next != &page) prev = prev->ring_next;
  prev->ring_next = page.ring_next;
  page.ring_next = &page;
}

std::vector<PageTablePage*> ring_members(PageTablePage& page, int max_members) {
  std::vector<PageTablePage*> out;
  PageTablePage* p = &page;
  do {
    protocol_check(static_cast<int>(out.size()) < max_members,
                   "ring_members: cycle does not close within node count");
    out.push_back(p);
    p = p->ring_next;
  } while (p != &page);
  return out;
}

std::vector<const PageTablePage*> ring_members(const PageTablePage& page,
                                               int max_members) {
  auto v = ring_members(const_cast<PageTablePage&>(page), max_members);
  return {v.begin(), v.end()};
}

Vma& ProcessSpace::add_vma(Vma v) {
  if (v.id < 0) v.id = next_vma_id_++;
  auto it = vmas_.lower_bound(v.range.start);
  if (it != vmas_.begin() && std::prev(it)->second.range.overlaps(v.range))
    throw ConfigError("add_vma: overlapping VMA");
  if (it != vmas_.end() && it->second.range.overlaps(v.range))
    throw ConfigError("add_vma: overlapping VMA");
  vma_index_[v.id] = v.range.start;
  return vmas_.emplace(v.range.start, v).first->second;
}

void ProcessSpace::remove_vma(Vaddr start) {
  auto it = vmas_.find(start);
  if (it == vmas_.end()) return;
  vma_index_.erase(it->second.id);
  vmas_.erase(it);
}

const Vma* ProcessSpace::vma_lookup(Vaddr va) const {
  auto it = vmas_.upper_bound(va);
  if (it == vmas_.begin()) return nullptr;
  --it;
  return it->second.range.contains(va) ? &it->second : nullptr;
}

Vma* ProcessSpace::vma_lookup(Vaddr va) {
  return const_cast<Vma*>(
      static_cast<const ProcessSpace*>(this)->vma_lookup(va));
}

const Vma* ProcessSpace::vma_by_id(std::int64_t id) const {
  auto it = vma_index_.find(id);
  if (it == vma_index_.end()) return nullptr;
  auto vit = vmas_.find(it->second);
  return vit == vmas_.end() ? nullptr : &vit->second;
}

PageTablePage* ProcessSpace::alloc_page(int level, NodeId node, VirtRange span,
                                        int fanout) {
  auto page = std::make_unique<PageTablePage>(next_page_id_++, level, node,
                                              span, fanout);
  PageTablePage* raw = page.get();
  pages_.emplace(raw->id, std::move(page));
  return raw;
}

void ProcessSpace::free_page(PageTablePage* page) {
  ring_unlink(*page);
  if (page->parent) {
    page->parent->children[page->parent_slot] = nullptr;
    page->parent->set_present_bit(page->parent_slot, false);
    page->parent->live_entries--;
  }
  pages_.erase(page->id);
}

}  // namespace ptsim
