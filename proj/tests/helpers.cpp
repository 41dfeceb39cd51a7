#include "helpers.hpp"

#include <algorithm>

namespace ptsim::testing {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"': quoted = true; break;
      case ',': row.push_back(field); field.clear(); break;
      case '\n':
        row.push_back(field);
        field.clear();
        rows.push_back(row);
        row.clear();
        break;
      case '\r': break;
      default: field += c;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(field);
    rows.push_back(row);
  }
  return rows;
}

namespace {

struct LiveVma {
  Vaddr start;
  std::uint64_t pages;
};

}  // namespace

std::vector<TraceEvent> random_trace(std::uint64_t seed,
                                     const MachineTopology& topo,
                                     const AddressLayout& layout,
                                     const RandomTraceOptions& opt) {
  Rng rng(seed);
  std::vector<TraceEvent> events;
  std::uint64_t seq = 1;
  const std::uint64_t page = layout.page_size();

  auto push = [&](TraceOp op, ThreadId t) -> TraceEvent& {
    TraceEvent ev;
    ev.seq = seq++;
    ev.proc = 0;
    ev.thread = t;
    ev.op = op;
    events.push_back(ev);
    return events.back();
  };

  std::vector<ThreadId> threads;
  std::vector<int> cores_used(topo.node_count, 0);
  ThreadId next_tid = 0;
  std::vector<LiveVma> vmas;
  Vaddr cursor = Vaddr{1} << 32;

  // One pinned thread per node so every node participates.
  for (NodeId n = 0; n < topo.node_count; ++n) {
    push(TraceOp::kSpawn, next_tid).node = n;
    threads.push_back(next_tid++);
    cores_used[n]++;
  }

  auto do_mmap = [&](ThreadId t) {
    std::uint64_t pages = 1 + rng.below(opt.max_vma_pages);
    TraceEvent& ev = push(TraceOp::kMmap, t);
    ev.len = pages * page;
    ev.prot = rng.below(4) == 0 ? prot_r : prot_rw;
    vmas.push_back(LiveVma{cursor, pages});
    cursor += pages * page;
  };

  while (events.size() < opt.events) {
    std::uint64_t dice = rng.below(100);
    ThreadId t = threads[rng.below(threads.size())];

    if (dice < 4 && opt.allow_thread_churn) {  // spawn
      NodeId n = static_cast<NodeId>(rng.below(topo.node_count));
      if (cores_used[n] < topo.cores_per_node) {
        push(TraceOp::kSpawn, next_tid).node = n;
        threads.push_back(next_tid++);
        cores_used[n]++;
      }
      continue;
    }
    if (dice < 6 && opt.allow_thread_churn) {  // exit (keep the pinned ones)
      if (threads.size() > static_cast<std::size_t>(topo.node_count)) {
        std::size_t pick =
            topo.node_count + rng.below(threads.size() - topo.node_count);
        push(TraceOp::kExit, threads[pick]);
        threads.erase(threads.begin() + pick);
        // The freed core's node is unknown here; undercounting is safe.
      }
      continue;
    }
    if (dice < 9 && opt.allow_thread_churn) {  // migrate
      NodeId n = static_cast<NodeId>(rng.below(topo.node_count));
      if (cores_used[n] < topo.cores_per_node) {
        push(TraceOp::kMigrate, t).node = n;
        cores_used[n]++;
      }
      continue;
    }
    if (dice < 17) {  // mmap
      if (vmas.size() < opt.max_live_vmas) do_mmap(t);
      continue;
    }
    if (dice < 23 && opt.allow_munmap) {  // munmap whole / prefix / middle
      if (vmas.empty()) continue;
      std::size_t pick = rng.below(vmas.size());
      LiveVma v = vmas[pick];
      std::uint64_t kind = rng.below(10);
      TraceEvent& ev = push(TraceOp::kMunmap, t);
      if (kind < 6 || v.pages == 1) {  // whole
        ev.addr = v.start;
        ev.len = v.pages * page;
        vmas.erase(vmas.begin() + pick);
      } else if (kind < 8) {  // prefix
        std::uint64_t cut = 1 + rng.below(v.pages - 1);
        ev.addr = v.start;
        ev.len = cut * page;
        vmas[pick] = LiveVma{v.start + cut * page, v.pages - cut};
      } else {  // middle punch
        if (v.pages < 3) {
          ev.addr = v.start;
          ev.len = v.pages * page;
          vmas.erase(vmas.begin() + pick);
        } else {
          std::uint64_t at = 1 + rng.below(v.pages - 2);
          ev.addr = v.start + at * page;
          ev.len = page;
          vmas[pick] = LiveVma{v.start, at};
          vmas.push_back(LiveVma{v.start + (at + 1) * page, v.pages - at - 1});
        }
      }
      continue;
    }
    if (dice < 33) {  // mprotect
      if (vmas.empty()) continue;
      const LiveVma& v = vmas[rng.below(vmas.size())];
      std::uint64_t from = rng.below(v.pages);
      std::uint64_t span = 1 + rng.below(v.pages - from);
      TraceEvent& ev = push(TraceOp::kMprotect, t);
      ev.addr = v.start + from * page;
      ev.len = span * page;
      ev.prot = rng.below(2) == 0 ? prot_r : prot_rw;
      continue;
    }
    if (dice < 35) {  // spin
      push(TraceOp::kSpin, t).iters = 1 + rng.below(100);
      continue;
    }
    // access
    if (vmas.empty()) {
      do_mmap(t);
      continue;
    }
    TraceEvent& ev = push(TraceOp::kAccess, t);
    if (opt.wild_accesses && rng.below(50) == 0) {
      ev.addr = rng.next_u64() % layout.vaddr_limit();
    } else {
      const LiveVma& v = vmas[rng.below(vmas.size())];
      ev.addr = v.start + rng.below(v.pages) * page;
    }
    ev.kind = rng.below(2) == 0 ? AccessKind::kRead : AccessKind::kWrite;
  }
  return events;
}

}  // namespace ptsim::testing
