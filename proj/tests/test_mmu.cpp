#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "ptsim/simulator.hpp"

using namespace ptsim;
using ptsim::testing::make_sim;

namespace {
constexpr Vaddr kBase = Vaddr{1} << 32;
constexpr std::uint64_t kPage = 0x1000;
}  // namespace

TEST_CASE("CoreTlb misses empty, hits after insert, snapshots intact") {
  CoreTlb tlb(0, 4);
  CHECK(tlb.lookup(42) == nullptr);
  tlb.insert(42, TlbEntry{7, prot_rw});
  const TlbEntry* hit = tlb.lookup(42);
  REQUIRE(hit != nullptr);
  CHECK(hit->frame == 7);
  CHECK(hit->prot == prot_rw);
}

TEST_CASE("CoreTlb evicts in LRU order at capacity") {
  CoreTlb tlb(0, 2);
  tlb.insert(1, TlbEntry{1, prot_r});
  tlb.insert(2, TlbEntry{2, prot_r});
  tlb.insert(3, TlbEntry{3, prot_r});
  // Three inserts into capacity two: the first VPN went out first.
  CHECK(tlb.lookup(1) == nullptr);
  CHECK(tlb.lookup(2) != nullptr);
  CHECK(tlb.lookup(3) != nullptr);

  // A lookup refreshes recency: 2 survives the next eviction, 3 does not.
  CHECK(tlb.lookup(2) != nullptr);
  tlb.insert(4, TlbEntry{4, prot_r});
  CHECK(tlb.lookup(2) != nullptr);
  CHECK(tlb.lookup(3) == nullptr);
}

TEST_CASE("CoreTlb range invalidation removes exactly the covered VPNs") {
  CoreTlb tlb(0, 0);
  for (Vpn v = 100; v < 110; ++v) tlb.insert(v, TlbEntry{v, prot_r});
  CHECK(tlb.invalidate_range(103, 106) == 3);
  CHECK(tlb.size() == 7);
  CHECK(tlb.lookup(103) == nullptr);
  CHECK(tlb.lookup(106) != nullptr);
}

TEST_CASE("walk locality: eager is always local, single tree is remote") {
  // Eager: any resident VPN walks four local levels from any node.
  Simulator eager = make_sim(4, 2, ReplicationMode::kEager);
  eager.op_thread_spawn(0, 0, 0);
  eager.op_thread_spawn(0, 1, 1);
  eager.op_mmap(0, 0, kPage, prot_rw, kNoNode, kBase);
  eager.op_access(0, 0, kBase, AccessKind::kWrite);
  {
    std::uint64_t local = eager.metrics().walks_local_total();
    EventSummary s;
    WalkResult w = eager.walk(eager.space(0), 1, kBase, s);
    CHECK(w.pte_present);
    CHECK(w.levels_visited == 4);
    CHECK(eager.metrics().walks_local_total() == local + 4);
    CHECK(s.cost_walk == 4 * eager.topology().costs.local_mem);
  }

  // No replication: the tree lives where first touched (node 0); a walker
  // on node 1 pays four remote accesses.
  Simulator none = make_sim(4, 2, ReplicationMode::kNoReplication);
  none.op_thread_spawn(0, 0, 0);
  none.op_thread_spawn(0, 1, 1);
  none.op_mmap(0, 0, kPage, prot_rw, kNoNode, kBase);
  none.op_access(0, 0, kBase, AccessKind::kWrite);
  {
    std::uint64_t remote = none.metrics().walks_remote_total();
    EventSummary s;
    WalkResult w = none.walk(none.space(0), 1, kBase, s);
    CHECK(w.pte_present);
    CHECK(none.metrics().walks_remote_total() == remote + 4);
    CHECK(s.cost_walk == 4 * none.topology().costs.remote_mem);
  }

  // Lazy: a VPN never seen on this node reports the missing level.
  Simulator lazy = make_sim(4, 2, ReplicationMode::kLazy);
  lazy.op_thread_spawn(0, 0, 0);
  lazy.op_thread_spawn(0, 1, 1);
  lazy.op_mmap(0, 0, kPage, prot_rw, kNoNode, kBase);
  lazy.op_access(0, 0, kBase, AccessKind::kWrite);
  {
    EventSummary s;
    WalkResult w = lazy.walk(lazy.space(0), 1, kBase, s);
    CHECK_FALSE(w.pte_present);
    CHECK(w.missing_level == lazy.layout().levels - 1);  // no root yet
  }
}

TEST_CASE("handle_fault: remote first touch of owned data copies from the owner") {
  Simulator sim = make_sim(4, 2, ReplicationMode::kLazy);
  sim.op_thread_spawn(0, 0, 0);
  sim.op_thread_spawn(0, 3, 3);
  sim.op_mmap(0, 0, 4 * kPage, prot_rw, kNoNode, kBase);
  EventSummary s0 = sim.op_access(0, 0, kBase, AccessKind::kWrite);
  CHECK(s0.outcome == "fresh");

  std::uint64_t pages_before = sim.metrics().pt_pages(3);
  EventSummary s3 = sim.op_access(0, 3, kBase, AccessKind::kRead);
  CHECK(s3.outcome == "copied");

  // The node-3 subtree materialized and its leaf joined the owner's ring.
  CHECK(sim.metrics().pt_pages(3) == pages_before + 4);
  EventSummary scratch;
  WalkResult leaf3 = sim.walk(sim.space(0), 3, kBase, scratch);
  REQUIRE(leaf3.pte_present);
  auto members = ring_members(*leaf3.leaf, 4);
  std::vector<NodeId> nodes;
  for (auto* m : members) nodes.push_back(m->node);
  std::sort(nodes.begin(), nodes.end());
  CHECK(nodes == std::vector<NodeId>{0, 3});
}

TEST_CASE("handle_fault: owner-local first touch allocates fresh singletons") {
  Simulator sim = make_sim(4, 2, ReplicationMode::kLazy);
  sim.op_thread_spawn(0, 0, 0);
  sim.op_mmap(0, 0, kPage, prot_rw, kNoNode, kBase);
  EventSummary s = sim.op_access(0, 0, kBase, AccessKind::kWrite);
  CHECK(s.outcome == "fresh");
  EventSummary scratch;
  WalkResult leaf = sim.walk(sim.space(0), 0, kBase, scratch);
  REQUIRE(leaf.pte_present);
  CHECK(ring_members(*leaf.leaf, 4).size() == 1);
  CHECK(sim.metrics().get(Counter::kFaultFresh) == 1);
}

TEST_CASE("prefetch degree 9 turns the second fault in a leaf into a local hit") {
  // Replay oracle: identical traces at d=0 and d=9, compare outcome logs.
  auto run = [](int degree) {
    Simulator sim = make_sim(2, 2, ReplicationMode::kLazy, degree);
    sim.op_thread_spawn(0, 0, 0);
    sim.op_thread_spawn(0, 1, 1);
    sim.op_mmap(0, 0, 8 * kPage, prot_rw, kNoNode, kBase);
    for (int p = 0; p < 8; ++p)
      sim.op_access(0, 0, kBase + p * kPage, AccessKind::kWrite);
    std::vector<std::string> outcomes;
    for (int p = 0; p < 8; ++p)
      outcomes.push_back(
          sim.op_access(0, 1, kBase + p * kPage, AccessKind::kRead).outcome);
    return outcomes;
  };
  auto lazy0 = run(0);
  auto lazy9 = run(9);
  CHECK(std::count(lazy0.begin(), lazy0.end(), "copied") == 8);
  CHECK(lazy9.front() == "copied");
  CHECK(std::count(lazy9.begin(), lazy9.end(), "local_hit") == 7);
}

TEST_CASE("the audit detects deliberately corrupted protocol state") {
  SUBCASE("owner missing a PTE that a replica holds") {
    Simulator sim = make_sim(2, 2, ReplicationMode::kLazy, 0, false,
                             AuditMode::kOff);
    sim.op_thread_spawn(0, 0, 0);
    sim.op_thread_spawn(0, 1, 1);
    sim.op_mmap(0, 0, kPage, prot_rw, kNoNode, kBase);
    sim.op_access(0, 0, kBase, AccessKind::kWrite);
    sim.op_access(0, 1, kBase, AccessKind::kRead);
    sim.audit_now();  // healthy

    EventSummary scratch;
    WalkResult owner = sim.walk(sim.space(0), 0, kBase, scratch);
    owner.leaf->ptes[owner.pte_index].present = false;
    owner.leaf->set_present_bit(owner.pte_index, false);
    owner.leaf->live_entries--;
    sim.tlb(0).clear();  // avoid tripping the TLB check first
    CHECK_THROWS_AS(sim.audit_now(), ProtocolError);
  }

  SUBCASE("TLB entry with no backing local PTE") {
    Simulator sim = make_sim(2, 2, ReplicationMode::kLazy, 0, false,
                             AuditMode::kOff);
    sim.op_thread_spawn(0, 0, 0);
    sim.op_mmap(0, 0, kPage, prot_rw, kNoNode, kBase);
    sim.op_access(0, 0, kBase, AccessKind::kWrite);
    sim.tlb(0).insert((kBase >> 12) + 1, TlbEntry{9, prot_rw});
    CHECK_THROWS_AS(sim.audit_now(), ProtocolError);
  }

  SUBCASE("replica frame diverging from the owner") {
    Simulator sim = make_sim(2, 2, ReplicationMode::kLazy, 0, false,
                             AuditMode::kOff);
    sim.op_thread_spawn(0, 0, 0);
    sim.op_thread_spawn(0, 1, 1);
    sim.op_mmap(0, 0, kPage, prot_rw, kNoNode, kBase);
    sim.op_access(0, 0, kBase, AccessKind::kWrite);
    sim.op_access(0, 1, kBase, AccessKind::kRead);
    EventSummary scratch;
    WalkResult replica = sim.walk(sim.space(0), 1, kBase, scratch);
    replica.leaf->ptes[replica.pte_index].frame += 1;
    sim.tlb(sim.space(0).threads().at(1).core).clear();
    CHECK_THROWS_AS(sim.audit_now(), ProtocolError);
  }
}

TEST_CASE("a leaf that predates the sharing joins the ring on first copy") {
  // Two VMAs with different owners inside one 2MB leaf span. Each side
  // builds its own leaf for that span independently; only when node 0 pulls
  // a PTE of the node-1-owned VMA do the two leaves become one ring.
  Simulator sim = make_sim(2, 2, ReplicationMode::kLazy, 0, true);
  sim.op_thread_spawn(0, 0, 0);
  sim.op_thread_spawn(0, 1, 1);
  sim.op_mmap(0, 0, kPage, prot_rw, kNoNode, kBase);          // owner 0
  sim.op_mmap(0, 1, kPage, prot_rw, kNoNode, kBase + kPage);  // owner 1
  sim.op_access(0, 0, kBase, AccessKind::kWrite);
  sim.op_access(0, 1, kBase + kPage, AccessKind::kWrite);

  EventSummary scratch;
  WalkResult leaf0 = sim.walk(sim.space(0), 0, kBase, scratch);
  REQUIRE(leaf0.leaf != nullptr);
  CHECK(ring_members(*leaf0.leaf, 2).size() == 1);

  // Cross-VMA pull: node 0 reads the neighbor page owned by node 1.
  EventSummary s = sim.op_access(0, 0, kBase + kPage, AccessKind::kRead);
  CHECK(s.outcome == "copied");
  CHECK(ring_members(*leaf0.leaf, 2).size() == 2);

  // With the ring joined, an mprotect by node 1 must now reach node 0's
  // copy and invalidate its TLB entry (the audit would catch a miss).
  EventSummary m =
      sim.op_mprotect(0, 1, VirtRange{kBase + kPage, kPage}, prot_r);
  CHECK(m.replica_updates == 2);
  sim.audit_now();
}

TEST_CASE("apply_shootdown charges the initiator per target by locality") {
  Simulator sim = make_sim(8, 18, ReplicationMode::kNoReplication, 0, false,
                           AuditMode::kOff);
  sim.op_thread_spawn(0, 0, 0);  // initiator on node 0, core 0
  const CostParams& costs = sim.topology().costs;

  SUBCASE("zero targets cost nothing") {
    EventSummary s;
    sim.apply_shootdown(sim.space(0), {}, 0, 0, 100, s);
    CHECK(s.total == 0);
    CHECK(s.invalidations == 0);
  }

  SUBCASE("17 same-socket targets cost 17 local IPIs") {
    std::vector<CoreId> targets;
    for (CoreId c = 1; c < 18; ++c) targets.push_back(c);
    EventSummary s;
    sim.apply_shootdown(sim.space(0), targets, 0, 0, 100, s);
    CHECK(s.cost_ipi == 17 * costs.ipi_local);
    CHECK(s.ipis_local == 17);
    CHECK(s.ipis_remote == 0);
  }

  SUBCASE("spinner audience arithmetic matches the placement oracle") {
    // k spinners on each of 8 sockets plus the worker on node 0.
    const int k = 5;
    ThreadId tid = 1;
    for (NodeId n = 0; n < 8; ++n)
      for (int i = 0; i < k; ++i) sim.op_thread_spawn(0, tid++, n);
    std::vector<CoreId> targets;
    for (const auto& [t, info] : sim.space(0).threads())
      if (info.core != 0) targets.push_back(info.core);
    EventSummary s;
    sim.apply_shootdown(sim.space(0), targets, 0, 0, 100, s);
    CHECK(s.ipis_remote == 7 * k);
    CHECK(s.ipis_local == k);
    CHECK(s.cost_ipi == 7 * k * costs.ipi_remote + k * costs.ipi_local);
    CHECK(sim.metrics().get(Counter::kIpiLocal) +
              sim.metrics().get(Counter::kIpiRemote) ==
          sim.metrics().get(Counter::kShootdownTargets));
  }
}

TEST_CASE("aggregate_ad_bits ORs accessed/dirty across replicas") {
  Simulator sim = make_sim(4, 2, ReplicationMode::kLazy);
  sim.op_thread_spawn(0, 0, 0);
  sim.op_thread_spawn(0, 3, 3);
  sim.op_mmap(0, 0, 2 * kPage, prot_rw, kNoNode, kBase);
  const Vpn vpn = kBase >> 12;

  SUBCASE("single replica reflects its own bits") {
    sim.op_access(0, 0, kBase, AccessKind::kRead);
    auto ad = sim.aggregate_ad_bits(sim.space(0), vpn);
    REQUIRE(ad.has_value());
    CHECK(ad->first == true);
    CHECK(ad->second == false);
  }

  SUBCASE("read on the owner, write on node 3, union is (true, true)") {
    sim.op_access(0, 0, kBase, AccessKind::kRead);
    sim.op_access(0, 3, kBase, AccessKind::kWrite);
    auto ad = sim.aggregate_ad_bits(sim.space(0), vpn);
    REQUIRE(ad.has_value());
    CHECK(ad->first == true);
    CHECK(ad->second == true);
    // Owner's own copy stayed clean for the dirty bit; only the union shows it.
    EventSummary scratch;
    WalkResult at_owner = sim.walk(sim.space(0), 0, kBase, scratch);
    CHECK(at_owner.leaf->ptes[at_owner.pte_index].dirty == false);
  }

  SUBCASE("unmapped vpn has no aggregate") {
    CHECK_FALSE(sim.aggregate_ad_bits(sim.space(0), vpn).has_value());
  }
}

TEST_CASE("prefetch copies A/D bits as-is; untouched entries stay clean") {
  Simulator sim =
      make_sim(2, 2, ReplicationMode::kLazy, /*prefetch=*/9);
  sim.op_thread_spawn(0, 0, 0);
  sim.op_thread_spawn(0, 1, 1);
  sim.op_mmap(0, 0, 2 * kPage, prot_rw, kNoNode, kBase);
  sim.op_access(0, 0, kBase, AccessKind::kWrite);
  sim.op_access(0, 0, kBase + kPage, AccessKind::kWrite);

  // Model an owner PTE that was installed but never walked by hardware:
  // clear its bits before the replica prefetches it.
  EventSummary scratch;
  WalkResult at_owner = sim.walk(sim.space(0), 0, kBase + kPage, scratch);
  at_owner.leaf->ptes[at_owner.pte_index].accessed = false;
  at_owner.leaf->ptes[at_owner.pte_index].dirty = false;

  EventSummary s = sim.op_access(0, 1, kBase, AccessKind::kRead);
  CHECK(s.outcome == "copied");
  CHECK(s.copied_ptes == 2);  // demanded + prefetched neighbor

  // The demanded VPN aggregates true; the prefetched neighbor was never
  // accessed anywhere and stays (false, false).
  auto demanded = sim.aggregate_ad_bits(sim.space(0), kBase >> 12);
  REQUIRE(demanded.has_value());
  CHECK(demanded->first == true);
  auto neighbor = sim.aggregate_ad_bits(sim.space(0), (kBase + kPage) >> 12);
  REQUIRE(neighbor.has_value());
  CHECK(neighbor->first == false);
  CHECK(neighbor->second == false);
}
