#pragma once

#include "ptsim/errors.hpp"
#include "ptsim/types.hpp"

namespace ptsim {

// Abstract prices for every memory/IPI interaction the simulator charges.
// Units are dimensionless; only ratios matter. Defaults keep remote >> local
// and make a single IPI dominate a handful of memory accesses.
struct CostParams {
  Cost local_mem = 1;
  Cost remote_mem = 4;
  Cost remote_mem_interference = 12;
  Cost ipi_local = 40;
  Cost ipi_remote = 120;
  Cost tlb_hit = 0;

  void validate() const;
};

// Flat two-tier NUMA machine: every remote socket is equally far.
// Cores are dense integers; core c lives on node c / cores_per_node.
struct MachineTopology {
  int node_count = 8;
  int cores_per_node = 18;
  CostParams costs;

  int total_cores() const { return node_count * cores_per_node; }
  NodeId node_of_core(CoreId core) const;
  CoreId first_core_of_node(NodeId node) const;
};

MachineTopology build_topology(int node_count, int cores_per_node,
                               const CostParams& costs = CostParams{});

// Price of one memory access issued from from_node to memory on to_node.
Cost access_cost(const MachineTopology& topo, NodeId from_node, NodeId to_node,
                 bool interference = false);

// Price of one IPI delivered from the initiator's node to a target core.
Cost ipi_cost(const MachineTopology& topo, NodeId from_node, NodeId target_node);

}  // namespace ptsim
