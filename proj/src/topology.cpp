#include "ptsim/topology.hpp"

#include <string>

namespace ptsim {

void CostParams::validate() const {
  if (local_mem > remote_mem)
    throw ConfigError("costs: local_mem must be <= remote_mem");
  if (remote_mem > remote_mem_interference)
    throw ConfigError("costs: remote_mem must be <= remote_mem_interference");
  if (ipi_local > ipi_remote)
    throw ConfigError("costs: ipi_local must be <= ipi_remote");
}

NodeId MachineTopology::node_of_core(CoreId core) const {
  if (core < 0 || core >= total_cores())
    throw ConfigError("core id " + std::to_string(core) + " out of range");
  return core / cores_per_node;
}

CoreId MachineTopology::first_core_of_node(NodeId node) const {
  if (node < 0 || node >= node_count)
    throw ConfigError("node id " + std::to_string(node) + " out of range");
  return node * cores_per_node;
}

MachineTopology build_topology(int node_count, int cores_per_node,
                               const CostParams& costs) {
  if (node_count < 1) throw ConfigError("topology: node_count must be >= 1");
  if (cores_per_node < 1)
    throw ConfigError("topology: cores_per_node must be >= 1");
  costs.validate();
  return MachineTopology{node_count, cores_per_node, costs};
}

Cost access_cost(const MachineTopology& topo, NodeId from_node, NodeId to_node,
                 bool interference) {
  if (from_node < 0 || from_node >= topo.node_count || to_node < 0 ||
      to_node >= topo.node_count)
    throw ConfigError("access_cost: node id out of range");
  if (from_node == to_node) return topo.costs.local_mem;
  return interference ? topo.costs.remote_mem_interference
                      : topo.costs.remote_mem;
}

Cost ipi_cost(const MachineTopology& topo, NodeId from_node,
              NodeId target_node) {
  if (from_node < 0 || from_node >= topo.node_count || target_node < 0 ||
      target_node >= topo.node_count)
    throw ConfigError("ipi_cost: node id out of range");
  return from_node == target_node ? topo.costs.ipi_local
                                  : topo.costs.ipi_remote;
}

}  // namespace ptsim
