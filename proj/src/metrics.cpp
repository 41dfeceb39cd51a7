#include "ptsim/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ptsim {

namespace {

const std::map<Counter, std::string> kCounterNames = {
    {Counter::kPtPagesAllocated, "pt_pages_allocated"},
    {Counter::kPtPagesFreed, "pt_pages_freed"},
    {Counter::kPteCopies, "pte_copies"},
    {Counter::kRingLinks, "ring_links"},
    {Counter::kFaultLocalHit, "faults_local_hit"},
    {Counter::kFaultCopied, "faults_copied"},
    {Counter::kFaultFresh, "faults_fresh"},
    {Counter::kFaultSegv, "faults_segv"},
    {Counter::kFaultProt, "faults_protection"},
    {Counter::kCoherenceLocal, "coherence_updates_local"},
    {Counter::kCoherenceRemote, "coherence_updates_remote"},
    {Counter::kShootdownCalls, "shootdown_calls"},
    {Counter::kShootdownTargets, "shootdown_targets_total"},
    {Counter::kIpiLocal, "ipi_local"},
    {Counter::kIpiRemote, "ipi_remote"},
    {Counter::kTlbHits, "tlb_hits"},
    {Counter::kTlbMisses, "tlb_misses"},
    {Counter::kTlbInvalidations, "tlb_invalidations"},
    {Counter::kFramesAllocated, "frames_allocated"},
    {Counter::kFramesFreed, "frames_freed"},
    {Counter::kTraceErrors, "trace_errors"},
    {Counter::kEvents, "events_total"},
};

const std::map<CostKind, std::string> kCostNames = {
    {CostKind::kWalk, "cost_cat_walk"},
    {CostKind::kData, "cost_cat_data"},
    {CostKind::kFault, "cost_cat_fault"},
    {CostKind::kCoherence, "cost_cat_coherence"},
    {CostKind::kIpi, "cost_cat_ipi"},
    {CostKind::kTlb, "cost_cat_tlb"},
    {CostKind::kOverhead, "cost_cat_overhead"},
};

// Quote a field when RFC 4180 requires it.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string op_class_name(OpClass op) {
  switch (op) {
    case OpClass::kSpawn: return "spawn";
    case OpClass::kExit: return "exit";
    case OpClass::kMigrate: return "migrate";
    case OpClass::kMmap: return "mmap";
    case OpClass::kMunmap: return "munmap";
    case OpClass::kMprotect: return "mprotect";
    case OpClass::kAccess: return "access";
    case OpClass::kSpin: return "spin";
  }
  return "?";
}

MetricsReport::MetricsReport(int node_count, int levels)
    : node_count_(node_count),
      levels_(levels),
      pt_pages_node_(node_count, 0),
      walk_local_level_(levels, 0),
      walk_remote_level_(levels, 0),
      ring_hist_(node_count, 0) {
  for (const auto& [id, name] : kCounterNames) scalars_[id] = 0;
  for (const auto& [kind, name] : kCostNames) costs_[kind] = 0;
  for (int op = 0; op <= static_cast<int>(OpClass::kSpin); ++op) {
    op_calls_[static_cast<OpClass>(op)] = 0;
    op_costs_[static_cast<OpClass>(op)] = 0;
  }
}

void MetricsReport::record(Counter id, std::uint64_t amount, int node) {
  switch (id) {
    case Counter::kPtPages:
      throw ConfigError("record: use record_pt_page_delta for page counts");
    case Counter::kWalkLocal:
      if (node < 0 || node >= levels_)
        throw ConfigError("record: walk level out of range");
      walk_local_level_[node] += amount;
      return;
    case Counter::kWalkRemote:
      if (node < 0 || node >= levels_)
        throw ConfigError("record: walk level out of range");
      walk_remote_level_[node] += amount;
      return;
    default: {
      auto it = scalars_.find(id);
      if (it == scalars_.end()) throw ConfigError("record: unknown counter id");
      it->second += amount;
      return;
    }
  }
}

void MetricsReport::record_pt_page_delta(NodeId node, int delta) {
  if (node < 0 || node >= node_count_)
    throw ConfigError("record: node out of range for pt_pages");
  if (delta > 0) {
    pt_pages_node_[node] += delta;
    scalars_[Counter::kPtPagesAllocated] += delta;
  } else if (delta < 0) {
    if (pt_pages_node_[node] < static_cast<std::uint64_t>(-delta))
      throw ProtocolError("pt_pages would go negative");
    pt_pages_node_[node] += delta;
    scalars_[Counter::kPtPagesFreed] += -delta;
  }
}

void MetricsReport::record_cost(CostKind kind, Cost amount) {
  costs_[kind] += amount;
}

void MetricsReport::record_op(OpClass op, Cost total_cost) {
  op_calls_[op] += 1;
  op_costs_[op] += total_cost;
}

std::uint64_t MetricsReport::get(Counter id) const {
  auto it = scalars_.find(id);
  if (it == scalars_.end()) throw ConfigError("get: unknown counter id");
  return it->second;
}

std::uint64_t MetricsReport::pt_pages_total() const {
  std::uint64_t total = 0;
  for (auto v : pt_pages_node_) total += v;
  return total;
}

Cost MetricsReport::cost(CostKind kind) const { return costs_.at(kind); }

Cost MetricsReport::cost_total() const {
  Cost total = 0;
  for (const auto& [kind, v] : costs_) total += v;
  return total;
}

std::uint64_t MetricsReport::op_calls(OpClass op) const {
  return op_calls_.at(op);
}

Cost MetricsReport::op_cost(OpClass op) const { return op_costs_.at(op); }

std::uint64_t MetricsReport::walks_local_total() const {
  std::uint64_t total = 0;
  for (auto v : walk_local_level_) total += v;
  return total;
}

std::uint64_t MetricsReport::walks_remote_total() const {
  std::uint64_t total = 0;
  for (auto v : walk_remote_level_) total += v;
  return total;
}

void MetricsReport::set_ring_histogram(std::vector<std::uint64_t> hist) {
  hist.resize(node_count_, 0);
  ring_hist_ = std::move(hist);
}

std::uint64_t MetricsReport::ring_hist(int size) const {
  if (size < 1 || size > node_count_)
    throw ConfigError("ring_hist: size out of range");
  return ring_hist_[size - 1];
}

std::map<std::string, std::uint64_t> MetricsReport::rows() const {
  std::map<std::string, std::uint64_t> out;
  for (const auto& [id, name] : kCounterNames) out[name] = scalars_.at(id);
  for (const auto& [kind, name] : kCostNames) out[name] = costs_.at(kind);
  out["cost_total"] = cost_total();
  for (int n = 0; n < node_count_; ++n)
    out["pt_pages_node" + std::to_string(n)] = pt_pages_node_[n];
  out["pt_pages_total"] = pt_pages_total();
  for (int l = 0; l < levels_; ++l) {
    out["walk_l" + std::to_string(l) + "_local"] = walk_local_level_[l];
    out["walk_l" + std::to_string(l) + "_remote"] = walk_remote_level_[l];
  }
  out["walks_local"] = walks_local_total();
  out["walks_remote"] = walks_remote_total();
  for (const auto& [op, calls] : op_calls_)
    out["calls_" + op_class_name(op)] = calls;
  for (const auto& [op, cost] : op_costs_)
    out["cost_op_" + op_class_name(op)] = cost;
  for (int k = 1; k <= node_count_; ++k)
    out["ring_hist_" + std::to_string(k)] = ring_hist_[k - 1];
  out["root_replicas"] = root_replicas_;
  return out;
}

std::string report_csv(const std::vector<RunRow>& rows, int baseline_row) {
  if (rows.empty()) return "";
  std::ostringstream os;
  os << "run_id,policy,prefetch,tlb_opt";
  for (const auto& [name, v] : rows.front().counters) os << ',' << name;
  if (baseline_row >= 0)
    for (const auto& [name, v] : rows.front().counters) os << ",norm_" << name;
  os << '\n';

  for (const auto& row : rows) {
    os << csv_field(row.run_id) << ',' << csv_field(row.policy) << ','
       << row.prefetch << ',' << (row.tlb_opt ? 1 : 0);
    for (const auto& [name, v] : row.counters) os << ',' << v;
    if (baseline_row >= 0) {
      const auto& base = rows[baseline_row].counters;
      for (const auto& [name, v] : row.counters) {
        std::uint64_t b = base.at(name);
        os << ',';
        if (b == 0 && v == 0) {
          os << "1";
        } else if (b == 0) {
          os << "inf";
        } else {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.6g",
                        static_cast<double>(v) / static_cast<double>(b));
          os << buf;
        }
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace ptsim
