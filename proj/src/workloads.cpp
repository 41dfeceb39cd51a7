#include "ptsim/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

#include <json.hpp>

namespace ptsim {

using nlohmann::json;

std::uint64_t gamma_alloc_size(Rng& rng, int shape, double mean_bytes,
                               std::uint64_t page_size) {
  if (shape < 1) throw ConfigError("gamma shape must be >= 1");
  if (mean_bytes <= 0) throw ConfigError("gamma mean must be positive");
  const double theta = mean_bytes / shape;
  double sum = 0;
  for (int i = 0; i < shape; ++i)
    sum += -theta * std::log1p(-rng.next_unit());
  auto bytes = static_cast<std::uint64_t>(sum);
  if (bytes == 0) bytes = 1;
  return (bytes + page_size - 1) / page_size * page_size;
}

// ---------------------------------------------------------------------------
// Scenario generators
// ---------------------------------------------------------------------------

namespace {

// Scenario regions start at 4GiB, leaf-span aligned so a fresh mmap never
// shares a leaf page with a neighbor unless the scenario wants it to.
constexpr Vaddr kScenarioBase = Vaddr{1} << 32;

struct Emitter {
  std::vector<TraceEvent> events;
  std::uint64_t seq = 1;
  std::int64_t next_vma_id = 0;  // mirrors the executor's id assignment

  TraceEvent& push(TraceOp op, ThreadId thread) {
    TraceEvent ev;
    ev.seq = seq++;
    ev.proc = 0;
    ev.thread = thread;
    ev.op = op;
    events.push_back(ev);
    return events.back();
  }
  void spawn(ThreadId t, NodeId node) { push(TraceOp::kSpawn, t).node = node; }
  void exit(ThreadId t) { push(TraceOp::kExit, t); }
  void migrate(ThreadId t, NodeId node) {
    push(TraceOp::kMigrate, t).node = node;
  }
  std::int64_t mmap(ThreadId t, std::uint64_t len, Prot prot,
                    std::optional<Vaddr> addr = std::nullopt,
                    NodeId owner = kNoNode) {
    TraceEvent& ev = push(TraceOp::kMmap, t);
    ev.len = len;
    ev.prot = prot;
    ev.addr = addr;
    ev.node = owner;
    return next_vma_id++;
  }
  void munmap_id(ThreadId t, std::int64_t vma) {
    push(TraceOp::kMunmap, t).vma = vma;
  }
  void munmap_range(ThreadId t, Vaddr addr, std::uint64_t len) {
    TraceEvent& ev = push(TraceOp::kMunmap, t);
    ev.addr = addr;
    ev.len = len;
  }
  void mprotect(ThreadId t, Vaddr addr, std::uint64_t len, Prot prot) {
    TraceEvent& ev = push(TraceOp::kMprotect, t);
    ev.addr = addr;
    ev.len = len;
    ev.prot = prot;
  }
  void access(ThreadId t, Vaddr addr, AccessKind kind) {
    TraceEvent& ev = push(TraceOp::kAccess, t);
    ev.addr = addr;
    ev.kind = kind;
  }
};

struct ScenarioDef {
  std::map<std::string, double> defaults;
};

const std::map<std::string, ScenarioDef>& scenario_table() {
  static const std::map<std::string, ScenarioDef> table = {
      {"mprotect_loop",
       {{{"spinners_per_socket", 0},
         {"iters", 1000},
         {"local_spinners", 1},
         {"range_pages", 1}}}},
      {"munmap_loop",
       {{{"spinners_per_socket", 0},
         {"iters", 1000},
         {"local_spinners", 1},
         {"range_pages", 1}}}},
      {"touch_once_traversal",
       {{{"pages", 262144},
         {"init_node", 0},
         {"touch_node", 1},
         {"passes", 1}}}},
      {"malloc_stateless",
       {{{"iters", 100},
         {"gamma_shape", 2},
         {"gamma_mean_mb", 3.3},
         {"touch_mode", 1}}}},
      {"malloc_stateful",
       {{{"iters", 200},
         {"live", 256},
         {"gamma_shape", 2},
         {"gamma_mean_mb", 3.3},
         {"touch_mode", 1}}}},
      {"webserver_churn",
       {{{"threads", 8}, {"requests", 1000}, {"response_kb", 16}}}},
      {"kv_churn",
       {{{"threads", 4},
         {"requests", 2000},
         {"set_permille", 100},
         {"store_mb", 64},
         {"protect_cadence", 1}}}},
      {"partitioned", {{{"pages_per_node", 1000}}}},
      {"migration", {{{"pages", 16384}, {"passes_after", 1}}}},
  };
  return table;
}

double param(const ScenarioSpec& spec, const std::string& key) {
  return spec.params.at(key);
}
std::uint64_t uparam(const ScenarioSpec& spec, const std::string& key) {
  double v = param(spec, key);
  if (v < 0) throw ConfigError("scenario parameter " + key + " must be >= 0");
  return static_cast<std::uint64_t>(v);
}

void spawn_spinners(Emitter& em, const MachineTopology& topo,
                    std::uint64_t per_socket, bool local_spinners,
                    NodeId worker_node, ThreadId first_tid) {
  if (per_socket >
      static_cast<std::uint64_t>(topo.cores_per_node) - 1)  // worker's socket
    throw ConfigError("spinners_per_socket exceeds cores per node");
  ThreadId tid = first_tid;
  for (NodeId n = 0; n < topo.node_count; ++n) {
    if (!local_spinners && n == worker_node) continue;
    for (std::uint64_t i = 0; i < per_socket; ++i) em.spawn(tid++, n);
  }
}

// One thread loops a PTE-flipping mprotect on a resident page while spinner
// threads occupy other cores; the shootdown audience is the whole point.
std::vector<TraceEvent> gen_mprotect_loop(const ScenarioSpec& spec,
                                          const MachineTopology& topo,
                                          const AddressLayout& lay) {
  Emitter em;
  const std::uint64_t iters = uparam(spec, "iters");
  const std::uint64_t pages = std::max<std::uint64_t>(1, uparam(spec, "range_pages"));
  const std::uint64_t len = pages * lay.page_size();

  em.spawn(0, 0);
  spawn_spinners(em, topo, uparam(spec, "spinners_per_socket"),
                 uparam(spec, "local_spinners") != 0, 0, 1);
  em.mmap(0, len, prot_rw, kScenarioBase);
  for (std::uint64_t p = 0; p < pages; ++p)
    em.access(0, kScenarioBase + p * lay.page_size(), AccessKind::kWrite);
  for (std::uint64_t i = 0; i < iters; ++i)
    em.mprotect(0, kScenarioBase, len, i % 2 == 0 ? prot_r : prot_rw);
  return std::move(em.events);
}

std::vector<TraceEvent> gen_munmap_loop(const ScenarioSpec& spec,
                                        const MachineTopology& topo,
                                        const AddressLayout& lay) {
  Emitter em;
  const std::uint64_t iters = uparam(spec, "iters");
  const std::uint64_t pages = std::max<std::uint64_t>(1, uparam(spec, "range_pages"));
  const std::uint64_t len = pages * lay.page_size();

  em.spawn(0, 0);
  spawn_spinners(em, topo, uparam(spec, "spinners_per_socket"),
                 uparam(spec, "local_spinners") != 0, 0, 1);
  const std::uint64_t stride = (len + lay.leaf_span_bytes() - 1) /
                               lay.leaf_span_bytes() * lay.leaf_span_bytes();
  for (std::uint64_t i = 0; i < iters; ++i) {
    Vaddr base = kScenarioBase + i * stride;
    std::int64_t id = em.mmap(0, len, prot_rw, base);
    // Touch so the munmap has resident PTEs to tear down.
    for (std::uint64_t p = 0; p < pages; ++p)
      em.access(0, base + p * lay.page_size(), AccessKind::kWrite);
    em.munmap_id(0, id);
  }
  return std::move(em.events);
}

// Every page of a large region is touched exactly once from a non-owner
// node, in seeded random order; the worst case for lazy copying.
std::vector<TraceEvent> gen_touch_once(const ScenarioSpec& spec,
                                       const MachineTopology& topo,
                                       const AddressLayout& lay) {
  Emitter em;
  Rng rng(spec.seed);
  const std::uint64_t pages = uparam(spec, "pages");
  const auto init_node = static_cast<NodeId>(uparam(spec, "init_node"));
  const auto touch_node = static_cast<NodeId>(uparam(spec, "touch_node"));
  const std::uint64_t passes = uparam(spec, "passes");
  if (init_node >= topo.node_count || touch_node >= topo.node_count)
    throw ConfigError("touch_once_traversal: node out of range");

  em.spawn(0, init_node);
  em.spawn(1, touch_node);
  em.mmap(0, pages * lay.page_size(), prot_rw, kScenarioBase);
  for (std::uint64_t p = 0; p < pages; ++p)
    em.access(0, kScenarioBase + p * lay.page_size(), AccessKind::kWrite);

  std::vector<std::uint64_t> order(pages);
  for (std::uint64_t p = 0; p < pages; ++p) order[p] = p;
  for (std::uint64_t pass = 0; pass < passes; ++pass) {
    rng.shuffle(order);
    for (std::uint64_t p : order)
      em.access(1, kScenarioBase + p * lay.page_size(), AccessKind::kRead);
  }
  return std::move(em.events);
}

void touch_alloc(Emitter& em, ThreadId t, Vaddr base, std::uint64_t len,
                 int mode, const AddressLayout& lay) {
  if (mode == 0) return;
  if (mode == 1) {
    em.access(t, base, AccessKind::kWrite);
    return;
  }
  for (Vaddr a = base; a < base + len; a += lay.page_size())
    em.access(t, a, AccessKind::kWrite);
}

// Allocator churn: one thread per socket repeatedly maps a Gamma-sized
// segment and frees it (stateless), or cycles the oldest of `live`
// long-lived segments (stateful).
std::vector<TraceEvent> gen_malloc(const ScenarioSpec& spec,
                                   const MachineTopology& topo,
                                   const AddressLayout& lay, bool stateful) {
  Emitter em;
  Rng rng(spec.seed);
  const std::uint64_t iters = uparam(spec, "iters");
  const int shape = static_cast<int>(uparam(spec, "gamma_shape"));
  const double mean = param(spec, "gamma_mean_mb") * 1024.0 * 1024.0;
  const int touch_mode = static_cast<int>(uparam(spec, "touch_mode"));
  const std::uint64_t live = stateful ? uparam(spec, "live") : 0;

  struct Seg {
    std::int64_t id;
    Vaddr base;
    std::uint64_t len;
  };
  std::vector<std::vector<Seg>> queues(topo.node_count);
  // The emitter mirrors the allocator cursor so touches know their address.
  Vaddr cursor = kScenarioBase;

  for (NodeId n = 0; n < topo.node_count; ++n) em.spawn(n, n);

  auto alloc_one = [&](ThreadId t) {
    std::uint64_t len = gamma_alloc_size(rng, shape, mean, lay.page_size());
    std::int64_t id = em.mmap(t, len, prot_rw, cursor);
    Seg seg{id, cursor, len};
    cursor += (len + lay.leaf_span_bytes() - 1) / lay.leaf_span_bytes() *
              lay.leaf_span_bytes();
    touch_alloc(em, t, seg.base, seg.len, touch_mode, lay);
    queues[t].push_back(seg);
  };
  auto free_oldest = [&](ThreadId t) {
    Seg seg = queues[t].front();
    queues[t].erase(queues[t].begin());
    em.munmap_id(t, seg.id);
  };

  if (stateful)
    for (std::uint64_t i = 0; i < live; ++i)
      for (NodeId n = 0; n < topo.node_count; ++n) alloc_one(n);

  for (std::uint64_t i = 0; i < iters; ++i) {
    for (NodeId n = 0; n < topo.node_count; ++n) {
      if (stateful) {
        free_oldest(n);
        alloc_one(n);
      } else {
        alloc_one(n);
        free_oldest(n);
      }
    }
  }
  return std::move(em.events);
}

// Request churn: each request maps a response buffer, writes it out, and
// frees it; pages are private to the serving thread.
std::vector<TraceEvent> gen_webserver(const ScenarioSpec& spec,
                                      const MachineTopology& topo,
                                      const AddressLayout& lay) {
  Emitter em;
  const std::uint64_t threads = uparam(spec, "threads");
  const std::uint64_t requests = uparam(spec, "requests");
  const std::uint64_t len = uparam(spec, "response_kb") * 1024;
  if (threads == 0) throw ConfigError("webserver_churn: threads must be > 0");

  Vaddr cursor = kScenarioBase;
  for (std::uint64_t t = 0; t < threads; ++t)
    em.spawn(static_cast<ThreadId>(t),
             static_cast<NodeId>(t % topo.node_count));
  for (std::uint64_t j = 0; j < requests; ++j) {
    auto t = static_cast<ThreadId>(j % threads);
    std::int64_t id = em.mmap(t, len, prot_rw, cursor);
    std::uint64_t mapped = (len + lay.page_size() - 1) / lay.page_size() *
                           lay.page_size();
    for (Vaddr a = cursor; a < cursor + mapped; a += lay.page_size())
      em.access(t, a, AccessKind::kWrite);
    em.munmap_id(t, id);
    cursor += (mapped + lay.leaf_span_bytes() - 1) / lay.leaf_span_bytes() *
              lay.leaf_span_bytes();
  }
  return std::move(em.events);
}

// SET/GET mix against an mprotect-guarded store; each thread owns a
// leaf-span-aligned slice, so sharer rings stay at {owner, slice node}.
std::vector<TraceEvent> gen_kv(const ScenarioSpec& spec,
                               const MachineTopology& topo,
                               const AddressLayout& lay) {
  Emitter em;
  Rng rng(spec.seed);
  const std::uint64_t threads = uparam(spec, "threads");
  const std::uint64_t requests = uparam(spec, "requests");
  const std::uint64_t set_permille = uparam(spec, "set_permille");
  const std::uint64_t cadence = uparam(spec, "protect_cadence");
  if (threads == 0) throw ConfigError("kv_churn: threads must be > 0");
  if (cadence > 1)
    throw ConfigError("kv_churn: protect_cadence must be 0 or 1");

  std::uint64_t store = uparam(spec, "store_mb") * 1024 * 1024;
  std::uint64_t slice =
      store / threads / lay.leaf_span_bytes() * lay.leaf_span_bytes();
  if (slice == 0)
    throw ConfigError("kv_churn: store too small for one leaf span per thread");
  const std::uint64_t slice_pages = slice / lay.page_size();
  const Prot store_prot = cadence > 0 ? prot_r : prot_rw;

  for (std::uint64_t t = 0; t < threads; ++t)
    em.spawn(static_cast<ThreadId>(t),
             static_cast<NodeId>(t % topo.node_count));
  em.mmap(0, slice * threads, store_prot, kScenarioBase);

  for (std::uint64_t j = 0; j < requests; ++j) {
    auto t = static_cast<ThreadId>(j % threads);
    Vaddr addr = kScenarioBase + t * slice +
                 rng.below(slice_pages) * lay.page_size();
    bool is_set = rng.next_unit() * 1000.0 < static_cast<double>(set_permille);
    if (is_set) {
      if (cadence > 0) em.mprotect(t, addr, lay.page_size(), prot_rw);
      em.access(t, addr, AccessKind::kWrite);
      if (cadence > 0) em.mprotect(t, addr, lay.page_size(), prot_r);
    } else {
      em.access(t, addr, AccessKind::kRead);
    }
  }
  return std::move(em.events);
}

// One thread per node, each mapping and touching only its own chunk; the
// page-table partitions cleanly with no cross-node sharing.
std::vector<TraceEvent> gen_partitioned(const ScenarioSpec& spec,
                                        const MachineTopology& topo,
                                        const AddressLayout& lay) {
  Emitter em;
  const std::uint64_t pages = uparam(spec, "pages_per_node");
  const std::uint64_t len = pages * lay.page_size();
  const std::uint64_t stride = (len + lay.leaf_span_bytes() - 1) /
                               lay.leaf_span_bytes() * lay.leaf_span_bytes();

  for (NodeId n = 0; n < topo.node_count; ++n) em.spawn(n, n);
  for (NodeId n = 0; n < topo.node_count; ++n)
    em.mmap(n, len, prot_rw, kScenarioBase + n * stride);
  for (std::uint64_t p = 0; p < pages; ++p)
    for (NodeId n = 0; n < topo.node_count; ++n)
      em.access(n, kScenarioBase + n * stride + p * lay.page_size(),
                AccessKind::kWrite);
  return std::move(em.events);
}

// Build working set on one socket, migrate, and re-scan from the new home.
std::vector<TraceEvent> gen_migration(const ScenarioSpec& spec,
                                      const MachineTopology& topo,
                                      const AddressLayout& lay) {
  Emitter em;
  const std::uint64_t pages = uparam(spec, "pages");
  const std::uint64_t passes = uparam(spec, "passes_after");
  if (topo.node_count < 2)
    throw ConfigError("migration: needs at least two nodes");

  em.spawn(0, 0);
  em.mmap(0, pages * lay.page_size(), prot_rw, kScenarioBase);
  for (std::uint64_t p = 0; p < pages; ++p)
    em.access(0, kScenarioBase + p * lay.page_size(), AccessKind::kWrite);
  em.migrate(0, 1);
  for (std::uint64_t pass = 0; pass < passes; ++pass)
    for (std::uint64_t p = 0; p < pages; ++p)
      em.access(0, kScenarioBase + p * lay.page_size(), AccessKind::kRead);
  return std::move(em.events);
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, def] : scenario_table()) out.push_back(name);
    return out;
  }();
  return names;
}

std::map<std::string, double> scenario_defaults(const std::string& name) {
  auto it = scenario_table().find(name);
  if (it == scenario_table().end())
    throw ConfigError("unknown scenario: " + name);
  return it->second.defaults;
}

ScenarioSpec make_scenario_spec(const std::string& name,
                                const std::map<std::string, double>& overrides,
                                std::uint64_t seed) {
  ScenarioSpec spec;
  spec.name = name;
  spec.params = scenario_defaults(name);
  for (const auto& [key, value] : overrides) {
    auto it = spec.params.find(key);
    if (it == spec.params.end())
      throw ConfigError("scenario " + name + ": unknown parameter " + key);
    it->second = value;
  }
  spec.seed = seed;
  return spec;
}

std::vector<TraceEvent> gen_scenario(const ScenarioSpec& spec,
                                     const MachineTopology& topo,
                                     const AddressLayout& layout) {
  // Validate parameter names even for specs built by hand.
  ScenarioSpec checked = make_scenario_spec(spec.name, spec.params, spec.seed);
  if (checked.name == "mprotect_loop")
    return gen_mprotect_loop(checked, topo, layout);
  if (checked.name == "munmap_loop")
    return gen_munmap_loop(checked, topo, layout);
  if (checked.name == "touch_once_traversal")
    return gen_touch_once(checked, topo, layout);
  if (checked.name == "malloc_stateless")
    return gen_malloc(checked, topo, layout, false);
  if (checked.name == "malloc_stateful")
    return gen_malloc(checked, topo, layout, true);
  if (checked.name == "webserver_churn")
    return gen_webserver(checked, topo, layout);
  if (checked.name == "kv_churn") return gen_kv(checked, topo, layout);
  if (checked.name == "partitioned")
    return gen_partitioned(checked, topo, layout);
  if (checked.name == "migration") return gen_migration(checked, topo, layout);
  throw ConfigError("unknown scenario: " + checked.name);
}

// ---------------------------------------------------------------------------
// Trace wire format
// ---------------------------------------------------------------------------

namespace {

std::string kind_to_string(AccessKind k) {
  return k == AccessKind::kRead ? "r" : "w";
}

json event_to_json(const TraceEvent& ev) {
  json j;
  j["seq"] = ev.seq;
  j["proc"] = ev.proc;
  j["thread"] = ev.thread;
  j["op"] = trace_op_name(ev.op);
  switch (ev.op) {
    case TraceOp::kSpawn:
    case TraceOp::kMigrate:
      j["node"] = ev.node;
      break;
    case TraceOp::kExit:
      break;
    case TraceOp::kMmap:
      j["len"] = ev.len;
      j["prot"] = prot_to_string(ev.prot);
      if (ev.node != kNoNode) j["node"] = ev.node;
      if (ev.addr) j["addr"] = *ev.addr;
      break;
    case TraceOp::kMunmap:
      if (ev.vma >= 0) {
        j["vma"] = ev.vma;
      } else {
        j["addr"] = ev.addr.value_or(0);
        j["len"] = ev.len;
      }
      break;
    case TraceOp::kMprotect:
      j["addr"] = ev.addr.value_or(0);
      j["len"] = ev.len;
      j["prot"] = prot_to_string(ev.prot);
      break;
    case TraceOp::kAccess:
      j["addr"] = ev.addr.value_or(0);
      j["kind"] = kind_to_string(ev.kind);
      break;
    case TraceOp::kSpin:
      j["iters"] = ev.iters;
      break;
  }
  return j;
}

[[noreturn]] void fail(std::uint64_t line, const std::string& msg) {
  throw TraceFormatError("trace line " + std::to_string(line) + ": " + msg,
                         line);
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t line) {
  if (!j.contains(key)) fail(line, std::string("missing field ") + key);
  const json& v = j.at(key);
  if (!v.is_number_unsigned()) {
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    fail(line, std::string("field ") + key + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

}  // namespace

std::string serialize_trace(const std::vector<TraceEvent>& events) {
  std::string out;
  for (const TraceEvent& ev : events) {
    out += event_to_json(ev).dump();
    out += '\n';
  }
  return out;
}

std::vector<TraceEvent> parse_trace(std::istream& in) {
  static const std::map<std::string, std::vector<std::string>> allowed = {
      {"spawn", {"node"}},
      {"exit", {}},
      {"migrate", {"node"}},
      {"mmap", {"len", "prot", "node", "addr"}},
      {"munmap", {"vma", "addr", "len"}},
      {"mprotect", {"addr", "len", "prot"}},
      {"access", {"addr", "kind"}},
      {"spin", {"iters"}},
  };

  std::vector<TraceEvent> events;
  std::string line;
  std::uint64_t lineno = 0;
  std::uint64_t prev_seq = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      // Re-parse with exceptions to surface nlohmann's column diagnostics.
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        fail(lineno, e.what());
      }
      fail(lineno, "malformed JSON");
    }
    if (!j.is_object()) fail(lineno, "record must be a JSON object");

    TraceEvent ev;
    ev.seq = get_u64(j, "seq", lineno);
    if (ev.seq <= prev_seq) fail(lineno, "seq is not strictly increasing");
    prev_seq = ev.seq;
    ev.proc = static_cast<ProcId>(get_u64(j, "proc", lineno));
    ev.thread = static_cast<ThreadId>(get_u64(j, "thread", lineno));
    if (!j.contains("op") || !j.at("op").is_string())
      fail(lineno, "missing op");
    auto op = trace_op_from_string(j.at("op").get<std::string>());
    if (!op) fail(lineno, "unknown op " + j.at("op").dump());
    ev.op = *op;

    const auto& extra = allowed.at(trace_op_name(ev.op));
    for (const auto& [key, value] : j.items()) {
      if (key == "seq" || key == "proc" || key == "thread" || key == "op")
        continue;
      if (std::find(extra.begin(), extra.end(), key) == extra.end())
        fail(lineno, "field " + key + " not allowed for op " +
                         trace_op_name(ev.op));
    }

    switch (ev.op) {
      case TraceOp::kSpawn:
      case TraceOp::kMigrate:
        ev.node = static_cast<NodeId>(get_u64(j, "node", lineno));
        break;
      case TraceOp::kExit:
        break;
      case TraceOp::kMmap: {
        ev.len = get_u64(j, "len", lineno);
        if (ev.len == 0) fail(lineno, "mmap len must be > 0");
        if (!j.contains("prot")) fail(lineno, "mmap missing prot");
        auto prot = prot_from_string(j.at("prot").get<std::string>());
        if (!prot) fail(lineno, "bad prot string");
        ev.prot = *prot;
        if (j.contains("node"))
          ev.node = static_cast<NodeId>(get_u64(j, "node", lineno));
        if (j.contains("addr")) ev.addr = get_u64(j, "addr", lineno);
        break;
      }
      case TraceOp::kMunmap:
        if (j.contains("vma")) {
          if (j.contains("addr") || j.contains("len"))
            fail(lineno, "munmap takes vma or addr+len, not both");
          ev.vma = static_cast<std::int64_t>(get_u64(j, "vma", lineno));
        } else {
          ev.addr = get_u64(j, "addr", lineno);
          ev.len = get_u64(j, "len", lineno);
          if (ev.len == 0) fail(lineno, "munmap len must be > 0");
        }
        break;
      case TraceOp::kMprotect: {
        ev.addr = get_u64(j, "addr", lineno);
        ev.len = get_u64(j, "len", lineno);
        if (ev.len == 0) fail(lineno, "mprotect len must be > 0");
        if (!j.contains("prot")) fail(lineno, "mprotect missing prot");
        auto prot = prot_from_string(j.at("prot").get<std::string>());
        if (!prot) fail(lineno, "bad prot string");
        ev.prot = *prot;
        break;
      }
      case TraceOp::kAccess: {
        ev.addr = get_u64(j, "addr", lineno);
        if (!j.contains("kind")) fail(lineno, "access missing kind");
        std::string k = j.at("kind").get<std::string>();
        if (k == "r")
          ev.kind = AccessKind::kRead;
        else if (k == "w")
          ev.kind = AccessKind::kWrite;
        else
          fail(lineno, "access kind must be r or w");
        break;
      }
      case TraceOp::kSpin:
        ev.iters = get_u64(j, "iters", lineno);
        break;
    }
    events.push_back(ev);
  }
  return events;
}

std::vector<TraceEvent> parse_trace_string(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in);
}

}  // namespace ptsim
