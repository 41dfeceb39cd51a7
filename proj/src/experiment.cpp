#include "ptsim/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

namespace ptsim {

void ExperimentConfig::validate() const {
  if (scenario.has_value() == trace_path.has_value())
    throw ConfigError("exactly one of scenario/trace must be set");
  if (nodes < 1 || cores < 1) throw ConfigError("nodes/cores must be >= 1");
  layout.validate();
  costs.validate();
}

std::string ExperimentConfig::derived_run_id() const {
  if (!run_id.empty()) return run_id;
  std::string base = scenario ? *scenario
                              : std::filesystem::path(trace_path.value_or("?"))
                                    .stem()
                                    .string();
  return base + ":" + std::to_string(seed);
}

std::vector<TraceEvent> build_events(const ExperimentConfig& config) {
  config.validate();
  if (config.scenario) {
    MachineTopology topo = build_topology(config.nodes, config.cores, config.costs);
    ScenarioSpec spec =
        make_scenario_spec(*config.scenario, config.params, config.seed);
    return gen_scenario(spec, topo, config.layout);
  }
  std::ifstream in(*config.trace_path);
  if (!in) throw ConfigError("cannot open trace file: " + *config.trace_path);
  return parse_trace(in);
}

RunOutcome run_on_events(const ExperimentConfig& config,
                         const std::vector<TraceEvent>& events) {
  MachineTopology topo = build_topology(config.nodes, config.cores, config.costs);
  SimOptions options;
  options.layout = config.layout;
  options.policy = config.policy;
  options.audit = config.audit;
  options.audit_interval = config.audit_interval;
  options.tlb_capacity = config.tlb_capacity;
  options.interference = config.interference;
  options.overheads = config.overheads;

  RunOutcome out;
  Simulator sim(topo, options);

  std::ofstream stream;
  if (!config.events_path.empty()) {
    stream.open(config.events_path);
    if (!stream)
      throw ConfigError("cannot open events stream: " + config.events_path);
  }

  for (std::size_t i = 0; i < events.size(); ++i) {
    try {
      EventSummary s = sim.apply(events[i]);
      if (stream.is_open()) stream << event_summary_json(s) << '\n';
    } catch (ProtocolError& e) {
      out.exit_code = kExitInvariant;
      out.violation_index = static_cast<std::int64_t>(i);
      out.error = "invariant violation at event index " + std::to_string(i) +
                  " (seq " + std::to_string(events[i].seq) + "): " + e.what();
      break;
    }
  }
  if (out.ok() && sim.options().audit != AuditMode::kOff) {
    try {
      sim.audit_now();
    } catch (ProtocolError& e) {
      out.exit_code = kExitInvariant;
      out.violation_index = static_cast<std::int64_t>(events.size()) - 1;
      out.error = std::string("invariant violation at end of run: ") + e.what();
    }
  }

  sim.finalize_metrics();
  out.report = sim.metrics();
  out.row.run_id = config.derived_run_id();
  out.row.policy = mode_to_string(config.policy.mode);
  out.row.prefetch = config.policy.effective_degree();
  out.row.tlb_opt = config.policy.filters_shootdowns();
  out.row.counters = out.report.rows();
  return out;
}

RunOutcome run_experiment(const ExperimentConfig& config) {
  std::vector<TraceEvent> events;
  try {
    events = build_events(config);
  } catch (const TraceFormatError& e) {
    RunOutcome out;
    out.exit_code = kExitTrace;
    out.error = e.what();
    return out;
  }
  if (!config.dump_trace_path.empty()) {
    std::ofstream dump(config.dump_trace_path);
    if (!dump)
      throw ConfigError("cannot open dump path: " + config.dump_trace_path);
    dump << serialize_trace(events);
  }
  return run_on_events(config, events);
}

CompareOutcome compare_policies(const ExperimentConfig& base,
                                const std::vector<std::string>& policy_tokens) {
  if (policy_tokens.size() < 2)
    throw ConfigError("compare needs at least two policies");

  CompareOutcome out;
  std::vector<TraceEvent> events;
  try {
    events = build_events(base);
  } catch (const TraceFormatError& e) {
    out.exit_code = kExitTrace;
    out.error = e.what();
    return out;
  }

  std::vector<ExperimentConfig> configs;
  for (const std::string& token : policy_tokens) {
    ExperimentConfig c = base;
    c.policy = parse_policy_token(token, base.policy);
    c.events_path.clear();
    c.dump_trace_path.clear();
    configs.push_back(c);
  }

  // Isolated simulators over one shared immutable trace; join in list order.
  std::vector<std::future<RunOutcome>> futures;
  futures.reserve(configs.size());
  for (const ExperimentConfig& c : configs)
    futures.push_back(std::async(std::launch::async, [&c, &events] {
      return run_on_events(c, events);
    }));
  for (auto& f : futures) out.runs.push_back(f.get());

  int baseline = 0;
  for (std::size_t i = 0; i < configs.size(); ++i)
    if (configs[i].policy.mode == ReplicationMode::kNoReplication) {
      baseline = static_cast<int>(i);
      break;
    }

  std::vector<RunRow> rows;
  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    const RunOutcome& r = out.runs[i];
    if (!r.ok()) {
      out.exit_code = r.exit_code;
      out.error = "policy " + policy_tokens[i] + ": " + r.error;
      return out;
    }
    RunRow row = r.row;
    row.policy = policy_tokens[i];
    rows.push_back(row);
  }
  out.csv = report_csv(rows, baseline);
  return out;
}

ReplicationPolicy parse_policy_token(const std::string& token,
                                     const ReplicationPolicy& base) {
  ReplicationPolicy policy = base;
  std::stringstream ss(token);
  std::string part;
  bool first = true;
  while (std::getline(ss, part, '+')) {
    if (first) {
      if (part == "none")
        policy.mode = ReplicationMode::kNoReplication;
      else if (part == "eager")
        policy.mode = ReplicationMode::kEager;
      else if (part == "lazy")
        policy.mode = ReplicationMode::kLazy;
      else
        throw ConfigError("unknown policy: " + part);
      first = false;
      continue;
    }
    if (part == "opt") {
      policy.tlb_filter = true;
    } else if (part == "noopt") {
      policy.tlb_filter = false;
    } else if (part.size() > 1 && part[0] == 'd') {
      policy.prefetch_degree = std::stoi(part.substr(1));
    } else {
      throw ConfigError("unknown policy suffix: " + part);
    }
  }
  if (first) throw ConfigError("empty policy token");
  return policy;
}

std::string policy_label(const ReplicationPolicy& policy) {
  std::string label = mode_to_string(policy.mode);
  if (policy.lazy()) {
    if (policy.tlb_filter) label += "+opt";
    if (policy.prefetch_degree > 0)
      label += "+d" + std::to_string(policy.prefetch_degree);
  }
  return label;
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto notspace = [](unsigned char c) { return !std::isspace(c); };
    line.erase(line.begin(),
               std::find_if(line.begin(), line.end(), notspace));
    line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(),
               line.end());
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config file " + path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(),
              key.end());
    value.erase(value.begin(),
                std::find_if(value.begin(), value.end(), notspace));
    std::uint64_t num = 0;
    try {
      num = std::stoull(value);
    } catch (const std::exception&) {
      throw ConfigError("config file " + path + ":" + std::to_string(lineno) +
                        ": value for " + key + " must be a number");
    }

    if (key == "nodes") config.nodes = static_cast<int>(num);
    else if (key == "cores") config.cores = static_cast<int>(num);
    else if (key == "local_mem") config.costs.local_mem = num;
    else if (key == "remote_mem") config.costs.remote_mem = num;
    else if (key == "remote_mem_interference")
      config.costs.remote_mem_interference = num;
    else if (key == "ipi_local") config.costs.ipi_local = num;
    else if (key == "ipi_remote") config.costs.ipi_remote = num;
    else if (key == "tlb_hit") config.costs.tlb_hit = num;
    else if (key == "tlb_capacity") config.tlb_capacity = num;
    else if (key == "interference") config.interference = num != 0;
    else if (key == "levels") config.layout.levels = static_cast<int>(num);
    else if (key == "bits_per_level")
      config.layout.bits_per_level = static_cast<int>(num);
    else if (key == "offset_bits")
      config.layout.offset_bits = static_cast<int>(num);
    else if (key == "mmap_overhead") config.overheads.mmap_call = num;
    else if (key == "munmap_overhead") config.overheads.munmap_call = num;
    else if (key == "mprotect_overhead") config.overheads.mprotect_call = num;
    else if (key == "fault_overhead") config.overheads.fault_software = num;
    else
      throw ConfigError("config file " + path + ":" + std::to_string(lineno) +
                        ": unknown key " + key);
  }
}

std::string event_summary_json(const EventSummary& s) {
  nlohmann::json j;
  j["seq"] = s.seq;
  j["op"] = op_class_name(s.op);
  j["total"] = s.total;
  j["walk"] = s.cost_walk;
  j["data"] = s.cost_data;
  j["fault"] = s.cost_fault;
  j["coherence"] = s.cost_coherence;
  j["ipi"] = s.cost_ipi;
  j["tlb"] = s.cost_tlb;
  j["overhead"] = s.cost_overhead;
  j["ipis_local"] = s.ipis_local;
  j["ipis_remote"] = s.ipis_remote;
  j["invalidations"] = s.invalidations;
  j["replica_updates"] = s.replica_updates;
  if (!s.outcome.empty()) j["outcome"] = s.outcome;
  if (!s.trace_error.empty()) j["error"] = s.trace_error;
  return j.dump();
}

}  // namespace ptsim
