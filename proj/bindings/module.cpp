// Python bindings for the simulator: run experiments and policy sweeps,
// generate and validate traces, and poke the two pure decision functions.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ptsim/experiment.hpp"

namespace py = pybind11;
using namespace ptsim;

namespace {

AuditMode audit_from_string(const std::string& s) {
  if (s == "off") return AuditMode::kOff;
  if (s == "sampled") return AuditMode::kSampled;
  if (s == "full") return AuditMode::kFull;
  throw ConfigError("audit must be off, sampled or full");
}

ExperimentConfig make_config(const std::string& policy, int nodes, int cores,
                             std::optional<std::string> scenario,
                             std::optional<std::string> trace,
                             const std::map<std::string, double>& params,
                             std::uint64_t seed, const std::string& audit,
                             int prefetch, bool tlb_opt, bool interference) {
  ExperimentConfig config;
  config.nodes = nodes;
  config.cores = cores;
  config.policy = parse_policy_token(policy, ReplicationPolicy{});
  if (prefetch >= 0) config.policy.prefetch_degree = prefetch;
  if (tlb_opt) config.policy.tlb_filter = true;
  config.scenario = std::move(scenario);
  config.trace_path = std::move(trace);
  config.params = params;
  config.seed = seed;
  config.audit = audit_from_string(audit);
  config.interference = interference;
  return config;
}

py::dict outcome_to_dict(const RunOutcome& run) {
  py::dict out;
  out["exit_code"] = run.exit_code;
  out["error"] = run.error;
  py::dict counters;
  for (const auto& [name, value] : run.row.counters)
    counters[py::str(name)] = value;
  out["counters"] = counters;
  out["csv"] = report_csv({run.row});
  out["policy"] = run.row.policy;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Trace-driven simulator of page-table replication and TLB shootdowns "
      "on NUMA machines";
  m.attr("__version__") = "1.0.0";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TraceFormatError>(m, "TraceError", PyExc_ValueError);

  m.def("scenarios", [] { return scenario_names(); },
        "Names of the built-in workload scenarios.");

  m.def(
      "scenario_defaults",
      [](const std::string& name) { return scenario_defaults(name); },
      py::arg("name"), "Default parameters of one scenario.");

  m.def(
      "split_vaddr",
      [](Vaddr vaddr, int levels, int bits_per_level, int offset_bits) {
        AddressLayout lay{levels, bits_per_level, offset_bits};
        lay.validate();
        SplitAddress s = split_vaddr(lay, vaddr);
        return py::make_tuple(s.indices, s.offset);
      },
      py::arg("vaddr"), py::arg("levels") = 4, py::arg("bits_per_level") = 9,
      py::arg("offset_bits") = 12,
      "Radix decomposition of a virtual address: (per-level indices, offset).");

  m.def(
      "prefetch_window",
      [](int pte_index, int degree, Vaddr table_start, std::uint64_t table_len,
         Vaddr vma_start, std::uint64_t vma_len) {
        AddressLayout lay;
        IndexRange w =
            prefetch_window(lay, pte_index, degree, {table_start, table_len},
                            {vma_start, vma_len});
        return py::make_tuple(w.lo, w.hi);
      },
      py::arg("pte_index"), py::arg("degree"), py::arg("table_start"),
      py::arg("table_len"), py::arg("vma_start"), py::arg("vma_len"),
      "Half-open leaf-slot range copied on a fault, clamped to page and VMA.");

  m.def(
      "run",
      [](const std::string& policy, int nodes, int cores,
         std::optional<std::string> scenario, std::optional<std::string> trace,
         const std::map<std::string, double>& params, std::uint64_t seed,
         const std::string& audit, int prefetch, bool tlb_opt,
         bool interference) {
        ExperimentConfig config =
            make_config(policy, nodes, cores, std::move(scenario),
                        std::move(trace), params, seed, audit, prefetch,
                        tlb_opt, interference);
        return outcome_to_dict(run_experiment(config));
      },
      py::arg("policy") = "none", py::arg("nodes") = 8, py::arg("cores") = 18,
      py::arg("scenario") = std::nullopt, py::arg("trace") = std::nullopt,
      py::arg("params") = std::map<std::string, double>{},
      py::arg("seed") = 42, py::arg("audit") = "sampled",
      py::arg("prefetch") = -1, py::arg("tlb_opt") = false,
      py::arg("interference") = false,
      "Run one experiment; returns counters, CSV and the exit code.");

  m.def(
      "compare",
      [](const std::vector<std::string>& policies, int nodes, int cores,
         std::optional<std::string> scenario, std::optional<std::string> trace,
         const std::map<std::string, double>& params, std::uint64_t seed,
         const std::string& audit) {
        ExperimentConfig config =
            make_config("none", nodes, cores, std::move(scenario),
                        std::move(trace), params, seed, audit, -1, false,
                        false);
        CompareOutcome cmp = compare_policies(config, policies);
        py::dict out;
        out["exit_code"] = cmp.exit_code;
        out["error"] = cmp.error;
        out["csv"] = cmp.csv;
        return out;
      },
      py::arg("policies"), py::arg("nodes") = 8, py::arg("cores") = 18,
      py::arg("scenario") = std::nullopt, py::arg("trace") = std::nullopt,
      py::arg("params") = std::map<std::string, double>{},
      py::arg("seed") = 42, py::arg("audit") = "sampled",
      "Replay one trace under several policies; CSV gains normalized columns.");

  m.def(
      "gen_trace",
      [](const std::string& scenario, int nodes, int cores,
         const std::map<std::string, double>& params, std::uint64_t seed) {
        MachineTopology topo = build_topology(nodes, cores);
        ScenarioSpec spec = make_scenario_spec(scenario, params, seed);
        return serialize_trace(gen_scenario(spec, topo, AddressLayout{}));
      },
      py::arg("scenario"), py::arg("nodes") = 8, py::arg("cores") = 18,
      py::arg("params") = std::map<std::string, double>{},
      py::arg("seed") = 42,
      "Generate a scenario as line-delimited JSON trace text.");

  m.def(
      "validate_trace",
      [](const std::string& text) {
        return parse_trace_string(text).size();
      },
      py::arg("text"),
      "Parse and validate trace text; returns the event count.");
}
