// ptsim: trace-driven simulator of page-table replication and TLB
// shootdowns on NUMA machines. Single runs write one CSV row; --compare
// replays the same trace under several policies and appends normalized
// columns against the no-replication row.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptsim/experiment.hpp"

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ptsim::ConfigError("cannot open output file: " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "ptsim: deterministic NUMA page-table replication / TLB shootdown "
      "simulator"};

  ptsim::ExperimentConfig config;
  std::string policy_str = "none";
  int prefetch = 0;
  std::string tlb_opt = "off";
  std::string scenario;
  std::string trace_path;
  std::vector<std::string> raw_params;
  std::string audit = "sampled";
  std::string out_path;
  std::string costs_path;
  std::string compare_list;

  app.add_option("--nodes", config.nodes, "NUMA node count")
      ->capture_default_str();
  app.add_option("--cores", config.cores, "cores per node")
      ->capture_default_str();
  app.add_option("--policy", policy_str,
                 "replication policy: none|eager|lazy")
      ->capture_default_str();
  app.add_option("--prefetch", prefetch,
                 "lazy prefetch degree d (copies 2^d leaf entries)")
      ->capture_default_str();
  app.add_option("--tlb-opt", tlb_opt,
                 "sharer-scoped TLB shootdown filtering: on|off")
      ->capture_default_str();
  app.add_option("--scenario", scenario, "built-in scenario name");
  app.add_option("--param", raw_params, "scenario parameter k=v (repeatable)");
  app.add_option("--trace", trace_path, "replay a JSONL trace file");
  app.add_option("--seed", config.seed, "deterministic seed")
      ->capture_default_str();
  app.add_option("--audit", audit, "invariant auditing: off|sampled|full")
      ->capture_default_str();
  app.add_option("--out", out_path, "CSV output path (default stdout)");
  app.add_option("--costs", costs_path,
                 "key=value config file overriding costs/topology");
  app.add_option("--compare", compare_list,
                 "comma-separated policy list, e.g. none,eager,lazy+opt+d9");
  app.add_flag("--interference", config.interference,
               "price remote accesses at the interfered rate");
  app.add_option("--events", config.events_path,
                 "write per-event JSONL summaries to this path");
  app.add_option("--dump-trace", config.dump_trace_path,
                 "serialize the generated trace to this path");
  app.add_option("--run-id", config.run_id, "override the CSV run_id");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!costs_path.empty()) ptsim::apply_config_file(config, costs_path);

    config.policy = ptsim::parse_policy_token(policy_str, config.policy);
    if (app.count("--prefetch")) config.policy.prefetch_degree = prefetch;
    if (app.count("--tlb-opt")) {
      if (tlb_opt == "on")
        config.policy.tlb_filter = true;
      else if (tlb_opt == "off")
        config.policy.tlb_filter = false;
      else
        throw ptsim::ConfigError("--tlb-opt takes on or off");
    }

    if (audit == "off")
      config.audit = ptsim::AuditMode::kOff;
    else if (audit == "sampled")
      config.audit = ptsim::AuditMode::kSampled;
    else if (audit == "full")
      config.audit = ptsim::AuditMode::kFull;
    else
      throw ptsim::ConfigError("--audit takes off, sampled or full");

    if (!scenario.empty()) config.scenario = scenario;
    if (!trace_path.empty()) config.trace_path = trace_path;
    for (const std::string& raw : raw_params) {
      auto eq = raw.find('=');
      if (eq == std::string::npos)
        throw ptsim::ConfigError("--param expects k=v, got: " + raw);
      config.params[raw.substr(0, eq)] = std::stod(raw.substr(eq + 1));
    }

    if (!compare_list.empty()) {
      ptsim::CompareOutcome cmp =
          ptsim::compare_policies(config, split_commas(compare_list));
      if (!cmp.error.empty()) {
        std::cerr << "error: " << cmp.error << "\n";
        return cmp.exit_code;
      }
      write_output(out_path, cmp.csv);
      return cmp.exit_code;
    }

    ptsim::RunOutcome run = ptsim::run_experiment(config);
    if (!run.ok()) {
      std::cerr << "error: " << run.error << "\n";
      return run.exit_code;
    }
    write_output(out_path, ptsim::report_csv({run.row}));
    return ptsim::kExitOk;
  } catch (const ptsim::TraceFormatError& e) {
    std::cerr << "trace error: " << e.what() << "\n";
    return ptsim::kExitTrace;
  } catch (const ptsim::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return ptsim::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ptsim::kExitUsage;
  }
}
