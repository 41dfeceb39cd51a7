#include <doctest.h>

#include "helpers.hpp"
#include "ptsim/metrics.hpp"

using namespace ptsim;
using ptsim::testing::csv_row;
using ptsim::testing::parse_csv;

TEST_CASE("record accumulates and footprint follows page counts") {
  MetricsReport report(4, 4);
  report.record_pt_page_delta(3, +1);
  CHECK(report.pt_pages(3) == 1);
  CHECK(report.footprint_bytes(3) == 4096);
  report.record_pt_page_delta(3, +2);
  report.record_pt_page_delta(3, -1);
  CHECK(report.pt_pages(3) == 2);
  CHECK(report.get(Counter::kPtPagesAllocated) == 3);
  CHECK(report.get(Counter::kPtPagesFreed) == 1);

  report.record(Counter::kIpiRemote, 7);
  CHECK(report.get(Counter::kIpiRemote) == 7);
  CHECK_THROWS_AS(report.record_pt_page_delta(9, 1), ConfigError);
}

TEST_CASE("csv: one run emits header plus one row") {
  MetricsReport report(2, 4);
  RunRow row{"run:1", "lazy", 9, true, report.rows()};
  std::string csv = report_csv({row});
  auto rows = parse_csv(csv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][0] == "run_id");
  CHECK(rows[0][1] == "policy");
  CHECK(rows[0][2] == "prefetch");
  CHECK(rows[0][3] == "tlb_opt");
  // Counter columns are alphabetical.
  for (std::size_t c = 5; c < rows[0].size(); ++c)
    CHECK(rows[0][c - 1] < rows[0][c]);
  auto m = csv_row(csv);
  CHECK(m.at("policy") == "lazy");
  CHECK(m.at("prefetch") == "9");
  CHECK(m.at("tlb_opt") == "1");
}

TEST_CASE("csv: comparisons share one header and normalize to the baseline") {
  MetricsReport a(2, 4), b(2, 4), c(2, 4);
  a.record(Counter::kIpiRemote, 10);
  b.record(Counter::kIpiRemote, 70);
  c.record(Counter::kIpiRemote, 0);
  std::vector<RunRow> rows = {
      {"r", "none", 0, false, a.rows()},
      {"r", "eager", 0, false, b.rows()},
      {"r", "lazy+opt", 0, true, c.rows()},
  };
  std::string csv = report_csv(rows, 0);
  auto parsed = parse_csv(csv);
  REQUIRE(parsed.size() == 4);  // header + 3 policies

  auto base = csv_row(csv, 0);
  auto eager = csv_row(csv, 1);
  auto lazy = csv_row(csv, 2);
  CHECK(base.at("norm_ipi_remote") == "1");
  CHECK(eager.at("norm_ipi_remote") == "7");
  CHECK(lazy.at("norm_ipi_remote") == "0");
  // Every normalized baseline column is exactly 1 (0/0 included).
  for (const auto& [key, value] : base)
    if (key.rfind("norm_", 0) == 0) CHECK(value == "1");
}

TEST_CASE("csv: fields with commas and quotes survive a generic reader") {
  MetricsReport report(1, 4);
  RunRow row{"weird,\"id\"", "none", 0, false, report.rows()};
  auto rows = parse_csv(report_csv({row}));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][0] == "weird,\"id\"");
}

TEST_CASE("run totals equal the sum of per-event summaries") {
  MachineTopology topo = build_topology(4, 2);
  AddressLayout lay;
  ptsim::testing::RandomTraceOptions opt;
  opt.events = 1500;
  auto events = ptsim::testing::random_trace(4242, topo, lay, opt);
  Simulator sim(topo, ptsim::testing::sim_options(ReplicationMode::kLazy, 2,
                                                  true, AuditMode::kSampled));

  // Snapshot monotonicity of true counters while replaying.
  std::uint64_t prev_cost = 0, prev_events = 0;
  Cost total = 0;
  std::uint64_t invalidations = 0;
  for (const TraceEvent& ev : events) {
    EventSummary s = sim.apply(ev);
    total += s.total;
    invalidations += s.invalidations;
    CHECK(sim.metrics().cost_total() >= prev_cost);
    CHECK(sim.metrics().get(Counter::kEvents) > prev_events);
    prev_cost = sim.metrics().cost_total();
    prev_events = sim.metrics().get(Counter::kEvents);
  }
  CHECK(sim.metrics().cost_total() == total);
  CHECK(sim.metrics().get(Counter::kTlbInvalidations) == invalidations);
  CHECK(sim.metrics().get(Counter::kEvents) == events.size());
  // Delivered IPIs account for every shootdown target, exactly.
  CHECK(sim.metrics().get(Counter::kIpiLocal) +
            sim.metrics().get(Counter::kIpiRemote) ==
        sim.metrics().get(Counter::kShootdownTargets));
}
