#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ptsim/syscalls.hpp"
#include "ptsim/topology.hpp"

namespace ptsim {

// Deterministic random stream. mt19937_64 output is pinned by the standard,
// and the uniform/exponential draws below avoid std::*_distribution, whose
// algorithms vary between library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::uint64_t next_u64() { return eng_(); }
  // Uniform in [0, 1) with 53 random bits.
  double next_unit() { return (eng_() >> 11) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t n) { return n ? eng_() % n : 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 eng_;
};

// Allocation size in bytes: Gamma(shape, mean/shape), rounded up to a page.
// Integer shapes only (sum of exponentials), shape 2 by default.
std::uint64_t gamma_alloc_size(Rng& rng, int shape, double mean_bytes,
                               std::uint64_t page_size);

struct ScenarioSpec {
  std::string name;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
};

const std::vector<std::string>& scenario_names();
// Defaults for one scenario; unknown scenario or parameter names are
// configuration errors.
std::map<std::string, double> scenario_defaults(const std::string& name);
ScenarioSpec make_scenario_spec(const std::string& name,
                                const std::map<std::string, double>& overrides,
                                std::uint64_t seed);

// Deterministic event sequence for (spec, topo). Infeasible placements
// (more threads than cores) fail generation.
std::vector<TraceEvent> gen_scenario(const ScenarioSpec& spec,
                                     const MachineTopology& topo,
                                     const AddressLayout& layout);

// Line-delimited JSON, one event per line, LF endings, alphabetical keys.
std::string serialize_trace(const std::vector<TraceEvent>& events);
std::vector<TraceEvent> parse_trace(std::istream& in);
std::vector<TraceEvent> parse_trace_string(const std::string& text);

}  // namespace ptsim
