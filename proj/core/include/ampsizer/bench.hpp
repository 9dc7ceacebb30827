#pragma once

// Benchmark harness: randomized spec sampling, four-way method comparison
// (pipeline vs raw ABC vs TuRBO-5 vs TuRBO-1 on the identical budget and
// objective), aggregation, and report emission with published reference
// values embedded for side-by-side display.

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ampsizer/sizing.hpp"

namespace ampsizer {

// Spec-sampling class for one topology: GBW uniform, C_L log-uniform; the
// sampling decade is scaled to each topology's reference load so specs stay
// physically consistent.
struct TopologyClass {
  std::string name;
  double gbw_lo = 1e6, gbw_hi = 10e6;     // Hz (uniform)
  double cl_lo = 10e-12, cl_hi = 100e-12;  // F (log-uniform)
  double gain_min_db = 100.0;
  double pm_min = 60.0;
};
const std::vector<TopologyClass>& default_classes();
const TopologyClass& class_for(const std::string& topology);  // throws ValidationError

struct BenchConfig {
  std::vector<std::string> topologies;
  std::vector<std::string> methods = {"pipeline", "abc", "turbo5", "turbo1"};
  int n_runs = 30;
  std::uint64_t seed_base = 0;
  int budget = 100;
  int n_threads = 0;     // worker threads for the run grid; 0 = hardware concurrency
  bool verbose = false;  // one progress line per completed run, on stderr
  std::map<std::string, TopologyClass> class_overrides;
  PipelineConfig pipeline;
  void validate() const;
};
BenchConfig load_bench_config(const std::filesystem::path& path);  // bench.toml-style

struct RunRecord {
  std::string topology, method;
  DesignSpec spec;
  std::uint64_t seed = 0;
  bool success = false;
  // Evaluations consumed up to the first feasible point; budget when the run
  // never succeeds (kept in averages, documented in the report header).
  int evals_to_success = 0;
  double best_idd = 0.0;  // A; of the returned design
  double gbw_hz = 0.0, pm_deg = 0.0, gain_db = 0.0;
  double ifom = 0.0;  // MHz*pF/mA when successful
  double wall_s = 0.0;
};

struct MethodAggregate {
  std::string topology, method;
  int n_runs = 0;
  double success_rate = 0.0;  // denominator = all runs
  double avg_evals = 0.0;     // unsuccessful runs counted as budget
  double median_evals = 0.0;
  double avg_wall_s = 0.0;
  double avg_ifom = 0.0;  // over successful runs
};

struct BenchReport {
  BenchConfig config;
  std::vector<RunRecord> runs;
  std::vector<MethodAggregate> aggregates;  // topology-major, method order as configured
};

// Small-signal figure of merit GBW*C_L/I_dd in MHz*pF/mA.
double ifom_s(double gbw_hz, double cl_f, double idd_a);

// Deterministic per seed; GBW uniform, C_L log-uniform within the class.
std::vector<DesignSpec> sample_specs(std::mt19937_64& rng, const TopologyClass& cls, int n);

// Runs the full comparison grid; per-run errors become failed cells, the
// sweep never aborts.
BenchReport run_comparison(const BenchConfig& config);

enum class ReportFormat { markdown, csv };
void emit_report(const BenchReport& report, ReportFormat format,
                 const std::filesystem::path& path);  // throws IoError

// Acceptance-tagged trend assertions over whatever cells the report contains;
// returns human-readable failure descriptions (empty = all hold).
std::vector<std::string> check_trends(const BenchReport& report);

// ----------------------------------------------------- published references
// Reference amplifier designs from the published literature (display
// constants only; never asserted against this model's absolute numbers).
struct ReferenceDesign {
  std::string topology;
  double cl_pf = 0.0;
  double spec_gbw_mhz = 0.0, spec_pm_deg = 0.0, spec_gain_db = 0.0;
  // Without / with global refinement:
  double noopt_gbw_mhz = 0.0, noopt_pm_deg = 0.0, noopt_gain_db = 0.0,
         noopt_idd_ma = 0.0, noopt_ifom = 0.0;
  double opt_gbw_mhz = 0.0, opt_pm_deg = 0.0, opt_gain_db = 0.0,
         opt_idd_ma = 0.0, opt_ifom = 0.0;
  double literature_ifom = 0.0;  // the original source design's IFOM_S
};
const std::vector<ReferenceDesign>& reference_designs();

// Published method-comparison statistics (iteration unit differs from this
// harness's evaluation count; display only).
struct ReferenceMethodStats {
  std::string topology, method;
  double avg_iters = 0.0, avg_time_s = 0.0, success_rate = 0.0;
};
const std::vector<ReferenceMethodStats>& reference_method_stats();

}  // namespace ampsizer
