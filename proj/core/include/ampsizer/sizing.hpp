#pragma once

// Pipeline orchestration: sequential sub-problem sizing via the
// read-estimate-optimize loop, then global refinement warm-started at the
// composite point, with exact evaluation accounting throughout.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ampsizer/optimizers.hpp"
#include "ampsizer/reasoning.hpp"

namespace ampsizer {

enum class OptimizerChoice { abc, turbo1, turbo5 };
const char* to_string(OptimizerChoice choice);

struct PipelineConfig {
  int subproblem_budget = 20;  // evaluations per sub-problem
  int global_budget = 100;     // global-refinement evaluations
  double gm_tolerance = 0.05;  // relative; sub-problem completion band
  bool use_subproblem_optimizer = true;
  bool use_global_optimizer = true;
  OptimizerChoice subproblem_optimizer = OptimizerChoice::abc;
  OptimizerChoice global_optimizer = OptimizerChoice::abc;
  std::uint64_t seed = 0;
  ReasoningConfig reasoning;  // includes the process profile
  bool use_cache = true;
  std::filesystem::path cache_dir;  // empty selects the default directory

  const ProcessProfile& profile() const { return reasoning.profile; }
  void validate() const;  // budgets >= 1 (global_budget >= 0), tolerance > 0
};

// Per-phase evaluation accounting.  Every evaluation of any kind calls
// evaluate_devices exactly once; full-circuit evaluations additionally run
// one AC scan.  circuit_evals counts the latter (the iteration currency).
struct PhaseStats {
  std::string phase;  // "reasoning", "stage1", ..., "compensation", "global", "verify"
  int evaluate_devices_calls = 0;
  int ac_scan_calls = 0;
  int circuit_evals = 0;
  double wall_s = 0.0;
};

struct SizedDesign {
  std::string topology;
  DesignSpec spec;
  DeviceParams devices;
  SmallSignalParams ssp;
  ACMetrics metrics;
  double i_dd = 0.0;
  bool success = false;  // all spec inequalities met and stable
  std::vector<PhaseStats> history;
  DerivedTargets targets;
  bool targets_from_cache = false;
  // Cumulative evaluate_devices calls at the first feasible full-circuit
  // evaluation; 0 when no feasible point was seen.
  int evals_to_first_success = 0;

  std::string to_json() const;
};

struct SubProblemResult {
  DeviceParams state;
  bool complete = false;
  bool budget_exhausted = false;
  // Best-so-far residual (sum of squared relative target errors) after each
  // evaluation; non-increasing.
  std::vector<double> residual_history;
  int n_evals = 0;  // evaluate_devices calls consumed
};

// Read-estimate-optimize loop over one sub-problem's device knobs.  Budget
// exhaustion is a flagged result carrying the best state, not an error: the
// pipeline proceeds and global refinement absorbs residual error.
SubProblemResult solve_subproblem(const SubProblem& sub, const DeviceParams& state,
                                  const TopologyDescriptor& desc,
                                  const PipelineConfig& cfg);

// Global refinement: configured optimizer over all device knobs, objective =
// penalized I_dd, warm-started at `state`.  Returns the best feasible design
// when any candidate is feasible, else the best-penalty design flagged
// unsuccessful.  With global_budget = 0 the state passes through unchanged.
SizedDesign global_refine(const DeviceParams& state, const DesignSpec& spec,
                          const TopologyDescriptor& desc, const PipelineConfig& cfg);

// Full pipeline: cached-or-solved targets -> decompose -> sub-problems in
// signal-path order -> global refinement -> stability verification.
SizedDesign design(const DesignSpec& spec, const TopologyDescriptor& desc,
                   const PipelineConfig& cfg = {});

// ------------------------------------------------- device knob space (shared
// with the bench harness so raw optimizers search the identical space)

// One dimension per transistor knob (wl_<sym>, id_<sym> for every gm
// variable) and per compensation passive; all log-scaled.  Parasitics and
// stage output resistances are derived, not knobs.
SearchSpace device_space(const TopologyDescriptor& desc, const ProcessProfile& profile);
DeviceParams point_to_devices(const std::vector<double>& x, const TopologyDescriptor& desc,
                              const SearchSpace& space);
std::vector<double> devices_to_point(const DeviceParams& devices,
                                     const TopologyDescriptor& desc,
                                     const SearchSpace& space);

// The penalized full-circuit objective (device eval + tf assembly + AC scan +
// pole test) shared by global refinement and the raw-optimizer baselines.
Objective make_circuit_objective(const TopologyDescriptor& desc, const DesignSpec& spec,
                                 const ProcessProfile& profile, const SearchSpace& space);

}  // namespace ampsizer
