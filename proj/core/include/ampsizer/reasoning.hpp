#pragma once

// Deterministic target derivation: places the non-dominant poles as a
// Butterworth-damped complex pair (the complex-pole method), solves the
// topology's design equations for per-stage numeric targets, and emits the
// ordered sub-problem list the sizing pipeline consumes.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ampsizer/device.hpp"
#include "ampsizer/kb.hpp"

namespace ampsizer {

struct DesignSpec {
  double cl = 0.0;           // F
  double gbw_min = 0.0;      // Hz
  double pm_min = 0.0;       // deg, in (0, 90)
  double gain_min_db = 0.0;  // dB
  // Objective: minimize i_dd (implicit).
  void validate() const;  // throws ValidationError
};

struct TargetValue {
  double value = 0.0;
  double tol_rel = 0.05;  // relative tolerance band
  bool within(double x) const {
    return std::fabs(x - value) <= tol_rel * std::fabs(value);
  }
};

struct DerivedTargets {
  std::string topology;
  std::map<std::string, TargetValue> targets;  // every descriptor variable
  double dominant_pole_hz = 0.0;
  double omega0_rad_s = 0.0;  // non-dominant complex-pair natural frequency
  double q = 0.0;             // pair quality factor (Butterworth: 1/sqrt(2))
  double separation_factor = 0.0;
  double gbw_margin = 0.0;
  int attempts = 0;  // placement attempts used; each ran one device-level verify
  // Metrics of the assembled tf at the targets (placement-level), and of the
  // device realization including derived parasitics.
  double predicted_gbw_hz = 0.0, predicted_pm_deg = 0.0, predicted_gain_db = 0.0;
  double realized_gbw_hz = 0.0, realized_pm_deg = 0.0;
};

struct ReasoningConfig {
  double q = 0.70710678118654752440;  // 1/sqrt(2): Butterworth pair
  double separation_factor0 = 2.0;
  double sf_escalation = 1.25;   // applied on PM shortfall
  double gbw_margin0 = 1.1;      // safety margin on the GBW target
  double margin_escalation = 1.15;  // applied on GBW shortfall
  int max_attempts = 8;          // total placement attempts (covers >= 5 PM retries)
  int n_starts = 8;              // Newton multistart
  int max_fixpoint = 12;         // Newton <-> gain-partition alternations
  double newton_tol = 1e-10;     // relative residual
  int newton_max_iter = 100;
  double tol_rel = 0.05;         // tolerance band attached to targets
  double cp_nominal = 1e-15;     // placeholder parasitic during derivation (F)
  std::uint64_t multistart_seed = 12345;
  ProcessProfile profile;        // device model for the realization check
};

// Derives numeric targets for every descriptor variable such that the
// assembled transfer function meets the spec (GBW >= gbw_min, PM >= pm_min,
// with the same holding for the square-law device realization including
// derived parasitics).  Throws InfeasibleError (naming the binding bound) or
// SolverError (with residual history).
DerivedTargets solve_targets(const DesignSpec& spec, const TopologyDescriptor& desc,
                             const ReasoningConfig& cfg = {});

struct SubProblem {
  int stage_id = 0;   // 1-based signal-path stage; 0 = compensation/feedforward
  std::string label;  // "stage1", ..., "compensation"
  std::vector<std::string> owned;              // symbols this sub-problem sizes
  std::map<std::string, TargetValue> targets;  // targets for the owned symbols

  // Completion predicate: all owned variables within tolerance of targets.
  bool complete(const SmallSignalParams& ssp) const;
};

// Ordered sub-problem list: one per gain stage in signal-path order, plus a
// trailing compensation sub-problem when the topology has auxiliary
// transconductors to size.
std::vector<SubProblem> decompose(const DerivedTargets& targets,
                                  const TopologyDescriptor& desc);

}  // namespace ampsizer
