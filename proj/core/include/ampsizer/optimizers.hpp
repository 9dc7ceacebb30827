#pragma once

// Black-box optimizers the pipeline embeds and benchmarks against:
// Artificial Bee Colony and trust-region Bayesian optimization (TuRBO),
// plus the shared search space and penalty-based constraint handling.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ampsizer/analysis.hpp"
#include "ampsizer/reasoning.hpp"

namespace ampsizer {

enum class Scale { linear, log };

struct Dimension {
  std::string name;
  double lo = 0.0, hi = 1.0;
  Scale scale = Scale::linear;
};

struct SearchSpace {
  std::vector<Dimension> dims;
  int size() const { return static_cast<int>(dims.size()); }
  void validate() const;  // lo < hi; log scale requires lo > 0
  // Mid-bounds point in natural units (geometric mid for log dimensions).
  std::vector<double> midpoint() const;
};

// One objective evaluation: scalar value to minimize plus a feasibility flag
// (always true for unconstrained objectives).
struct Evaluation {
  double value = 0.0;
  bool feasible = true;
};
using Objective = std::function<Evaluation(const std::vector<double>&)>;

struct OptResult {
  std::vector<double> best_point;  // natural units; lowest value seen
  double best_value = std::numeric_limits<double>::infinity();
  bool feasible = false;  // true iff any evaluated point was feasible
  // Best feasible point (by value) when feasible; equals best_point for
  // unconstrained objectives.
  std::vector<double> best_feasible_point;
  double best_feasible_value = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> trajectory;  // best-so-far value per evaluation
  int n_evals = 0;
  double wall_time_s = 0.0;
  // Evaluation index (1-based) of the first feasible point, 0 when none.
  int first_feasible_eval = 0;
};

// Canonical Artificial Bee Colony over the (log-transformed) search space.
// n_food_sources <= 0 selects max(10, 2*dim); limit <= 0 selects
// n_food_sources*dim.  `init` (natural units) seeds food source 0; when
// absent the mid-bounds point is used.  Throws BudgetError when the budget
// cannot cover the population.
OptResult abc_optimize(const Objective& objective, const SearchSpace& space,
                       int budget, std::uint64_t seed,
                       int n_food_sources = 0, int limit = 0,
                       const std::vector<double>* init = nullptr);

// TuRBO: per trust region a Latin-hypercube initial design, a Matern-5/2
// Gaussian-process surrogate, Thompson-sampled candidates inside the
// hyper-rectangular region, and success/failure-driven region resizing.
// n_init <= 0 selects min(2*dim, budget/(4*n_trust_regions)) (at least 2).
// `init` replaces the first initial-design point of region 0.
// Throws BudgetError when budget < n_trust_regions * n_init.
OptResult turbo_optimize(const Objective& objective, const SearchSpace& space,
                         int budget, std::uint64_t seed,
                         int n_trust_regions = 1, int batch_size = 1,
                         const std::vector<double>* init = nullptr,
                         int n_init = 0);

// Writes the best-so-far trace as "eval_index,best_value" CSV rows
// (1-based indices).  Throws IoError.
void export_trajectory(const OptResult& result, const std::filesystem::path& path);

// ------------------------------------------------------- constraint handling
inline constexpr double kPenaltyWeight = 1e3;
// Magnitude-scan penalty contribution when |H| never crosses unity.
inline constexpr double kNoCrossingPenalty = 2.0;

// Penalized objective value: i_dd/i_dd_max plus kPenaltyWeight times the sum
// of squared relative constraint violations over {GBW, PM, DC gain} plus 1
// for instability (kNoCrossingPenalty replaces the GBW/PM terms when the
// response never crosses unity).  Feasible points order purely by i_dd.
double penalize(const DesignSpec& spec, const AcScan& scan, bool stable,
                double i_dd, double i_dd_max);

// All spec inequalities met and no right-half-plane pole.
bool meets_spec(const DesignSpec& spec, const AcScan& scan, bool stable);

}  // namespace ampsizer
