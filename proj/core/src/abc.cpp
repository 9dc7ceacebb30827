#include <algorithm>
#include <cmath>
#include <numeric>

#include "ampsizer/errors.hpp"
#include "ampsizer/optimizers.hpp"
#include "opt_common.hpp"

namespace ampsizer {

// Canonical Artificial Bee Colony (employed / onlooker / scout phases with
// greedy replacement and trial counters), searched in internal coordinates.
OptResult abc_optimize(const Objective& objective, const SearchSpace& space, int budget,
                       std::uint64_t seed, int n_food_sources, int limit,
                       const std::vector<double>* init) {
  space.validate();
  const int dim = space.size();
  const int sn = n_food_sources > 0 ? n_food_sources : std::max(10, 2 * dim);
  const int lim = limit > 0 ? limit : sn * dim;
  if (sn < 2) throw ValidationError("ABC needs at least 2 food sources", "n_food_sources");
  if (budget < sn)
    throw BudgetError("budget " + std::to_string(budget) + " cannot cover the " +
                      std::to_string(sn) + "-source population");

  detail_opt::CoordMap map(space);
  detail_opt::Recorder rec(objective, map);
  detail_opt::Rng rng(seed);

  std::vector<std::vector<double>> foods(static_cast<size_t>(sn),
                                         std::vector<double>(static_cast<size_t>(dim)));
  std::vector<double> vals(static_cast<size_t>(sn));
  std::vector<int> trials(static_cast<size_t>(sn), 0);

  for (int i = 0; i < sn; ++i)
    for (int j = 0; j < dim; ++j)
      foods[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          rng.uniform(map.lo[static_cast<size_t>(j)], map.hi[static_cast<size_t>(j)]);
  foods[0] = map.to_internal(init ? *init : space.midpoint());
  for (int i = 0; i < sn; ++i)
    vals[static_cast<size_t>(i)] = rec.eval_internal(foods[static_cast<size_t>(i)]);

  auto neighbor = [&](int i) {
    int k = rng.below(sn - 1);
    if (k >= i) ++k;
    const int j = rng.below(dim);
    std::vector<double> cand = foods[static_cast<size_t>(i)];
    cand[static_cast<size_t>(j)] +=
        rng.uniform(-1.0, 1.0) * (foods[static_cast<size_t>(i)][static_cast<size_t>(j)] -
                                  foods[static_cast<size_t>(k)][static_cast<size_t>(j)]);
    cand[static_cast<size_t>(j)] = std::clamp(cand[static_cast<size_t>(j)],
                                              map.lo[static_cast<size_t>(j)],
                                              map.hi[static_cast<size_t>(j)]);
    return cand;
  };
  auto greedy = [&](int i, std::vector<double>& cand) {
    const double v = rec.eval_internal(cand);
    if (v < vals[static_cast<size_t>(i)]) {
      foods[static_cast<size_t>(i)] = std::move(cand);
      vals[static_cast<size_t>(i)] = v;
      trials[static_cast<size_t>(i)] = 0;
    } else {
      ++trials[static_cast<size_t>(i)];
    }
  };

  while (rec.res.n_evals < budget) {
    for (int i = 0; i < sn && rec.res.n_evals < budget; ++i) {
      auto cand = neighbor(i);
      greedy(i, cand);
    }
    if (rec.res.n_evals >= budget) break;

    // Onlookers pick sources with probability proportional to fitness.
    std::vector<double> fit(static_cast<size_t>(sn));
    for (int i = 0; i < sn; ++i) {
      const double v = vals[static_cast<size_t>(i)];
      fit[static_cast<size_t>(i)] = v >= 0.0 ? 1.0 / (1.0 + v) : 1.0 + std::fabs(v);
    }
    const double fsum = std::accumulate(fit.begin(), fit.end(), 0.0);
    for (int t = 0; t < sn && rec.res.n_evals < budget; ++t) {
      const double r = rng.u01() * fsum;
      int i = 0;
      double acc = fit[0];
      while (i + 1 < sn && acc < r) acc += fit[static_cast<size_t>(++i)];
      auto cand = neighbor(i);
      greedy(i, cand);
    }
    if (rec.res.n_evals >= budget) break;

    // One scout per cycle: abandon the most-stalled source.
    const int worst = static_cast<int>(
        std::max_element(trials.begin(), trials.end()) - trials.begin());
    if (trials[static_cast<size_t>(worst)] > lim) {
      for (int j = 0; j < dim; ++j)
        foods[static_cast<size_t>(worst)][static_cast<size_t>(j)] =
            rng.uniform(map.lo[static_cast<size_t>(j)], map.hi[static_cast<size_t>(j)]);
      vals[static_cast<size_t>(worst)] =
          rec.eval_internal(foods[static_cast<size_t>(worst)]);
      trials[static_cast<size_t>(worst)] = 0;
    }
  }
  return rec.finish();
}

}  // namespace ampsizer
