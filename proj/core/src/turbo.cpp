#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ampsizer/errors.hpp"
#include "ampsizer/optimizers.hpp"
#include "gp.hpp"
#include "opt_common.hpp"

namespace ampsizer {

namespace {

using detail_opt::CoordMap;
using detail_opt::Gp;
using detail_opt::Recorder;
using detail_opt::Rng;

constexpr double kSideInit = 0.8;
constexpr double kSideMin = 0.0078125;  // 2^-7
constexpr double kSideMax = 1.6;
constexpr int kSuccTol = 3;
constexpr int kNumCandidates = 256;
constexpr int kRefitInterval = 5;   // hyperparameter refit cadence (evals)
constexpr int kMaxGpPoints = 200;   // surrogate training-set cap

struct Region {
  std::vector<Eigen::VectorXd> x;  // unit-cube points
  std::vector<double> y;
  double side = kSideInit;
  int succ = 0, fail = 0;
  Gp gp;
  int points_at_fit = -1;

  int best_idx() const {
    return static_cast<int>(std::min_element(y.begin(), y.end()) - y.begin());
  }
  double best() const { return y[static_cast<size_t>(best_idx())]; }
};

}  // namespace

OptResult turbo_optimize(const Objective& objective, const SearchSpace& space, int budget,
                         std::uint64_t seed, int n_trust_regions, int batch_size,
                         const std::vector<double>* init, int n_init) {
  space.validate();
  const int dim = space.size();
  if (n_trust_regions < 1)
    throw ValidationError("need at least one trust region", "n_trust_regions");
  if (batch_size < 1) throw ValidationError("batch size must be positive", "batch_size");
  if (n_init <= 0)
    n_init = std::max(2, std::min(2 * dim, budget / (4 * n_trust_regions)));
  if (budget < n_trust_regions * n_init)
    throw BudgetError("budget " + std::to_string(budget) + " cannot cover " +
                      std::to_string(n_trust_regions) + " x " + std::to_string(n_init) +
                      " initial design points");

  CoordMap map(space);
  Recorder rec(objective, map);
  Rng rng(seed);

  auto eval_unit = [&](const Eigen::VectorXd& xu) {
    std::vector<double> u(static_cast<size_t>(dim));
    for (int j = 0; j < dim; ++j)
      u[static_cast<size_t>(j)] =
          map.lo[static_cast<size_t>(j)] +
          xu(j) * (map.hi[static_cast<size_t>(j)] - map.lo[static_cast<size_t>(j)]);
    return rec.eval_internal(u);
  };
  auto latin_hypercube = [&](int n) {
    std::vector<Eigen::VectorXd> pts(static_cast<size_t>(n), Eigen::VectorXd(dim));
    std::vector<int> perm(static_cast<size_t>(n));
    for (int j = 0; j < dim; ++j) {
      std::iota(perm.begin(), perm.end(), 0);
      for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<size_t>(i)],
                                                perm[static_cast<size_t>(rng.below(i + 1))]);
      for (int i = 0; i < n; ++i)
        pts[static_cast<size_t>(i)](j) = (perm[static_cast<size_t>(i)] + rng.u01()) / n;
    }
    return pts;
  };
  auto seed_region = [&](Region& r, const std::vector<double>* warm) {
    r = Region{};
    const int n_pts = std::min(n_init, budget - rec.res.n_evals);
    if (n_pts <= 0) return;
    std::vector<Eigen::VectorXd> pts = latin_hypercube(n_pts);
    if (warm) {
      std::vector<double> u = map.to_internal(*warm);
      Eigen::VectorXd xu(dim);
      for (int j = 0; j < dim; ++j)
        xu(j) = std::clamp((u[static_cast<size_t>(j)] - map.lo[static_cast<size_t>(j)]) /
                               (map.hi[static_cast<size_t>(j)] -
                                map.lo[static_cast<size_t>(j)]),
                           0.0, 1.0);
      pts[0] = xu;
    }
    for (const Eigen::VectorXd& p : pts) {
      if (rec.res.n_evals >= budget) break;
      r.x.push_back(p);
      r.y.push_back(eval_unit(p));
    }
  };

  std::vector<Region> regions(static_cast<size_t>(n_trust_regions));
  for (int ri = 0; ri < n_trust_regions; ++ri)
    seed_region(regions[static_cast<size_t>(ri)], ri == 0 ? init : nullptr);

  const int fail_tol = std::max(1, (dim + batch_size - 1) / batch_size);
  const double prob_perturb = std::min(20.0 / dim, 1.0);
  int surrogate_failures = 0;

  struct Proposal {
    int region;
    Eigen::VectorXd point;
    double sampled;
  };

  while (rec.res.n_evals < budget) {
    std::vector<Proposal> proposals;
    for (int ri = 0; ri < n_trust_regions; ++ri) {
      Region& r = regions[static_cast<size_t>(ri)];
      const int n = static_cast<int>(r.x.size());
      if (n < 2) continue;
      try {
        // Train on the best points when the history exceeds the cap.
        std::vector<int> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
          return r.y[static_cast<size_t>(a)] < r.y[static_cast<size_t>(b)];
        });
        const int k = std::min(n, kMaxGpPoints);
        Eigen::MatrixXd xs(k, dim);
        Eigen::VectorXd ys(k);
        for (int i = 0; i < k; ++i) {
          xs.row(i) = r.x[static_cast<size_t>(order[static_cast<size_t>(i)])].transpose();
          ys(i) = r.y[static_cast<size_t>(order[static_cast<size_t>(i)])];
        }
        const bool refit = r.points_at_fit < 0 || n - r.points_at_fit >= kRefitInterval;
        r.gp.fit(xs, ys, rng, refit);
        if (refit) r.points_at_fit = n;

        // Candidate box: lengthscale-weighted sides around the incumbent.
        const Eigen::VectorXd& center = r.x[static_cast<size_t>(r.best_idx())];
        Eigen::VectorXd ls = r.gp.lengthscales();
        Eigen::VectorXd w = ls / ls.mean();
        w /= std::pow(w.prod(), 1.0 / dim);
        Eigen::VectorXd lb =
            (center - 0.5 * r.side * w).cwiseMax(0.0).cwiseMin(1.0);
        Eigen::VectorXd ub =
            (center + 0.5 * r.side * w).cwiseMax(0.0).cwiseMin(1.0);

        Eigen::MatrixXd cand(kNumCandidates, dim);
        for (int i = 0; i < kNumCandidates; ++i) {
          Eigen::VectorXd row = center;
          bool any = false;
          for (int j = 0; j < dim; ++j)
            if (rng.u01() <= prob_perturb) {
              row(j) = lb(j) + (ub(j) - lb(j)) * rng.u01();
              any = true;
            }
          if (!any) {
            const int j = rng.below(dim);
            row(j) = lb(j) + (ub(j) - lb(j)) * rng.u01();
          }
          cand.row(i) = row.transpose();
        }
        Eigen::MatrixXd samples = r.gp.sample_joint(cand, batch_size, rng);
        for (int s = 0; s < batch_size; ++s) {
          Eigen::Index imin = 0;
          samples.col(s).minCoeff(&imin);
          proposals.push_back({ri, cand.row(imin).transpose(), samples(imin, s)});
        }
      } catch (const SurrogateError&) {
        if (++surrogate_failures > 16) throw;
        seed_region(r, nullptr);
      }
      if (rec.res.n_evals >= budget) break;
    }
    if (rec.res.n_evals >= budget) break;
    if (proposals.empty()) {
      // All regions just restarted or hold too little data: sample uniformly
      // so the loop always consumes budget.
      Region& r = regions[static_cast<size_t>(rng.below(n_trust_regions))];
      Eigen::VectorXd p(dim);
      for (int j = 0; j < dim; ++j) p(j) = rng.u01();
      r.x.push_back(p);
      r.y.push_back(eval_unit(p));
      continue;
    }
    std::sort(proposals.begin(), proposals.end(),
              [](const Proposal& a, const Proposal& b) { return a.sampled < b.sampled; });
    const int take = std::min<int>(batch_size, static_cast<int>(proposals.size()));
    for (int t = 0; t < take && rec.res.n_evals < budget; ++t) {
      Region& r = regions[static_cast<size_t>(proposals[static_cast<size_t>(t)].region)];
      const double incumbent = r.best();
      const double v = eval_unit(proposals[static_cast<size_t>(t)].point);
      r.x.push_back(proposals[static_cast<size_t>(t)].point);
      r.y.push_back(v);
      if (v < incumbent - 1e-3 * std::fabs(incumbent)) {
        ++r.succ;
        r.fail = 0;
      } else {
        ++r.fail;
        r.succ = 0;
      }
      if (r.succ >= kSuccTol) {
        r.side = std::min(2.0 * r.side, kSideMax);
        r.succ = 0;
      }
      if (r.fail >= fail_tol) {
        r.side *= 0.5;
        r.fail = 0;
      }
      if (r.side < kSideMin) seed_region(r, nullptr);
    }
  }
  return rec.finish();
}

}  // namespace ampsizer
