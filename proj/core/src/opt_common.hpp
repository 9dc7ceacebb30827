#pragma once

// Internals shared by the black-box optimizers: a portable RNG, the
// natural/internal coordinate transform, and evaluation bookkeeping.

#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "ampsizer/optimizers.hpp"

namespace ampsizer::detail_opt {

// Deterministic across platforms for a given seed; avoids
// std::uniform_real_distribution, whose output is implementation-defined.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double u01() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * u01(); }
  int below(int n) { return std::min(n - 1, static_cast<int>(u01() * n)); }
  double normal() {
    const double u1 = 1.0 - u01();  // (0, 1]
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }
};

// Optimizers work in internal coordinates: log-scaled dimensions are searched
// in log space so multiplicative moves become additive.
struct CoordMap {
  std::vector<double> lo, hi;  // internal bounds
  std::vector<bool> is_log;
  explicit CoordMap(const SearchSpace& space) {
    for (const Dimension& d : space.dims) {
      const bool lg = d.scale == Scale::log;
      is_log.push_back(lg);
      lo.push_back(lg ? std::log(d.lo) : d.lo);
      hi.push_back(lg ? std::log(d.hi) : d.hi);
    }
  }
  int size() const { return static_cast<int>(lo.size()); }
  std::vector<double> to_internal(const std::vector<double>& x) const {
    std::vector<double> u(x.size());
    for (size_t j = 0; j < x.size(); ++j) u[j] = is_log[j] ? std::log(x[j]) : x[j];
    return u;
  }
  std::vector<double> to_natural(const std::vector<double>& u) const {
    std::vector<double> x(u.size());
    for (size_t j = 0; j < u.size(); ++j) x[j] = is_log[j] ? std::exp(u[j]) : u[j];
    return x;
  }
};

// Tracks best / best-feasible / trajectory across objective calls.
struct Recorder {
  const Objective& obj;
  const CoordMap& map;
  OptResult res;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  Recorder(const Objective& o, const CoordMap& m) : obj(o), map(m) {}

  double eval_internal(const std::vector<double>& u) {
    std::vector<double> x = map.to_natural(u);
    const Evaluation e = obj(x);
    ++res.n_evals;
    if (e.value < res.best_value) {
      res.best_value = e.value;
      res.best_point = x;
    }
    if (e.feasible) {
      if (res.first_feasible_eval == 0) res.first_feasible_eval = res.n_evals;
      if (!res.feasible || e.value < res.best_feasible_value) {
        res.best_feasible_value = e.value;
        res.best_feasible_point = x;
      }
      res.feasible = true;
    }
    res.trajectory.push_back(res.best_value);
    return e.value;
  }

  OptResult finish() {
    res.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::move(res);
  }
};

}  // namespace ampsizer::detail_opt
