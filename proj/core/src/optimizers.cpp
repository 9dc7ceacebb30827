#include "ampsizer/optimizers.hpp"

#include <algorithm>
#include <cmath>

#include "ampsizer/errors.hpp"

namespace ampsizer {

void SearchSpace::validate() const {
  if (dims.empty()) throw ValidationError("search space has no dimensions", "dims");
  for (const Dimension& d : dims) {
    if (d.name.empty()) throw ValidationError("search dimension with empty name", "dims");
    if (!(d.lo < d.hi))
      throw ValidationError("search dimension '" + d.name + "' needs lo < hi", d.name);
    if (d.scale == Scale::log && !(d.lo > 0.0))
      throw ValidationError("log-scaled dimension '" + d.name + "' needs lo > 0", d.name);
  }
}

std::vector<double> SearchSpace::midpoint() const {
  std::vector<double> x(dims.size());
  for (size_t i = 0; i < dims.size(); ++i)
    x[i] = dims[i].scale == Scale::log ? std::sqrt(dims[i].lo * dims[i].hi)
                                       : 0.5 * (dims[i].lo + dims[i].hi);
  return x;
}

bool meets_spec(const DesignSpec& spec, const AcScan& scan, bool stable) {
  return scan.has_crossing && scan.gbw_hz >= spec.gbw_min && scan.pm_deg >= spec.pm_min &&
         scan.dc_gain_db >= spec.gain_min_db && stable;
}

double penalize(const DesignSpec& spec, const AcScan& scan, bool stable, double i_dd,
                double i_dd_max) {
  auto sq = [](double v) { return v * v; };
  double v = 0.0;
  if (!scan.has_crossing) {
    v += kNoCrossingPenalty;
  } else {
    v += sq(std::max(0.0, (spec.gbw_min - scan.gbw_hz) / spec.gbw_min));
    v += sq(std::max(0.0, (spec.pm_min - scan.pm_deg) / spec.pm_min));
  }
  v += sq(std::max(0.0, (spec.gain_min_db - scan.dc_gain_db) / spec.gain_min_db));
  if (!stable) v += 1.0;
  return i_dd / i_dd_max + kPenaltyWeight * v;
}

}  // namespace ampsizer
