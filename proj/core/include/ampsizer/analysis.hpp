#pragma once

// Frequency-domain analysis: numeric transfer-function assembly, pole/zero
// extraction, and the AC metrics (DC gain, GBW, phase margin) the sizing
// pipeline verifies against.

#include <complex>
#include <filesystem>
#include <utility>
#include <vector>

#include "ampsizer/device.hpp"
#include "ampsizer/kb.hpp"

namespace ampsizer {

struct RationalTransferFunction {
  std::vector<double> num;  // ascending powers of s, trailing zeros stripped
  std::vector<double> den;  // den[0] != 0; deg(num) <= deg(den)
};

struct ACMetrics {
  double dc_gain_db = 0.0;
  double gbw_hz = 0.0;  // unity-gain frequency
  double pm_deg = 0.0;
  std::vector<std::complex<double>> poles;  // rad/s
  std::vector<std::complex<double>> zeros;  // rad/s
  bool stable = false;                      // all poles strictly in the left half-plane
};

// Evaluates the descriptor's coefficient trees at the given small-signal
// values and load.  Throws EvalError naming the coefficient index when a
// coefficient is non-finite.
RationalTransferFunction assemble_tf(const TopologyDescriptor& desc,
                                     const SmallSignalParams& ssp, double cl);

// Same, over a raw symbol-indexed value vector (reasoning-internal path).
RationalTransferFunction assemble_tf_env(const TopologyDescriptor& desc,
                                         std::span<const double> env);

// Roots of denominator (poles) and numerator (zeros) via companion-matrix
// eigenvalues with one Newton polish step per root.
// Throws DegenerateError on an all-zero polynomial.
std::pair<std::vector<std::complex<double>>, std::vector<std::complex<double>>>
poles_zeros(const RationalTransferFunction& tf);

// Crossing-tolerant magnitude/phase scan: log sweep 1 Hz - 1 THz at 50
// points/decade, phase unwrapped from DC, unity crossing refined by
// geometric bisection.  gbw/pm are meaningful only when has_crossing.
struct AcScan {
  double dc_gain_db = 0.0;
  bool has_crossing = false;
  double gbw_hz = 0.0;
  double pm_deg = 0.0;
};
AcScan ac_scan(const RationalTransferFunction& tf);

// Full metrics: scan + poles/zeros + stability.  Throws NoCrossingError when
// |H| never crosses unity in the scan range.
ACMetrics ac_metrics(const RationalTransferFunction& tf);

// Writes "freq_hz,mag_db,phase_deg" CSV rows, log-spaced, 50 points/decade
// over 1 Hz - 1 THz.  Throws IoError.
void bode_export(const RationalTransferFunction& tf, const std::filesystem::path& path);

// H(j*2*pi*f) by Horner evaluation.
std::complex<double> tf_at(const RationalTransferFunction& tf, double freq_hz);

}  // namespace ampsizer
