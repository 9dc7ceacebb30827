#include "ampsizer/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ampsizer/errors.hpp"
#include "ampsizer/instrument.hpp"

namespace ampsizer {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kScanLoHz = 1.0;
constexpr double kScanHiHz = 1e12;
constexpr int kPointsPerDecade = 50;

std::vector<double> strip_trailing_zeros(std::vector<double> c) {
  while (c.size() > 1 && c.back() == 0.0) c.pop_back();
  return c;
}

std::vector<double> eval_side(const std::vector<CompiledSum>& side,
                              std::span<const double> env, const char* which) {
  std::vector<double> coeffs;
  coeffs.reserve(side.size());
  for (size_t k = 0; k < side.size(); ++k) {
    double c = eval_sum(side[k], env);
    if (!std::isfinite(c))
      throw EvalError(std::string(which) + " coefficient " + std::to_string(k) +
                      " is non-finite");
    coeffs.push_back(c);
  }
  return coeffs;
}

std::complex<double> poly_at(const std::vector<double>& c, std::complex<double> s) {
  std::complex<double> acc{0.0, 0.0};
  for (size_t k = c.size(); k-- > 0;) acc = acc * s + c[k];
  return acc;
}

std::complex<double> dpoly_at(const std::vector<double>& c, std::complex<double> s) {
  std::complex<double> acc{0.0, 0.0};
  for (size_t k = c.size(); k-- > 1;) acc = acc * s + static_cast<double>(k) * c[k];
  return acc;
}

// Companion-matrix eigenvalues followed by one Newton polish step.
std::vector<std::complex<double>> poly_roots(const std::vector<double>& coeffs) {
  std::vector<double> c = strip_trailing_zeros(coeffs);
  bool all_zero = std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; });
  if (all_zero) throw DegenerateError("zero polynomial has no defined roots");
  const int n = static_cast<int>(c.size()) - 1;  // degree
  if (n == 0) return {};
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) a(i + 1, i) = 1.0;
  for (int i = 0; i < n; ++i) a(i, n - 1) = -c[static_cast<size_t>(i)] / c.back();
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> roots(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) roots[static_cast<size_t>(i)] = es.eigenvalues()(i);
  for (auto& r : roots) {
    std::complex<double> d = dpoly_at(c, r);
    if (std::abs(d) > 0.0) {
      std::complex<double> step = poly_at(c, r) / d;
      if (std::isfinite(step.real()) && std::isfinite(step.imag())) r -= step;
    }
  }
  return roots;
}

}  // namespace

RationalTransferFunction assemble_tf_env(const TopologyDescriptor& desc,
                                         std::span<const double> env) {
  RationalTransferFunction tf;
  tf.num = strip_trailing_zeros(eval_side(desc.num_c, env, "numerator"));
  tf.den = strip_trailing_zeros(eval_side(desc.den_c, env, "denominator"));
  if (tf.den[0] == 0.0) throw EvalError("denominator constant coefficient is zero");
  if (tf.num.size() > tf.den.size())
    throw EvalError("numerator degree exceeds denominator degree");
  return tf;
}

RationalTransferFunction assemble_tf(const TopologyDescriptor& desc,
                                     const SmallSignalParams& ssp, double cl) {
  if (!(cl > 0.0)) throw EvalError("load capacitance must be positive");
  std::vector<double> env = desc.make_env();
  for (const DesignVariable& v : desc.variables) {
    auto it = ssp.values.find(v.symbol);
    if (it == ssp.values.end())
      throw BindingError("small-signal values missing symbol '" + v.symbol + "'", v.symbol);
    env[static_cast<size_t>(desc.symbols.lookup(v.symbol))] = it->second;
  }
  env[static_cast<size_t>(desc.symbols.lookup("CL"))] = cl;
  return assemble_tf_env(desc, env);
}

std::pair<std::vector<std::complex<double>>, std::vector<std::complex<double>>>
poles_zeros(const RationalTransferFunction& tf) {
  return {poly_roots(tf.den), poly_roots(tf.num)};
}

std::complex<double> tf_at(const RationalTransferFunction& tf, double freq_hz) {
  const std::complex<double> s{0.0, 2.0 * kPi * freq_hz};
  return poly_at(tf.num, s) / poly_at(tf.den, s);
}

AcScan ac_scan(const RationalTransferFunction& tf) {
  instrument::ac_scan_calls().fetch_add(1, std::memory_order_relaxed);
  AcScan out;
  const double h0 = tf.num[0] / tf.den[0];
  out.dc_gain_db = h0 == 0.0 ? -HUGE_VAL : 20.0 * std::log10(std::abs(h0));

  const double lg_lo = std::log10(kScanLoHz), lg_hi = std::log10(kScanHiHz);
  const int npts = static_cast<int>((lg_hi - lg_lo) * kPointsPerDecade) + 1;
  std::vector<double> freqs(static_cast<size_t>(npts));
  std::vector<double> mags(static_cast<size_t>(npts));
  std::vector<double> phases(static_cast<size_t>(npts));

  // Phase reference: the DC phase of the (positive-gain) transfer function is
  // 0; a negative DC gain starts at 180.  Margins are measured relative to it.
  const double base = h0 >= 0.0 ? 0.0 : 180.0;
  double prev_ph = base;
  for (int i = 0; i < npts; ++i) {
    const double f =
        std::pow(10.0, lg_lo + (lg_hi - lg_lo) * static_cast<double>(i) / (npts - 1));
    const std::complex<double> h = tf_at(tf, f);
    double ph = std::atan2(h.imag(), h.real()) * 180.0 / kPi;
    while (ph - prev_ph > 180.0) ph -= 360.0;
    while (ph - prev_ph < -180.0) ph += 360.0;
    freqs[static_cast<size_t>(i)] = f;
    mags[static_cast<size_t>(i)] = std::abs(h);
    phases[static_cast<size_t>(i)] = ph;
    prev_ph = ph;
  }

  int cross = -1;
  for (int i = 0; i + 1 < npts; ++i) {
    if (mags[static_cast<size_t>(i)] >= 1.0 && mags[static_cast<size_t>(i + 1)] < 1.0) {
      cross = i;
      break;
    }
  }
  if (cross < 0) return out;  // has_crossing stays false

  double lo = freqs[static_cast<size_t>(cross)], hi = freqs[static_cast<size_t>(cross + 1)];
  for (int it = 0; it < 60 && hi / lo - 1.0 > 1e-9; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (std::abs(tf_at(tf, mid)) >= 1.0)
      lo = mid;
    else
      hi = mid;
  }
  const double fu = std::sqrt(lo * hi);

  // Phase at fu, unwrapped relative to the nearest scanned point below it.
  const std::complex<double> hu = tf_at(tf, fu);
  double ph_u = std::atan2(hu.imag(), hu.real()) * 180.0 / kPi;
  const double ph_ref = phases[static_cast<size_t>(cross)];
  while (ph_u - ph_ref > 180.0) ph_u -= 360.0;
  while (ph_u - ph_ref < -180.0) ph_u += 360.0;

  out.has_crossing = true;
  out.gbw_hz = fu;
  out.pm_deg = 180.0 + ph_u - base;
  return out;
}

ACMetrics ac_metrics(const RationalTransferFunction& tf) {
  AcScan scan = ac_scan(tf);
  if (!scan.has_crossing)
    throw NoCrossingError("|H| never crosses unity between 1 Hz and 1 THz");
  ACMetrics m;
  m.dc_gain_db = scan.dc_gain_db;
  m.gbw_hz = scan.gbw_hz;
  m.pm_deg = scan.pm_deg;
  auto [poles, zeros] = poles_zeros(tf);
  m.poles = std::move(poles);
  m.zeros = std::move(zeros);
  m.stable = std::all_of(m.poles.begin(), m.poles.end(),
                         [](const std::complex<double>& p) { return p.real() < 0.0; });
  return m;
}

void bode_export(const RationalTransferFunction& tf, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open bode file '" + path.string() + "'");
  out << "freq_hz,mag_db,phase_deg\n";
  const double lg_lo = std::log10(kScanLoHz), lg_hi = std::log10(kScanHiHz);
  const int npts = static_cast<int>((lg_hi - lg_lo) * kPointsPerDecade) + 1;
  const double h0 = tf.num[0] / tf.den[0];
  double prev_ph = h0 >= 0.0 ? 0.0 : 180.0;
  char row[96];
  for (int i = 0; i < npts; ++i) {
    const double f =
        std::pow(10.0, lg_lo + (lg_hi - lg_lo) * static_cast<double>(i) / (npts - 1));
    const std::complex<double> h = tf_at(tf, f);
    const double mag = std::max(std::abs(h), 1e-300);
    double ph = std::atan2(h.imag(), h.real()) * 180.0 / kPi;
    while (ph - prev_ph > 180.0) ph -= 360.0;
    while (ph - prev_ph < -180.0) ph += 360.0;
    prev_ph = ph;
    std::snprintf(row, sizeof row, "%.10g,%.10g,%.10g\n", f, 20.0 * std::log10(mag), ph);
    out << row;
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace ampsizer
