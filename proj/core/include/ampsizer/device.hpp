#pragma once

// Behavioral device model standing in for a circuit simulator: square-law
// transistors and ideal passives mapped to the small-signal values the
// analysis module consumes.

#include <filesystem>
#include <map>
#include <string>

#include "ampsizer/kb.hpp"

namespace ampsizer {

enum class Polarity { n, p };

struct ProcessProfile {
  double mu_cox_n = 300e-6;  // A/V^2
  double mu_cox_p = 100e-6;  // A/V^2
  double lambda_n = 0.1;     // 1/V
  double lambda_p = 0.1;     // 1/V
  double vth_n = 0.45;       // V
  double vth_p = 0.45;       // V
  double vdd = 1.8;          // V
  double c_par = 2e-15;      // node parasitic capacitance per unit W/L (F)

  // Device parameter bounds.
  double wl_lo = 1.0, wl_hi = 2000.0;
  double id_lo = 1e-7, id_hi = 1e-3;   // A
  double cap_lo = 1e-14, cap_hi = 1e-10;  // F
  double res_lo = 10.0, res_hi = 1e7;     // ohm

  double mu_cox(Polarity p) const { return p == Polarity::n ? mu_cox_n : mu_cox_p; }
  double lambda(Polarity p) const { return p == Polarity::n ? lambda_n : lambda_p; }

  void validate() const;  // all positive; vdd > max(vth_n, vth_p)
};

ProcessProfile load_profile(const std::filesystem::path& path);  // JSON, partial override
void save_profile(const ProcessProfile& profile, const std::filesystem::path& path);

struct Transistor {
  double w_over_l = 1.0;
  double id = 1e-6;  // A
  Polarity polarity = Polarity::n;
};

struct Passive {
  double value = 0.0;  // F or ohm
};

struct DeviceParams {
  std::map<std::string, Transistor> transistors;  // keyed by gm symbol
  std::map<std::string, Passive> passives;        // keyed by C/R symbol
  double total_current() const;
};

struct SmallSignalParams {
  std::map<std::string, double> values;  // every descriptor symbol
  double i_dd = 0.0;                     // A
};

// Square-law transconductance of one transistor: sqrt(2*mu_cox*(W/L)*Id).
double gm_of(const Transistor& t, const ProcessProfile& profile);

// Minimum bias current that can realize `gm` within the W/L upper bound.
double id_floor(double gm, const ProcessProfile& profile, Polarity polarity = Polarity::n);

// Nominal overdrive voltage used to bias auxiliary (feedforward/buffer)
// transistors: Id = gm * veff / 2.  Keeps their W/L, and hence parasitic
// load, modest.
inline constexpr double kAuxOverdrive = 0.15;  // V

// Stage bias realizing targets (gm, ro): Id from the ro target, floored so
// that the required W/L stays within bounds; W/L solves gm exactly at that Id.
Transistor realize_stage(double gm, double ro, const ProcessProfile& profile,
                         Polarity polarity = Polarity::n);
// Auxiliary transconductor biased at the nominal overdrive.
Transistor realize_aux(double gm, const ProcessProfile& profile,
                       Polarity polarity = Polarity::n);

// Maps device parameters to small-signal values under the descriptor's
// binding: stage/aux gm symbols from their transistors, ro_i = 1/(lambda*Id)
// of stage i's transistor, parasitics c_par * sum(attached W/L), passives
// pass through; i_dd = sum of branch currents.
// Throws BindingError (symbol with no device) or ModelError (corrupt input).
SmallSignalParams evaluate_devices(const DeviceParams& devices,
                                   const ProcessProfile& profile,
                                   const TopologyDescriptor& desc);

struct WlEstimate {
  Transistor entry;
  bool clamped = false;
  // target_gm / gm(entry): 1.0 when unclamped; the caller may scale Id by
  // residual_ratio^2 to close the remaining gap.
  double residual_ratio = 1.0;
};

// The calculator step: scale W/L by (target_gm/current_gm)^2 at fixed Id,
// clamped to the W/L bounds with the clamping flagged.
WlEstimate estimate_wl(double current_gm, double target_gm, const Transistor& current,
                       const ProcessProfile& profile);

}  // namespace ampsizer
