#include "ampsizer/device.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ampsizer/errors.hpp"
#include "ampsizer/instrument.hpp"

namespace ampsizer {

using nlohmann::json;

namespace instrument {
std::atomic<std::int64_t>& evaluate_devices_calls() {
  static std::atomic<std::int64_t> n{0};
  return n;
}
std::atomic<std::int64_t>& ac_scan_calls() {
  static std::atomic<std::int64_t> n{0};
  return n;
}
void reset() {
  evaluate_devices_calls() = 0;
  ac_scan_calls() = 0;
}
}  // namespace instrument

void ProcessProfile::validate() const {
  auto pos = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError(std::string("profile field '") + name + "' must be positive",
                            name);
  };
  pos(mu_cox_n, "mu_cox_n");
  pos(mu_cox_p, "mu_cox_p");
  pos(lambda_n, "lambda_n");
  pos(lambda_p, "lambda_p");
  pos(vth_n, "vth_n");
  pos(vth_p, "vth_p");
  pos(vdd, "vdd");
  pos(c_par, "c_par");
  if (vdd <= std::max(vth_n, vth_p))
    throw ValidationError("profile vdd must exceed both threshold voltages", "vdd");
  auto range = [](double lo, double hi, const char* name) {
    if (!(lo > 0.0) || !(lo < hi))
      throw ValidationError(std::string("profile bounds '") + name + "' need 0 < lo < hi",
                            name);
  };
  range(wl_lo, wl_hi, "wl");
  range(id_lo, id_hi, "id");
  range(cap_lo, cap_hi, "cap");
  range(res_lo, res_hi, "res");
}

ProcessProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open profile file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed profile: ") + e.what());
  }
  ProcessProfile p;  // defaults; file entries override
  try {
    for (const auto& [key, val] : j.items()) {
      double* dst = nullptr;
      if (key == "mu_cox_n") dst = &p.mu_cox_n;
      else if (key == "mu_cox_p") dst = &p.mu_cox_p;
      else if (key == "lambda_n") dst = &p.lambda_n;
      else if (key == "lambda_p") dst = &p.lambda_p;
      else if (key == "vth_n") dst = &p.vth_n;
      else if (key == "vth_p") dst = &p.vth_p;
      else if (key == "vdd") dst = &p.vdd;
      else if (key == "c_par") dst = &p.c_par;
      else if (key == "wl_lo") dst = &p.wl_lo;
      else if (key == "wl_hi") dst = &p.wl_hi;
      else if (key == "id_lo") dst = &p.id_lo;
      else if (key == "id_hi") dst = &p.id_hi;
      else if (key == "cap_lo") dst = &p.cap_lo;
      else if (key == "cap_hi") dst = &p.cap_hi;
      else if (key == "res_lo") dst = &p.res_lo;
      else if (key == "res_hi") dst = &p.res_hi;
      else throw ParseError("unknown profile field '" + key + "'");
      *dst = val.get<double>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("mistyped profile field: ") + e.what());
  }
  p.validate();
  return p;
}

void save_profile(const ProcessProfile& p, const std::filesystem::path& path) {
  json j;
  j["mu_cox_n"] = p.mu_cox_n;
  j["mu_cox_p"] = p.mu_cox_p;
  j["lambda_n"] = p.lambda_n;
  j["lambda_p"] = p.lambda_p;
  j["vth_n"] = p.vth_n;
  j["vth_p"] = p.vth_p;
  j["vdd"] = p.vdd;
  j["c_par"] = p.c_par;
  j["wl_lo"] = p.wl_lo;
  j["wl_hi"] = p.wl_hi;
  j["id_lo"] = p.id_lo;
  j["id_hi"] = p.id_hi;
  j["cap_lo"] = p.cap_lo;
  j["cap_hi"] = p.cap_hi;
  j["res_lo"] = p.res_lo;
  j["res_hi"] = p.res_hi;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write profile file '" + path.string() + "'");
  out << j.dump(1) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

double DeviceParams::total_current() const {
  double idd = 0.0;
  for (const auto& [sym, t] : transistors) idd += t.id;
  return idd;
}

double gm_of(const Transistor& t, const ProcessProfile& profile) {
  if (!(t.w_over_l > 0.0) || !(t.id > 0.0) || !std::isfinite(t.w_over_l) ||
      !std::isfinite(t.id))
    throw ModelError("transistor with non-positive W/L or Id");
  return std::sqrt(2.0 * profile.mu_cox(t.polarity) * t.w_over_l * t.id);
}

double id_floor(double gm, const ProcessProfile& profile, Polarity polarity) {
  if (!(gm > 0.0)) throw ModelError("id_floor needs a positive gm");
  return std::max(profile.id_lo, gm * gm / (2.0 * profile.mu_cox(polarity) * profile.wl_hi));
}

Transistor realize_stage(double gm, double ro, const ProcessProfile& profile,
                         Polarity polarity) {
  if (!(gm > 0.0) || !(ro > 0.0)) throw ModelError("realize_stage needs positive gm, ro");
  double id = std::max(1.0 / (profile.lambda(polarity) * ro), id_floor(gm, profile, polarity));
  id = std::clamp(id, profile.id_lo, profile.id_hi);
  Transistor t;
  t.w_over_l = gm * gm / (2.0 * profile.mu_cox(polarity) * id);
  t.id = id;
  t.polarity = polarity;
  return t;
}

Transistor realize_aux(double gm, const ProcessProfile& profile, Polarity polarity) {
  if (!(gm > 0.0)) throw ModelError("realize_aux needs a positive gm");
  double id = std::max(id_floor(gm, profile, polarity), 0.5 * kAuxOverdrive * gm);
  id = std::clamp(id, profile.id_lo, profile.id_hi);
  Transistor t;
  t.w_over_l = gm * gm / (2.0 * profile.mu_cox(polarity) * id);
  t.id = id;
  t.polarity = polarity;
  return t;
}

SmallSignalParams evaluate_devices(const DeviceParams& devices, const ProcessProfile& profile,
                                   const TopologyDescriptor& desc) {
  instrument::evaluate_devices_calls().fetch_add(1, std::memory_order_relaxed);
  SmallSignalParams out;
  auto transistor_of = [&](const std::string& sym) -> const Transistor& {
    auto it = devices.transistors.find(sym);
    if (it == devices.transistors.end())
      throw BindingError("no transistor bound to transconductance '" + sym + "'", sym);
    return it->second;
  };
  for (const DesignVariable& v : desc.variables) {
    switch (v.role) {
      case VarRole::stage:
      case VarRole::aux:
        out.values[v.symbol] = gm_of(transistor_of(v.symbol), profile);
        break;
      case VarRole::stage_output: {
        const Transistor& t = transistor_of(desc.stage_gm(v.stage));
        out.values[v.symbol] = 1.0 / (profile.lambda(t.polarity) * t.id);
        break;
      }
      case VarRole::compensation: {
        auto it = devices.passives.find(v.symbol);
        if (it == devices.passives.end())
          throw BindingError("no passive bound to '" + v.symbol + "'", v.symbol);
        if (!(it->second.value > 0.0) || !std::isfinite(it->second.value))
          throw ModelError("passive '" + v.symbol + "' has a non-positive value");
        out.values[v.symbol] = it->second.value;
        break;
      }
      case VarRole::parasitic: {
        double sum_wl = 0.0;
        for (const std::string& g : v.attached) sum_wl += transistor_of(g).w_over_l;
        out.values[v.symbol] = std::max(profile.c_par * sum_wl, v.lo);
        break;
      }
    }
  }
  out.i_dd = devices.total_current();
  return out;
}

WlEstimate estimate_wl(double current_gm, double target_gm, const Transistor& current,
                       const ProcessProfile& profile) {
  if (!(current_gm > 0.0) || !(target_gm > 0.0))
    throw ModelError("estimate_wl needs positive transconductances");
  const double ratio = target_gm / current_gm;
  const double wl_new = current.w_over_l * ratio * ratio;
  WlEstimate est;
  est.entry = current;
  est.entry.w_over_l = std::clamp(wl_new, profile.wl_lo, profile.wl_hi);
  est.clamped = est.entry.w_over_l != wl_new;
  // gm scales as sqrt(W/L) at fixed Id, so the achieved gm after clamping is
  // current_gm * sqrt(wl_clamped / wl_old); unclamped this is exactly target.
  const double achievable = current_gm * std::sqrt(est.entry.w_over_l / current.w_over_l);
  est.residual_ratio = target_gm / achievable;
  return est;
}

}  // namespace ampsizer
