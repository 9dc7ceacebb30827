#include "ampsizer/sizing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ampsizer/analysis.hpp"
#include "ampsizer/cache.hpp"
#include "ampsizer/errors.hpp"

namespace ampsizer {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return seed + 0x9e3779b97f4a7c15ull * (salt + 1);
}

}  // namespace

const char* to_string(OptimizerChoice choice) {
  switch (choice) {
    case OptimizerChoice::abc: return "abc";
    case OptimizerChoice::turbo1: return "turbo1";
    case OptimizerChoice::turbo5: return "turbo5";
  }
  return "?";
}

void PipelineConfig::validate() const {
  if (subproblem_budget < 1)
    throw ValidationError("subproblem_budget must be at least 1", "subproblem_budget");
  if (global_budget < 0)
    throw ValidationError("global_budget must be non-negative", "global_budget");
  if (!(gm_tolerance > 0.0))
    throw ValidationError("gm_tolerance must be positive", "gm_tolerance");
  reasoning.profile.validate();
}

// ----------------------------------------------------------- device space

SearchSpace device_space(const TopologyDescriptor& desc, const ProcessProfile& profile) {
  SearchSpace s;
  for (const DesignVariable& v : desc.variables) {
    if (v.kind == VarKind::transconductance) {
      s.dims.push_back({"wl_" + v.symbol, profile.wl_lo, profile.wl_hi, Scale::log});
      s.dims.push_back({"id_" + v.symbol, profile.id_lo, profile.id_hi, Scale::log});
    } else if (v.role == VarRole::compensation) {
      if (v.kind == VarKind::capacitance)
        s.dims.push_back({v.symbol, profile.cap_lo, profile.cap_hi, Scale::log});
      else
        s.dims.push_back({v.symbol, profile.res_lo, profile.res_hi, Scale::log});
    }
  }
  return s;
}

DeviceParams point_to_devices(const std::vector<double>& x, const TopologyDescriptor& desc,
                              const SearchSpace& space) {
  if (static_cast<int>(x.size()) != space.size())
    throw ValidationError("point dimension does not match the device space", "x");
  DeviceParams dp;
  size_t i = 0;
  for (const DesignVariable& v : desc.variables) {
    if (v.kind == VarKind::transconductance) {
      Transistor t;
      t.w_over_l = x[i++];
      t.id = x[i++];
      dp.transistors[v.symbol] = t;
    } else if (v.role == VarRole::compensation) {
      dp.passives[v.symbol] = Passive{x[i++]};
    }
  }
  return dp;
}

std::vector<double> devices_to_point(const DeviceParams& devices,
                                     const TopologyDescriptor& desc,
                                     const SearchSpace& space) {
  std::vector<double> x;
  x.reserve(static_cast<size_t>(space.size()));
  for (const DesignVariable& v : desc.variables) {
    if (v.kind == VarKind::transconductance) {
      auto it = devices.transistors.find(v.symbol);
      if (it == devices.transistors.end())
        throw BindingError("no transistor bound to '" + v.symbol + "'", v.symbol);
      x.push_back(it->second.w_over_l);
      x.push_back(it->second.id);
    } else if (v.role == VarRole::compensation) {
      auto it = devices.passives.find(v.symbol);
      if (it == devices.passives.end())
        throw BindingError("no passive bound to '" + v.symbol + "'", v.symbol);
      x.push_back(it->second.value);
    }
  }
  return x;
}

Objective make_circuit_objective(const TopologyDescriptor& desc, const DesignSpec& spec,
                                 const ProcessProfile& profile, const SearchSpace& space) {
  int n_gm = 0;
  for (const DesignVariable& v : desc.variables)
    if (v.kind == VarKind::transconductance) ++n_gm;
  const double i_dd_max = n_gm * profile.id_hi;
  // The descriptor must outlive the objective (catalog entries always do).
  const TopologyDescriptor* d = &desc;
  return [d, spec, profile, space, i_dd_max](const std::vector<double>& x) -> Evaluation {
    DeviceParams dp = point_to_devices(x, *d, space);
    SmallSignalParams ssp = evaluate_devices(dp, profile, *d);
    RationalTransferFunction tf = assemble_tf(*d, ssp, spec.cl);
    AcScan scan = ac_scan(tf);
    auto [poles, zeros] = poles_zeros(tf);
    (void)zeros;
    const bool stable = std::all_of(poles.begin(), poles.end(),
                                    [](const std::complex<double>& p) {
                                      return p.real() < 0.0;
                                    });
    return {penalize(spec, scan, stable, ssp.i_dd, i_dd_max),
            meets_spec(spec, scan, stable)};
  };
}

// ---------------------------------------------------------- sub-problems

namespace {

Transistor& transistor_ref(DeviceParams& state, const std::string& sym) {
  auto it = state.transistors.find(sym);
  if (it == state.transistors.end())
    throw BindingError("no transistor bound to '" + sym + "'", sym);
  return it->second;
}

double sub_residual(const SubProblem& sub, const SmallSignalParams& ssp) {
  double r = 0.0;
  for (const std::string& sym : sub.owned) {
    const TargetValue& tv = sub.targets.at(sym);
    const double rel = (ssp.values.at(sym) - tv.value) / tv.value;
    r += rel * rel;
  }
  return r;
}

// The calculator step: retune the owned transistors' bias and W/L toward the
// targets in closed form, clamping to the device bounds.
void estimate_step(const SubProblem& sub, DeviceParams& state,
                   const TopologyDescriptor& desc, const ProcessProfile& profile) {
  if (sub.stage_id >= 1) {
    const std::string& gm_sym = desc.stage_gm(sub.stage_id);
    const std::string& ro_sym = desc.stage_ro(sub.stage_id);
    const double gm_t = sub.targets.at(gm_sym).value;
    const double ro_t = sub.targets.at(ro_sym).value;
    Transistor& t = transistor_ref(state, gm_sym);
    double id = std::max(1.0 / (profile.lambda(t.polarity) * ro_t),
                         id_floor(gm_t, profile, t.polarity));
    t.id = std::clamp(id, profile.id_lo, profile.id_hi);
    WlEstimate est = estimate_wl(gm_of(t, profile), gm_t, t, profile);
    t = est.entry;
    if (est.clamped) {
      // W/L saturated: trade the ro target for the gm target by rescaling Id.
      t.id = std::clamp(t.id * est.residual_ratio * est.residual_ratio, profile.id_lo,
                        profile.id_hi);
    }
  } else {
    for (const std::string& sym : sub.owned) {
      const double gm_t = sub.targets.at(sym).value;
      Transistor& t = transistor_ref(state, sym);
      Transistor aux = realize_aux(gm_t, profile, t.polarity);
      aux.w_over_l = std::clamp(aux.w_over_l, profile.wl_lo, profile.wl_hi);
      t = aux;
    }
  }
}

SearchSpace sub_space(const std::vector<std::string>& gm_syms,
                      const ProcessProfile& profile) {
  SearchSpace s;
  for (const std::string& sym : gm_syms) {
    s.dims.push_back({"wl_" + sym, profile.wl_lo, profile.wl_hi, Scale::log});
    s.dims.push_back({"id_" + sym, profile.id_lo, profile.id_hi, Scale::log});
  }
  return s;
}

struct SubComplete {};  // unwinds the sub-problem optimizer once the band is hit

}  // namespace

SubProblemResult solve_subproblem(const SubProblem& sub, const DeviceParams& state0,
                                  const TopologyDescriptor& desc,
                                  const PipelineConfig& cfg) {
  cfg.validate();
  const ProcessProfile& profile = cfg.profile();
  const int budget = cfg.subproblem_budget;

  SubProblemResult out;
  DeviceParams state = state0;
  DeviceParams best_state = state0;
  double best_res = std::numeric_limits<double>::infinity();

  // Reads one evaluation: updates the best-so-far record and returns whether
  // the completion band is hit.
  auto read = [&](const DeviceParams& s) {
    SmallSignalParams ssp = evaluate_devices(s, profile, desc);
    ++out.n_evals;
    const double res = sub_residual(sub, ssp);
    if (res < best_res) {
      best_res = res;
      best_state = s;
    }
    out.residual_history.push_back(best_res);
    return sub.complete(ssp);
  };
  auto finish_complete = [&](const DeviceParams& s) {
    out.state = s;
    out.complete = true;
    return out;
  };
  auto finish_exhausted = [&]() {
    out.state = best_state;
    out.budget_exhausted = true;
    return out;
  };

  std::vector<std::string> gm_syms;
  if (sub.stage_id >= 1)
    gm_syms.push_back(desc.stage_gm(sub.stage_id));
  else
    gm_syms = sub.owned;

  while (true) {
    if (read(state)) return finish_complete(state);
    if (out.n_evals >= budget) return finish_exhausted();

    estimate_step(sub, state, desc, profile);
    if (read(state)) return finish_complete(state);
    if (out.n_evals >= budget) return finish_exhausted();

    if (cfg.use_subproblem_optimizer) {
      SearchSpace space = sub_space(gm_syms, profile);
      const DeviceParams base = state;
      DeviceParams complete_state;
      Objective obj = [&](const std::vector<double>& x) -> Evaluation {
        DeviceParams cand = base;
        size_t i = 0;
        for (const std::string& sym : gm_syms) {
          Transistor& t = transistor_ref(cand, sym);
          t.w_over_l = x[i++];
          t.id = x[i++];
        }
        SmallSignalParams ssp = evaluate_devices(cand, profile, desc);
        ++out.n_evals;
        const double res = sub_residual(sub, ssp);
        if (res < best_res) {
          best_res = res;
          best_state = cand;
        }
        out.residual_history.push_back(best_res);
        if (sub.complete(ssp)) {
          complete_state = cand;
          throw SubComplete{};
        }
        return {res, false};
      };
      std::vector<double> warm;
      for (const std::string& sym : gm_syms) {
        const Transistor& t = transistor_ref(state, sym);
        warm.push_back(std::clamp(t.w_over_l, profile.wl_lo, profile.wl_hi));
        warm.push_back(std::clamp(t.id, profile.id_lo, profile.id_hi));
      }
      const int remaining = budget - out.n_evals;
      const std::uint64_t seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(sub.stage_id));
      try {
        switch (cfg.subproblem_optimizer) {
          case OptimizerChoice::abc:
            abc_optimize(obj, space, remaining, seed, 0, 0, &warm);
            break;
          case OptimizerChoice::turbo1:
            turbo_optimize(obj, space, remaining, seed, 1, 1, &warm, 0);
            break;
          case OptimizerChoice::turbo5:
            turbo_optimize(obj, space, remaining, seed, 5, 1, &warm, 0);
            break;
        }
      } catch (const SubComplete&) {
        return finish_complete(complete_state);
      } catch (const BudgetError&) {
        // Remaining budget cannot seat the optimizer's population; fall
        // through to plain read-estimate cycles.
      }
      state = best_state;
      if (out.n_evals >= budget) return finish_exhausted();
    }
  }
}

// ------------------------------------------------------- global refinement

SizedDesign global_refine(const DeviceParams& state, const DesignSpec& spec,
                          const TopologyDescriptor& desc, const PipelineConfig& cfg) {
  cfg.validate();
  spec.validate();
  const ProcessProfile& profile = cfg.profile();
  SearchSpace space = device_space(desc, profile);

  SizedDesign d;
  d.topology = desc.name;
  d.spec = spec;

  DeviceParams chosen = state;
  int refine_evals = 0;
  int first_feasible = 0;
  if (cfg.use_global_optimizer && cfg.global_budget > 0) {
    const auto t0 = Clock::now();
    Objective obj = make_circuit_objective(desc, spec, profile, space);
    std::vector<double> warm = devices_to_point(state, desc, space);
    for (int j = 0; j < space.size(); ++j)
      warm[static_cast<size_t>(j)] =
          std::clamp(warm[static_cast<size_t>(j)], space.dims[static_cast<size_t>(j)].lo,
                     space.dims[static_cast<size_t>(j)].hi);
    OptResult r;
    switch (cfg.global_optimizer) {
      case OptimizerChoice::abc:
        r = abc_optimize(obj, space, cfg.global_budget, cfg.seed, 0, 0, &warm);
        break;
      case OptimizerChoice::turbo1:
        r = turbo_optimize(obj, space, cfg.global_budget, cfg.seed, 1, 1, &warm, 0);
        break;
      case OptimizerChoice::turbo5:
        r = turbo_optimize(obj, space, cfg.global_budget, cfg.seed, 5, 1, &warm, 0);
        break;
    }
    chosen = point_to_devices(r.feasible ? r.best_feasible_point : r.best_point, desc,
                              space);
    refine_evals = r.n_evals;
    first_feasible = r.first_feasible_eval;
    d.history.push_back({"global", r.n_evals, r.n_evals, r.n_evals, seconds_since(t0)});
  }

  const auto tv = Clock::now();
  SmallSignalParams ssp = evaluate_devices(chosen, profile, desc);
  RationalTransferFunction tf = assemble_tf(desc, ssp, spec.cl);
  AcScan scan = ac_scan(tf);
  auto [poles, zeros] = poles_zeros(tf);
  d.metrics.dc_gain_db = scan.dc_gain_db;
  d.metrics.gbw_hz = scan.has_crossing ? scan.gbw_hz : 0.0;
  d.metrics.pm_deg = scan.has_crossing ? scan.pm_deg : 0.0;
  d.metrics.poles = std::move(poles);
  d.metrics.zeros = std::move(zeros);
  d.metrics.stable =
      std::all_of(d.metrics.poles.begin(), d.metrics.poles.end(),
                  [](const std::complex<double>& p) { return p.real() < 0.0; });
  d.success = meets_spec(spec, scan, d.metrics.stable);
  d.devices = chosen;
  d.ssp = ssp;
  d.i_dd = ssp.i_dd;
  d.history.push_back({"verify", 1, 1, 1, seconds_since(tv)});

  if (first_feasible > 0)
    d.evals_to_first_success = first_feasible;
  else if (d.success)
    d.evals_to_first_success = refine_evals + 1;
  return d;
}

// ---------------------------------------------------------------- pipeline

SizedDesign design(const DesignSpec& spec, const TopologyDescriptor& desc,
                   const PipelineConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (desc.symbols.size() == 0)
    throw ValidationError("descriptor must be validated before use", desc.name);
  const ProcessProfile& profile = cfg.profile();

  std::vector<PhaseStats> history;
  int evals_before_refine = 0;

  // Reasoning phase, cache-transparent: a hit replays the stored targets.
  auto t0 = Clock::now();
  DerivedTargets targets;
  bool from_cache = false;
  ReasoningCache cache(cfg.cache_dir.empty() ? ReasoningCache::default_dir()
                                             : cfg.cache_dir);
  const std::string key = ReasoningCache::make_key(desc.name, spec);
  if (cfg.use_cache) {
    if (auto hit = cache.get(key)) {
      targets = *hit;
      from_cache = true;
    }
  }
  if (!from_cache) targets = solve_targets(spec, desc, cfg.reasoning);
  {
    PhaseStats ph;
    ph.phase = "reasoning";
    // Each placement attempt realizes devices once (one evaluate_devices
    // call) and scans both the placement-level and realized responses.
    ph.evaluate_devices_calls = from_cache ? 0 : targets.attempts;
    ph.ac_scan_calls = from_cache ? 0 : 2 * targets.attempts;
    ph.circuit_evals = from_cache ? 0 : targets.attempts;
    ph.wall_s = seconds_since(t0);
    evals_before_refine += ph.evaluate_devices_calls;
    history.push_back(std::move(ph));
  }

  // Initial device state: mid-bounds transistors, passives at their targets.
  DeviceParams state;
  for (const DesignVariable& v : desc.variables) {
    if (v.kind == VarKind::transconductance) {
      Transistor t;
      t.w_over_l = std::sqrt(profile.wl_lo * profile.wl_hi);
      t.id = std::sqrt(profile.id_lo * profile.id_hi);
      state.transistors[v.symbol] = t;
    } else if (v.role == VarRole::compensation) {
      state.passives[v.symbol] = Passive{targets.targets.at(v.symbol).value};
    }
  }

  // Sequential sub-problems in signal-path order.
  for (SubProblem sub : decompose(targets, desc)) {
    for (auto& [sym, tv] : sub.targets) tv.tol_rel = cfg.gm_tolerance;
    t0 = Clock::now();
    SubProblemResult r = solve_subproblem(sub, state, desc, cfg);
    state = r.state;
    history.push_back({sub.label, r.n_evals, 0, 0, seconds_since(t0)});
    evals_before_refine += r.n_evals;
  }

  SizedDesign d = global_refine(state, spec, desc, cfg);
  const int first_in_refine = d.evals_to_first_success;
  for (PhaseStats& ph : d.history) history.push_back(std::move(ph));
  d.history = std::move(history);
  d.evals_to_first_success =
      first_in_refine > 0 ? evals_before_refine + first_in_refine : 0;
  d.targets = targets;
  d.targets_from_cache = from_cache;

  if (d.success && !from_cache && cfg.use_cache) {
    try {
      cache.put(key, targets);
    } catch (const StorageError&) {
      // A read-only cache directory must not fail the design itself.
    }
  }
  return d;
}

std::string SizedDesign::to_json() const {
  json j;
  j["topology"] = topology;
  j["spec"] = {{"cl", spec.cl},
               {"gbw_min", spec.gbw_min},
               {"pm_min", spec.pm_min},
               {"gain_min_db", spec.gain_min_db}};
  j["success"] = success;
  j["i_dd"] = i_dd;
  j["devices"]["transistors"] = json::object();
  for (const auto& [sym, t] : devices.transistors)
    j["devices"]["transistors"][sym] = {{"w_over_l", t.w_over_l},
                                        {"id", t.id},
                                        {"polarity", t.polarity == Polarity::n ? "n" : "p"}};
  j["devices"]["passives"] = json::object();
  for (const auto& [sym, p] : devices.passives) j["devices"]["passives"][sym] = p.value;
  j["small_signal"] = ssp.values;
  j["metrics"]["dc_gain_db"] = metrics.dc_gain_db;
  j["metrics"]["gbw_hz"] = metrics.gbw_hz;
  j["metrics"]["pm_deg"] = metrics.pm_deg;
  j["metrics"]["stable"] = metrics.stable;
  j["metrics"]["poles"] = json::array();
  for (const auto& p : metrics.poles)
    j["metrics"]["poles"].push_back({p.real(), p.imag()});
  j["metrics"]["zeros"] = json::array();
  for (const auto& z : metrics.zeros)
    j["metrics"]["zeros"].push_back({z.real(), z.imag()});
  j["targets"] = json::parse(serialize_targets(targets));
  j["targets_from_cache"] = targets_from_cache;
  j["evals_to_first_success"] = evals_to_first_success;
  j["history"] = json::array();
  for (const PhaseStats& ph : history)
    j["history"].push_back({{"phase", ph.phase},
                            {"evaluate_devices_calls", ph.evaluate_devices_calls},
                            {"ac_scan_calls", ph.ac_scan_calls},
                            {"circuit_evals", ph.circuit_evals},
                            {"wall_s", ph.wall_s}});
  return j.dump(1);
}

}  // namespace ampsizer
