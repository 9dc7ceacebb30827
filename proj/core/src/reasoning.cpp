#include "ampsizer/reasoning.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "ampsizer/analysis.hpp"
#include "ampsizer/errors.hpp"

namespace ampsizer {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Portable uniform draws: identical sequences for a given seed on every
// platform, unlike std::uniform_real_distribution.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double u01() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * u01(); }
};

struct NewtonOutcome {
  bool ok = false;
  int iters = 0;
  double rel = HUGE_VAL;  // final relative residual
};

// Damped Newton iteration in log coordinates on the design equations.
// Each equation is a signed sum of monomials; residuals are normalized by the
// sum of absolute term magnitudes so "relative" means relative to the scale
// of the equation at the current point.
NewtonOutcome log_newton(const std::vector<CompiledSum>& eqs,
                         const std::vector<int>& unknown_ids, std::vector<double>& env,
                         int max_iter, double tol, std::vector<double>* trace) {
  const int m = static_cast<int>(eqs.size());
  NewtonOutcome out;
  if (m == 0) {
    out.ok = true;
    out.rel = 0.0;
    return out;
  }
  Eigen::VectorXd f(m), s(m);
  Eigen::MatrixXd jac(m, m);
  std::vector<double> trial(env.size());
  for (int iter = 0; iter < max_iter; ++iter) {
    out.iters = iter;
    double rel = 0.0;
    for (int i = 0; i < m; ++i) {
      f(i) = eval_sum(eqs[static_cast<size_t>(i)], env);
      s(i) = eval_sum_abs(eqs[static_cast<size_t>(i)], env) + 1e-300;
      rel = std::max(rel, std::abs(f(i)) / s(i));
    }
    out.rel = rel;
    if (trace) trace->push_back(rel);
    if (rel < tol) {
      out.ok = true;
      return out;
    }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const int u = unknown_ids[static_cast<size_t>(j)];
        jac(i, j) = d_sum(eqs[static_cast<size_t>(i)], env, u) * env[static_cast<size_t>(u)];
      }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) return out;
    Eigen::VectorXd du = lu.solve(-f);
    if (!du.allFinite()) return out;
    const double du_max = du.cwiseAbs().maxCoeff();
    if (du_max > 10.0) du *= 10.0 / du_max;

    // Backtracking line search on the merit with the normalizers frozen.
    double merit0 = 0.0;
    for (int i = 0; i < m; ++i) merit0 += (f(i) / s(i)) * (f(i) / s(i));
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls <= 40; ++ls) {
      trial = env;
      for (int j = 0; j < m; ++j) {
        const int u = unknown_ids[static_cast<size_t>(j)];
        trial[static_cast<size_t>(u)] = env[static_cast<size_t>(u)] * std::exp(t * du(j));
      }
      double merit = 0.0;
      for (int i = 0; i < m; ++i) {
        const double ft = eval_sum(eqs[static_cast<size_t>(i)], trial);
        merit += (ft / s(i)) * (ft / s(i));
      }
      if (std::isfinite(merit) && merit < merit0 * (1.0 - 1e-4 * t) + 1e-300) {
        env = trial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) return out;
  }
  return out;  // iteration budget exhausted without converging
}

// Distributes the DC-gain target across stages subject to each stage's
// feasible per-stage gain interval [ro_lo*gm, gm/(lambda*id_floor(gm))].
// Returns per-stage output resistances, or empty when even the saturated
// assignment falls short of half the target (the target itself carries a 2x
// margin, so "half" is the specified gain exactly).
std::vector<double> waterfill(const TopologyDescriptor& desc, const std::vector<double>& env,
                              double a0_target, const ProcessProfile& profile) {
  const int n = desc.num_stages;
  const double lam = profile.lambda_n;
  const double ro_lo = std::max(profile.res_lo, 1.0 / (lam * profile.id_hi));
  std::vector<double> gms(static_cast<size_t>(n));
  std::vector<double> a_min(static_cast<size_t>(n)), a_max(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double gm =
        env[static_cast<size_t>(desc.symbols.lookup(desc.stage_gm(i + 1)))];
    gms[static_cast<size_t>(i)] = gm;
    a_min[static_cast<size_t>(i)] = ro_lo * gm;
    a_max[static_cast<size_t>(i)] = gm / (lam * id_floor(gm, profile));
  }
  std::vector<double> a(static_cast<size_t>(n), 0.0);
  std::vector<bool> fixed(static_cast<size_t>(n), false);
  for (int pass = 0; pass <= n; ++pass) {
    int nf = 0;
    double prod_fixed = 1.0;
    for (int i = 0; i < n; ++i) {
      if (fixed[static_cast<size_t>(i)])
        prod_fixed *= a[static_cast<size_t>(i)];
      else
        ++nf;
    }
    if (nf == 0) break;
    const double tgt = std::pow(a0_target / prod_fixed, 1.0 / nf);
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      if (fixed[static_cast<size_t>(i)]) continue;
      if (tgt < a_min[static_cast<size_t>(i)]) {
        a[static_cast<size_t>(i)] = a_min[static_cast<size_t>(i)];
        fixed[static_cast<size_t>(i)] = true;
        changed = true;
      } else if (tgt > a_max[static_cast<size_t>(i)]) {
        a[static_cast<size_t>(i)] = a_max[static_cast<size_t>(i)];
        fixed[static_cast<size_t>(i)] = true;
        changed = true;
      }
    }
    if (!changed) {
      for (int i = 0; i < n; ++i)
        if (!fixed[static_cast<size_t>(i)]) a[static_cast<size_t>(i)] = tgt;
      break;
    }
  }
  double total = 1.0;
  for (int i = 0; i < n; ++i) total *= a[static_cast<size_t>(i)];
  if (total < a0_target * 0.5 - 1e-9) return {};
  std::vector<double> ro(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    ro[static_cast<size_t>(i)] = a[static_cast<size_t>(i)] / gms[static_cast<size_t>(i)];
  return ro;
}

}  // namespace

void DesignSpec::validate() const {
  auto pos = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError(std::string("spec field '") + name + "' must be positive", name);
  };
  pos(cl, "cl");
  pos(gbw_min, "gbw_min");
  pos(pm_min, "pm_min");
  pos(gain_min_db, "gain_min_db");
  if (!(pm_min < 90.0))
    throw ValidationError("spec pm_min must lie in (0, 90) degrees", "pm_min");
}

DerivedTargets solve_targets(const DesignSpec& spec, const TopologyDescriptor& desc,
                             const ReasoningConfig& cfg) {
  spec.validate();
  cfg.profile.validate();
  if (desc.symbols.size() == 0)
    throw ValidationError("descriptor must be validated before use", desc.name);
  if (desc.eqs_c.size() != desc.unknowns.size())
    throw ValidationError("descriptor needs as many design equations as unknowns",
                          desc.name);

  const int id_cl = desc.symbols.lookup("CL");
  const int id_gbw = desc.symbols.lookup("GBW");
  const int id_wu = desc.symbols.lookup("WU");
  const int id_w0 = desc.symbols.lookup("W0");
  const int id_q = desc.symbols.lookup("Q");
  std::vector<int> unknown_ids;
  for (const std::string& u : desc.unknowns) unknown_ids.push_back(desc.symbols.lookup(u));

  const double a0_target = 2.0 * std::pow(10.0, spec.gain_min_db / 20.0);
  double sf = cfg.separation_factor0;
  double margin = cfg.gbw_margin0;

  std::vector<double> residual_trace;
  AcScan last_target{}, last_realized{};
  bool last_pm_ok = true;

  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    const double gbw_t = spec.gbw_min * margin;
    const double wu = 2.0 * kPi * gbw_t;
    const double w0 = sf * wu;

    std::vector<double> env = desc.make_env();
    env[static_cast<size_t>(id_cl)] = spec.cl;
    env[static_cast<size_t>(id_gbw)] = gbw_t;
    env[static_cast<size_t>(id_wu)] = wu;
    env[static_cast<size_t>(id_w0)] = w0;
    env[static_cast<size_t>(id_q)] = cfg.q;
    for (const auto& [sym, frac] : desc.closure) {
      const DesignVariable& v = desc.variable(sym);
      env[static_cast<size_t>(desc.symbols.lookup(sym))] = clamp(frac * spec.cl, v.lo, v.hi);
    }
    for (const DesignVariable& v : desc.variables)
      if (v.role == VarRole::parasitic)
        env[static_cast<size_t>(desc.symbols.lookup(v.symbol))] = cfg.cp_nominal;

    // Multistart seeds: a scale-aware base point, then log-jittered copies.
    Rng rng(cfg.multistart_seed);
    const double g_scale = w0 * spec.cl;
    std::vector<double> base(desc.unknowns.size());
    for (size_t k = 0; k < desc.unknowns.size(); ++k) {
      const DesignVariable& v = desc.variable(desc.unknowns[k]);
      double b;
      switch (v.kind) {
        case VarKind::transconductance: b = g_scale; break;
        case VarKind::capacitance: b = 0.3 * spec.cl; break;
        case VarKind::resistance: b = 1.0 / g_scale; break;
        default: b = std::sqrt(v.lo * v.hi); break;
      }
      base[k] = b * std::pow(1.3, static_cast<double>(k));
    }

    bool solved = false;
    for (int start = 0; start < cfg.n_starts && !solved; ++start) {
      for (size_t k = 0; k < desc.unknowns.size(); ++k) {
        const DesignVariable& v = desc.variable(desc.unknowns[k]);
        const double jit = start > 0 ? std::exp(rng.uniform(-1.5, 1.5)) : 1.0;
        env[static_cast<size_t>(unknown_ids[k])] = clamp(base[k] * jit, v.lo, v.hi);
      }
      const double a_stage = std::pow(a0_target, 1.0 / desc.num_stages);
      for (int i = 1; i <= desc.num_stages; ++i) {
        const int gid = desc.symbols.lookup(desc.stage_gm(i));
        const int rid = desc.symbols.lookup(desc.stage_ro(i));
        env[static_cast<size_t>(rid)] = a_stage / env[static_cast<size_t>(gid)];
      }

      // Alternate Newton on the pole-placement equations with the gain
      // partition until the output resistances stop moving.
      bool newton_ok = true;
      for (int pass = 0; pass < cfg.max_fixpoint; ++pass) {
        NewtonOutcome nr = log_newton(desc.eqs_c, unknown_ids, env, cfg.newton_max_iter,
                                      cfg.newton_tol, &residual_trace);
        if (!nr.ok) {
          newton_ok = false;
          break;
        }
        std::vector<double> ro = waterfill(desc, env, a0_target, cfg.profile);
        if (ro.empty())
          throw InfeasibleError(
              "required DC gain unreachable: per-stage gain saturates below the target",
              "gain_min_db");
        double delta = 0.0;
        for (int i = 1; i <= desc.num_stages; ++i) {
          const int rid = desc.symbols.lookup(desc.stage_ro(i));
          const double ro_new = ro[static_cast<size_t>(i - 1)];
          delta = std::max(delta,
                           std::abs(std::log(ro_new / env[static_cast<size_t>(rid)])));
          env[static_cast<size_t>(rid)] = ro_new;
        }
        if (delta < 1e-9) break;
      }
      solved = newton_ok;
    }
    if (!solved)
      throw SolverError("design equations: Newton failed to converge from every start",
                        residual_trace);

    for (size_t k = 0; k < desc.unknowns.size(); ++k) {
      const DesignVariable& v = desc.variable(desc.unknowns[k]);
      const double val = env[static_cast<size_t>(unknown_ids[k])];
      if (val < v.lo * 0.999)
        throw InfeasibleError("derived target for '" + v.symbol + "' hits its lower bound",
                              v.symbol);
      if (val > v.hi * 1.001)
        throw InfeasibleError("derived target for '" + v.symbol + "' hits its upper bound",
                              v.symbol);
    }

    // Placement-level verification on the assembled transfer function.
    AcScan m = ac_scan(assemble_tf_env(desc, env));

    // Device-level verification: realize square-law devices at the targets,
    // re-extract small-signal values (including derived parasitics), rescan.
    DeviceParams dp;
    for (const DesignVariable& v : desc.variables) {
      const double val = env[static_cast<size_t>(desc.symbols.lookup(v.symbol))];
      if (v.role == VarRole::stage) {
        const double ro =
            env[static_cast<size_t>(desc.symbols.lookup(desc.stage_ro(v.stage)))];
        dp.transistors[v.symbol] = realize_stage(val, ro, cfg.profile);
      } else if (v.role == VarRole::aux) {
        dp.transistors[v.symbol] = realize_aux(val, cfg.profile);
      } else if (v.role == VarRole::compensation) {
        dp.passives[v.symbol] = Passive{val};
      }
    }
    SmallSignalParams ssp = evaluate_devices(dp, cfg.profile, desc);
    std::vector<double> env_f = env;
    for (const DesignVariable& v : desc.variables)
      env_f[static_cast<size_t>(desc.symbols.lookup(v.symbol))] = ssp.values.at(v.symbol);
    AcScan mf = ac_scan(assemble_tf_env(desc, env_f));

    bool gbw_ok = m.has_crossing && mf.has_crossing && m.gbw_hz >= spec.gbw_min &&
                  mf.gbw_hz >= spec.gbw_min;
    bool pm_ok = m.has_crossing && mf.has_crossing && m.pm_deg >= spec.pm_min &&
                 mf.pm_deg >= spec.pm_min;

    if (gbw_ok && pm_ok) {
      DerivedTargets out;
      out.topology = desc.name;
      for (const DesignVariable& v : desc.variables) {
        TargetValue tv;
        tv.value = env[static_cast<size_t>(desc.symbols.lookup(v.symbol))];
        tv.tol_rel = cfg.tol_rel;
        out.targets[v.symbol] = tv;
      }
      out.dominant_pole_hz = m.gbw_hz / std::pow(10.0, m.dc_gain_db / 20.0);
      out.omega0_rad_s = w0;
      out.q = cfg.q;
      out.separation_factor = sf;
      out.gbw_margin = margin;
      out.attempts = attempt;
      out.predicted_gbw_hz = m.gbw_hz;
      out.predicted_pm_deg = m.pm_deg;
      out.predicted_gain_db = m.dc_gain_db;
      out.realized_gbw_hz = mf.gbw_hz;
      out.realized_pm_deg = mf.pm_deg;
      return out;
    }

    last_target = m;
    last_realized = mf;
    last_pm_ok = pm_ok;
    if (!pm_ok) sf *= cfg.sf_escalation;
    if (!gbw_ok) margin *= cfg.margin_escalation;
  }

  char detail[256];
  std::snprintf(detail, sizeof detail,
                "placement attempts exhausted: last target-level gbw=%.3g Hz pm=%.3g deg, "
                "realized gbw=%.3g Hz pm=%.3g deg",
                last_target.gbw_hz, last_target.pm_deg, last_realized.gbw_hz,
                last_realized.pm_deg);
  throw InfeasibleError(detail, last_pm_ok ? "gbw_min" : "pm_min");
}

bool SubProblem::complete(const SmallSignalParams& ssp) const {
  for (const std::string& sym : owned) {
    auto it = ssp.values.find(sym);
    if (it == ssp.values.end()) return false;
    if (!targets.at(sym).within(it->second)) return false;
  }
  return true;
}

std::vector<SubProblem> decompose(const DerivedTargets& targets,
                                  const TopologyDescriptor& desc) {
  std::vector<SubProblem> subs;
  for (int s = 1; s <= desc.num_stages; ++s) {
    SubProblem sub;
    sub.stage_id = s;
    sub.label = "stage" + std::to_string(s);
    sub.owned = {desc.stage_gm(s), desc.stage_ro(s)};
    for (const std::string& sym : sub.owned) sub.targets[sym] = targets.targets.at(sym);
    subs.push_back(std::move(sub));
  }
  SubProblem comp;
  comp.stage_id = 0;
  comp.label = "compensation";
  for (const DesignVariable& v : desc.variables)
    if (v.role == VarRole::aux) {
      comp.owned.push_back(v.symbol);
      comp.targets[v.symbol] = targets.targets.at(v.symbol);
    }
  if (!comp.owned.empty()) subs.push_back(std::move(comp));
  return subs;
}

}  // namespace ampsizer
