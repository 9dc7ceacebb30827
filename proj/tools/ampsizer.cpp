// ampsizer: size multi-stage operational amplifiers from topology
// descriptors, inspect their transfer functions, benchmark the sizing
// pipeline against raw black-box optimizers, and manage the reasoning cache.
//
// Exit codes: 0 success, 1 domain failure (infeasible spec, unsuccessful
// design, failed trend check), 2 usage or configuration error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "ampsizer/analysis.hpp"
#include "ampsizer/bench.hpp"
#include "ampsizer/cache.hpp"
#include "ampsizer/device.hpp"
#include "ampsizer/errors.hpp"
#include "ampsizer/kb.hpp"
#include "ampsizer/sizing.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
  std::string profile_path;
  std::string cache_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool verbose = false;
};

// An existing file is a user descriptor; anything else is a catalog name
// (unknown names raise ValidationError listing the catalog).
ampsizer::TopologyDescriptor resolve_topology(const std::string& arg) {
  if (fs::is_regular_file(arg)) return ampsizer::load_descriptor(arg);
  return ampsizer::catalog_get(arg);
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path))
    throw ampsizer::ParseError(std::string(what) + " '" + path + "' is not a readable file");
}

ampsizer::OptimizerChoice optimizer_from(const std::string& name) {
  if (name == "abc") return ampsizer::OptimizerChoice::abc;
  if (name == "turbo1") return ampsizer::OptimizerChoice::turbo1;
  if (name == "turbo5") return ampsizer::OptimizerChoice::turbo5;
  throw ampsizer::ParseError("unknown optimizer '" + name +
                             "' (choices: abc, turbo1, turbo5)");
}

ampsizer::PipelineConfig pipeline_config(const GlobalOptions& g) {
  ampsizer::PipelineConfig cfg;
  cfg.seed = g.seed;
  if (!g.profile_path.empty()) {
    require_file(g.profile_path, "process profile");
    cfg.reasoning.profile = ampsizer::load_profile(g.profile_path);
  }
  if (!g.cache_dir.empty()) cfg.cache_dir = g.cache_dir;
  return cfg;
}

json complex_pairs(const std::vector<std::complex<double>>& roots) {
  json arr = json::array();
  for (const std::complex<double>& r : roots) arr.push_back({r.real(), r.imag()});
  return arr;
}

// ------------------------------------------------------------------ design

struct DesignOptions {
  std::string topology;
  double gbw = 0.0, cl = 0.0, pm = 60.0, gain = 100.0;
  std::string out = "design.json";
  bool no_subopt = false, no_globalopt = false, no_cache = false;
  std::string optimizer;
  int budget = 100, sub_budget = 20;
};

int cmd_design(const GlobalOptions& g, const DesignOptions& o) {
  const ampsizer::TopologyDescriptor desc = resolve_topology(o.topology);
  ampsizer::PipelineConfig cfg = pipeline_config(g);
  cfg.use_subproblem_optimizer = !o.no_subopt;
  cfg.use_global_optimizer = !o.no_globalopt;
  cfg.use_cache = !o.no_cache;
  cfg.global_budget = o.budget;
  cfg.subproblem_budget = o.sub_budget;
  if (!o.optimizer.empty()) {
    cfg.subproblem_optimizer = optimizer_from(o.optimizer);
    cfg.global_optimizer = optimizer_from(o.optimizer);
  }

  ampsizer::DesignSpec spec;
  spec.cl = o.cl;
  spec.gbw_min = o.gbw;
  spec.pm_min = o.pm;
  spec.gain_min_db = o.gain;

  const ampsizer::SizedDesign d = ampsizer::design(spec, desc, cfg);

  std::ofstream out(o.out);
  if (!out) throw ampsizer::IoError("cannot open report file '" + o.out + "'");
  out << d.to_json() << '\n';

  std::printf("%s: %s\n", desc.name.c_str(), d.success ? "success" : "unsuccessful");
  std::printf("  GBW %.4g MHz (spec %.4g)   PM %.1f deg (spec %.1f)   gain %.1f dB (spec %.1f)\n",
              d.metrics.gbw_hz / 1e6, spec.gbw_min / 1e6, d.metrics.pm_deg, spec.pm_min,
              d.metrics.dc_gain_db, spec.gain_min_db);
  std::printf("  Idd %.4g mA   IFOM_S %.4g MHz*pF/mA   evals to first success %d\n",
              d.i_dd * 1e3, ampsizer::ifom_s(d.metrics.gbw_hz, spec.cl, d.i_dd),
              d.evals_to_first_success);
  if (g.verbose) {
    std::printf("  %-14s %10s %9s %8s %9s\n", "phase", "dev evals", "AC scans", "circuit",
                "time (s)");
    for (const ampsizer::PhaseStats& ph : d.history)
      std::printf("  %-14s %10d %9d %8d %9.3f\n", ph.phase.c_str(),
                  ph.evaluate_devices_calls, ph.ac_scan_calls, ph.circuit_evals, ph.wall_s);
  }
  std::printf("  report: %s\n", o.out.c_str());

  if (!d.success) {
    std::fprintf(stderr, "no feasible design within budget; best candidate kept in %s\n",
                 o.out.c_str());
    return 1;
  }
  return 0;
}

// ----------------------------------------------------------------- analyze

struct AnalyzeOptions {
  std::string descriptor;
  std::string values;
  std::string bode;
};

int cmd_analyze(const GlobalOptions&, const AnalyzeOptions& o) {
  const ampsizer::TopologyDescriptor desc = resolve_topology(o.descriptor);
  require_file(o.values, "values file");

  std::ifstream in(o.values);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ampsizer::ParseError("values file '" + o.values + "': " + e.what());
  }
  if (!doc.is_object())
    throw ampsizer::ParseError("values file '" + o.values +
                               "' must be a JSON object of symbol: value pairs");

  ampsizer::SmallSignalParams ssp;
  double cl = 0.0;
  bool have_cl = false;
  for (const auto& [key, val] : doc.items()) {
    if (!val.is_number())
      throw ampsizer::ParseError("values file: '" + key + "' is not a number");
    if (key == "CL") {
      cl = val.get<double>();
      have_cl = true;
    } else {
      ssp.values[key] = val.get<double>();
    }
  }
  if (!have_cl)
    throw ampsizer::BindingError("values file does not bind the load capacitance CL", "CL");

  const ampsizer::RationalTransferFunction tf = ampsizer::assemble_tf(desc, ssp, cl);
  const ampsizer::ACMetrics m = ampsizer::ac_metrics(tf);

  json out;
  out["topology"] = desc.name;
  out["cl_f"] = cl;
  out["dc_gain_db"] = m.dc_gain_db;
  out["gbw_hz"] = m.gbw_hz;
  out["pm_deg"] = m.pm_deg;
  out["stable"] = m.stable;
  out["poles_rad_s"] = complex_pairs(m.poles);
  out["zeros_rad_s"] = complex_pairs(m.zeros);
  std::printf("%s\n", out.dump(1).c_str());

  if (!o.bode.empty()) {
    ampsizer::bode_export(tf, o.bode);
    std::fprintf(stderr, "bode sweep written to %s\n", o.bode.c_str());
  }
  return 0;
}

// -------------------------------------------------------------- topologies

int cmd_topologies() {
  std::printf("%-7s %6s %9s  %s\n", "name", "stages", "variables", "description");
  for (const ampsizer::TopologyDescriptor& d : ampsizer::catalog())
    std::printf("%-7s %6d %9zu  %s\n", d.name.c_str(), d.num_stages, d.variables.size(),
                d.description.c_str());
  return 0;
}

// ------------------------------------------------------------------- bench

struct BenchOptions {
  std::string config;
  std::string out_dir = ".";
  bool check = false;
  bool quiet = false;
};

int cmd_bench(const GlobalOptions& g, const BenchOptions& o) {
  require_file(o.config, "bench config");
  ampsizer::BenchConfig cfg = ampsizer::load_bench_config(o.config);
  if (g.seed_given) cfg.seed_base = g.seed;
  if (!g.profile_path.empty()) {
    require_file(g.profile_path, "process profile");
    cfg.pipeline.reasoning.profile = ampsizer::load_profile(g.profile_path);
  }
  cfg.verbose = !o.quiet;
  cfg.validate();  // config errors exit 2 before any work starts

  const ampsizer::BenchReport report = ampsizer::run_comparison(cfg);

  const fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path csv = dir / "bench_report.csv";
  const fs::path md = dir / "bench_report.md";
  ampsizer::emit_report(report, ampsizer::ReportFormat::csv, csv);
  ampsizer::emit_report(report, ampsizer::ReportFormat::markdown, md);
  std::printf("reports: %s %s\n", csv.string().c_str(), md.string().c_str());

  if (o.check) {
    const std::vector<std::string> failures = ampsizer::check_trends(report);
    for (const std::string& f : failures) std::fprintf(stderr, "trend check failed: %s\n", f.c_str());
    if (!failures.empty()) return 1;
    std::printf("all trend checks hold\n");
  }
  return 0;
}

// ------------------------------------------------------------------- cache

int cmd_cache(const GlobalOptions& g, const std::string& action) {
  const ampsizer::ReasoningCache cache(g.cache_dir.empty()
                                           ? ampsizer::ReasoningCache::default_dir()
                                           : fs::path(g.cache_dir));
  if (action == "dir") {
    std::printf("%s\n", cache.dir().string().c_str());
  } else if (action == "list") {
    for (const std::string& key : cache.list()) std::printf("%s\n", key.c_str());
  } else {  // clear
    const size_t n = cache.list().size();
    cache.clear();
    std::printf("cleared %zu cached entr%s from %s\n", n, n == 1 ? "y" : "ies",
                cache.dir().string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ampsizer: multi-stage operational amplifier sizing toolkit"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--profile", g.profile_path, "Process profile JSON (partial override)");
  app.add_option("--cache-dir", g.cache_dir, "Reasoning cache directory");
  CLI::Option* seed_opt = app.add_option("--seed", g.seed, "Seed for all randomness");
  app.add_flag("-v,--verbose", g.verbose, "Per-phase detail on design runs");

  DesignOptions d;
  CLI::App* design = app.add_subcommand("design", "Size an amplifier for a specification");
  design->add_option("topology", d.topology, "Catalog name or descriptor file")->required();
  design->add_option("--gbw", d.gbw, "Minimum gain-bandwidth product, Hz")->required();
  design->add_option("--cl", d.cl, "Load capacitance, F")->required();
  design->add_option("--pm", d.pm, "Minimum phase margin, deg")->capture_default_str();
  design->add_option("--gain", d.gain, "Minimum DC gain, dB")->capture_default_str();
  design->add_option("--out", d.out, "Sized-design report path")->capture_default_str();
  design->add_flag("--no-subopt", d.no_subopt, "Skip per-stage sub-problem optimization");
  design->add_flag("--no-globalopt", d.no_globalopt, "Skip global refinement");
  design->add_option("--optimizer", d.optimizer, "abc, turbo1 or turbo5 (default abc)")
      ->check(CLI::IsMember({"abc", "turbo1", "turbo5"}));
  design->add_option("--budget", d.budget, "Global-refinement evaluation budget")->capture_default_str();
  design->add_option("--sub-budget", d.sub_budget, "Per-sub-problem evaluation budget")->capture_default_str();
  design->add_flag("--no-cache", d.no_cache, "Bypass the reasoning cache");

  AnalyzeOptions a;
  CLI::App* analyze = app.add_subcommand("analyze", "AC metrics of a descriptor at given values");
  analyze->add_option("descriptor", a.descriptor, "Catalog name or descriptor file")->required();
  analyze->add_option("values", a.values, "JSON object binding every symbol plus CL")->required();
  analyze->add_option("--bode", a.bode, "Also write a Bode sweep CSV here");

  app.add_subcommand("topologies", "List the built-in topology catalog");

  BenchOptions b;
  CLI::App* bench = app.add_subcommand("bench", "Run the method-comparison harness");
  bench->add_option("config", b.config, "bench.toml-style configuration file")->required();
  bench->add_option("--out-dir", b.out_dir, "Directory for report files")->capture_default_str();
  bench->add_flag("--check", b.check, "Evaluate trend assertions; nonzero exit on failure");
  bench->add_flag("--quiet", b.quiet, "Suppress the per-run progress log");

  std::string cache_action;
  CLI::App* cache = app.add_subcommand("cache", "Inspect or clear the reasoning cache");
  cache->add_option("action", cache_action, "list, clear or dir")
      ->required()
      ->check(CLI::IsMember({"list", "clear", "dir"}));

  // Global flags remain valid after the subcommand name.
  for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (design->parsed()) return cmd_design(g, d);
    if (analyze->parsed()) return cmd_analyze(g, a);
    if (bench->parsed()) return cmd_bench(g, b);
    if (cache->parsed()) return cmd_cache(g, cache_action);
    return cmd_topologies();
  } catch (const ampsizer::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ampsizer::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ampsizer::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
}
