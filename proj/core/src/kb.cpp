#include "ampsizer/kb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ampsizer/cache.hpp"
#include "ampsizer/errors.hpp"

namespace ampsizer {

using nlohmann::json;

namespace detail {
// Defined in the generated builtin_topologies.cpp.
const std::vector<std::pair<std::string_view, std::string_view>>& builtin_topology_json();
}  // namespace detail

const char* to_string(VarKind kind) {
  switch (kind) {
    case VarKind::transconductance: return "transconductance";
    case VarKind::capacitance: return "capacitance";
    case VarKind::resistance: return "resistance";
  }
  return "?";
}

const char* to_string(VarRole role) {
  switch (role) {
    case VarRole::stage: return "stage";
    case VarRole::stage_output: return "stage_output";
    case VarRole::aux: return "aux";
    case VarRole::compensation: return "compensation";
    case VarRole::parasitic: return "parasitic";
  }
  return "?";
}

namespace {

VarKind kind_from(const std::string& s) {
  if (s == "transconductance") return VarKind::transconductance;
  if (s == "capacitance") return VarKind::capacitance;
  if (s == "resistance") return VarKind::resistance;
  throw ParseError("unknown variable kind '" + s + "'");
}

VarRole role_from(const std::string& s) {
  if (s == "stage") return VarRole::stage;
  if (s == "stage_output") return VarRole::stage_output;
  if (s == "aux") return VarRole::aux;
  if (s == "compensation") return VarRole::compensation;
  if (s == "parasitic") return VarRole::parasitic;
  throw ParseError("unknown variable role '" + s + "'");
}

TermSum parse_term_sum(const json& j) {
  TermSum sum;
  for (const auto& jt : j) {
    Term t;
    t.coeff = jt.at("c").get<double>();
    for (const auto& s : jt.at("syms")) t.symbols.push_back(s.get<std::string>());
    sum.push_back(std::move(t));
  }
  return sum;
}

json term_sum_to_json(const TermSum& sum) {
  json out = json::array();
  for (const Term& t : sum) {
    json jt;
    jt["c"] = t.coeff;
    jt["syms"] = t.symbols;
    out.push_back(std::move(jt));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& reserved_symbols() {
  static const std::vector<std::string> k{"CL", "GBW", "WU", "W0", "Q"};
  return k;
}

int TopologyDescriptor::symbol_id(const std::string& symbol) const {
  int id = symbols.lookup(symbol);
  if (id < 0) throw ValidationError("unknown symbol '" + symbol + "'", symbol);
  return id;
}

const DesignVariable* TopologyDescriptor::find_variable(const std::string& symbol) const {
  for (const DesignVariable& v : variables)
    if (v.symbol == symbol) return &v;
  return nullptr;
}

const DesignVariable& TopologyDescriptor::variable(const std::string& symbol) const {
  const DesignVariable* v = find_variable(symbol);
  if (!v) throw ValidationError("unknown variable '" + symbol + "'", symbol);
  return *v;
}

const std::string& TopologyDescriptor::stage_gm(int stage) const {
  for (const DesignVariable& v : variables)
    if (v.role == VarRole::stage && v.stage == stage) return v.symbol;
  throw ValidationError("no stage transconductance for stage " + std::to_string(stage),
                        "stage_map");
}

const std::string& TopologyDescriptor::stage_ro(int stage) const {
  for (const DesignVariable& v : variables)
    if (v.role == VarRole::stage_output && v.stage == stage) return v.symbol;
  throw ValidationError("no stage output resistance for stage " + std::to_string(stage),
                        "stage_map");
}

bool TopologyDescriptor::is_global(const std::string& symbol) const {
  return std::find(global_variables.begin(), global_variables.end(), symbol) !=
         global_variables.end();
}

std::vector<double> TopologyDescriptor::make_env() const {
  return std::vector<double>(static_cast<size_t>(symbols.size()), 0.0);
}

void TopologyDescriptor::validate() {
  if (name.empty()) throw ValidationError("descriptor name is empty", "name");
  if (num_stages < 1) throw ValidationError("num_stages must be >= 1", "num_stages");
  if (static_cast<int>(stage_map.size()) != num_stages)
    throw ValidationError("stage_map must have one entry per stage", "stage_map");

  // Symbol table: variables in declaration order, then the reserved symbols.
  symbols = SymbolIndex{};
  for (const DesignVariable& v : variables) {
    if (v.symbol.empty()) throw ValidationError("variable with empty symbol", "variables");
    if (symbols.lookup(v.symbol) >= 0)
      throw ValidationError("duplicate variable '" + v.symbol + "'", v.symbol);
    if (!(v.lo > 0.0) || !(v.lo < v.hi))
      throw ValidationError("variable '" + v.symbol + "' needs 0 < lo < hi", v.symbol);
    symbols.intern(v.symbol);
  }
  for (const std::string& r : reserved_symbols()) {
    if (symbols.lookup(r) >= 0)
      throw ValidationError("variable shadows reserved symbol '" + r + "'", r);
    symbols.intern(r);
  }

  // Per-stage structure: exactly one gm and one output resistance per stage.
  for (int s = 1; s <= num_stages; ++s) {
    int n_gm = 0, n_ro = 0;
    for (const DesignVariable& v : variables) {
      if (v.stage != s) continue;
      if (v.role == VarRole::stage) {
        if (v.kind != VarKind::transconductance)
          throw ValidationError("stage variable '" + v.symbol + "' must be a transconductance",
                                v.symbol);
        ++n_gm;
      } else if (v.role == VarRole::stage_output) {
        if (v.kind != VarKind::resistance)
          throw ValidationError("stage output '" + v.symbol + "' must be a resistance",
                                v.symbol);
        ++n_ro;
      }
    }
    if (n_gm != 1 || n_ro != 1)
      throw ValidationError("stage " + std::to_string(s) +
                                " needs exactly one gm and one output resistance",
                            "stage_map");
  }
  for (const DesignVariable& v : variables) {
    if ((v.role == VarRole::stage || v.role == VarRole::stage_output) &&
        (v.stage < 1 || v.stage > num_stages))
      throw ValidationError("variable '" + v.symbol + "' has out-of-range stage index",
                            v.symbol);
    if (v.role == VarRole::parasitic) {
      if (v.kind != VarKind::capacitance)
        throw ValidationError("parasitic '" + v.symbol + "' must be a capacitance", v.symbol);
      for (const std::string& t : v.attached) {
        const DesignVariable* tv = find_variable(t);
        if (!tv || tv->kind != VarKind::transconductance)
          throw ValidationError("parasitic '" + v.symbol +
                                    "' attached to undeclared transconductance '" + t + "'",
                                t);
      }
    }
  }

  // stage_map partitions the variable set together with global_variables.
  std::set<std::string> seen;
  for (int s = 0; s < num_stages; ++s) {
    if (stage_map[s].empty())
      throw ValidationError("stage_map entry " + std::to_string(s + 1) + " is empty",
                            "stage_map");
    for (const std::string& sym : stage_map[s]) {
      if (!find_variable(sym))
        throw ValidationError("stage_map references undeclared '" + sym + "'", sym);
      if (!seen.insert(sym).second)
        throw ValidationError("variable '" + sym + "' owned by more than one stage", sym);
    }
  }
  for (const std::string& sym : global_variables) {
    if (!find_variable(sym))
      throw ValidationError("global_variables references undeclared '" + sym + "'", sym);
    if (!seen.insert(sym).second)
      throw ValidationError("variable '" + sym + "' is both stage-owned and global", sym);
  }
  for (const DesignVariable& v : variables)
    if (!seen.count(v.symbol))
      throw ValidationError("variable '" + v.symbol + "' not covered by stage_map or globals",
                            v.symbol);

  // Closure fractions and unknowns refer to declared variables.
  for (const auto& [sym, frac] : closure) {
    const DesignVariable* v = find_variable(sym);
    if (!v || v->kind != VarKind::capacitance)
      throw ValidationError("closure key '" + sym + "' is not a declared capacitance", sym);
    if (!(frac > 0.0))
      throw ValidationError("closure fraction for '" + sym + "' must be positive", sym);
  }
  for (const std::string& u : unknowns)
    if (!find_variable(u))
      throw ValidationError("unknown '" + u + "' is not a declared variable", u);

  // Compile expressions; unknown symbols raise ValidationError naming them.
  eqs_c.clear();
  num_c.clear();
  den_c.clear();
  for (const TermSum& eq : design_equations) eqs_c.push_back(compile_sum(eq, symbols));
  for (const TermSum& c : tf_num) num_c.push_back(compile_sum(c, symbols));
  for (const TermSum& c : tf_den) den_c.push_back(compile_sum(c, symbols));
  if (num_c.empty() || den_c.empty())
    throw ValidationError("transfer function needs numerator and denominator", "tf");
  if (num_c.size() > den_c.size())
    throw ValidationError("tf numerator degree exceeds denominator degree", "tf");
  // The tf template may reference variables and the load only (the reasoning
  // placement symbols belong to design equations).
  const int cl_id = symbols.lookup("CL");
  const int n_vars = static_cast<int>(variables.size());
  for (const std::vector<CompiledSum>* side : {&num_c, &den_c})
    for (const CompiledSum& cs : *side)
      for (const CompiledTerm& t : cs)
        for (int id : t.sym_ids)
          if (id >= n_vars && id != cl_id)
            throw ValidationError("tf template references reserved symbol '" +
                                      symbols.name(id) + "'",
                                  symbols.name(id));

  // Mid-bounds sanity: finite coefficients, nonzero denominator ends.
  std::vector<double> env = make_env();
  for (const DesignVariable& v : variables)
    env[static_cast<size_t>(symbols.lookup(v.symbol))] = std::sqrt(v.lo * v.hi);
  env[static_cast<size_t>(cl_id)] = 50e-12;
  auto check_side = [&](const std::vector<CompiledSum>& side, const char* which) {
    for (size_t k = 0; k < side.size(); ++k)
      if (!std::isfinite(eval_sum(side[k], env)))
        throw ValidationError(std::string(which) + " coefficient " + std::to_string(k) +
                                  " is non-finite at mid-bounds",
                              "tf");
  };
  check_side(num_c, "numerator");
  check_side(den_c, "denominator");
  if (eval_sum(den_c.front(), env) == 0.0 || eval_sum(den_c.back(), env) == 0.0)
    throw ValidationError("denominator constant/leading coefficient vanishes at mid-bounds",
                          "tf");
}

// --------------------------------------------------------------------- I/O

TopologyDescriptor parse_descriptor(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed descriptor: ") + e.what());
  }
  TopologyDescriptor d;
  try {
    d.name = j.at("name").get<std::string>();
    d.description = j.value("description", std::string{});
    d.num_stages = j.at("num_stages").get<int>();
    d.rhp_zero_cancelled = j.value("rhp_zero_cancelled", false);
    for (const auto& jv : j.at("variables")) {
      DesignVariable v;
      v.symbol = jv.at("symbol").get<std::string>();
      v.kind = kind_from(jv.at("kind").get<std::string>());
      v.lo = jv.at("lo").get<double>();
      v.hi = jv.at("hi").get<double>();
      v.role = role_from(jv.at("role").get<std::string>());
      v.stage = jv.value("stage", 0);
      if (jv.contains("attached"))
        v.attached = jv.at("attached").get<std::vector<std::string>>();
      d.variables.push_back(std::move(v));
    }
    d.stage_map = j.at("stage_map").get<std::vector<std::vector<std::string>>>();
    if (j.contains("global_variables"))
      d.global_variables = j.at("global_variables").get<std::vector<std::string>>();
    if (j.contains("closure"))
      for (const auto& [k, v] : j.at("closure").items())
        d.closure[k] = v.get<double>();
    d.unknowns = j.at("unknowns").get<std::vector<std::string>>();
    for (const auto& je : j.at("design_equations"))
      d.design_equations.push_back(parse_term_sum(je.at("terms")));
    for (const auto& jc : j.at("tf").at("num")) d.tf_num.push_back(parse_term_sum(jc));
    for (const auto& jc : j.at("tf").at("den")) d.tf_den.push_back(parse_term_sum(jc));
  } catch (const json::exception& e) {
    throw ParseError(std::string("descriptor missing or mistyped field: ") + e.what());
  }
  d.validate();
  return d;
}

TopologyDescriptor load_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open descriptor file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_descriptor(ss.str());
}

std::string serialize_descriptor(const TopologyDescriptor& desc) {
  json j;
  j["format_version"] = 1;
  j["name"] = desc.name;
  j["description"] = desc.description;
  j["num_stages"] = desc.num_stages;
  j["rhp_zero_cancelled"] = desc.rhp_zero_cancelled;
  j["variables"] = json::array();
  for (const DesignVariable& v : desc.variables) {
    json jv;
    jv["symbol"] = v.symbol;
    jv["kind"] = to_string(v.kind);
    jv["lo"] = v.lo;
    jv["hi"] = v.hi;
    jv["role"] = to_string(v.role);
    if (v.stage > 0) jv["stage"] = v.stage;
    if (!v.attached.empty()) jv["attached"] = v.attached;
    j["variables"].push_back(std::move(jv));
  }
  j["stage_map"] = desc.stage_map;
  j["global_variables"] = desc.global_variables;
  j["closure"] = json::object();
  for (const auto& [k, v] : desc.closure) j["closure"][k] = v;
  j["unknowns"] = desc.unknowns;
  j["design_equations"] = json::array();
  for (const TermSum& eq : desc.design_equations) {
    json je;
    je["terms"] = term_sum_to_json(eq);
    j["design_equations"].push_back(std::move(je));
  }
  j["tf"]["num"] = json::array();
  for (const TermSum& c : desc.tf_num) j["tf"]["num"].push_back(term_sum_to_json(c));
  j["tf"]["den"] = json::array();
  for (const TermSum& c : desc.tf_den) j["tf"]["den"].push_back(term_sum_to_json(c));
  return j.dump(1);
}

void save_descriptor(const TopologyDescriptor& desc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write descriptor file '" + path.string() + "'");
  out << serialize_descriptor(desc) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ----------------------------------------------------------------- catalog

const std::vector<TopologyDescriptor>& catalog() {
  static const std::vector<TopologyDescriptor> cat = [] {
    std::vector<TopologyDescriptor> out;
    for (const auto& [stem, text] : detail::builtin_topology_json())
      out.push_back(parse_descriptor(std::string(text)));
    std::sort(out.begin(), out.end(),
              [](const TopologyDescriptor& a, const TopologyDescriptor& b) {
                return a.name < b.name;
              });
    return out;
  }();
  return cat;
}

const TopologyDescriptor& catalog_get(const std::string& name) {
  for (const TopologyDescriptor& d : catalog())
    if (d.name == name) return d;
  std::string names;
  for (const TopologyDescriptor& d : catalog()) {
    if (!names.empty()) names += ", ";
    names += d.name;
  }
  throw ValidationError("unknown topology '" + name + "'; catalog: " + names, name);
}

// ------------------------------------------------------------------- cache

std::filesystem::path ReasoningCache::default_dir() {
  if (const char* env = std::getenv("AMPSIZER_CACHE_DIR"); env && *env)
    return std::filesystem::path(env);
  if (const char* home = std::getenv("HOME"); home && *home)
    return std::filesystem::path(home) / ".cache" / "ampsizer";
  return std::filesystem::path(".ampsizer-cache");
}

ReasoningCache::ReasoningCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string ReasoningCache::make_key(const std::string& descriptor_name,
                                     const DesignSpec& spec) {
  std::string name;
  for (char c : descriptor_name)
    name += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  char buf[160];
  // 4 significant figures per field: float-formatting noise cannot split keys.
  std::snprintf(buf, sizeof buf, "-cl%.3e-gbw%.3e-pm%.3e-gain%.3e", spec.cl, spec.gbw_min,
                spec.pm_min, spec.gain_min_db);
  return name + buf;
}

std::optional<DerivedTargets> ReasoningCache::get(const std::string& key) const {
  std::filesystem::path file = dir_ / (key + ".json");
  std::ifstream in(file);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    json j = json::parse(ss.str());
    if (j.value("format_version", 0) != 1) return std::nullopt;
    return parse_targets(j.at("targets").dump());
  } catch (...) {
    // A corrupt entry is a miss, not a fatal error.
    return std::nullopt;
  }
}

void ReasoningCache::put(const std::string& key, const DerivedTargets& targets) const {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw StorageError("cannot create cache directory '" + dir_.string() + "'");
  json j;
  j["format_version"] = 1;
  j["key"] = key;
  j["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  j["targets"] = json::parse(serialize_targets(targets));
  std::filesystem::path file = dir_ / (key + ".json");
  std::filesystem::path tmp = dir_ / (key + ".json.tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw StorageError("cache directory unwritable: '" + dir_.string() + "'");
    out << j.dump(1) << '\n';
    if (!out) throw StorageError("cache write failed in '" + dir_.string() + "'");
  }
  // Atomic replace: concurrent readers see either version, last writer wins.
  std::filesystem::rename(tmp, file, ec);
  if (ec) throw StorageError("cache rename failed in '" + dir_.string() + "'");
}

std::vector<std::string> ReasoningCache::list() const {
  std::vector<std::string> keys;
  std::error_code ec;
  for (auto it = std::filesystem::directory_iterator(dir_, ec);
       !ec && it != std::filesystem::directory_iterator(); ++it) {
    if (it->path().extension() == ".json") keys.push_back(it->path().stem().string());
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

void ReasoningCache::clear() const {
  std::error_code ec;
  for (auto it = std::filesystem::directory_iterator(dir_, ec);
       !ec && it != std::filesystem::directory_iterator(); ++it) {
    if (it->path().extension() == ".json") std::filesystem::remove(it->path(), ec);
  }
}

// ------------------------------------------- DerivedTargets serialization

std::string serialize_targets(const DerivedTargets& t) {
  json j;
  j["topology"] = t.topology;
  j["targets"] = json::object();
  for (const auto& [sym, tv] : t.targets) {
    j["targets"][sym]["value"] = tv.value;
    j["targets"][sym]["tol_rel"] = tv.tol_rel;
  }
  j["dominant_pole_hz"] = t.dominant_pole_hz;
  j["omega0_rad_s"] = t.omega0_rad_s;
  j["q"] = t.q;
  j["separation_factor"] = t.separation_factor;
  j["gbw_margin"] = t.gbw_margin;
  j["attempts"] = t.attempts;
  j["predicted_gbw_hz"] = t.predicted_gbw_hz;
  j["predicted_pm_deg"] = t.predicted_pm_deg;
  j["predicted_gain_db"] = t.predicted_gain_db;
  j["realized_gbw_hz"] = t.realized_gbw_hz;
  j["realized_pm_deg"] = t.realized_pm_deg;
  return j.dump(1);
}

DerivedTargets parse_targets(const std::string& json_text) {
  try {
    json j = json::parse(json_text);
    DerivedTargets t;
    t.topology = j.at("topology").get<std::string>();
    for (const auto& [sym, jv] : j.at("targets").items()) {
      TargetValue tv;
      tv.value = jv.at("value").get<double>();
      tv.tol_rel = jv.at("tol_rel").get<double>();
      t.targets[sym] = tv;
    }
    t.dominant_pole_hz = j.at("dominant_pole_hz").get<double>();
    t.omega0_rad_s = j.at("omega0_rad_s").get<double>();
    t.q = j.at("q").get<double>();
    t.separation_factor = j.at("separation_factor").get<double>();
    t.gbw_margin = j.at("gbw_margin").get<double>();
    t.attempts = j.at("attempts").get<int>();
    t.predicted_gbw_hz = j.at("predicted_gbw_hz").get<double>();
    t.predicted_pm_deg = j.at("predicted_pm_deg").get<double>();
    t.predicted_gain_db = j.at("predicted_gain_db").get<double>();
    t.realized_gbw_hz = j.at("realized_gbw_hz").get<double>();
    t.realized_pm_deg = j.at("realized_pm_deg").get<double>();
    return t;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed targets record: ") + e.what());
  }
}

}  // namespace ampsizer
