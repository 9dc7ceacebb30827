#pragma once

// Topology descriptors: the machine-readable record of a compensation
// topology's variables, transfer-function template, and design equations,
// plus the built-in catalog of seven multi-stage amplifier topologies.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ampsizer/expr.hpp"

namespace ampsizer {

enum class VarKind { transconductance, capacitance, resistance };

enum class VarRole {
  stage,         // gain-stage transconductance
  stage_output,  // stage output resistance (bound to the stage transistor bias)
  aux,           // feedforward / buffer transconductance
  compensation,  // compensation capacitor or resistor (a passive knob)
  parasitic      // node parasitic capacitance derived from attached devices
};

const char* to_string(VarKind kind);
const char* to_string(VarRole role);

struct DesignVariable {
  std::string symbol;
  VarKind kind = VarKind::transconductance;
  double lo = 0.0, hi = 0.0;
  VarRole role = VarRole::stage;
  int stage = 0;                      // 1-based; 0 when not a per-stage variable
  std::vector<std::string> attached;  // parasitic only: transistors loading the node
};

struct TopologyDescriptor {
  std::string name;
  std::string description;
  int num_stages = 0;
  bool rhp_zero_cancelled = false;
  std::vector<DesignVariable> variables;
  std::vector<std::vector<std::string>> stage_map;  // per stage: owned symbols
  std::vector<std::string> global_variables;        // not owned by any stage
  std::map<std::string, double> closure;            // cap symbol -> C_L fraction
  std::vector<std::string> unknowns;                // solved by the reasoning module
  std::vector<TermSum> design_equations;            // each term-sum == 0
  std::vector<TermSum> tf_num, tf_den;              // coefficients, ascending powers of s

  // Filled by validate(): symbol table (variables first, then the reserved
  // context symbols) and index-compiled expressions.
  SymbolIndex symbols;
  std::vector<CompiledSum> eqs_c;
  std::vector<CompiledSum> num_c, den_c;

  // Checks all descriptor invariants and compiles the expressions.
  // Throws ValidationError naming the offending symbol or field.
  void validate();

  int symbol_id(const std::string& symbol) const;  // throws ValidationError if absent
  const DesignVariable* find_variable(const std::string& symbol) const;
  const DesignVariable& variable(const std::string& symbol) const;  // throws
  // Gm / output-resistance symbol of stage `stage` (1-based).
  const std::string& stage_gm(int stage) const;
  const std::string& stage_ro(int stage) const;
  bool is_global(const std::string& symbol) const;

  // Fresh value vector sized for the symbol table (zero-filled).
  std::vector<double> make_env() const;
};

// Context symbols usable in expressions besides declared variables:
// CL (external load), GBW (spec target), WU (= 2*pi*GBW), and the
// complex-pole placement parameters W0 and Q set by the reasoning module.
const std::vector<std::string>& reserved_symbols();

// ------------------------------------------------------------------- I/O
TopologyDescriptor parse_descriptor(const std::string& json_text);
TopologyDescriptor load_descriptor(const std::filesystem::path& path);
std::string serialize_descriptor(const TopologyDescriptor& desc);
void save_descriptor(const TopologyDescriptor& desc, const std::filesystem::path& path);

// --------------------------------------------------------------- catalog
// The seven built-in topologies {AZC, DFCFC, IAC, NGCC, NMCNR, SMC, TCFC},
// sorted by name, validated.
const std::vector<TopologyDescriptor>& catalog();
// Lookup by (case-sensitive) name; throws ValidationError listing the catalog.
const TopologyDescriptor& catalog_get(const std::string& name);

}  // namespace ampsizer
