#include "ampsizer/expr.hpp"

#include "ampsizer/errors.hpp"

namespace ampsizer {

int SymbolIndex::intern(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(names_.size());
  names_.push_back(name);
  index_.emplace(name, id);
  return id;
}

int SymbolIndex::lookup(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

CompiledSum compile_sum(const TermSum& sum, const SymbolIndex& index) {
  CompiledSum out;
  out.reserve(sum.size());
  for (const Term& t : sum) {
    CompiledTerm ct;
    ct.coeff = t.coeff;
    ct.sym_ids.reserve(t.symbols.size());
    for (const std::string& s : t.symbols) {
      int id = index.lookup(s);
      if (id < 0) throw ValidationError("undeclared symbol '" + s + "'", s);
      ct.sym_ids.push_back(id);
    }
    out.push_back(std::move(ct));
  }
  return out;
}

double eval_sum(const CompiledSum& sum, std::span<const double> env) {
  double total = 0.0;
  for (const CompiledTerm& t : sum) {
    double v = t.coeff;
    for (int id : t.sym_ids) v *= env[id];
    total += v;
  }
  return total;
}

double eval_sum_abs(const CompiledSum& sum, std::span<const double> env) {
  double total = 0.0;
  for (const CompiledTerm& t : sum) {
    double v = t.coeff < 0 ? -t.coeff : t.coeff;
    for (int id : t.sym_ids) {
      double x = env[id];
      v *= x < 0 ? -x : x;
    }
    total += v;
  }
  return total;
}

double d_sum(const CompiledSum& sum, std::span<const double> env, int var) {
  double total = 0.0;
  for (const CompiledTerm& t : sum) {
    int power = 0;
    for (int id : t.sym_ids) power += (id == var);
    if (power == 0) continue;
    // d/dx (c * x^n * rest) = c * n * x^(n-1) * rest: skip one occurrence.
    double v = t.coeff * power;
    bool skipped = false;
    for (int id : t.sym_ids) {
      if (id == var && !skipped) {
        skipped = true;
        continue;
      }
      v *= env[id];
    }
    total += v;
  }
  return total;
}

}  // namespace ampsizer
