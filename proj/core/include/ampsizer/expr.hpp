#pragma once

// Signed product-sum expressions over named symbols: the coefficient language
// of topology descriptors.  A Term is coeff * prod(symbols); a TermSum is a
// plain sum of terms.  Sums are "compiled" against a SymbolIndex into integer
// indices once, then evaluated against a flat value vector many times.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ampsizer {

struct Term {
  double coeff = 0.0;
  std::vector<std::string> symbols;  // repeated entries encode powers
};

using TermSum = std::vector<Term>;

// Bidirectional symbol <-> dense-index map.  Indices are stable once interned.
class SymbolIndex {
 public:
  // Returns the index of `name`, interning it if absent.
  int intern(const std::string& name);
  // Returns the index of `name`, or -1 when it was never interned.
  int lookup(const std::string& name) const;
  const std::string& name(int index) const { return names_.at(index); }
  int size() const { return static_cast<int>(names_.size()); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

struct CompiledTerm {
  double coeff = 0.0;
  std::vector<int> sym_ids;
};

using CompiledSum = std::vector<CompiledTerm>;

// Resolves every symbol of `sum` through `index`.  Unknown symbols raise
// ValidationError naming the symbol.
CompiledSum compile_sum(const TermSum& sum, const SymbolIndex& index);

// Value of the sum at `env` (indexed by SymbolIndex ids).
double eval_sum(const CompiledSum& sum, std::span<const double> env);

// Sum of absolute values of the individual terms: the natural scale used for
// relative-residual convergence tests.
double eval_sum_abs(const CompiledSum& sum, std::span<const double> env);

// Analytic partial derivative with respect to env[var]; repeated symbols are
// treated as powers.
double d_sum(const CompiledSum& sum, std::span<const double> env, int var);

}  // namespace ampsizer
