#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ampsizer {

// Base class for every error the library raises deliberately.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// -------------------------------------------------------------------- kb
class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::string offending)
      : Error(what), offending_(std::move(offending)) {}
  // Symbol or field name that failed validation.
  const std::string& offending() const { return offending_; }

 private:
  std::string offending_;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------- device
class BindingError : public Error {
 public:
  BindingError(const std::string& what, std::string symbol)
      : Error(what), symbol_(std::move(symbol)) {}
  const std::string& symbol() const { return symbol_; }

 private:
  std::string symbol_;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

// -------------------------------------------------------------- analysis
class EvalError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class NoCrossingError : public Error {
 public:
  using Error::Error;
};

// ------------------------------------------------------------- reasoning
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::string binding_bound)
      : Error(what), binding_bound_(std::move(binding_bound)) {}
  // Name of the variable bound (or placement constraint) that blocked the solve.
  const std::string& binding_bound() const { return binding_bound_; }

 private:
  std::string binding_bound_;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> residual_history)
      : Error(what), residual_history_(std::move(residual_history)) {}
  const std::vector<double>& residual_history() const { return residual_history_; }

 private:
  std::vector<double> residual_history_;
};

// ------------------------------------------------------------ optimizers
class BudgetError : public Error {
 public:
  using Error::Error;
};

class SurrogateError : public Error {
 public:
  using Error::Error;
};

// ------------------------------------------------------------------ misc
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ampsizer
