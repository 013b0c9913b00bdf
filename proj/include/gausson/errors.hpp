#pragma once

#include <stdexcept>
#include <string>

namespace gausson {

/// Invalid parameters or input states. The CLI maps these to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input state violates a GaussonState invariant (A not positive definite, N <= 0).
class InvalidState : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Numerical failure inside a solver. The CLI maps these to exit code 3.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PositiveDefinitenessLost : public SolverError {
 public:
  PositiveDefinitenessLost(double time, double min_eig)
      : SolverError("positive definiteness of A lost at t=" + std::to_string(time) +
                    " (min eigenvalue " + std::to_string(min_eig) + ")"),
        time_(time),
        min_eig_(min_eig) {}
  double time() const noexcept { return time_; }
  double min_eig() const noexcept { return min_eig_; }

 private:
  double time_;
  double min_eig_;
};

class StepUnderflow : public SolverError {
 public:
  StepUnderflow(double time, double dt)
      : SolverError("adaptive step underflow at t=" + std::to_string(time) +
                    " (dt=" + std::to_string(dt) + ")"),
        time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class OutsideStabilityRegion : public SolverError {
 public:
  using SolverError::SolverError;
};

class BranchAmbiguity : public SolverError {
 public:
  BranchAmbiguity(double omega, const std::string& what)
      : SolverError("branch ambiguity at Omega=" + std::to_string(omega) + ": " + what),
        omega_(omega) {}
  double omega() const noexcept { return omega_; }

 private:
  double omega_;
};

class EigenSolverFailure : public SolverError {
 public:
  using SolverError::SolverError;
};

class NonFinite : public SolverError {
 public:
  explicit NonFinite(double time)
      : SolverError("non-finite field value at t=" + std::to_string(time)), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class DegenerateMoments : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace gausson
