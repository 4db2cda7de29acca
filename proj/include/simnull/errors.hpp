#pragma once

#include <stdexcept>
#include <string>

namespace simnull {

// Bad sizes, out-of-range parameters, mismatched grids.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A control region that selects no cell.
class EmptyRegionError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// A construction that cannot be represented at the grid resolution.
class ResolutionError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Requested feature is defined only for a restricted class of inputs.
class UnsupportedError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The controllability Gramian on a spectral subspace is (numerically) singular.
class SingularGramianError : public NumericalError {
 public:
  SingularGramianError(const std::string& what, double lambda, double region_measure,
                       double condition, int slice = -1)
      : NumericalError(what),
        lambda_(lambda),
        region_measure_(region_measure),
        condition_(condition),
        slice_(slice) {}

  double lambda() const noexcept { return lambda_; }
  double region_measure() const noexcept { return region_measure_; }
  double condition() const noexcept { return condition_; }
  int slice() const noexcept { return slice_; }

 private:
  double lambda_;
  double region_measure_;
  double condition_;
  int slice_;
};

// The input-to-final-state map cannot reach the required subspace.
class InfeasibleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace simnull
