#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <type_traits>
#include <string>

namespace dualdg {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Read-only vector view. The scalar is taken from the other arguments, so
/// segments and expressions bind without a copy.
template <typename Scalar>
using VecView = Eigen::Ref<const Vec<std::type_identity_t<Scalar>>>;

/// Inconsistent block dimensions or couplings that are not edges of the graph.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A block objective that is not strongly convex (Q not positive definite, negative gamma).
class InvalidObjective : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative numeric routine failed to reach its tolerance.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inner Newton solve did not converge. Carries the final gradient norm.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double grad_norm)
      : NumericError(what), grad_norm_(grad_norm) {}
  double grad_norm() const { return grad_norm_; }

 private:
  double grad_norm_;
};

class DegenerateWeights : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedInstance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A message was sent along a pair that is not an edge of the coupling graph.
class LocalityViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dualdg
