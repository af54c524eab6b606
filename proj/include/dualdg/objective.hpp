#pragma once

#include "dualdg/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dualdg {

namespace detail {

template <typename Scalar>
Scalar logistic(Scalar t) {
  if (t >= 0) return Scalar(1) / (Scalar(1) + std::exp(-t));
  const Scalar e = std::exp(t);
  return e / (Scalar(1) + e);
}

// log(1 + e^t) without overflow.
template <typename Scalar>
Scalar softplus(Scalar t) {
  if (t > 0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

}  // namespace detail

template <typename Scalar>
struct BlockConstants {
  Scalar sigma;      // strong convexity modulus
  Scalar lipschitz;  // gradient Lipschitz constant
};

/**
 * f(z) = 1/2 z'Qz + q'z + gamma * log(1 + exp(<a, z>)).
 *
 * Q is factorized once at construction. Contiguous diagonal blocks of Q are
 * detected and factorized separately, so block-diagonal Hessians (the DMPC
 * case) cost linear time per solve instead of quadratic.
 */
template <typename Scalar>
class BlockObjective {
 public:
  using VectorType = Vec<Scalar>;
  using MatrixType = Mat<Scalar>;

  BlockObjective(MatrixType Q, VectorType q, Scalar gamma = 0, VectorType a = VectorType())
      : Q_(std::move(Q)), q_(std::move(q)), gamma_(gamma), a_(std::move(a)) {
    const Index n = Q_.rows();
    if (Q_.cols() != n || q_.size() != n) {
      throw InvalidObjective("objective: Q must be square and match the length of q");
    }
    if (!(gamma_ >= 0)) throw InvalidObjective("objective: gamma must be nonnegative");
    if (a_.size() == 0) a_ = VectorType::Zero(n);
    if (a_.size() != n) throw InvalidObjective("objective: a has wrong length");
    if ((Q_ - Q_.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * std::max(Scalar(1), Q_.cwiseAbs().maxCoeff())) {
      throw InvalidObjective("objective: Q is not symmetric");
    }
    factorize();
    if (gamma_ > 0) {
      Qinv_a_ = apply_inverse(a_);
      a_Qinv_a_ = a_.dot(Qinv_a_);
    }
  }

  Index dim() const { return Q_.rows(); }
  const MatrixType& Q() const { return Q_; }
  const VectorType& q() const { return q_; }
  Scalar gamma() const { return gamma_; }
  const VectorType& a() const { return a_; }
  const BlockConstants<Scalar>& constants() const { return constants_; }

  Scalar value(const Eigen::Ref<const VectorType>& z) const {
    Scalar v = Scalar(0.5) * z.dot(Q_ * z) + q_.dot(z);
    if (gamma_ > 0) v += gamma_ * detail::softplus(a_.dot(z));
    return v;
  }

  VectorType gradient(const Eigen::Ref<const VectorType>& z) const {
    VectorType g = Q_ * z + q_;
    if (gamma_ > 0) g += gamma_ * detail::logistic(a_.dot(z)) * a_;
    return g;
  }

  /// Solves Q x = rhs with the cached blockwise Cholesky factors.
  VectorType apply_inverse(const Eigen::Ref<const VectorType>& rhs) const {
    VectorType x(rhs.size());
    for (const auto& blk : diag_blocks_) {
      x.segment(blk.start, blk.size) = blk.llt.solve(rhs.segment(blk.start, blk.size));
    }
    return x;
  }

  /// argmin_z f(z) + <w, z>. Only valid when gamma == 0.
  VectorType closed_form_minimizer(const Eigen::Ref<const VectorType>& w) const {
    VectorType rhs = q_ + w;
    return -apply_inverse(rhs);
  }

  /// argmin_z f(z) + <w, z>: closed form for gamma == 0, damped Newton otherwise.
  VectorType minimize_shifted(const Eigen::Ref<const VectorType>& w) const {
    if (gamma_ == 0) return closed_form_minimizer(w);

    const VectorType shift = q_ + w;
    auto phi = [&](const VectorType& z) {
      return Scalar(0.5) * z.dot(Q_ * z) + shift.dot(z) + gamma_ * detail::softplus(a_.dot(z));
    };

    // Tolerances are relative to the size of the linear terms, which sets the roundoff floor.
    const Scalar scale = Scalar(1) + shift.norm() + gamma_ * a_.norm();
    const Scalar tol = kGradTolerance * scale;
    const Scalar accept = kAcceptTolerance * scale;

    auto grad_at = [&](const VectorType& z) {
      return (Q_ * z + shift + gamma_ * detail::logistic(a_.dot(z)) * a_).norm();
    };

    VectorType z = VectorType::Zero(dim());
    Scalar prev_norm = std::numeric_limits<Scalar>::infinity();
    Scalar grad_norm = prev_norm;
    for (int it = 0; it < kMaxNewtonIterations; ++it) {
      const Scalar s = detail::logistic(a_.dot(z));
      VectorType grad = Q_ * z + shift + gamma_ * s * a_;
      grad_norm = grad.norm();
      if (grad_norm <= tol) return z;
      // Roundoff floor: quadratic convergence has stalled.
      if (grad_norm <= accept && grad_norm > Scalar(0.5) * prev_norm) return z;
      prev_norm = grad_norm;

      // Hessian Q + c aa' inverted with Sherman-Morrison.
      const Scalar c = gamma_ * s * (Scalar(1) - s);
      const VectorType y = apply_inverse(grad);
      const VectorType step = -(y - (c * a_.dot(y) / (Scalar(1) + c * a_Qinv_a_)) * Qinv_a_);

      const Scalar f0 = phi(z);
      Scalar t = 1;
      bool accepted = false;
      for (int h = 0; h < 60; ++h) {
        VectorType trial = z + t * step;
        // Near the minimizer phi changes by less than its roundoff; the gradient norm still does.
        if (phi(trial) <= f0 || grad_at(trial) < grad_norm) {
          z = std::move(trial);
          accepted = true;
          break;
        }
        t *= Scalar(0.5);
      }
      if (!accepted) break;
    }
    const Scalar s = detail::logistic(a_.dot(z));
    grad_norm = (Q_ * z + shift + gamma_ * s * a_).norm();
    if (grad_norm <= accept) return z;
    throw ConvergenceError("inner Newton solve did not converge", static_cast<double>(grad_norm));
  }

  /// Gradient tolerances, relative to 1 + ||q + w|| + gamma ||a||.
  static constexpr int kMaxNewtonIterations = 100;
  static constexpr Scalar kGradTolerance = Scalar(1e-12);
  static constexpr Scalar kAcceptTolerance = Scalar(1e-10);

 private:
  struct DiagBlock {
    Index start;
    Index size;
    Eigen::LLT<MatrixType> llt;
  };

  void factorize() {
    const Index n = dim();
    Scalar sigma = std::numeric_limits<Scalar>::infinity();
    Scalar lmax = 0;
    Index start = 0;
    Index reach = 0;
    for (Index r = 0; r < n; ++r) {
      Index last = r;
      for (Index c = n - 1; c > r; --c) {
        if (Q_(r, c) != Scalar(0)) {
          last = c;
          break;
        }
      }
      reach = std::max(reach, last);
      if (reach != r) continue;
      const Index size = r - start + 1;
      const MatrixType sub = Q_.block(start, start, size, size);
      Eigen::SelfAdjointEigenSolver<MatrixType> eig(sub, Eigen::EigenvaluesOnly);
      sigma = std::min(sigma, eig.eigenvalues()(0));
      lmax = std::max(lmax, eig.eigenvalues()(size - 1));
      DiagBlock blk{start, size, Eigen::LLT<MatrixType>(sub)};
      if (blk.llt.info() != Eigen::Success || !(eig.eigenvalues()(0) > 0)) {
        throw InvalidObjective("objective: Q is not positive definite");
      }
      diag_blocks_.push_back(std::move(blk));
      start = r + 1;
    }
    if (n == 0) throw InvalidObjective("objective: empty block");
    constants_.sigma = sigma;
    // The logistic derivative is at most 1/4.
    constants_.lipschitz = lmax + gamma_ * a_.squaredNorm() / Scalar(4);
  }

  MatrixType Q_;
  VectorType q_;
  Scalar gamma_;
  VectorType a_;
  std::vector<DiagBlock> diag_blocks_;
  BlockConstants<Scalar> constants_{};
  VectorType Qinv_a_;
  Scalar a_Qinv_a_ = 0;
};

template <typename Scalar>
BlockConstants<Scalar> block_constants(const BlockObjective<Scalar>& obj) {
  return obj.constants();
}

/// z = argmin f(z) + <w, z>.
template <typename Scalar>
Vec<Scalar> solve_block(const BlockObjective<Scalar>& obj, const VecView<Scalar>& w) {
  return obj.minimize_shifted(w);
}

}  // namespace dualdg
