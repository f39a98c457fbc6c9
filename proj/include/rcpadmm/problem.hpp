#pragma once

// Identification problem assembly: FIR regressors, the stacked constraint
// w + Q theta + y_tilde = 0, and the least-squares / kernel initializers.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "rcpadmm/errors.hpp"
#include "rcpadmm/hankel.hpp"

namespace rcpadmm {

struct RegressionData {
  Vector u;
  Vector y;
  Index fir_length = 0;
  double dt = 1.0;

  Index samples() const { return y.size(); }

  void validate() const {
    detail::require(u.size() == y.size(), "input and output sample counts differ");
    detail::require(fir_length >= 1, "FIR length must be positive");
    detail::require(samples() >= fir_length,
                    "need at least l samples (N=" + std::to_string(samples()) +
                        ", l=" + std::to_string(fir_length) + ")");
    detail::require(u.allFinite() && y.allFinite(), "data contains non-finite samples");
    detail::require(dt > 0.0, "sampling period must be positive");
  }
};

/// Row t holds [u(t-1), ..., u(t-l)]; inputs before the first sample are zero.
inline Matrix build_phi(const Vector& u, Index fir_length) {
  detail::require(fir_length >= 1, "build_phi: FIR length must be positive");
  detail::require(u.size() >= fir_length, "build_phi: fewer samples than FIR length");
  const Index N = u.size();
  Matrix phi = Matrix::Zero(N, fir_length);
  for (Index t = 0; t < N; ++t)
    for (Index j = 0; j < fir_length && j < t; ++j) phi(t, j) = u(t - j - 1);
  return phi;
}

inline Matrix build_phi(const RegressionData& data) {
  data.validate();
  return build_phi(data.u, data.fir_length);
}

/// Immutable problem data for
///   min ||e||^2  s.t.  w + Q theta + y_tilde = 0,  rank(Z) = r,
/// with w = [vec(Z); e], Q = [M; Phi], y_tilde = [0; -y].
class RcpProblem {
 public:
  RcpProblem(Matrix phi, Vector y, HankelDims dims, Index rank)
      : phi_(std::move(phi)), y_(std::move(y)), dims_(dims), rank_(rank) {
    dims_.validate();
    detail::require(phi_.cols() == dims_.fir_length, "Phi column count must equal l");
    detail::require(phi_.rows() == y_.size(), "Phi row count must equal sample count");
    detail::require(rank_ >= 1 && rank_ < dims_.cols,
                    "target rank must satisfy 1 <= r < n, got r=" + std::to_string(rank_));
    lifting_ = LiftingMatrix(dims_);

    Q_.resize(lifting_.rows() + phi_.rows(), dims_.fir_length);
    Q_.topRows(lifting_.rows()) = lifting_.to_dense();
    Q_.bottomRows(phi_.rows()) = phi_;
    y_tilde_ = Vector::Zero(Q_.rows());
    y_tilde_.tail(y_.size()) = -y_;
    projector_ = RangeProjector(Q_);
  }

  static RcpProblem from_data(const RegressionData& data, Index hankel_cols, Index rank) {
    data.validate();
    return RcpProblem(build_phi(data), data.y, HankelDims{data.fir_length, hankel_cols}, rank);
  }

  const Matrix& phi() const { return phi_; }
  const Vector& y() const { return y_; }
  const HankelDims& dims() const { return dims_; }
  Index rank() const { return rank_; }
  const LiftingMatrix& lifting() const { return lifting_; }
  const Matrix& Q() const { return Q_; }
  const Vector& y_tilde() const { return y_tilde_; }
  const RangeProjector& projector() const { return projector_; }

  Index fir_length() const { return dims_.fir_length; }
  Index samples() const { return y_.size(); }
  Index lifted_size() const { return lifting_.rows(); }
  /// Length of w and mu.
  Index stacked_size() const { return Q_.rows(); }

  Vector apply_Q(const Vector& theta) const {
    Vector out(stacked_size());
    out.head(lifted_size()) = lifting_.apply(theta);
    out.tail(samples()) = phi_ * theta;
    return out;
  }

  Vector apply_Qt(const Vector& v) const {
    return lifting_.apply_transpose(v.head(lifted_size())) + phi_.transpose() * v.tail(samples());
  }

  template <class Derived>
  Eigen::Map<const Matrix> z_block(const Eigen::MatrixBase<Derived>& w) const {
    return Eigen::Map<const Matrix>(w.derived().data(), dims_.rows(), dims_.cols);
  }

 private:
  Matrix phi_;
  Vector y_;
  HankelDims dims_;
  Index rank_;
  LiftingMatrix lifting_;
  Matrix Q_;
  Vector y_tilde_;
  RangeProjector projector_;
};

inline Vector least_squares_estimate(const Matrix& phi, const Vector& y) {
  Eigen::ColPivHouseholderQR<Matrix> qr(phi);
  qr.setThreshold(1e-12);
  if (qr.rank() < phi.cols())
    throw IllConditionedProblem("least squares: regressor matrix is rank deficient");
  return qr.solve(y);
}

inline Vector least_squares_estimate(const RcpProblem& problem) {
  return least_squares_estimate(problem.phi(), problem.y());
}

enum class KernelFamily { TunedCorrelated };

struct KernelConfig {
  double gamma = 1.0;
  KernelFamily family = KernelFamily::TunedCorrelated;
  double decay = 0.9;
  double scale = 1.0;

  void validate() const {
    detail::require(gamma > 0.0, "kernel gamma must be positive");
    detail::require(decay > 0.0 && decay < 1.0, "kernel decay must lie in (0, 1)");
    detail::require(scale > 0.0, "kernel scale must be positive");
  }
};

/// TC kernel: K_ij = scale * decay^max(i, j), 1-based lags.
inline Matrix kernel_matrix(Index fir_length, const KernelConfig& cfg) {
  cfg.validate();
  Matrix K(fir_length, fir_length);
  for (Index i = 0; i < fir_length; ++i)
    for (Index j = 0; j < fir_length; ++j)
      K(i, j) = cfg.scale * std::pow(cfg.decay, static_cast<double>(std::max(i, j) + 1));
  return K;
}

/// argmin ||y - Phi theta||^2 + gamma theta^T K^{-1} theta.
inline Vector kernel_initialize(const Matrix& phi, const Vector& y, const Matrix& K, double gamma) {
  detail::require(gamma > 0.0, "kernel gamma must be positive");
  detail::require(K.rows() == phi.cols() && K.cols() == phi.cols(), "kernel size mismatch");
  Eigen::LLT<Matrix> kfac(K);
  if (kfac.info() != Eigen::Success) throw InvalidArgument("kernel matrix is not positive definite");
  const Matrix Kinv = kfac.solve(Matrix::Identity(K.rows(), K.cols()));
  const Matrix normal = phi.transpose() * phi + gamma * Kinv;
  Eigen::LLT<Matrix> nfac(normal);
  if (nfac.info() != Eigen::Success)
    throw IllConditionedProblem("regularized normal matrix is not positive definite");
  return nfac.solve(phi.transpose() * y);
}

inline Vector kernel_initialize(const RcpProblem& problem, const KernelConfig& cfg) {
  return kernel_initialize(problem.phi(), problem.y(), kernel_matrix(problem.fir_length(), cfg),
                           cfg.gamma);
}

}  // namespace rcpadmm
