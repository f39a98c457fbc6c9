#pragma once

// Analytic derivatives of the w-update with respect to the penalty.
//
// Omega(beta) = -H_n(theta) + Lambda / beta = U Sigma V^T, so
// dOmega/dbeta = -Lambda / beta^2. The factor derivatives follow from
// first-order SVD perturbation; Z = U (I_r o Sigma) V^T is differentiated by
// the product rule with the truncation selector held fixed.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>

#include "rcpadmm/admm.hpp"
#include "rcpadmm/errors.hpp"
#include "rcpadmm/hankel.hpp"
#include "rcpadmm/problem.hpp"

namespace rcpadmm {

inline constexpr double kDegeneracyTolerance = 1e-10;

/// Theta = U^T (dOmega/dbeta) V = -(1/beta^2) U^T Lambda V.
inline Matrix theta_matrix(const SvdTriple& svd, const Matrix& Lambda, double beta) {
  detail::require(beta > 0.0, "theta_matrix: penalty must be positive");
  return -(svd.U.transpose() * Lambda * svd.V) / (beta * beta);
}

struct GainMatrix {
  Matrix G;
  bool degenerate = false;
};

/// G_ij = 1 / (sigma_j^2 - sigma_i^2) off the diagonal, 0 on it. Flags (does
/// not throw) when two singular values are closer than 1e-10 sigma_1.
inline GainMatrix gain_matrix(const Vector& sigma) {
  const Index n = sigma.size();
  GainMatrix out;
  out.G = Matrix::Zero(n, n);
  const double floor = kDegeneracyTolerance * (n > 0 ? sigma(0) : 0.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if (std::abs(sigma(i) - sigma(j)) <= floor) out.degenerate = true;
      out.G(i, j) = 1.0 / (sigma(j) * sigma(j) - sigma(i) * sigma(i));
    }
  }
  return out;
}

struct SvdFactorDerivatives {
  Matrix dU;
  Vector dSigma;
  Matrix dV;
};

/// dSigma = I o Theta
/// dU = U (G o [Theta Sigma + Sigma Theta^T]) + (I - U U^T) dOmega V Sigma^{-1}
/// dV = V (G o [Sigma Theta + Theta^T Sigma]) + (I - V V^T) dOmega^T U Sigma^{-1}
inline SvdFactorDerivatives svd_derivatives(const SvdTriple& svd, const Matrix& Theta,
                                            const GainMatrix& gain, const Matrix& dOmega) {
  const Vector& s = svd.sigma;
  const Index n = s.size();
  if (gain.degenerate) throw SensitivityUnavailable("repeated singular values");
  if (!(s(n - 1) > kDegeneracyTolerance * s(0)))
    throw SensitivityUnavailable("singular value below degeneracy floor");

  const auto S = s.asDiagonal();
  const Vector s_inv = s.cwiseInverse();
  SvdFactorDerivatives d;
  d.dSigma = Theta.diagonal();

  const Matrix left = gain.G.cwiseProduct(Theta * S + S * Theta.transpose());
  const Matrix right = gain.G.cwiseProduct(S * Theta + Theta.transpose() * S);

  // (I - U U^T) X without forming the m x m projector.
  const Matrix XU = dOmega * svd.V * s_inv.asDiagonal();
  d.dU = svd.U * left + XU - svd.U * (svd.U.transpose() * XU);
  const Matrix XV = dOmega.transpose() * svd.U * s_inv.asDiagonal();
  d.dV = svd.V * right + XV - svd.V * (svd.V.transpose() * XV);
  return d;
}

/// dZ = dU (I_r o Sigma) V^T + U (I_r o dSigma) V^T + U (I_r o Sigma) dV^T.
inline Matrix dZ_dbeta(const SvdTriple& svd, const SvdFactorDerivatives& d, Index r) {
  detail::require(r >= 1 && r <= svd.sigma.size(), "dZ_dbeta: rank out of range");
  const auto Ur = svd.U.leftCols(r);
  const auto Vr = svd.V.leftCols(r);
  const auto Sr = svd.sigma.head(r).asDiagonal();
  return d.dU.leftCols(r) * Sr * Vr.transpose() +
         Ur * d.dSigma.head(r).asDiagonal() * Vr.transpose() +
         Ur * Sr * d.dV.leftCols(r).transpose();
}

/// de/dbeta = (y - e^{k+1} - Phi theta^k) / (beta + 2).
inline Vector de_dbeta(const Vector& e_next, const Vector& theta, double beta,
                       const RcpProblem& problem) {
  detail::require(beta > 0.0, "de_dbeta: penalty must be positive");
  return (problem.y() - e_next - problem.phi() * theta) / (beta + 2.0);
}

struct SvdSensitivity {
  Matrix Theta;
  GainMatrix gain;
  std::optional<SvdFactorDerivatives> factors;
  Matrix dZ;
  Vector de;
  bool degenerate = false;

  /// Stacked dw/dbeta = [vec(dZ); de], present only when not degenerate.
  std::optional<Vector> dw() const {
    if (degenerate) return std::nullopt;
    Vector out(dZ.size() + de.size());
    out << dZ.reshaped(), de;
    return out;
  }
};

/// Sensitivity of the w-update taken at (theta, mu, beta) whose Omega has SVD `svd`.
inline SvdSensitivity w_sensitivity(const SvdTriple& svd, const Vector& theta, const Vector& mu,
                                    double beta, const Vector& e_next,
                                    const RcpProblem& problem) {
  SvdSensitivity out;
  const Matrix Lambda = problem.z_block(mu);
  const Matrix dOmega = -Lambda / (beta * beta);
  out.Theta = theta_matrix(svd, Lambda, beta);
  out.gain = gain_matrix(svd.sigma);
  out.de = de_dbeta(e_next, theta, beta, problem);
  try {
    out.factors = svd_derivatives(svd, out.Theta, out.gain, dOmega);
    out.dZ = dZ_dbeta(svd, *out.factors, problem.rank());
  } catch (const SensitivityUnavailable&) {
    out.degenerate = true;
  }
  return out;
}

}  // namespace rcpadmm
