#pragma once

// One ADMM sweep in the stacked form
//   w-update (rank-r Z and closed-form e), theta-update, dual update,
// together with residuals and the augmented Lagrangian.

#include <Eigen/Dense>

#include <cmath>

#include "rcpadmm/errors.hpp"
#include "rcpadmm/hankel.hpp"
#include "rcpadmm/problem.hpp"

namespace rcpadmm {

/// Fixed-point variable xi = [theta; mu] with mu = [vec(Lambda); lambda].
struct AdmmState {
  Vector theta;
  Vector mu;

  Vector pack() const {
    Vector xi(theta.size() + mu.size());
    xi << theta, mu;
    return xi;
  }

  static AdmmState unpack(const Vector& xi, const RcpProblem& problem) {
    return {xi.head(problem.fir_length()), xi.tail(problem.stacked_size())};
  }
};

/// Full solver state at iteration k; w pairs with xi for the increment of L.
struct AdmmIterate {
  AdmmState xi;
  Vector w;
  double beta = 1.0;
  std::size_t k = 0;
};

struct WUpdate {
  Vector w;
  SvdTriple svd;  // of Omega = -H_n(theta) + Lambda / beta
  bool degenerate = false;
};

struct ResidualReport {
  double primal_sq = 0.0;
  double dual_sq = 0.0;
  double combined = 0.0;
  double objective = 0.0;
  double beta = 0.0;
};

inline Matrix omega_matrix(const Vector& theta, const Vector& mu, double beta,
                           const RcpProblem& problem) {
  return -hankel_matrix(theta, problem.dims()) + problem.z_block(mu) / beta;
}

/// e-subproblem minimizer: stationarity of ||e||^2 + beta/2 ||e + Phi theta - y - lambda/beta||^2.
inline Vector e_update(const Vector& theta, const Vector& lambda, double beta,
                       const RcpProblem& problem) {
  return (beta * (problem.y() - problem.phi() * theta) + lambda) / (beta + 2.0);
}

inline WUpdate update_w(const Vector& theta, const Vector& mu, double beta,
                        const RcpProblem& problem) {
  detail::require(beta > 0.0, "update_w: penalty must be positive");
  TruncatedProjection proj =
      truncated_svd_projection(omega_matrix(theta, mu, beta, problem), problem.rank());
  WUpdate out;
  out.w.resize(problem.stacked_size());
  out.w.head(problem.lifted_size()) = proj.Z.reshaped();
  out.w.tail(problem.samples()) = e_update(theta, mu.tail(problem.samples()), beta, problem);
  out.svd = std::move(proj.svd);
  out.degenerate = proj.degenerate;
  return out;
}

/// theta = -(Q^T Q)^{-1} Q^T (w + y_tilde - mu / beta).
inline Vector update_theta(const Vector& w, const Vector& mu, double beta,
                           const RcpProblem& problem) {
  return -problem.projector().least_squares(w + problem.y_tilde() - mu / beta);
}

inline Vector primal_residual(const Vector& w, const Vector& theta, const RcpProblem& problem) {
  return w + problem.apply_Q(theta) + problem.y_tilde();
}

inline Vector update_duals(const Vector& w, const Vector& theta, const Vector& mu, double beta,
                           const RcpProblem& problem) {
  return mu - beta * primal_residual(w, theta, problem);
}

inline ResidualReport residuals(const Vector& theta_prev, const Vector& w_next,
                                const Vector& theta_next, double beta,
                                const RcpProblem& problem) {
  ResidualReport rep;
  rep.beta = beta;
  rep.primal_sq = primal_residual(w_next, theta_next, problem).squaredNorm();
  rep.dual_sq = (beta * problem.apply_Q(theta_next - theta_prev)).squaredNorm();
  rep.combined = beta * rep.primal_sq + rep.dual_sq / beta;
  rep.objective = w_next.tail(problem.samples()).squaredNorm();
  return rep;
}

struct StepResult {
  AdmmState next;
  Vector w;
  SvdTriple svd;
  bool degenerate = false;
  ResidualReport report;
};

/// xi^{k+1} = G(xi^k): w, then theta, then duals. The incoming w is never read.
inline StepResult admm_step(const AdmmState& xi, double beta, const RcpProblem& problem) {
  detail::require(beta > 0.0, "admm_step: penalty must be positive");
  WUpdate wu = update_w(xi.theta, xi.mu, beta, problem);
  StepResult out;
  out.next.theta = update_theta(wu.w, xi.mu, beta, problem);
  out.next.mu = update_duals(wu.w, out.next.theta, xi.mu, beta, problem);
  out.report = residuals(xi.theta, wu.w, out.next.theta, beta, problem);
  if (!out.next.theta.allFinite() || !out.next.mu.allFinite())
    throw NumericFailure("ADMM iterate became non-finite");
  out.w = std::move(wu.w);
  out.svd = std::move(wu.svd);
  out.degenerate = wu.degenerate;
  return out;
}

/// L(w, theta, mu; beta) = ||e||^2 - mu^T r + beta/2 ||r||^2, r = w + Q theta + y_tilde.
inline double augmented_lagrangian(const Vector& w, const Vector& theta, const Vector& mu,
                                   double beta, const RcpProblem& problem) {
  const Vector r = primal_residual(w, theta, problem);
  return w.tail(problem.samples()).squaredNorm() - mu.dot(r) + 0.5 * beta * r.squaredNorm();
}

/// Starting point built from an initial impulse-response estimate theta0:
///   Z = rank-r projection of -H_n(theta0), e = y - Phi theta0, mu = 0,
/// and theta re-solved from that w so the Q^T-relations hold from k = 0.
inline AdmmIterate initial_iterate(const RcpProblem& problem, const Vector& theta0, double beta0) {
  detail::require(theta0.size() == problem.fir_length(), "initial theta has wrong length");
  detail::require(beta0 > 0.0, "initial penalty must be positive");
  AdmmIterate it;
  it.beta = beta0;
  it.w.resize(problem.stacked_size());
  it.w.head(problem.lifted_size()) =
      truncated_svd_projection(-hankel_matrix(theta0, problem.dims()), problem.rank()).Z.reshaped();
  it.w.tail(problem.samples()) = problem.y() - problem.phi() * theta0;
  it.xi.mu = Vector::Zero(problem.stacked_size());
  it.xi.theta = update_theta(it.w, it.xi.mu, beta0, problem);
  return it;
}

}  // namespace rcpadmm
