#pragma once

// Penalty update policies, including the rule driven by the sign of the
// derivative of the augmented-Lagrangian increment with respect to beta.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>

#include "rcpadmm/admm.hpp"
#include "rcpadmm/errors.hpp"
#include "rcpadmm/problem.hpp"

namespace rcpadmm {

namespace penalty {

struct Constant {};

/// beta <- min(rho * beta, beta_max).
struct Multiplicative {
  double rho = 1.01;
  double beta_max = 100.0;
};

/// Primal/dual balancing with dead zone kappa.
struct ResidualBased {
  double kappa = 10.0;
  double rho_inc = 1.02;
  double rho_dec = 1.02;
};

/// Increase when dDeltaL/dbeta < 0, decrease when > 0, hold otherwise.
struct SelfAdaptive {
  double rho_inc = 1.05;
  double rho_dec = 1.02;
};

}  // namespace penalty

using PenaltyStrategy = std::variant<penalty::Constant, penalty::Multiplicative,
                                     penalty::ResidualBased, penalty::SelfAdaptive>;

inline constexpr double kBetaFloor = 1e-6;
inline constexpr double kBetaCeiling = 1e8;

inline void validate(const PenaltyStrategy& strategy) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, penalty::Multiplicative>) {
          detail::require(s.rho > 1.0, "multiplicative: rho must exceed 1");
          detail::require(s.beta_max > 0.0, "multiplicative: beta_max must be positive");
        } else if constexpr (std::is_same_v<T, penalty::ResidualBased>) {
          detail::require(s.kappa > 1.0, "residual: kappa must exceed 1");
          detail::require(s.rho_inc >= 1.0 && s.rho_dec >= 1.0,
                          "residual: rho_inc and rho_dec must be at least 1");
        } else if constexpr (std::is_same_v<T, penalty::SelfAdaptive>) {
          detail::require(s.rho_dec > 1.0, "self-adaptive: rho_dec must exceed 1");
          detail::require(s.rho_inc > s.rho_dec, "self-adaptive: rho_inc must exceed rho_dec");
        }
      },
      strategy);
}

inline std::string strategy_name(const PenaltyStrategy& strategy) {
  static const char* names[] = {"constant", "multiplicative", "residual", "self-adaptive"};
  return names[strategy.index()];
}

inline bool needs_increment_derivative(const PenaltyStrategy& strategy) {
  return std::holds_alternative<penalty::SelfAdaptive>(strategy);
}

struct IncrementTerms {
  double objective_change = 0.0;  // ||e+||^2 - ||e||^2
  double linear = 0.0;            // -[mu - beta r]^T (w+ - w)
  double step = 0.0;              // beta ||P(w+ - w)||^2 / 2
  double feasibility = 0.0;       // beta ||P(w+ + y_tilde)||^2
};

struct IncrementDiagnostics {
  double delta_L = 0.0;
  std::optional<double> derivative;
  IncrementTerms terms;
};

/// Increment of L over one step with theta+ and mu+ eliminated through
/// Q^T mu = 0 and theta = -(Q^T Q)^{-1} Q^T (w + y_tilde).
inline IncrementDiagnostics delta_L(const AdmmIterate& prev, const Vector& w_next,
                                    const RcpProblem& problem) {
  const Index N = problem.samples();
  const Vector r = primal_residual(prev.w, prev.xi.theta, problem);
  const Vector dw = w_next - prev.w;
  IncrementDiagnostics d;
  d.terms.objective_change = w_next.tail(N).squaredNorm() - prev.w.tail(N).squaredNorm();
  d.terms.linear = -(prev.xi.mu - prev.beta * r).dot(dw);
  d.terms.step = 0.5 * prev.beta * problem.projector().apply(dw).squaredNorm();
  d.terms.feasibility =
      prev.beta * problem.projector().apply(w_next + problem.y_tilde()).squaredNorm();
  d.delta_L = d.terms.objective_change + d.terms.linear + d.terms.step + d.terms.feasibility;
  return d;
}

/// dDeltaL/dbeta =
///   dw^T [ [2 e+; 0] - mu + beta (r + P (3 w+ - w + 2 y_tilde)) ]
///   + r^T (w+ - w) + ||P (w+ - w)||^2 / 2 + ||P (w+ + y_tilde)||^2.
inline double delta_L_dbeta(const AdmmIterate& prev, const Vector& w_next, const Vector& dw,
                            const RcpProblem& problem) {
  detail::require(dw.size() == problem.stacked_size(), "delta_L_dbeta: dw has wrong size");
  const Index N = problem.samples();
  const auto& P = problem.projector();
  const Vector& yt = problem.y_tilde();
  const Vector r = primal_residual(prev.w, prev.xi.theta, problem);
  const Vector step = w_next - prev.w;

  Vector g = -prev.xi.mu + prev.beta * (r + P.apply(3.0 * w_next - prev.w + 2.0 * yt));
  g.tail(N) += 2.0 * w_next.tail(N);
  return dw.dot(g) + r.dot(step) + 0.5 * P.apply(step).squaredNorm() +
         P.apply(w_next + yt).squaredNorm();
}

inline double delta_L_dbeta(const AdmmIterate& prev, const Vector& w_next,
                            const std::optional<Vector>& dw, const RcpProblem& problem) {
  if (!dw) throw SensitivityUnavailable("delta_L_dbeta: w-update derivative unavailable");
  return delta_L_dbeta(prev, w_next, *dw, problem);
}

inline IncrementDiagnostics increment_diagnostics(const AdmmIterate& prev, const Vector& w_next,
                                                  const std::optional<Vector>& dw,
                                                  const RcpProblem& problem) {
  IncrementDiagnostics d = delta_L(prev, w_next, problem);
  if (dw) d.derivative = delta_L_dbeta(prev, w_next, *dw, problem);
  return d;
}

inline double clamp_beta(double beta) { return std::clamp(beta, kBetaFloor, kBetaCeiling); }

inline double update_penalty(const PenaltyStrategy& strategy, double beta,
                             const ResidualReport& report, const IncrementDiagnostics& diag) {
  detail::require(beta > 0.0, "update_penalty: penalty must be positive");
  const double next = std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, penalty::Constant>) {
          return beta;
        } else if constexpr (std::is_same_v<T, penalty::Multiplicative>) {
          return std::min(s.rho * beta, s.beta_max);
        } else if constexpr (std::is_same_v<T, penalty::ResidualBased>) {
          if (report.primal_sq > s.kappa * report.dual_sq) return beta * s.rho_inc;
          if (report.dual_sq > s.kappa * report.primal_sq) return beta / s.rho_dec;
          return beta;
        } else {
          if (!diag.derivative) return beta;
          const double g = *diag.derivative;
          if (std::abs(g) <= 1e-12 * (1.0 + std::abs(diag.delta_L))) return beta;
          return g < 0.0 ? beta * s.rho_inc : beta / s.rho_dec;
        }
      },
      strategy);
  return clamp_beta(next);
}

}  // namespace rcpadmm
