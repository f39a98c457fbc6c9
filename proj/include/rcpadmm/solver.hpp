#pragma once

// Outer ADMM loop: penalty adaptation, optional Anderson acceleration with
// combined-residual fallback, and per-iteration diagnostics.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rcpadmm/admm.hpp"
#include "rcpadmm/anderson.hpp"
#include "rcpadmm/errors.hpp"
#include "rcpadmm/penalty.hpp"
#include "rcpadmm/problem.hpp"
#include "rcpadmm/svd_calculus.hpp"

namespace rcpadmm {

struct DriverConfig {
  PenaltyStrategy strategy = penalty::SelfAdaptive{};
  double beta0 = 1.0;
  bool acceleration = true;
  std::size_t m_max = 5;
  std::size_t k_max = 500;
  double eps_tol = 1e-10;

  void validate() const {
    rcpadmm::validate(strategy);
    detail::require(beta0 > 0.0, "beta0 must be positive");
    detail::require(m_max >= 1, "m_max must be at least 1");
    detail::require(k_max >= 1, "k_max must be at least 1");
    detail::require(eps_tol > 0.0, "eps_tol must be positive");
  }
};

struct IterationRecord {
  std::size_t iter = 0;
  double beta = 0.0;
  double primal_sq = 0.0;
  double dual_sq = 0.0;
  double combined = 0.0;
  double objective = 0.0;
  bool accepted = true;
  bool reset = false;  // accepted through the reset flag, not the eps test
  std::optional<double> dldbeta;
};

enum class Termination { Converged, MaxIterations, NumericFailure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::NumericFailure: return "numeric_failure";
  }
  return "unknown";
}

struct SolveResult {
  Vector theta;
  std::vector<IterationRecord> trace;
  Termination reason = Termination::MaxIterations;
  std::string message;
  std::size_t iterations = 0;
  double final_beta = 0.0;
};

namespace detail {

class AdmmFixedPointMap {
 public:
  struct Evaluation {
    Vector g;
    Vector aux;
    double eps = 0.0;
    ResidualReport report;
    IncrementDiagnostics diag;
  };

  AdmmFixedPointMap(const RcpProblem& problem, const DriverConfig& cfg)
      : problem_(problem), cfg_(cfg), beta_(cfg.beta0) {}

  Evaluation evaluate(const Vector& xi, const Vector& w) {
    AdmmIterate prev{AdmmState::unpack(xi, problem_), w, beta_, 0};
    StepResult step = admm_step(prev.xi, beta_, problem_);
    const SvdSensitivity sens = w_sensitivity(step.svd, prev.xi.theta, prev.xi.mu, beta_,
                                              step.w.tail(problem_.samples()), problem_);
    Evaluation ev;
    ev.diag = increment_diagnostics(prev, step.w, sens.dw(), problem_);
    ev.report = step.report;
    ev.eps = step.report.combined;
    ev.g = step.next.pack();
    ev.aux = std::move(step.w);
    return ev;
  }

  void accepted(const Evaluation& ev, std::size_t k, bool reset = false) {
    record(ev, k, true);
    trace_.back().reset = reset;
    last_accepted_theta_ = ev.g.head(problem_.fir_length());
    beta_ = update_penalty(cfg_.strategy, beta_, ev.report, ev.diag);
  }

  void rejected(const Evaluation& ev, std::size_t k) { record(ev, k, false); }

  double beta() const { return beta_; }
  const Vector& last_accepted_theta() const { return last_accepted_theta_; }
  std::vector<IterationRecord>& trace() { return trace_; }

 private:
  void record(const Evaluation& ev, std::size_t k, bool accepted) {
    IterationRecord rec;
    rec.iter = k;
    rec.beta = ev.report.beta;
    rec.primal_sq = ev.report.primal_sq;
    rec.dual_sq = ev.report.dual_sq;
    rec.combined = ev.report.combined;
    rec.objective = ev.report.objective;
    rec.accepted = accepted;
    rec.dldbeta = ev.diag.derivative;
    trace_.push_back(rec);
  }

  const RcpProblem& problem_;
  const DriverConfig& cfg_;
  double beta_;
  Vector last_accepted_theta_;
  std::vector<IterationRecord> trace_;
};

}  // namespace detail

/// Runs the loop from `init` (its beta is ignored in favour of cfg.beta0).
/// Returns the theta block of the last accepted un-accelerated iterate.
inline SolveResult solve(const RcpProblem& problem, const AdmmIterate& init,
                         const DriverConfig& cfg) {
  cfg.validate();
  detail::require(init.xi.theta.size() == problem.fir_length() &&
                      init.xi.mu.size() == problem.stacked_size() &&
                      init.w.size() == problem.stacked_size(),
                  "solve: initial iterate does not match problem dimensions");
  detail::AdmmFixedPointMap map(problem, cfg);
  FixedPointOptions opt{cfg.acceleration, cfg.m_max, cfg.k_max, cfg.eps_tol};

  SolveResult res;
  try {
    FixedPointOutcome out = run_fixed_point(map, init.xi.pack(), init.w, opt);
    res.theta = out.xi_rec.head(problem.fir_length());
    res.iterations = out.iterations;
    res.reason = out.converged ? Termination::Converged : Termination::MaxIterations;
  } catch (const NumericFailure& err) {
    res.reason = Termination::NumericFailure;
    res.message = err.what();
    res.theta = map.last_accepted_theta().size() > 0 ? map.last_accepted_theta() : init.xi.theta;
    for (auto it = map.trace().rbegin(); it != map.trace().rend(); ++it)
      if (it->accepted) {
        res.iterations = it->iter + 1;
        break;
      }
  }
  res.final_beta = map.beta();
  res.trace = std::move(map.trace());
  return res;
}

inline SolveResult solve(const RcpProblem& problem, const Vector& theta0, const DriverConfig& cfg) {
  return solve(problem, initial_iterate(problem, theta0, cfg.beta0), cfg);
}

}  // namespace rcpadmm
