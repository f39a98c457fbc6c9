#include <gtest/gtest.h>

#include <limits>

#include "support.hpp"

using namespace rcpadmm;
using namespace testing_support;

namespace {

// G(xi) = 0.5 xi + c, merit ||G(xi) - xi||.
struct LinearContraction {
  Vector c;
  struct Evaluation {
    Vector g, aux;
    double eps;
  };
  std::size_t accepted_count = 0;
  Evaluation evaluate(const Vector& xi, const Vector&) {
    Vector g = 0.5 * xi + c;
    const double eps = (g - xi).norm();
    return {std::move(g), Vector(), eps};
  }
  void accepted(const Evaluation&, std::size_t, bool) { ++accepted_count; }
  void rejected(const Evaluation&, std::size_t) {}
};

DriverConfig config(PenaltyStrategy s, bool accel, std::size_t k_max, double beta0 = 1.0) {
  DriverConfig c;
  c.strategy = s;
  c.acceleration = accel;
  c.k_max = k_max;
  c.beta0 = beta0;
  return c;
}

}  // namespace

TEST(AndersonWindow, CapacityAndOrdering) {
  AndersonWindow w(2);
  for (int i = 0; i < 5; ++i) w.push(Vector::Constant(1, i), Vector::Constant(1, 10 + i));
  EXPECT_EQ(w.size(), 3u);
  EXPECT_EQ(w.depth(), 2u);
  EXPECT_EQ(w.back(0).xi(0), 4.0);
  EXPECT_EQ(w.back(2).g(0), 12.0);
  EXPECT_THROW(AndersonWindow(0), InvalidArgument);
}

TEST(AndersonCoefficients, HandWorkedSingleColumn) {
  AndersonWindow w(1);
  // eta = g - xi: older [1,0], newer [2,0].
  w.push(Vector::Zero(2), Vector{{1.0, 0.0}});
  w.push(Vector::Zero(2), Vector{{2.0, 0.0}});
  const Vector a = anderson_coefficients(w, 1);
  ASSERT_EQ(a.size(), 1);
  EXPECT_NEAR(a(0), 2.0, 1e-14);
}

TEST(AndersonCoefficients, ZeroDifferenceColumnGivesZero) {
  const Vector a = anderson_coefficients(Vector{{1.0, 2.0}}, Matrix::Zero(2, 1));
  EXPECT_EQ(a(0), 0.0);
  Matrix D(3, 2);
  D << 1.0, 1.0, 0.0, 0.0, 0.0, 0.0;  // duplicated columns: damped branch
  const Vector b = anderson_coefficients(Vector{{2.0, 0.0, 0.0}}, D);
  EXPECT_TRUE(b.allFinite());
  EXPECT_NEAR((D * b)(0), 2.0, 1e-6);
}

TEST(AndersonCoefficients, ResidualOrthogonality) {
  std::mt19937_64 gen(71);
  const Matrix D = random_matrix(gen, 20, 4);
  const Vector eta = random_vector(gen, 20);
  const Vector a = anderson_coefficients(eta, D);
  EXPECT_LT((D.transpose() * (eta - D * a)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(AndersonCombine, ZeroCoefficientsGivePlainStep) {
  AndersonWindow w(2);
  w.push(Vector{{0.0}}, Vector{{1.0}});
  w.push(Vector{{1.0}}, Vector{{3.0}});
  EXPECT_EQ(anderson_combine(w, Vector::Zero(1)).xi, Vector{{3.0}});
}

TEST(AndersonCombine, OneTermArithmetic) {
  AndersonWindow w(1);
  w.push(Vector{{0.0, 0.0}}, Vector{{1.0, 5.0}}, Vector{{7.0}});
  w.push(Vector{{1.0, 1.0}}, Vector{{3.0, 2.0}}, Vector{{9.0}});
  const AndersonCombination c = anderson_combine(w, Vector{{2.0}});
  EXPECT_EQ(c.xi, (Vector{{2.0 * 1.0 - 3.0, 2.0 * 5.0 - 2.0}}));
  EXPECT_EQ(c.aux, Vector{{2.0 * 7.0 - 9.0}});
}

TEST(FixedPoint, LinearContractionAccelerationVersusPlain) {
  const Vector c{{1.0, -2.0, 0.5}};
  FixedPointOptions opt;
  opt.eps_tol = 1e-10;
  opt.k_max = 1000;
  opt.m_max = 1;

  LinearContraction plain{c};
  opt.accelerate = false;
  const FixedPointOutcome p = run_fixed_point(plain, Vector::Zero(3), Vector(), opt);
  ASSERT_TRUE(p.converged);
  EXPECT_GE(p.iterations, 20u);

  LinearContraction accel{c};
  opt.accelerate = true;
  const FixedPointOutcome a = run_fixed_point(accel, Vector::Zero(3), Vector(), opt);
  ASSERT_TRUE(a.converged);
  EXPECT_LE(a.iterations, 3u);
  EXPECT_LT((a.xi_rec - 2.0 * c).norm(), 1e-9);
}

TEST(FixedPoint, StopsAtIterationBudget) {
  LinearContraction m{Vector{{1.0}}};
  FixedPointOptions opt;
  opt.accelerate = false;
  opt.k_max = 5;
  opt.eps_tol = 1e-300;
  const FixedPointOutcome out = run_fixed_point(m, Vector::Zero(1), Vector(), opt);
  EXPECT_FALSE(out.converged);
  EXPECT_EQ(out.iterations, 5u);
  EXPECT_EQ(out.evaluations, 5u);
}

// Same updates written out with no Anderson machinery.
TEST(Driver, AccelerationOffIsBitwiseThePlainLoop) {
  for (const PenaltyStrategy& s :
       {PenaltyStrategy{penalty::SelfAdaptive{}}, PenaltyStrategy{penalty::ResidualBased{}},
        PenaltyStrategy{penalty::Multiplicative{}}, PenaltyStrategy{penalty::Constant{}}}) {
    const auto inst = benchmark_instance(5);
    const RcpProblem& p = inst.problem;
    const DriverConfig cfg = config(s, false, 150);
    const SolveResult res = solve(p, inst.theta0, cfg);

    const AdmmIterate init = initial_iterate(p, inst.theta0, cfg.beta0);
    AdmmState xi = init.xi;
    Vector w = init.w;
    double beta = cfg.beta0;
    std::vector<IterationRecord> ref;
    for (std::size_t k = 0; k < cfg.k_max; ++k) {
      const AdmmIterate prev{xi, w, beta, k};
      const StepResult st = admm_step(xi, beta, p);
      const SvdSensitivity sens = w_sensitivity(st.svd, xi.theta, xi.mu, beta, st.w.tail(p.samples()), p);
      const IncrementDiagnostics diag = increment_diagnostics(prev, st.w, sens.dw(), p);
      IterationRecord r;
      r.iter = k;
      r.beta = beta;
      r.primal_sq = st.report.primal_sq;
      r.dual_sq = st.report.dual_sq;
      r.combined = st.report.combined;
      r.objective = st.report.objective;
      r.dldbeta = diag.derivative;
      ref.push_back(r);
      beta = update_penalty(s, beta, st.report, diag);
      xi = st.next;
      w = st.w;
      if (st.report.combined < cfg.eps_tol) break;
    }
    ASSERT_EQ(res.trace.size(), ref.size()) << strategy_name(s);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(res.trace[i].beta, ref[i].beta);
      EXPECT_EQ(res.trace[i].primal_sq, ref[i].primal_sq);
      EXPECT_EQ(res.trace[i].dual_sq, ref[i].dual_sq);
      EXPECT_EQ(res.trace[i].combined, ref[i].combined);
      EXPECT_EQ(res.trace[i].objective, ref[i].objective);
      EXPECT_EQ(res.trace[i].dldbeta, ref[i].dldbeta);
      EXPECT_TRUE(res.trace[i].accepted);
    }
    EXPECT_EQ(res.theta, xi.theta) << strategy_name(s);
    EXPECT_EQ(res.final_beta, beta);
  }
}

TEST(Driver, AcceptanceTestAndBacktracking) {
  for (std::uint64_t seed : {1u, 2u}) {
    const auto inst = benchmark_instance(seed);
    const RcpProblem& p = inst.problem;
    const RecordedRun run = recorded_run(inst, config(penalty::SelfAdaptive{}, true, 150));
    ASSERT_EQ(run.states.size(), run.trace.size());
    double eps_prev = std::numeric_limits<double>::infinity();
    std::size_t last_acc = 0, rejections = 0;
    for (std::size_t i = 0; i < run.trace.size(); ++i) {
      const IterationRecord& r = run.trace[i];
      if (r.accepted) {
        if (r.reset) {
          ASSERT_GT(i, 0u);
          EXPECT_FALSE(run.trace[i - 1].accepted);  // reset only right after a backtrack
          EXPECT_GE(r.combined, eps_prev);
        } else {
          EXPECT_LT(r.combined, eps_prev) << "seed " << seed << " record " << i;
        }
        eps_prev = r.combined;
        last_acc = i;
      } else {
        ++rejections;
        EXPECT_GE(r.combined, eps_prev);
        // The next evaluation restarts from the recorded G-value with the same beta.
        ASSERT_LT(i + 1, run.states.size());
        const EvaluatedState& a = run.states[last_acc];
        const Vector g = admm_step(AdmmState::unpack(a.xi, p), a.beta, p).next.pack();
        EXPECT_EQ(run.states[i + 1].xi, g);
        EXPECT_EQ(run.states[i + 1].beta, run.states[i].beta);
        EXPECT_EQ(run.trace[i + 1].iter, r.iter);
      }
    }
    EXPECT_GT(rejections, 0u);
  }
}

TEST(Driver, PenaltyChangesOnlyAfterAcceptedSteps) {
  const auto inst = benchmark_instance(3);
  const RecordedRun run = recorded_run(inst, config(penalty::SelfAdaptive{}, true, 120));
  for (std::size_t i = 0; i + 1 < run.trace.size(); ++i) {
    if (!run.trace[i].accepted) {
      EXPECT_EQ(run.trace[i + 1].beta, run.trace[i].beta);
    }
  }
}

TEST(Driver, ReturnsThetaOfLastAcceptedRecord) {
  const auto inst = benchmark_instance(4);
  const RcpProblem& p = inst.problem;
  const DriverConfig cfg = config(penalty::SelfAdaptive{}, true, 80);
  const SolveResult res = solve(p, inst.theta0, cfg);
  const RecordedRun run = recorded_run(inst, cfg);
  std::size_t last = 0;
  for (std::size_t i = 0; i < run.trace.size(); ++i)
    if (run.trace[i].accepted) last = i;
  const EvaluatedState& s = run.states[last];
  EXPECT_EQ(res.theta, admm_step(AdmmState::unpack(s.xi, p), s.beta, p).next.theta);
  EXPECT_EQ(res.iterations, 80u);
  EXPECT_EQ(res.reason, Termination::MaxIterations);
  std::size_t rejected = 0;
  for (const auto& r : res.trace) rejected += r.accepted ? 0 : 1;
  EXPECT_EQ(res.trace.size(), 80u + rejected);
}

TEST(Driver, AcceleratedIteratesKeepDualsOrthogonalToQ) {
  const auto inst = benchmark_instance(6);
  const RcpProblem& p = inst.problem;
  const Matrix Q = dense_Q(p);
  const RecordedRun run = recorded_run(inst, config(penalty::SelfAdaptive{}, true, 100));
  for (const auto& s : run.states) {
    const AdmmState xi = AdmmState::unpack(s.xi, p);
    EXPECT_LE((Q.transpose() * xi.mu).lpNorm<Eigen::Infinity>(), 1e-8 * (1.0 + xi.mu.lpNorm<Eigen::Infinity>()));
    const Vector oracle = -pinv_solve(Q, s.w + p.y_tilde());
    EXPECT_LE((xi.theta - oracle).norm(), 1e-8 * (1.0 + xi.theta.norm()));
  }
}

TEST(Driver, ConvergesOnExactFixture) {
  std::mt19937_64 gen(72);
  const Index N = 60, l = 16, n = 6;
  Vector theta(l);
  for (Index k = 0; k < l; ++k) theta(k) = std::pow(0.8, k + 1.0) + 0.3 * std::pow(-0.5, k + 1.0);
  const Matrix phi = build_phi(random_vector(gen, N), l);
  const RcpProblem p(phi, phi * theta, HankelDims{l, n}, 2);
  const SolveResult res = solve(p, Vector(theta + 0.01 * random_vector(gen, l)),
                                config(penalty::Constant{}, false, 2000, 10.0));
  EXPECT_EQ(res.reason, Termination::Converged);
  EXPECT_LT(res.trace.back().combined, 1e-10);
  EXPECT_LT((res.theta - theta).norm(), 1e-4 * theta.norm());
}

TEST(Driver, NumericFailureReturnsPartialResult) {
  const auto inst = benchmark_instance(1);
  const RcpProblem& p = inst.problem;
  AdmmIterate init = initial_iterate(p, inst.theta0, 1.0);
  init.xi.mu(0) = std::numeric_limits<double>::quiet_NaN();
  const SolveResult res = solve(p, init, config(penalty::Constant{}, false, 10));
  EXPECT_EQ(res.reason, Termination::NumericFailure);
  EXPECT_FALSE(res.message.empty());
  EXPECT_EQ(res.theta, init.xi.theta);
  EXPECT_TRUE(res.trace.empty());
}

TEST(Driver, InvalidConfigurationThrows) {
  const auto inst = benchmark_instance(1);
  DriverConfig cfg;
  cfg.k_max = 0;
  EXPECT_THROW(solve(inst.problem, inst.theta0, cfg), InvalidArgument);
  cfg = DriverConfig{};
  cfg.beta0 = -1.0;
  EXPECT_THROW(solve(inst.problem, inst.theta0, cfg), InvalidArgument);
}
