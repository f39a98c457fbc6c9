#pragma once

// Fixtures and independent reference computations shared by the test suites.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

#include "rcpadmm/rcpadmm.hpp"

namespace testing_support {

using rcpadmm::Index;
using rcpadmm::Matrix;
using rcpadmm::Vector;

inline Vector random_vector(std::mt19937_64& gen, Index n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = d(gen);
  return v;
}

inline Matrix random_matrix(std::mt19937_64& gen, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = d(gen);
  return m;
}

/// Default benchmark instance: relay data of the reference plant, l=60, n=20, r=8.
inline rcpadmm::ProblemInstance benchmark_instance(std::uint64_t seed, Index fir_length = 60,
                                                   Index cols = 20, Index rank = 8) {
  rcpadmm::BenchmarkScenario scn;
  scn.seed = seed;
  return rcpadmm::make_instance(scn, rcpadmm::ProblemSettings{fir_length, cols, rank},
                                rcpadmm::KernelConfig{});
}

/// Small random problem with a white-noise input.
inline rcpadmm::RcpProblem random_problem(std::mt19937_64& gen, Index N = 40, Index l = 12,
                                          Index n = 5, Index r = 2) {
  const Vector u = random_vector(gen, N);
  const Vector y = random_vector(gen, N);
  return rcpadmm::RcpProblem(rcpadmm::build_phi(u, l), y, rcpadmm::HankelDims{l, n}, r);
}

// ----- dense reference implementations (no shared code paths) -------------

/// Dense Hankel from the 1-based definition H(i,j) = x(i+j-1).
inline Matrix dense_hankel(const Vector& x, Index n) {
  const Index rows = x.size() + 1 - n;
  Matrix H(rows, n);
  for (Index i = 1; i <= rows; ++i)
    for (Index j = 1; j <= n; ++j) H(i - 1, j - 1) = x(i + j - 2);
  return H;
}

/// Dense Q = [M; Phi] assembled entry by entry.
inline Matrix dense_Q(const rcpadmm::RcpProblem& p) {
  const Index l = p.fir_length();
  const Index n = p.dims().cols;
  const Index rows = p.dims().rows();
  Matrix Q = Matrix::Zero(rows * n + p.samples(), l);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < rows; ++i) Q(i + j * rows, i + j) = 1.0;
  Q.bottomRows(p.samples()) = p.phi();
  return Q;
}

inline Vector pinv_solve(const Matrix& A, const Vector& b) {
  return A.completeOrthogonalDecomposition().solve(b);
}

/// L = ||e||^2 - mu^T r + beta/2 ||r||^2 with r = w + Q theta + y_tilde.
inline double lagrangian(const rcpadmm::RcpProblem& p, const Matrix& Q, const Vector& w,
                         const Vector& theta, const Vector& mu, double beta) {
  Vector yt = Vector::Zero(w.size());
  yt.tail(p.samples()) = -p.y();
  const Vector r = w + Q * theta + yt;
  return w.tail(p.samples()).squaredNorm() - mu.dot(r) + 0.5 * beta * r.squaredNorm();
}

struct DenseStep {
  Vector w, theta, mu;
  Matrix Z;
  Vector e;
};

/// Five separate updates Z -> e -> theta -> Lambda -> lambda using dense algebra.
inline DenseStep five_update_step(const rcpadmm::RcpProblem& p, const Vector& theta,
                                  const Vector& mu, double beta) {
  const Index rows = p.dims().rows();
  const Index n = p.dims().cols;
  const Index lifted = rows * n;
  const Matrix Q = dense_Q(p);
  const Matrix Lambda = Eigen::Map<const Matrix>(mu.data(), rows, n);
  const Vector lambda = mu.tail(p.samples());

  DenseStep s;
  const Matrix A = -dense_hankel(theta, n) + Lambda / beta;
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector sig = svd.singularValues();
  for (Index i = p.rank(); i < sig.size(); ++i) sig(i) = 0.0;
  s.Z = svd.matrixU() * sig.asDiagonal() * svd.matrixV().transpose();
  s.e = (beta * (p.y() - p.phi() * theta) + lambda) / (beta + 2.0);

  s.w.resize(lifted + p.samples());
  s.w << Eigen::Map<const Vector>(s.Z.data(), lifted), s.e;
  Vector yt = Vector::Zero(s.w.size());
  yt.tail(p.samples()) = -p.y();
  s.theta = -pinv_solve(Q, s.w + yt - mu / beta);

  const Matrix Hn = dense_hankel(s.theta, n);
  const Matrix Lambda_next = Lambda - beta * (s.Z + Hn);
  const Vector lambda_next = lambda - beta * (s.e + p.phi() * s.theta - p.y());
  s.mu.resize(mu.size());
  s.mu << Eigen::Map<const Vector>(Lambda_next.data(), lifted), lambda_next;
  return s;
}

// ----- recording wrapper around the solver map -----------------------------

struct EvaluatedState {
  Vector xi;
  Vector w;
  double beta;
  std::size_t k;
};

/// Records the (xi, w, beta) at which every ADMM step is evaluated.
class RecordingMap {
 public:
  RecordingMap(const rcpadmm::RcpProblem& problem, const rcpadmm::DriverConfig& cfg)
      : inner_(problem, cfg) {}

  auto evaluate(const Vector& xi, const Vector& w) {
    states.push_back({xi, w, inner_.beta(), k_});
    return inner_.evaluate(xi, w);
  }
  template <class Ev>
  void accepted(const Ev& ev, std::size_t k, bool reset) {
    inner_.accepted(ev, k, reset);
    k_ = k + 1;
  }
  template <class Ev>
  void rejected(const Ev& ev, std::size_t k) {
    inner_.rejected(ev, k);
  }
  std::vector<rcpadmm::IterationRecord>& trace() { return inner_.trace(); }

  std::vector<EvaluatedState> states;

 private:
  rcpadmm::detail::AdmmFixedPointMap inner_;
  std::size_t k_ = 0;
};

struct RecordedRun {
  std::vector<EvaluatedState> states;
  std::vector<rcpadmm::IterationRecord> trace;
  rcpadmm::FixedPointOutcome outcome;
};

inline RecordedRun recorded_run(const rcpadmm::ProblemInstance& inst,
                                const rcpadmm::DriverConfig& cfg) {
  RecordingMap map(inst.problem, cfg);
  const rcpadmm::AdmmIterate init = rcpadmm::initial_iterate(inst.problem, inst.theta0, cfg.beta0);
  rcpadmm::FixedPointOptions opt{cfg.acceleration, cfg.m_max, cfg.k_max, cfg.eps_tol};
  RecordedRun run;
  run.outcome = rcpadmm::run_fixed_point(map, init.xi.pack(), init.w, opt);
  run.states = std::move(map.states);
  run.trace = std::move(map.trace());
  return run;
}

/// Increment of L over one full step taken at penalty b from the state s,
/// evaluated directly from the dense Lagrangian.
inline double direct_increment(const rcpadmm::RcpProblem& p, const Matrix& Q,
                               const EvaluatedState& s, double b) {
  const Index l = p.fir_length();
  const Vector theta = s.xi.head(l);
  const Vector mu = s.xi.tail(s.xi.size() - l);
  const DenseStep next = five_update_step(p, theta, mu, b);
  return lagrangian(p, Q, next.w, next.theta, next.mu, b) - lagrangian(p, Q, s.w, theta, mu, b);
}

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace testing_support
