#pragma once

// Anderson acceleration over a fixed-point map xi -> G(xi), with the
// accept / backtrack safeguard on a scalar merit value.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <deque>
#include <limits>

#include "rcpadmm/errors.hpp"
#include "rcpadmm/hankel.hpp"

namespace rcpadmm {

/// Recent (xi, G(xi)) pairs. `aux` rides along and is combined with the same
/// coefficients as G (the solver uses it for the w belonging to each G value).
class AndersonWindow {
 public:
  struct Entry {
    Vector xi;
    Vector g;
    Vector aux;
    Vector eta() const { return g - xi; }
  };

  explicit AndersonWindow(std::size_t m_max = 5) : m_max_(m_max) {
    detail::require(m_max >= 1, "Anderson window needs m_max >= 1");
  }

  std::size_t m_max() const { return m_max_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

  void push(Vector xi, Vector g, Vector aux = Vector()) {
    entries_.push_back({std::move(xi), std::move(g), std::move(aux)});
    while (entries_.size() > m_max_ + 1) entries_.pop_front();
  }

  /// j = 0 is the newest entry.
  const Entry& back(std::size_t j) const { return entries_[entries_.size() - 1 - j]; }

  /// Largest usable history depth.
  std::size_t depth() const { return entries_.empty() ? 0 : entries_.size() - 1; }

  /// Columns eta^{k-j+1} - eta^{k-j}, j = 1..m.
  Matrix eta_differences(std::size_t m) const {
    detail::require(m <= depth(), "Anderson window holds too few entries");
    const Vector newest = back(0).eta();
    Matrix D(newest.size(), static_cast<Index>(m));
    Vector newer = newest;
    for (std::size_t j = 1; j <= m; ++j) {
      Vector older = back(j).eta();
      D.col(static_cast<Index>(j - 1)) = newer - older;
      newer = std::move(older);
    }
    return D;
  }

 private:
  std::size_t m_max_;
  std::deque<Entry> entries_;
};

inline constexpr double kAndersonDamping = 1e-10;

/// argmin_alpha ||eta - D alpha||^2. Falls back to Tikhonov damping
/// 1e-10 ||D||_F^2 when D is (nearly) rank deficient.
inline Vector anderson_coefficients(const Vector& eta, const Matrix& D) {
  const Index m = D.cols();
  if (m == 0) return Vector();
  const double scale = D.squaredNorm();
  if (scale == 0.0) return Vector::Zero(m);

  const Vector sv = Eigen::JacobiSVD<Matrix>(D).singularValues();
  if (sv(m - 1) > 1e-8 * sv(0)) return D.colPivHouseholderQr().solve(eta);

  const double tau = std::sqrt(kAndersonDamping * scale);
  Matrix A(D.rows() + m, m);
  A << D, tau * Matrix::Identity(m, m);
  Vector b = Vector::Zero(D.rows() + m);
  b.head(D.rows()) = eta;
  return A.householderQr().solve(b);
}

inline Vector anderson_coefficients(const AndersonWindow& window, std::size_t m) {
  return anderson_coefficients(window.back(0).eta(), window.eta_differences(m));
}

struct AndersonCombination {
  Vector xi;
  Vector aux;
};

/// xi_AA = G(xi^k) - sum_j alpha_j [G(xi^{k-j+1}) - G(xi^{k-j})]; aux likewise.
inline AndersonCombination anderson_combine(const AndersonWindow& window, const Vector& alpha) {
  const auto m = static_cast<std::size_t>(alpha.size());
  detail::require(m <= window.depth(), "anderson_combine: not enough history");
  AndersonCombination out{window.back(0).g, window.back(0).aux};
  const bool with_aux = out.aux.size() > 0;
  for (std::size_t j = 1; j <= m; ++j) {
    const auto& newer = window.back(j - 1);
    const auto& older = window.back(j);
    const double a = alpha(static_cast<Index>(j - 1));
    out.xi -= a * (newer.g - older.g);
    if (with_aux) out.aux -= a * (newer.aux - older.aux);
  }
  return out;
}

struct FixedPointOptions {
  bool accelerate = true;
  std::size_t m_max = 5;
  std::size_t k_max = 500;
  double eps_tol = 1e-10;
};

struct FixedPointOutcome {
  Vector xi_rec;
  Vector aux_rec;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Accelerated fixed-point loop with fallback.
///
/// `map.evaluate(xi, aux)` returns an object with members `g`, `aux` and
/// `eps`. `map.accepted(eval, k, reset)` runs after every accepted evaluation
/// (the place for penalty updates); `reset` is true when the evaluation was
/// accepted only because the previous attempt had been rejected.
/// `map.rejected(eval, k)` runs after a backtrack. Without acceleration every
/// evaluation is accepted.
template <class Map>
FixedPointOutcome run_fixed_point(Map& map, Vector xi, Vector aux, const FixedPointOptions& opt) {
  detail::require(opt.k_max >= 1, "k_max must be at least 1");
  detail::require(opt.eps_tol > 0.0, "eps_tol must be positive");
  AndersonWindow window(std::max<std::size_t>(opt.m_max, 1));
  FixedPointOutcome out;
  double eps_prev = std::numeric_limits<double>::infinity();
  bool reset = false;
  std::size_t k = 0;

  while (true) {
    auto eval = map.evaluate(xi, aux);
    ++out.evaluations;
    const double eps = eval.eps;
    const bool accept = !opt.accelerate || reset || eps < eps_prev;
    if (accept) {
      const bool forced = opt.accelerate && reset && !(eps < eps_prev);
      out.xi_rec = eval.g;
      out.aux_rec = eval.aux;
      eps_prev = eps;
      reset = false;
      if (opt.accelerate) {
        window.push(std::move(xi), eval.g, eval.aux);
        const std::size_t m = std::min({opt.m_max, k, window.depth()});
        if (m >= 1) {
          AndersonCombination comb = anderson_combine(window, anderson_coefficients(window, m));
          xi = std::move(comb.xi);
          aux = std::move(comb.aux);
        } else {
          xi = eval.g;
          aux = eval.aux;
        }
      } else {
        xi = eval.g;
        aux = eval.aux;
      }
      map.accepted(eval, k, forced);
      ++k;
    } else {
      map.rejected(eval, k);
      xi = out.xi_rec;
      aux = out.aux_rec;
      reset = true;
    }
    if (eps < opt.eps_tol) {
      out.converged = true;
      break;
    }
    if (k >= opt.k_max) break;
  }
  out.iterations = k;
  return out;
}

}  // namespace rcpadmm
