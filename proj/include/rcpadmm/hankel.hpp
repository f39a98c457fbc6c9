#pragma once

// Hankel structure operators, the vec-lifting matrix, the complement
// projector of a tall full-column-rank matrix, and rank-r truncation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rcpadmm/errors.hpp"

namespace rcpadmm {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Shape of H_n(x) for a sequence of length `fir_length` with `cols` columns.
struct HankelDims {
  Index fir_length = 0;
  Index cols = 0;

  Index rows() const { return fir_length + 1 - cols; }
  Index lifted_size() const { return rows() * cols; }

  void validate() const {
    detail::require(cols >= 2, "Hankel column count must be at least 2");
    detail::require(rows() >= cols,
                    "Hankel matrix must be tall or square (l + 1 - n >= n), got l=" +
                        std::to_string(fir_length) + ", n=" + std::to_string(cols));
  }
};

/// Entry (i, j) is x[i + j] (0-based).
inline Matrix hankel_matrix(const Vector& x, const HankelDims& dims) {
  dims.validate();
  detail::require(x.size() == dims.fir_length,
                  "hankel_matrix: sequence length " + std::to_string(x.size()) +
                      " does not match l=" + std::to_string(dims.fir_length));
  Matrix H(dims.rows(), dims.cols);
  for (Index j = 0; j < dims.cols; ++j) H.col(j) = x.segment(j, dims.rows());
  return H;
}

/// M with M z = vec(H_n(z)) (column-major vec). Each row holds a single 1,
/// so only the source index of every row is stored.
class LiftingMatrix {
 public:
  LiftingMatrix() = default;

  explicit LiftingMatrix(const HankelDims& dims) : dims_(dims) {
    dims_.validate();
    source_.resize(static_cast<std::size_t>(dims_.lifted_size()));
    multiplicity_ = Vector::Zero(dims_.fir_length);
    for (Index j = 0; j < dims_.cols; ++j) {
      for (Index i = 0; i < dims_.rows(); ++i) {
        source_[static_cast<std::size_t>(i + j * dims_.rows())] = i + j;
        multiplicity_(i + j) += 1.0;
      }
    }
  }

  const HankelDims& dims() const { return dims_; }
  Index rows() const { return dims_.lifted_size(); }
  Index cols() const { return dims_.fir_length; }

  /// Source index into z of lifted row `row`.
  Index source(Index row) const { return source_[static_cast<std::size_t>(row)]; }

  /// Diagonal of M^T M (anti-diagonal counts).
  const Vector& multiplicity() const { return multiplicity_; }

  Vector apply(const Vector& z) const {
    detail::require(z.size() == cols(), "LiftingMatrix::apply: size mismatch");
    Vector out(rows());
    for (Index r = 0; r < rows(); ++r) out(r) = z(source(r));
    return out;
  }

  /// M^T v: sums of v over each anti-diagonal.
  template <class Derived>
  Vector apply_transpose(const Eigen::MatrixBase<Derived>& v) const {
    detail::require(v.size() == rows(), "LiftingMatrix::apply_transpose: size mismatch");
    Vector out = Vector::Zero(cols());
    for (Index r = 0; r < rows(); ++r) out(source(r)) += v(r);
    return out;
  }

  Matrix to_dense() const {
    Matrix M = Matrix::Zero(rows(), cols());
    for (Index r = 0; r < rows(); ++r) M(r, source(r)) = 1.0;
    return M;
  }

 private:
  HankelDims dims_;
  std::vector<Index> source_;
  Vector multiplicity_;
};

inline LiftingMatrix build_lifting_matrix(const HankelDims& dims) { return LiftingMatrix(dims); }

/// Thin SVD A = U diag(sigma) V^T with sigma sorted non-increasing.
struct SvdTriple {
  Matrix U;
  Vector sigma;
  Matrix V;

  Matrix reconstruct() const { return U * sigma.asDiagonal() * V.transpose(); }
};

struct TruncatedProjection {
  Matrix Z;
  SvdTriple svd;
  // sigma_r and sigma_{r+1} are (numerically) tied, so Z is not unique.
  bool degenerate = false;
};

namespace detail {

// Largest-magnitude entry of every U column is made positive; V follows.
inline void fix_singular_vector_signs(SvdTriple& svd) {
  for (Index j = 0; j < svd.U.cols(); ++j) {
    Index imax = 0;
    svd.U.col(j).cwiseAbs().maxCoeff(&imax);
    if (svd.U(imax, j) < 0.0) {
      svd.U.col(j) *= -1.0;
      svd.V.col(j) *= -1.0;
    }
  }
}

}  // namespace detail

inline SvdTriple thin_svd(const Matrix& A) {
  if (!A.allFinite()) throw NumericFailure("SVD input contains non-finite entries");
  Eigen::JacobiSVD<Matrix> solver(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) throw NumericFailure("SVD failed to converge");
  SvdTriple svd{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  detail::fix_singular_vector_signs(svd);
  return svd;
}

inline constexpr double kSpectrumTieTolerance = 1e-10;

/// Nearest rank-<=r matrix to A in Frobenius norm, plus the full thin SVD of A.
inline TruncatedProjection truncated_svd_projection(const Matrix& A, Index r) {
  detail::require(r >= 1 && r <= A.cols(), "truncated_svd_projection: rank out of range");
  detail::require(A.rows() >= A.cols(), "truncated_svd_projection: expected a tall matrix");
  TruncatedProjection out;
  out.svd = thin_svd(A);
  const Vector& s = out.svd.sigma;
  out.Z = out.svd.U.leftCols(r) * s.head(r).asDiagonal() * out.svd.V.leftCols(r).transpose();
  if (r < s.size()) out.degenerate = (s(r - 1) - s(r)) < kSpectrumTieTolerance * s(0);
  return out;
}

/// P = I - Q (Q^T Q)^{-1} Q^T, applied through a thin Householder QR of Q.
/// The same factorization backs the least-squares solves against Q.
class RangeProjector {
 public:
  RangeProjector() = default;

  explicit RangeProjector(const Matrix& Q) {
    detail::require(Q.rows() >= Q.cols() && Q.cols() >= 1,
                    "projector: Q must be tall with at least one column");
    Eigen::HouseholderQR<Matrix> qr(Q);
    basis_ = qr.householderQ() * Matrix::Identity(Q.rows(), Q.cols());
    R_ = qr.matrixQR().topRows(Q.cols()).triangularView<Eigen::Upper>();
    const Vector rs = Eigen::JacobiSVD<Matrix>(R_).singularValues();
    if (!(rs(rs.size() - 1) >= 1e-10 * rs(0)))
      throw IllConditionedProblem("stacked matrix Q is not of full column rank");
  }

  Index size() const { return basis_.rows(); }

  /// Orthonormal basis of range(Q).
  const Matrix& basis() const { return basis_; }

  template <class Derived>
  Vector apply(const Eigen::MatrixBase<Derived>& v) const {
    return v - basis_ * (basis_.transpose() * v);
  }

  /// argmin_x ||Q x - b||.
  template <class Derived>
  Vector least_squares(const Eigen::MatrixBase<Derived>& b) const {
    return R_.triangularView<Eigen::Upper>().solve(basis_.transpose() * b);
  }

  Matrix dense() const {
    return Matrix::Identity(size(), size()) - basis_ * basis_.transpose();
  }

 private:
  Matrix basis_;
  Matrix R_;
};

inline RangeProjector projector_P(const Matrix& Q) { return RangeProjector(Q); }

}  // namespace rcpadmm
