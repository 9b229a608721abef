#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace lvm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Bad input: malformed spec, dimension mismatch, out-of-domain parameter.
/// Carries the offending field name so callers can report it precisely.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Well-formed input on which the numerics fail: indefinite matrix handed to a
/// Cholesky, eigensolver non-convergence, unstable transition matrix.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ValidationError(field, what);
}

inline void require_finite(const Matrix& m, const std::string& field) {
  if (!m.allFinite()) throw ValidationError(field, "contains a non-finite entry");
}

inline void require_finite(double x, const std::string& field) {
  if (!std::isfinite(x)) throw ValidationError(field, "is not finite");
}

/// Largest relative asymmetry |a_ij - a_ji| / max(1, max|a|).
inline double relative_asymmetry(const Matrix& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

/// Kronecker product, (m*p) x (n*q) from m x n and p x q.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Column-stacking vectorization.
inline Vector vec(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

/// Half-vectorization of a symmetric matrix: lower triangle including the
/// diagonal, stacked column by column. Rejects asymmetric input.
inline Vector vech(const Matrix& a, double tol = 1e-12) {
  require(a.rows() == a.cols(), "matrix", "vech needs a square matrix");
  require(relative_asymmetry(a) <= tol, "matrix", "vech needs a symmetric matrix");
  const Index n = a.rows();
  Vector out(n * (n + 1) / 2);
  Index k = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i) out(k++) = a(i, j);
  return out;
}

/// Free parameters of a matrix-variate normal on n x p matrices: an n x p
/// mean plus two symmetric covariances, (2np + n(n+1) + p(p+1)) / 2.
/// Strictly exceeds n*p for all positive n, p.
inline std::int64_t matrix_normal_param_count(std::int64_t n, std::int64_t p) {
  require(n > 0 && p > 0, "dimensions", "matrix dimensions must be positive");
  return (2 * n * p + n * (n + 1) + p * (p + 1)) / 2;
}

/// Lower Cholesky factor. Throws NumericalError naming the first pivot that
/// fails, which is more useful for spec debugging than Eigen's info() code.
inline Matrix cholesky(const Matrix& a) {
  require(a.rows() == a.cols(), "matrix", "cholesky needs a square matrix");
  require_finite(a, "matrix");
  const Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) {
      throw NumericalError("cholesky: matrix is not positive definite (pivot " +
                           std::to_string(j) + " = " + std::to_string(d) + ")");
    }
    l(j, j) = std::sqrt(d);
    if (j + 1 < n) {
      l.col(j).tail(n - j - 1) =
          (a.col(j).tail(n - j - 1) -
           l.bottomLeftCorner(n - j - 1, j) * l.row(j).head(j).transpose()) /
          l(j, j);
    }
  }
  return l;
}

struct SymEig {
  Vector values;   // descending
  Matrix vectors;  // columns aligned with values
};

/// Symmetric eigendecomposition, eigenvalues sorted descending.
inline SymEig sym_eig(const Matrix& a, double sym_tol = 1e-12) {
  require(a.rows() == a.cols(), "matrix", "sym_eig needs a square matrix");
  require_finite(a, "matrix");
  require(relative_asymmetry(a) <= sym_tol, "matrix", "sym_eig needs a symmetric matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success)
    throw NumericalError("sym_eig: eigensolver did not converge");
  SymEig out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

/// Symmetric positive definite matrix. Construction symmetrizes the input
/// (after checking the asymmetry is within tolerance) and validates
/// definiteness by factorizing once; the factor is kept for samplers and
/// log-densities.
class SpdMatrix {
 public:
  SpdMatrix() = default;

  explicit SpdMatrix(const Matrix& a, double sym_tol = 1e-12) {
    require(a.rows() == a.cols(), "covariance", "must be square");
    require(a.size() > 0, "covariance", "must be non-empty");
    require_finite(a, "covariance");
    require(relative_asymmetry(a) <= sym_tol, "covariance",
            "must be symmetric to within tolerance");
    m_ = 0.5 * (a + a.transpose());
    chol_ = cholesky(m_);
  }

  static SpdMatrix diagonal(const Vector& variances) {
    require(variances.size() > 0, "variances", "must be non-empty");
    for (Index i = 0; i < variances.size(); ++i)
      require(std::isfinite(variances(i)) && variances(i) > 0.0,
              "variances[" + std::to_string(i) + "]", "must be positive");
    return SpdMatrix(Matrix(variances.asDiagonal()));
  }

  static SpdMatrix identity(Index n) { return SpdMatrix(Matrix::Identity(n, n)); }

  bool empty() const { return m_.size() == 0; }
  Index dim() const { return m_.rows(); }
  const Matrix& mat() const { return m_; }
  const Matrix& chol() const { return chol_; }

  double log_det() const {
    return 2.0 * chol_.diagonal().array().log().sum();
  }

  /// Solve A x = b through the cached factor.
  Vector solve(const Vector& b) const {
    Vector y = chol_.triangularView<Eigen::Lower>().solve(b);
    return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  Matrix solve(const Matrix& b) const {
    Matrix y = chol_.triangularView<Eigen::Lower>().solve(b);
    return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  Matrix inverse() const { return solve(Matrix(Matrix::Identity(dim(), dim()))); }

 private:
  Matrix m_;
  Matrix chol_;
};

inline double spectral_radius(const Matrix& a) {
  require(a.rows() == a.cols(), "matrix", "spectral radius needs a square matrix");
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace lvm
