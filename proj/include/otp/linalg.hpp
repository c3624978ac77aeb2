#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "otp/rng.hpp"
#include "otp/types.hpp"

namespace otp {

inline constexpr double kOrthogonalityTol = 1e-10;

// Real square matrix validated to satisfy Q^T Q = I. Construction through
// with_warning() relaxes the check; it is used for principal roots at the
// eigenvalue -1 branch point, where the real projection is not orthogonal.
class OrthogonalMatrix {
 public:
  explicit OrthogonalMatrix(Matrix q) : q_(std::move(q)) {
    if (q_.rows() != q_.cols() || q_.rows() < 1) {
      throw DimensionError("OrthogonalMatrix requires a nonempty square matrix");
    }
    const double dev = (q_.transpose() * q_ - Matrix::Identity(q_.rows(), q_.cols()))
                           .cwiseAbs()
                           .maxCoeff();
    if (!(dev <= kOrthogonalityTol)) {
      throw std::invalid_argument("matrix is not orthogonal: ||Q^T Q - I||_max = " +
                                  std::to_string(dev));
    }
  }

  static OrthogonalMatrix with_warning(Matrix q, std::string warning) {
    OrthogonalMatrix out{Private{}, std::move(q)};
    out.warning_ = std::move(warning);
    return out;
  }

  int order() const { return static_cast<int>(q_.rows()); }
  const Matrix& matrix() const { return q_; }

  bool has_warning() const { return !warning_.empty(); }
  const std::string& warning() const { return warning_; }

 private:
  struct Private {};
  OrthogonalMatrix(Private, Matrix q) : q_(std::move(q)) {}

  Matrix q_;
  std::string warning_;
};

struct SvdFactors {
  Matrix u;        // n x r
  Vector sigma;    // r, nonnegative, descending
  Matrix vT;       // r x n
};

// Complex spectrum of a normal matrix whose eigenvalues lie on the unit circle.
struct UnitSpectrum {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd eigenvectors;
};

struct SvdMode {
  enum class Kind { Full, Randomized };
  Kind kind = Kind::Full;
  int rank = 0;
  std::uint64_t seed = 0;

  static SvdMode full() { return {}; }
  static SvdMode randomized(int k, std::uint64_t seed) {
    return {Kind::Randomized, k, seed};
  }
};

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
  }
}

// M = Y^T X, the n x n matrix whose (j, i) entry is <y_j, x_i>.
inline Matrix gram(const PointCloud& x, const PointCloud& y) {
  require_same_shape(x, y);
  return y.transpose() * x;
}

inline SvdFactors svd_full(const Matrix& m) {
  require_finite(m, "svd_full");
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) {
    throw std::runtime_error("svd_full: decomposition did not converge");
  }
  return {svd.matrixU(), svd.singularValues(), svd.matrixV().transpose()};
}

// Halko-style randomized SVD: Gaussian sketch with oversampling 10 and two
// power iterations, deterministic for a fixed seed.
inline SvdFactors svd_randomized(const Matrix& m, int k, std::uint64_t seed) {
  require_finite(m, "svd_randomized");
  const int n = static_cast<int>(m.rows());
  if (m.rows() != m.cols()) {
    throw DimensionError("svd_randomized expects a square matrix");
  }
  if (k < 1 || k > n) {
    throw std::invalid_argument("svd_randomized: rank k out of range [1, n]");
  }
  const int l = std::min(n, k + 10);

  Rng rng(seed);
  Matrix omega(n, l);
  for (int j = 0; j < l; ++j) {
    for (int i = 0; i < n; ++i) {
      omega(i, j) = rng.gaussian();
    }
  }

  auto thin_q = [n, l](const Matrix& a) -> Matrix {
    Eigen::HouseholderQR<Matrix> qr(a);
    return qr.householderQ() * Matrix::Identity(n, l);
  };

  Matrix q = thin_q(m * omega);
  for (int it = 0; it < 2; ++it) {
    q = thin_q(m.transpose() * q);
    q = thin_q(m * q);
  }

  const Matrix b = q.transpose() * m;  // l x n
  Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw std::runtime_error("svd_randomized: small SVD did not converge");
  }
  return {(q * svd.matrixU()).leftCols(k), svd.singularValues().head(k),
          svd.matrixV().transpose().topRows(k)};
}

// Q* = U V^T maximizing tr(Q^T M) over orthogonal Q. Randomized mode requires
// k = n: a rank-deficient U V^T is not square-orthogonal.
inline OrthogonalMatrix procrustes(const Matrix& m, const SvdMode& mode = SvdMode::full()) {
  SvdFactors f;
  if (mode.kind == SvdMode::Kind::Full) {
    f = svd_full(m);
  } else {
    if (mode.rank != m.rows()) {
      throw std::invalid_argument(
          "procrustes: randomized mode requires k = n for a square orthogonal factor");
    }
    f = svd_randomized(m, mode.rank, mode.seed);
  }
  return OrthogonalMatrix(f.u * f.vT);
}

inline UnitSpectrum unit_spectrum(const OrthogonalMatrix& q) {
  Eigen::EigenSolver<Matrix> es(q.matrix());
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("unit_spectrum: eigendecomposition did not converge");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

// Principal h-th root of an orthogonal matrix: divide each eigenvalue phase
// by h and reassemble. An eigenvalue of exactly -1 maps to -1 for odd h (the
// real root) and to exp(i pi / h) for even h, in which case the real
// projection is no longer orthogonal and a warning is attached.
inline OrthogonalMatrix orthogonal_root(const OrthogonalMatrix& q, int h) {
  if (h < 1) {
    throw std::invalid_argument("orthogonal_root: h must be >= 1");
  }
  if (h == 1) {
    return q;
  }
  const int n = q.order();
  const UnitSpectrum spec = unit_spectrum(q);

  bool branch_warning = false;
  Eigen::VectorXcd mu(n);
  for (int j = 0; j < n; ++j) {
    const std::complex<double> lam = spec.eigenvalues(j);
    if (std::abs(lam + 1.0) < 1e-12) {
      if (h % 2 == 1) {
        mu(j) = -1.0;
      } else {
        mu(j) = std::polar(1.0, std::numbers::pi / h);
        branch_warning = true;
      }
      continue;
    }
    mu(j) = std::polar(1.0, std::arg(lam) / h);
  }

  const Eigen::MatrixXcd root =
      spec.eigenvectors * mu.asDiagonal() * spec.eigenvectors.inverse();
  Matrix r = root.real();

  if (branch_warning) {
    return OrthogonalMatrix::with_warning(
        std::move(r),
        "eigenvalue -1 with even root order: principal branch point, real "
        "projection is only approximately orthogonal");
  }

  // Roundoff from the eigenvector inverse can exceed the construction
  // tolerance at larger n; a Newton step Q(3I - Q^T Q)/2 restores it.
  const Matrix eye = Matrix::Identity(n, n);
  for (int it = 0; it < 3; ++it) {
    const double dev = (r.transpose() * r - eye).cwiseAbs().maxCoeff();
    if (dev <= 1e-13) {
      break;
    }
    r = 0.5 * r * (3.0 * eye - r.transpose() * r);
  }
  return OrthogonalMatrix(std::move(r));
}

// Y_i = Y_g * T_delta^i, accumulated as d x n times n x n products.
inline PointCloud partial_rotation(const PointCloud& y_g, const OrthogonalMatrix& t_delta,
                                   int i) {
  if (t_delta.order() != y_g.cols()) {
    throw DimensionError("partial_rotation: rotation order does not match sample count");
  }
  if (i < 0) {
    throw std::invalid_argument("partial_rotation: power must be nonnegative");
  }
  if (i == 0) {
    return y_g;
  }
  PointCloud out = y_g;
  for (int k = 0; k < i; ++k) {
    out = out * t_delta.matrix();
  }
  return out;
}

}  // namespace otp
