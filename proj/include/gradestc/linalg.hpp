#pragma once

// Dense kernels behind the compressor: exact SVD (used as the reference and for
// small problems), Halko-style randomized truncated SVD, and orthonormality
// checks. Everything is templated on the scalar type; the library instantiates
// double for compute and float only at the wire boundary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "gradestc/error.hpp"
#include "gradestc/rng.hpp"

namespace gradestc {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;

/// Singular values below this fraction of the leading one are reported as 0.
inline constexpr double kRankTolerance = 1e-10;

template <typename Scalar>
struct TruncatedSvd {
  Mat<Scalar> u;      // rows x r
  Vec<Scalar> sigma;  // r, non-increasing
  Mat<Scalar> vt;     // r x cols

  Eigen::Index rank() const { return sigma.size(); }

  Mat<Scalar> reconstruct() const { return u * sigma.asDiagonal() * vt; }

  /// Number of singular values that are strictly positive.
  Eigen::Index nonzero_count() const {
    Eigen::Index n = 0;
    while (n < sigma.size() && sigma[n] > Scalar(0)) ++n;
    return n;
  }
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
  return a.allFinite();
}

template <typename Derived>
typename Derived::RealScalar orthonormality_defect(const Eigen::MatrixBase<Derived>& m) {
  using S = typename Derived::Scalar;
  const auto k = m.cols();
  return (m.transpose() * m - Mat<S>::Identity(k, k)).norm();
}

/// Flips each singular pair so that the entry of largest magnitude in the
/// left vector (first one on ties) is non-negative. Makes factors reproducible.
template <typename Scalar>
void canonicalize_signs(Mat<Scalar>& u, Mat<Scalar>& vt) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index arg = 0;
    Scalar best = Scalar(-1);
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      const Scalar mag = std::abs(u(i, j));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (u.rows() > 0 && u(arg, j) < Scalar(0)) {
      u.col(j) = -u.col(j);
      if (j < vt.rows()) vt.row(j) = -vt.row(j);
    }
  }
}

namespace detail {

template <typename Scalar>
void zero_small_singular_values(Vec<Scalar>& sigma) {
  if (sigma.size() == 0) return;
  const Scalar cutoff = Scalar(kRankTolerance) * sigma[0];
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (!(sigma[i] > cutoff)) sigma[i] = Scalar(0);
  }
}

template <typename Scalar>
Mat<Scalar> thin_q(const Mat<Scalar>& y) {
  Eigen::HouseholderQR<Mat<Scalar>> qr(y);
  return qr.householderQ() * Mat<Scalar>::Identity(y.rows(), y.cols());
}

}  // namespace detail

/// Exact thin SVD, r = min(rows, cols).
template <typename Derived>
TruncatedSvd<typename Derived::Scalar> full_svd(const Eigen::MatrixBase<Derived>& a) {
  using S = typename Derived::Scalar;
  if (!a.allFinite()) throw Error(ErrorCode::NonFinite, "full_svd input contains NaN/Inf");
  if (a.rows() < 1 || a.cols() < 1) throw Error(ErrorCode::InvalidArgument, "full_svd of empty matrix");

  Eigen::JacobiSVD<Mat<S>> svd(a.derived(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  TruncatedSvd<S> out{svd.matrixU(), svd.singularValues(), svd.matrixV().transpose()};
  canonicalize_signs(out.u, out.vt);
  return out;
}

/// Randomized range finder + small exact SVD (Halko, Martinsson & Tropp).
/// Deterministic for a fixed seed; the Gaussian test matrix is drawn from a
/// generator seeded only by `seed`.
template <typename Derived>
TruncatedSvd<typename Derived::Scalar> randomized_svd(const Eigen::MatrixBase<Derived>& a,
                                                      Eigen::Index d, Eigen::Index oversample = 8,
                                                      int power_iters = 2, std::uint64_t seed = 0) {
  using S = typename Derived::Scalar;
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  const Eigen::Index max_rank = std::min(rows, cols);
  if (d < 1 || d > max_rank) {
    throw Error(ErrorCode::RankRequestTooLarge,
                "requested rank " + std::to_string(d) + " exceeds min(rows, cols) = " +
                    std::to_string(max_rank));
  }
  if (oversample < 0 || power_iters < 0) {
    throw Error(ErrorCode::InvalidArgument, "oversample and power_iters must be non-negative");
  }
  if (!a.allFinite()) throw Error(ErrorCode::NonFinite, "randomized_svd input contains NaN/Inf");

  const Eigen::Index sketch = std::min(d + oversample, max_rank);
  const Mat<S>& src = a.derived();

  Engine engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat<S> omega(cols, sketch);
  for (Eigen::Index j = 0; j < sketch; ++j)
    for (Eigen::Index i = 0; i < cols; ++i) omega(i, j) = static_cast<S>(normal(engine));

  Mat<S> q = detail::thin_q<S>(src * omega);
  for (int it = 0; it < power_iters; ++it) {
    const Mat<S> z = detail::thin_q<S>(src.transpose() * q);
    q = detail::thin_q<S>(src * z);
  }

  const Mat<S> b = q.transpose() * src;
  Eigen::JacobiSVD<Mat<S>> small(b, Eigen::ComputeThinU | Eigen::ComputeThinV);

  TruncatedSvd<S> out;
  out.u = (q * small.matrixU()).leftCols(d);
  out.sigma = small.singularValues().head(d);
  out.vt = small.matrixV().leftCols(d).transpose();
  detail::zero_small_singular_values(out.sigma);
  canonicalize_signs(out.u, out.vt);
  return out;
}

/// G_hat = M A in segment space. Client and server both go through this with
/// the same f32-representable inputs, so their results agree bit for bit.
inline Matrix reconstruct(const Matrix& basis, const Matrix& coefficients) {
  return basis * coefficients;
}

/// Rounds every entry through IEEE binary32.
template <typename Derived>
Mat<typename Derived::Scalar> round_to_f32(const Eigen::MatrixBase<Derived>& a) {
  using S = typename Derived::Scalar;
  return a.template cast<float>().template cast<S>();
}

}  // namespace gradestc
