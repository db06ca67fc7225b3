#pragma once

// Probability primitives: probit link, multivariate normal, one-sided
// truncated normal and inverse-Wishart draws. Every sampler takes the
// random engine explicitly so chains are reproducible from a seed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "misconception/errors.hpp"

namespace misconception {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Default engine used throughout the library and the CLI.
using Rng = std::mt19937_64;

inline constexpr double kCholeskyJitter = 1e-8;
inline constexpr double kSymmetryTolerance = 1e-10;

/// Standard normal CDF.
inline double probit(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// log Phi(x). Direct erfc evaluation down to -37, asymptotic series below.
inline double log_probit(double x) {
  if (x >= 0.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
  if (x >= -37.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Phi(x) ~ phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8)
  const double inv2 = 1.0 / (x * x);
  const double series =
      1.0 - inv2 * (1.0 - inv2 * (3.0 - inv2 * (15.0 - inv2 * 105.0)));
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) -
         std::log(-x) + std::log(series);
}

/// Standard normal quantile.
inline double probit_inverse(double p) {
  static const boost::math::normal_distribution<double> kStandard;
  return boost::math::quantile(kStandard, p);
}

/// Numerically safe 1 / (1 + exp(-x)).
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

template <class Engine>
double standard_normal(Engine& rng) {
  return std::normal_distribution<double>{}(rng);
}

template <class Engine>
double uniform_open(Engine& rng) {
  // (0, 1): the lower end is excluded so quantile and log calls stay finite.
  double u = 0.0;
  while (u == 0.0) u = std::uniform_real_distribution<double>{}(rng);
  return u;
}

inline bool is_symmetric(const Mat& m, double tol = kSymmetryTolerance) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_positive_definite(const Mat& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  Eigen::LLT<Mat> llt(m);
  return llt.info() == Eigen::Success;
}

/// Lower Cholesky factor; retries once with a small diagonal jitter.
inline Mat cholesky_lower(const Mat& cov) {
  if (cov.rows() != cov.cols()) {
    throw Error(ErrorKind::kCholeskyFailure, "covariance matrix is not square");
  }
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() == Eigen::Success && cov.allFinite()) return llt.matrixL();
  Mat jittered = cov;
  jittered.diagonal().array() += kCholeskyJitter;
  llt.compute(jittered);
  if (llt.info() != Eigen::Success || !jittered.allFinite()) {
    throw Error(ErrorKind::kCholeskyFailure,
                "matrix is not positive definite (after jitter retry)");
  }
  return llt.matrixL();
}

/// Symmetric positive-definite inverse via Cholesky.
inline Mat spd_inverse(const Mat& m) {
  const Mat lower = cholesky_lower(m);
  const Mat lower_inv =
      lower.triangularView<Eigen::Lower>().solve(Mat::Identity(m.rows(), m.cols()));
  Mat inv = lower_inv.transpose() * lower_inv;
  return 0.5 * (inv + inv.transpose());
}

/// mean + L * normals, where L is the lower Cholesky factor of cov.
inline Vec mvn_from_normals(const Vec& mean, const Mat& cov, const Vec& normals) {
  return mean + cholesky_lower(cov) * normals;
}

template <class Engine>
Vec sample_mvn(const Vec& mean, const Mat& cov, Engine& rng) {
  const Mat lower = cholesky_lower(cov);
  Vec normals(mean.size());
  for (Eigen::Index d = 0; d < normals.size(); ++d) normals(d) = standard_normal(rng);
  return mean + lower * normals;
}

enum class TruncSide { kPositive, kNegative };

namespace detail {

// Draw from N(mean, 1) restricted to (0, inf).
template <class Engine>
double positive_truncnorm(double mean, Engine& rng) {
  const double lower = -mean;  // bound on the standardized variable
  if (lower > 5.0) {
    // Exponential-proposal rejection in the upper tail.
    const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
    std::exponential_distribution<double> exponential(rate);
    for (;;) {
      const double y = lower + exponential(rng);
      const double accept = std::exp(-0.5 * (y - rate) * (y - rate));
      if (uniform_open(rng) <= accept) {
        const double x = mean + y;
        if (x > 0.0) return x;
      }
    }
  }
  if (lower < -5.0) {
    // Truncation removes < 3e-7 of the mass; plain rejection.
    for (;;) {
      const double x = mean + standard_normal(rng);
      if (x > 0.0) return x;
    }
  }
  const double upper_mass = probit(mean);
  for (;;) {
    const double y = -probit_inverse(uniform_open(rng) * upper_mass);
    const double x = mean + y;
    if (x > 0.0 && std::isfinite(x)) return x;
  }
}

}  // namespace detail

/// Draw from N(mean, 1) conditioned on the sign given by side.
template <class Engine>
double sample_truncnorm(double mean, TruncSide side, Engine& rng) {
  if (side == TruncSide::kPositive) return detail::positive_truncnorm(mean, rng);
  return -detail::positive_truncnorm(-mean, rng);
}

/// Inverse-Wishart draw with mean scale / (df - D - 1), via a Bartlett
/// factorization of Wishart(df, scale^-1).
template <class Engine>
Mat sample_inv_wishart(double df, const Mat& scale, Engine& rng) {
  const Eigen::Index dim = scale.rows();
  if (!(df > static_cast<double>(dim) - 1.0)) {
    throw Error(ErrorKind::kInvalidConfig,
                "inverse-Wishart degrees of freedom " + std::to_string(df) +
                    " must exceed dimension - 1 = " + std::to_string(dim - 1));
  }
  const Mat scale_lower = cholesky_lower(scale);

  Mat bartlett = Mat::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    std::chi_squared_distribution<double> chi2(df - static_cast<double>(i));
    bartlett(i, i) = std::sqrt(chi2(rng));
    for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = standard_normal(rng);
  }
  // W^-1 = (L A^-T)(L A^-T)^T with W = (L^-T A)(L^-T A)^T.
  const Mat factor_t =
      bartlett.triangularView<Eigen::Lower>().solve(Mat(scale_lower.transpose()));
  Mat draw = factor_t.transpose() * factor_t;
  return 0.5 * (draw + draw.transpose());
}

}  // namespace misconception
