#pragma once

#include <cmath>
#include <limits>

// Scalar kernel for probit numerics. Everything here is derived from
// log Phi(t) and log Phi(-t) so that no intermediate Phi value can
// overflow or round to 0/1 for the |t| ranges the solver visits.
// All functions are pure and thread-safe.

namespace boxcox {

inline constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490;
inline constexpr double kSqrtPi = 1.7724538509055160272981674833411452;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056176;
inline constexpr double kSqrt2OverPi = 0.7978845608028653558798921198687637;

/// exp(x^2) * erfc(x) for x >= 0 without overflow.
inline double erfcx_positive(double x) {
  if (x >= 25.0) {
    // Asymptotic expansion; converges to machine precision for x >= 25.
    const double inv2x2 = 1.0 / (2.0 * x * x);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= 12; ++k) {
      term *= -static_cast<double>(2 * k - 1) * inv2x2;
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum / (x * kSqrtPi);
  }
  return std::exp(x * x) * std::erfc(x);
}

/// log Phi(t). Lower tail goes through the scaled complementary error
/// function so the quadratic term is carried exactly.
inline double log_normal_cdf(double t) {
  if (t < -1.0) {
    const double x = -t * kInvSqrt2;
    return -0.5 * t * t + std::log(0.5 * erfcx_positive(x));
  }
  // Phi(t) = 1 - Phi(-t); the complement is at most Phi(1) here.
  return std::log1p(-0.5 * std::erfc(t * kInvSqrt2));
}

/// log phi(t) = -t^2/2 - log sqrt(2 pi).
inline double normal_log_pdf(double t) { return -0.5 * t * t - kLogSqrt2Pi; }

inline double normal_pdf(double t) { return std::exp(normal_log_pdf(t)); }

/// Phi(t), evaluated through the log form.
inline double normal_cdf(double t) { return std::exp(log_normal_cdf(t)); }

/// Margin loss L(t) = -log Phi(t).
inline double probit_loss(double t) { return -log_normal_cdf(t); }

/// L'(t) = -phi(t)/Phi(t). Always negative; ~ t - 1/t as t -> -inf.
inline double probit_loss_grad(double t) {
  if (t < -1.0) {
    // phi/Phi = sqrt(2/pi) / erfcx(-t/sqrt(2)); the exp factors cancel.
    return -kSqrt2OverPi / erfcx_positive(-t * kInvSqrt2);
  }
  return -std::exp(normal_log_pdf(t) - log_normal_cdf(t));
}

/// h(eta) = log(Phi(eta) / (1 - Phi(eta))), the probit log-odds link.
inline double link_h(double eta) {
  return log_normal_cdf(eta) - log_normal_cdf(-eta);
}

/// h'(eta) = phi / (Phi (1-Phi)) > 0.
inline double link_h_prime(double eta) {
  return std::exp(normal_log_pdf(eta) - log_normal_cdf(eta) -
                  log_normal_cdf(-eta));
}

/// Information weight Sigma(t) = phi^2 / (Phi (1-Phi)) = h'(t) phi(t).
inline double sigma_weight(double t) {
  return std::exp(2.0 * normal_log_pdf(t) - log_normal_cdf(t) -
                  log_normal_cdf(-t));
}

/// Inverse standard normal CDF. Acklam's rational approximation polished
/// by two Newton steps on Phi(x) - p.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    return p == 0.0 ? -std::numeric_limits<double>::infinity()
           : p == 1.0
               ? std::numeric_limits<double>::infinity()
               : std::numeric_limits<double>::quiet_NaN();
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    const double err = normal_cdf(x) - p;
    x -= err / normal_pdf(x);
  }
  return x;
}

}  // namespace boxcox
