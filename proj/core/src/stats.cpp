#include "boxcox/stats.hpp"

#include <cmath>
#include <limits>

#include "boxcox/errors.hpp"

namespace boxcox {
namespace {

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) = 1 - P(a, x), valid for x >= a + 1.
double gamma_q_contfrac(double a, double x) {
  const double tiny = std::numeric_limits<double>::min() / 1e-30;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw invalid_input("gamma_p: requires a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double chisq_cdf(double x, int df) {
  if (df < 1) throw invalid_input("chisq_cdf: df must be >= 1");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * df, 0.5 * x);
}

double chisq_quantile(double p, int df) {
  if (df < 1) throw invalid_input("chisq_quantile: df must be >= 1");
  if (!(p > 0.0 && p < 1.0))
    throw invalid_input("chisq_quantile: p must be in (0, 1)");
  // Bracket then bisect + Newton polish on the CDF.
  double lo = 0.0;
  double hi = static_cast<double>(df);
  while (chisq_cdf(hi, df) < p) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (chisq_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace boxcox
