#pragma once

namespace boxcox {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);

/// Chi-squared CDF with df degrees of freedom.
double chisq_cdf(double x, int df);

/// Chi-squared quantile (inverse CDF), p in (0, 1).
double chisq_quantile(double p, int df);

}  // namespace boxcox
