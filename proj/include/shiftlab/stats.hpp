#pragma once

#include <cstddef>
#include <utility>
#include <vector>

// Scalar statistics: the standard normal CDF and its inverse, and exact
// Clopper-Pearson binomial confidence intervals.

namespace shiftlab {

// Phi(z), evaluated through erfc so both tails keep full relative accuracy.
double normal_cdf(double z);

// Standard normal density.
double normal_pdf(double z);

// Inverse of normal_cdf on (0, 1). Rational approximation (the classic AS241
// split into central and tail branches) followed by one Newton step against
// normal_cdf; absolute error <= 1e-9 over (1e-300, 1 - 1e-16). Throws
// std::domain_error outside (0, 1).
double probit(double p);

struct BinomialInterval {
  double lo = 0.0;
  double hi = 1.0;
};

// Exact two-sided Clopper-Pearson interval at the given confidence level.
// Endpoints solve the binomial tail equations by bisection to 1e-9; the
// interval always contains successes/trials. successes == 0 pins lo to 0 and
// successes == trials pins hi to 1.
BinomialInterval clopper_pearson(std::size_t successes, std::size_t trials,
                                 double level = 0.95);

// Quantile of an ascending-sorted sample with linear interpolation between
// order statistics (position q*(n-1)). q is clamped to [0, 1].
double sorted_quantile(const std::vector<double>& sorted, double q);

}  // namespace shiftlab
