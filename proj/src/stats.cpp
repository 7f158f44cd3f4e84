#include "shiftlab/stats.hpp"

#include <cmath>
#include <stdexcept>

#include "shiftlab/errors.hpp"

namespace shiftlab {

double normal_cdf(double z) {
  // erfc keeps relative accuracy in the lower tail where 1 - erf collapses.
  return 0.5 * std::erfc(-z * 0.70710678118654752440);
}

double normal_pdf(double z) {
  return 0.39894228040143267794 * std::exp(-0.5 * z * z);
}

namespace {

// Rational tail/central approximation to the normal quantile (the classic
// AS241 PPND16 fit, good to ~1e-15 on its own).
double probit_approx(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
              6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
            1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
          1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return q * num / den;
  }

  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    value = num / den;
  }
  return q < 0.0 ? -value : value;
}

}  // namespace

double probit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("probit: p must lie strictly inside (0, 1)");
  }
  double z = probit_approx(p);
  // One Newton step against our own CDF pins the inverse to it. Skip where
  // the density underflows; the approximation is already at machine accuracy
  // that deep in the tails.
  const double pdf = normal_pdf(z);
  if (pdf > 1e-300) {
    z -= (normal_cdf(z) - p) / pdf;
  }
  return z;
}

namespace {

// log C(n, k) via lgamma; exact enough for tail sums at the sizes we use.
double log_choose(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

// P(X <= k) for X ~ Binomial(n, p), by direct summation.
double binomial_cdf(std::size_t k, std::size_t n, double p) {
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return k >= n ? 1.0 : 0.0;
  const double log_p = std::log(p);
  const double log_1mp = std::log1p(-p);
  double acc = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    acc += std::exp(log_choose(n, i) + static_cast<double>(i) * log_p +
                    static_cast<double>(n - i) * log_1mp);
  }
  return acc < 1.0 ? acc : 1.0;
}

// P(X >= k); summed directly rather than via 1 - cdf to keep tiny tails exact.
double binomial_upper_tail(std::size_t k, std::size_t n, double p) {
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return 1.0;
  const double log_p = std::log(p);
  const double log_1mp = std::log1p(-p);
  double acc = 0.0;
  for (std::size_t i = k; i <= n; ++i) {
    acc += std::exp(log_choose(n, i) + static_cast<double>(i) * log_p +
                    static_cast<double>(n - i) * log_1mp);
  }
  return acc < 1.0 ? acc : 1.0;
}

}  // namespace

BinomialInterval clopper_pearson(std::size_t successes, std::size_t trials,
                                 double level) {
  if (trials == 0) {
    throw InvalidInputError("clopper_pearson: trials must be positive");
  }
  if (successes > trials) {
    throw InvalidInputError("clopper_pearson: successes exceed trials");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw InvalidInputError("clopper_pearson: level must lie in (0, 1)");
  }
  const double alpha2 = 0.5 * (1.0 - level);

  BinomialInterval interval;
  if (successes == 0) {
    interval.lo = 0.0;
  } else {
    // P(X >= successes; p) increases in p; find where it equals alpha2.
    double lo = 0.0, hi = 1.0;
    for (int iter = 0; iter < 100 && hi - lo > 1e-9 * 0.001; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (binomial_upper_tail(successes, trials, mid) < alpha2) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    interval.lo = 0.5 * (lo + hi);
  }

  if (successes == trials) {
    interval.hi = 1.0;
  } else {
    // P(X <= successes; p) decreases in p.
    double lo = 0.0, hi = 1.0;
    for (int iter = 0; iter < 100 && hi - lo > 1e-9 * 0.001; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (binomial_cdf(successes, trials, mid) > alpha2) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    interval.hi = 0.5 * (lo + hi);
  }
  return interval;
}

double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) {
    throw InvalidInputError("sorted_quantile: empty sample");
  }
  q = std::min(1.0, std::max(0.0, q));
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace shiftlab
