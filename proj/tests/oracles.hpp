#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "shiftlab/matrix.hpp"

// Reference numerics for the tests. Everything here takes the slow road
// (series and continued fractions, bisection, exhaustive sums, Jacobi
// sweeps, long-double accumulation) and shares no code with the library's
// fast paths, so a disagreement localizes the bug to one side.

namespace oracle {

inline long double normal_pdf(long double z) {
  const long double inv_sqrt_2pi = 0.398942280401432677939946L;
  return inv_sqrt_2pi * std::exp(-0.5L * z * z);
}

// erf power series, accurate for |x| <= ~2.8 (cancellation stays mild).
inline long double erf_series(long double x) {
  const long double two_over_sqrt_pi = 1.12837916709551257389616L;
  long double term = x;
  long double sum = 0.0L;
  for (int n = 0; n < 200; ++n) {
    sum += term / (2 * n + 1);
    term *= -x * x / (n + 1);
    if (std::fabs(term) < 1e-24L * std::fabs(sum)) break;
  }
  return two_over_sqrt_pi * sum;
}

// Upper tail Q(z) for z > 0 via the continued fraction
// Q(z) = pdf(z) / (z + 1/(z + 2/(z + 3/(...)))), evaluated bottom-up.
inline long double normal_upper_tail_cf(long double z) {
  long double b = z + 400.0L;
  for (int k = 400; k >= 1; --k) {
    b = z + static_cast<long double>(k) / b;
  }
  return normal_pdf(z) / b;
}

inline long double normal_cdf(long double z) {
  const long double cut = 3.5L;
  if (z > cut) return 1.0L - normal_upper_tail_cf(z);
  if (z < -cut) return normal_upper_tail_cf(-z);
  const long double inv_sqrt_2 = 0.707106781186547524400845L;
  return 0.5L * (1.0L + erf_series(z * inv_sqrt_2));
}

inline long double probit(long double p) {
  if (!(p > 0.0L && p < 1.0L)) {
    throw std::domain_error("oracle probit: p outside (0, 1)");
  }
  long double lo = -12.0L;
  long double hi = 12.0L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    if (normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5L * (lo + hi);
}

struct LineFit {
  long double slope = 0.0L;
  long double intercept = 0.0L;
  long double r_squared = 1.0L;
};

inline LineFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0.0L;
  long double my = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxx = 0.0L;
  long double sxy = 0.0L;
  long double syy = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const long double dx = x[i] - mx;
    const long double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy > 0.0L) {
    long double ss_res = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      const long double r = y[i] - (fit.slope * x[i] + fit.intercept);
      ss_res += r * r;
    }
    fit.r_squared = 1.0L - ss_res / syy;
  }
  return fit;
}

// pmf(j) built by the recurrence pmf(j+1) = pmf(j) * (n-j)/(j+1) * p/(1-p);
// exact enough in long double for the n <= 1000 the tests use.
inline std::vector<long double> binomial_pmf(std::size_t n, long double p) {
  std::vector<long double> pmf(n + 1, 0.0L);
  if (p <= 0.0L) {
    pmf[0] = 1.0L;
    return pmf;
  }
  if (p >= 1.0L) {
    pmf[n] = 1.0L;
    return pmf;
  }
  pmf[0] = std::pow(1.0L - p, static_cast<long double>(n));
  const long double odds = p / (1.0L - p);
  for (std::size_t j = 0; j < n; ++j) {
    pmf[j + 1] = pmf[j] * odds * static_cast<long double>(n - j) /
                 static_cast<long double>(j + 1);
  }
  return pmf;
}

inline long double binomial_tail_ge(std::size_t k, std::size_t n,
                                    long double p) {
  const std::vector<long double> pmf = binomial_pmf(n, p);
  long double sum = 0.0L;
  for (std::size_t j = n + 1; j-- > k;) sum += pmf[j];
  return sum;
}

inline long double binomial_tail_le(std::size_t k, std::size_t n,
                                    long double p) {
  const std::vector<long double> pmf = binomial_pmf(n, p);
  long double sum = 0.0L;
  for (std::size_t j = 0; j <= k; ++j) sum += pmf[j];
  return sum;
}

// Clopper-Pearson endpoints by bisection on the exact binomial tails.
inline std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n,
                                                 double level) {
  const long double alpha2 = 0.5L * (1.0L - static_cast<long double>(level));
  double lo = 0.0;
  double hi = 1.0;
  if (k > 0) {
    long double a = 0.0L;
    long double b = 1.0L;
    for (int i = 0; i < 120; ++i) {
      const long double mid = 0.5L * (a + b);
      // P(X >= k | mid) grows with mid; the endpoint pins it to alpha/2.
      if (binomial_tail_ge(k, n, mid) < alpha2) {
        a = mid;
      } else {
        b = mid;
      }
    }
    lo = static_cast<double>(0.5L * (a + b));
  }
  if (k < n) {
    long double a = 0.0L;
    long double b = 1.0L;
    for (int i = 0; i < 120; ++i) {
      const long double mid = 0.5L * (a + b);
      // P(X <= k | mid) falls with mid.
      if (binomial_tail_le(k, n, mid) > alpha2) {
        a = mid;
      } else {
        b = mid;
      }
    }
    hi = static_cast<double>(0.5L * (a + b));
  }
  return {lo, hi};
}

inline std::vector<double> central_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& w, double h) {
  std::vector<double> grad(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    std::vector<double> plus = w;
    std::vector<double> minus = w;
    plus[i] += h;
    minus[i] -= h;
    grad[i] = (f(plus) - f(minus)) / (2.0 * h);
  }
  return grad;
}

// Cyclic Jacobi over the full symmetric matrix; returns ascending
// eigenvalues. Inputs here never exceed a few dozen rows.
inline std::vector<double> symmetric_eigenvalues(const shiftlab::Matrix& m) {
  const std::size_t n = m.rows;
  std::vector<std::vector<long double>> a(n, std::vector<long double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = m.at(i, j);
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    long double off = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    }
    if (off < 1e-36L) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-30L) continue;
        const long double theta = (a[q][q] - a[p][p]) / (2.0L * a[p][q]);
        const long double t =
            (theta >= 0.0L ? 1.0L : -1.0L) /
            (std::fabs(theta) + std::sqrt(theta * theta + 1.0L));
        const long double c = 1.0L / std::sqrt(t * t + 1.0L);
        const long double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const long double aip = a[i][p];
          const long double aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const long double api = a[p][i];
          const long double aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = static_cast<double>(a[i][i]);
  std::sort(eig.begin(), eig.end());
  return eig;
}

// Largest singular value as sqrt of the top eigenvalue of m^T m.
inline double operator_norm(const shiftlab::Matrix& m) {
  shiftlab::Matrix gram(m.cols, m.cols);
  for (std::size_t i = 0; i < m.cols; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      long double acc = 0.0L;
      for (std::size_t r = 0; r < m.rows; ++r) {
        acc += static_cast<long double>(m.at(r, i)) * m.at(r, j);
      }
      gram.at(i, j) = static_cast<double>(acc);
    }
  }
  const std::vector<double> eig = symmetric_eigenvalues(gram);
  const double top = eig.empty() ? 0.0 : eig.back();
  return top > 0.0 ? std::sqrt(top) : 0.0;
}

}  // namespace oracle
