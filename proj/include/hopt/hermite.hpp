// Minimal-energy polynomial bridges: the minimizer of the integral over
// (0, 1) of (v^(k))^2 under v^(l)(0) = z_l, v^(l)(1) = 0 for l < k.
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "hopt/core.hpp"

namespace hopt {

/// Dense polynomial sum_j c[j] t^j.
struct Polynomial {
  std::vector<double> c;

  double operator()(double t) const {
    double s = 0;
    for (std::size_t j = c.size(); j-- > 0;) s = s * t + c[j];
    return s;
  }

  Polynomial derivative(int m = 1) const {
    std::vector<double> d = c;
    for (int r = 0; r < m; ++r) {
      if (d.size() <= 1) return Polynomial{{0.0}};
      std::vector<double> e(d.size() - 1);
      for (std::size_t j = 1; j < d.size(); ++j) e[j - 1] = d[j] * static_cast<double>(j);
      d = std::move(e);
    }
    return Polynomial{std::move(d)};
  }

  int degree() const {
    for (std::size_t j = c.size(); j-- > 0;)
      if (c[j] != 0.0) return static_cast<int>(j);
    return -1;
  }
};

/// Exact integral over (0, 1) of p(t)^2.
inline double integral_of_square(const Polynomial& p) {
  long double s = 0;
  for (std::size_t i = 0; i < p.c.size(); ++i)
    for (std::size_t j = 0; j < p.c.size(); ++j)
      s += static_cast<long double>(p.c[i]) * p.c[j] / static_cast<long double>(i + j + 1);
  return static_cast<double>(s);
}

struct HermiteResult {
  Polynomial poly;  // degree <= 2k - 1
  double theta = 0;
};

/// Degree-(2k-1) Hermite interpolant with the given derivatives at 0 and
/// vanishing derivatives up to order k-1 at 1, together with
/// theta = integral over (0, 1) of (p^(k))^2.
///
/// Construction: p(t) = (1 - t)^k q(t) with deg q <= k - 1, so the conditions
/// at 1 hold identically; q's Taylor coefficients come from a triangular
/// convolution with the series of (1 - t)^(-k).
inline HermiteResult hermite_extension(int k, std::span<const double> z) {
  if (k < 1 || k > kMaxOrder)
    throw ConfigError("hermite_extension: k must be in [1, " + std::to_string(kMaxOrder) + "]");
  if (static_cast<int>(z.size()) != k)
    throw ConfigError("hermite_extension: need exactly k prescribed derivatives");

  auto binom = [](int n, int r) {
    long double b = 1;
    for (int i = 1; i <= r; ++i) b = b * (n - r + i) / i;
    return b;
  };

  std::vector<long double> a(k);
  long double fact = 1;
  for (int j = 0; j < k; ++j) {
    if (j > 0) fact *= j;
    a[j] = z[j] / fact;
  }
  std::vector<long double> q(k, 0);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i <= j; ++i) q[j] += a[i] * binom(k - 1 + j - i, j - i);

  // expand (1 - t)^k q(t)
  std::vector<long double> p(2 * k, 0);
  for (int r = 0; r <= k; ++r) {
    const long double br = binom(k, r) * ((r % 2) ? -1 : 1);
    for (int j = 0; j < k; ++j) p[r + j] += br * q[j];
  }

  HermiteResult out;
  out.poly.c.assign(p.begin(), p.end());
  out.theta = integral_of_square(out.poly.derivative(k));
  return out;
}

}  // namespace hopt
