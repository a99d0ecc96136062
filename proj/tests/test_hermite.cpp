#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hopt/hermite.hpp"
#include "hopt/rng.hpp"

using namespace hopt;

namespace {

// Composite Simpson on (0, 1); error far below the tolerances used here for
// polynomials of degree <= 18.
template <class F>
double integrate01(F&& f) {
  const int panels = 64, pts = 400;
  double s = 0;
  for (int p = 0; p < panels; ++p) {
    const double a = static_cast<double>(p) / panels, b = static_cast<double>(p + 1) / panels;
    const double h = (b - a) / pts;
    double q = f(a) + f(b);
    for (int i = 1; i < pts; ++i) q += (i % 2 ? 4 : 2) * f(a + i * h);
    s += q * h / 3;
  }
  return s;
}

double eval_derivative(const Polynomial& p, int m, double t) { return p.derivative(m)(t); }

}  // namespace

TEST(Hermite, ZeroData) {
  for (int k = 1; k <= kMaxOrder; ++k) {
    const auto r = hermite_extension(k, std::vector<double>(k, 0.0));
    EXPECT_EQ(r.theta, 0.0);
    for (double c : r.poly.c) EXPECT_EQ(c, 0.0);
  }
}

TEST(Hermite, HandComputedCases) {
  const auto r1 = hermite_extension(1, std::vector<double>{1});
  EXPECT_NEAR(r1.poly(0.3), 0.7, 1e-15);
  EXPECT_NEAR(r1.theta, 1.0, 1e-14);

  const auto r2 = hermite_extension(2, std::vector<double>{1, 0});
  for (double t : {0.0, 0.2, 0.5, 0.9})
    EXPECT_NEAR(r2.poly(t), 2 * t * t * t - 3 * t * t + 1, 1e-14);
  EXPECT_NEAR(r2.theta, 12.0, 1e-12);

  const auto r3 = hermite_extension(3, std::vector<double>{1, 0, 0});
  auto p3 = [](double t) { return 1 - 10 * t * t * t + 15 * std::pow(t, 4) - 6 * std::pow(t, 5); };
  for (double t : {0.1, 0.4, 0.75}) EXPECT_NEAR(r3.poly(t), p3(t), 1e-13);
  const double th3 = integrate01([](double t) {
    const double d = -60 + 360 * t - 360 * t * t;
    return d * d;
  });
  EXPECT_NEAR(r3.theta, th3, 1e-9 * th3);
  EXPECT_NEAR(r3.theta, 720.0, 1e-9);
}

TEST(Hermite, InterpolationConditionsAndDegree) {
  Rng rng(99);
  for (int k = 1; k <= kMaxOrder; ++k) {
    std::vector<double> z(k);
    for (double& x : z) x = rng.uniform(-1, 1);
    const auto r = hermite_extension(k, z);
    EXPECT_LE(r.poly.degree(), 2 * k - 1);
    double fact = 1;
    for (int l = 0; l < k; ++l) {
      if (l > 0) fact *= l;
      EXPECT_NEAR(eval_derivative(r.poly, l, 0.0), z[l], 1e-10 * (1 + fact)) << k << "," << l;
      EXPECT_NEAR(eval_derivative(r.poly, l, 1.0), 0.0, 1e-9 * (1 + fact)) << k << "," << l;
    }
    const auto dk = r.poly.derivative(k);
    const double th = integrate01([&](double t) { return dk(t) * dk(t); });
    EXPECT_NEAR(r.theta, th, 1e-8 * (1 + th)) << k;
  }
}

TEST(Hermite, Minimality) {
  // Adding any phi vanishing to order k at both ends cannot lower theta.
  Rng rng(5);
  for (int k = 1; k <= 4; ++k) {
    std::vector<double> z(k);
    for (double& x : z) x = rng.uniform(-1, 1);
    const auto r = hermite_extension(k, z);
    for (int trial = 0; trial < 5; ++trial) {
      const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
      auto v = [&](double t) {
        return r.poly(t) + std::pow(t, k) * std::pow(1 - t, k) * (a + b * t);
      };
      // assemble as polynomial: multiply out (t (1 - t))^k (a + b t)
      Polynomial phi{{1.0}};
      for (int j = 0; j < k; ++j) {
        std::vector<double> c(phi.c.size() + 2, 0.0);
        for (std::size_t i = 0; i < phi.c.size(); ++i) {
          c[i + 1] += phi.c[i];
          c[i + 2] -= phi.c[i];
        }
        phi.c = c;
      }
      std::vector<double> c(phi.c.size() + 1, 0.0);
      for (std::size_t i = 0; i < phi.c.size(); ++i) {
        c[i] += a * phi.c[i];
        c[i + 1] += b * phi.c[i];
      }
      Polynomial q{c};
      for (std::size_t i = 0; i < r.poly.c.size(); ++i) q.c[i] += r.poly.c[i];
      EXPECT_NEAR(q(0.37), v(0.37), 1e-12);
      const auto dq = q.derivative(k);
      EXPECT_GE(integrate01([&](double t) { return dq(t) * dq(t); }), r.theta - 1e-9) << k;
    }
  }
}

TEST(Hermite, QuadraticForm) {
  Rng rng(17);
  for (int k = 1; k <= kMaxOrder; ++k) {
    std::vector<double> z(k);
    for (double& x : z) x = rng.uniform(-1, 1);
    const double base = hermite_extension(k, z).theta;
    for (double lambda : {-3.0, 0.5, 2.0, 1e-3}) {
      std::vector<double> zl(k);
      for (int l = 0; l < k; ++l) zl[l] = lambda * z[l];
      EXPECT_NEAR(hermite_extension(k, zl).theta, lambda * lambda * base,
                  1e-12 * (1 + lambda * lambda * base));
    }
  }
}

TEST(Hermite, Validation) {
  EXPECT_THROW(hermite_extension(0, std::vector<double>{}), ConfigError);
  EXPECT_THROW(hermite_extension(2, std::vector<double>{1}), ConfigError);
  EXPECT_THROW(hermite_extension(kMaxOrder + 1, std::vector<double>(kMaxOrder + 1, 0.0)), ConfigError);
}
