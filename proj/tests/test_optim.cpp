#include <gtest/gtest.h>

#include <cmath>

#include "hopt/optim.hpp"

using namespace hopt;

namespace {

// f(x) = sum_i c_i (x_i - t_i)^2 + 0.1 (x_i - x_{i+1})^2 : strictly convex.
BoxObjective quadratic(std::vector<double> c, std::vector<double> t) {
  BoxObjective f;
  auto vg = [c, t](std::span<const double> x, std::span<double> g) {
    const std::size_t n = x.size();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s += c[i] * (x[i] - t[i]) * (x[i] - t[i]);
      if (!g.empty()) g[i] = 2 * c[i] * (x[i] - t[i]);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double d = x[i] - x[i + 1];
      s += 0.1 * d * d;
      if (!g.empty()) {
        g[i] += 0.2 * d;
        g[i + 1] -= 0.2 * d;
      }
    }
    return s;
  };
  f.value = [vg](std::span<const double> x) { return vg(x, {}); };
  f.value_grad = vg;
  f.hessian = [c](std::span<const double> x, bool) {
    const int n = static_cast<int>(x.size());
    Eigen::SparseMatrix<double> H(n, n);
    std::vector<Eigen::Triplet<double>> tr;
    for (int i = 0; i < n; ++i) tr.emplace_back(i, i, 2 * c[i]);
    for (int i = 0; i + 1 < n; ++i) {
      tr.emplace_back(i, i, 0.2);
      tr.emplace_back(i + 1, i + 1, 0.2);
      tr.emplace_back(i, i + 1, -0.2);
      tr.emplace_back(i + 1, i, -0.2);
    }
    H.setFromTriplets(tr.begin(), tr.end());
    return H;
  };
  return f;
}

// Nonconvex double-well chain: sum (x_i^2 - 1)^2 + (x_i - x_{i+1})^2.
BoxObjective chain() {
  BoxObjective f;
  auto vg = [](std::span<const double> x, std::span<double> g) {
    double s = 0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double w = x[i] * x[i] - 1;
      s += w * w;
      if (!g.empty()) g[i] = 4 * x[i] * w;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double d = x[i] - x[i + 1];
      s += d * d;
      if (!g.empty()) {
        g[i] += 2 * d;
        g[i + 1] -= 2 * d;
      }
    }
    return s;
  };
  f.value = [vg](std::span<const double> x) { return vg(x, {}); };
  f.value_grad = vg;
  f.hessian = [](std::span<const double> x, bool convexify) {
    const int n = static_cast<int>(x.size());
    Eigen::SparseMatrix<double> H(n, n);
    std::vector<Eigen::Triplet<double>> tr;
    for (int i = 0; i < n; ++i) {
      double w2 = 12 * x[i] * x[i] - 4;
      if (convexify) w2 = std::max(w2, 0.0);
      tr.emplace_back(i, i, w2);
    }
    for (int i = 0; i + 1 < n; ++i) {
      tr.emplace_back(i, i, 2.0);
      tr.emplace_back(i + 1, i + 1, 2.0);
      tr.emplace_back(i, i + 1, -2.0);
      tr.emplace_back(i + 1, i, -2.0);
    }
    H.setFromTriplets(tr.begin(), tr.end());
    return H;
  };
  return f;
}

}  // namespace

class OptimMethods : public ::testing::TestWithParam<Method> {};

TEST_P(OptimMethods, UnconstrainedQuadratic) {
  const std::vector<double> c{1, 2, 3, 4, 5}, t{0.5, -1, 2, 0, 1};
  const auto f = quadratic(c, t);
  OptimOptions opt;
  opt.method = GetParam();
  const auto r = minimize_box(f, std::vector<double>(5, 0.0), Bounds::unbounded(5), opt);
  EXPECT_TRUE(r.converged);
  std::vector<double> g(5);
  f.value_grad(r.x, g);
  for (double x : g) EXPECT_LT(std::abs(x), 1e-7);
}

TEST_P(OptimMethods, ActiveBoxAndFixedVariables) {
  const std::vector<double> c{1, 1, 1, 1}, t{3, -3, 0.2, 5};
  const auto f = quadratic(c, t);
  Bounds b{{-1, -1, -1, 2}, {1, 1, 1, 2}};
  OptimOptions opt;
  opt.method = GetParam();
  const auto r = minimize_box(f, {0, 0, 0, 0}, b, opt);
  EXPECT_TRUE(r.converged);
  EXPECT_DOUBLE_EQ(r.x[0], 1.0);
  EXPECT_DOUBLE_EQ(r.x[1], -1.0);
  EXPECT_DOUBLE_EQ(r.x[3], 2.0);
  // x[2] interior: stationarity in that coordinate alone
  // 2 (x - 0.2) + 0.2 (x - x1) - 0.2 (x3 - x) = 0
  const double x2 = (0.4 + 0.2 * -1 + 0.2 * 2) / 2.4;
  EXPECT_NEAR(r.x[2], x2, 1e-8);
}

TEST_P(OptimMethods, HistoryIsNonincreasing) {
  const auto f = chain();
  std::vector<double> x0(30);
  for (int i = 0; i < 30; ++i) x0[i] = std::sin(0.7 * i) * 1.5;
  OptimOptions opt;
  opt.method = GetParam();
  const auto r = minimize_box(f, x0, Bounds::unbounded(30), opt);
  ASSERT_GE(r.history.size(), 2u);
  EXPECT_DOUBLE_EQ(r.history.front(), f.value(x0));
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]);
  EXPECT_DOUBLE_EQ(r.history.back(), r.value);
  EXPECT_TRUE(r.converged);
}

INSTANTIATE_TEST_SUITE_P(Both, OptimMethods, ::testing::Values(Method::newton, Method::lbfgs),
                         [](const auto& info) { return to_string(info.param); });

TEST(Optim, StartIsProjected) {
  const auto f = quadratic({1, 1}, {0, 0});
  Bounds b{{1, 1}, {2, 2}};
  const auto r = minimize_box(f, {-5, 5}, b);
  EXPECT_DOUBLE_EQ(r.x[0], 1);
  EXPECT_DOUBLE_EQ(r.x[1], 1);
}

TEST(Optim, MaxIterReturnsBestIterate) {
  const auto f = chain();
  std::vector<double> x0(40);
  for (int i = 0; i < 40; ++i) x0[i] = std::cos(1.3 * i) * 2;
  OptimOptions opt;
  opt.method = Method::lbfgs;
  opt.max_iter = 2;
  const auto r = minimize_box(f, x0, Bounds::unbounded(40), opt);
  EXPECT_FALSE(r.converged);
  EXPECT_LE(r.iterations, 2);
  EXPECT_LT(r.value, f.value(x0));
}

TEST(Optim, Validation) {
  const auto f = quadratic({1}, {0});
  EXPECT_THROW(minimize_box(f, {0}, Bounds{{1}, {0}}), ConfigError);
  EXPECT_THROW(minimize_box(f, {0, 0}, Bounds::unbounded(1)), ConfigError);
  BoxObjective nohess = f;
  nohess.hessian = nullptr;
  EXPECT_THROW(minimize_box(nohess, {0}, Bounds::unbounded(1)), ConfigError);
  EXPECT_EQ(parse_method("lbfgs"), Method::lbfgs);
  EXPECT_THROW(parse_method("bfgs"), ConfigError);
}
