#include <gtest/gtest.h>

#include <cmath>

#include "hopt/profile.hpp"

using namespace hopt;

namespace {

ProfileProblem clamped(int k, double T, int n) {
  ProfileProblem pb;
  pb.k = k;
  pb.T = T;
  pb.n = n;
  return pb;
}

ProfileProblem relaxed(int k, double T, int n, double eta, int N) {
  auto pb = clamped(k, T, n);
  pb.regime = Regime::relaxed;
  pb.eta = eta;
  pb.N = N;
  return pb;
}

// Endpoint derivative of order l by the same one-sided stencils the solver
// constrains.
double end_derivative(const GridFunction1D& u, int l, int i) {
  return DiffOperator(u.grid(), l).apply_row(i, u.values());
}

// k = 1 geodesic cost of moving between levels a < b: 2 |int_a^b sqrt W|.
double geodesic(double a, double b) {
  auto F = [](double z) { return z - z * z * z / 3; };  // antiderivative of 1 - z^2
  auto G = [](double z) { return z * z * z / 3 - z; };  // antiderivative of z^2 - 1
  if (b <= 1 && a >= -1) return 2 * std::abs(F(b) - F(a));
  return 2 * std::abs(G(b) - G(a));
}

}  // namespace

TEST(Clamped, KOneMatchesTanhCost) {
  const auto r = solve_clamped(clamped(1, 10, 4001));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, 8.0 / 3.0, 1e-3);
}

TEST(Clamped, ResultInvariants) {
  for (int k = 1; k <= 3; ++k) {
    const auto r = solve_clamped(clamped(k, 6, 1201));
    const double again = energy_profile(r.minimizer, k, DoubleWell::quartic());
    EXPECT_NEAR(r.value, again, 1e-12 * (1 + again));
    const int n = r.minimizer.size();
    EXPECT_NEAR(r.minimizer[0], -1, 1e-10);
    EXPECT_NEAR(r.minimizer[n - 1], 1, 1e-10);
    for (int l = 1; l < k; ++l) {
      EXPECT_NEAR(end_derivative(r.minimizer, l, 0), 0, 1e-10) << k << "," << l;
      EXPECT_NEAR(end_derivative(r.minimizer, l, n - 1), 0, 1e-10) << k << "," << l;
    }
    EXPECT_GT(r.value, 0);
  }
}

TEST(Clamped, TanhStartConvergesQuickly) {
  auto pb = clamped(1, 10, 4001);
  const Grid1D g(-10, 10, 4001);
  std::vector<double> u0(4001);
  for (int i = 0; i < 4001; ++i) u0[i] = std::tanh(g.node(i));
  u0.front() = -1;
  u0.back() = 1;
  pb.initial = u0;
  const auto r = solve_clamped(pb);
  EXPECT_NEAR(r.value, 8.0 / 3.0, 1e-3);
  EXPECT_LE(r.iterations, 10);
}

TEST(Clamped, DescentContract) {
  for (int k = 1; k <= 4; ++k) {
    for (auto method : {Method::newton, Method::lbfgs}) {
      auto pb = clamped(k, 5, 501);
      pb.method = method;
      pb.max_iter = method == Method::lbfgs ? 300 : 500;
      const auto r = solve_clamped(pb);
      ASSERT_FALSE(r.history.empty());
      for (std::size_t i = 1; i < r.history.size(); ++i)
        EXPECT_LE(r.history[i], r.history[i - 1]) << k;
      EXPECT_LE(r.value, r.history.front() + 1e-12);
    }
  }
}

TEST(Clamped, LbfgsAgreesWithNewton) {
  auto pb = clamped(2, 5, 401);
  const auto a = solve_clamped(pb);
  pb.method = Method::lbfgs;
  pb.max_iter = 20000;
  pb.tol = 1e-7;
  const auto b = solve_clamped(pb);
  EXPECT_NEAR(a.value, b.value, 1e-5 * a.value);
}

TEST(Clamped, MonotoneInT) {
  for (int k = 1; k <= 3; ++k) {
    double prev = INFINITY;
    // same spacing h = 0.01 at every T
    for (double T : {2.0, 4.0, 8.0}) {
      auto pb = clamped(k, T, static_cast<int>(std::lround(2 * T / 0.01)) + 1);
      const auto r = solve_clamped(pb);
      EXPECT_LE(r.value, prev + 10 * pb.tol) << k << " T=" << T;
      prev = r.value;
    }
  }
}

TEST(Clamped, RestartsReportMinimum) {
  auto pb = clamped(2, 5, 501);
  pb.restarts = 5;
  pb.seed = 42;
  const auto r = solve_clamped(pb);
  ASSERT_EQ(r.restart_values.size(), 6u);
  double lo = INFINITY;
  for (double v : r.restart_values) lo = std::min(lo, v);
  EXPECT_NEAR(r.value, lo, 1e-12 * (1 + lo));
  // stable: every restart lands on the same minimum
  for (double v : r.restart_values) EXPECT_NEAR(v, lo, 1e-6 * lo);
  const auto again = solve_clamped(pb);
  EXPECT_EQ(again.value, r.value);
}

TEST(Clamped, SymmetricMinimizer) {
  for (int k = 1; k <= 3; ++k) {
    const auto r = solve_clamped(clamped(k, 6, 1201));
    const auto s = symmetrize(r.minimizer);
    double dev = 0;
    for (int i = 0; i < s.size(); ++i) dev = std::max(dev, std::abs(s[i] - r.minimizer[i]));
    EXPECT_LT(dev, 1e-6) << k;
    EXPECT_LE(energy_profile(s, k, DoubleWell::quartic()), r.value + 1e-10) << k;
  }
}

TEST(Relaxed, BelowClampedAndFeasible) {
  for (int k = 1; k <= 3; ++k) {
    const auto c = solve_clamped(clamped(k, 5, 1001));
    const auto pb = relaxed(k, 5, 1001, 0.2, 2);
    const auto r = solve_relaxed(pb);
    EXPECT_LE(r.value, c.value + 10 * pb.tol) << k;
    const int n = r.minimizer.size();
    EXPECT_LE(std::abs(r.minimizer[0] + 1), 0.2 + 1e-10);
    EXPECT_LE(std::abs(r.minimizer[n - 1] - 1), 0.2 + 1e-10);
    for (int l = 1; l < k; ++l) {
      EXPECT_LE(std::abs(end_derivative(r.minimizer, l, 0)), 0.5 + 1e-10);
      EXPECT_LE(std::abs(end_derivative(r.minimizer, l, n - 1)), 0.5 + 1e-10);
    }
    const double again = energy_profile(r.minimizer, k, DoubleWell::quartic());
    EXPECT_NEAR(r.value, again, 1e-12 * (1 + again));
  }
}

TEST(Relaxed, MonotoneOnEtaNGrid) {
  const int k = 2;
  const double etas[] = {0.3, 0.15, 0.05};  // decreasing
  const int Ns[] = {1, 3, 10};             // increasing
  double v[3][3];
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) v[a][b] = solve_relaxed(relaxed(k, 5, 1001, etas[a], Ns[b])).value;
  const double slack = 10 * 1e-9;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      if (b + 1 < 3) {
        EXPECT_LE(v[a][b], v[a][b + 1] + slack) << a << "," << b;
      }
      if (a + 1 < 3) {
        EXPECT_LE(v[a][b], v[a + 1][b] + slack) << a << "," << b;
      }
    }
}

TEST(Relaxed, TightLimitRecoversClamped) {
  for (int k = 1; k <= 2; ++k) {
    // clamped pins k + 2 end layers, the tight relaxed limit only k, so the
    // gap is a first-order grid effect
    auto gap = [&](int n) {
      const auto c = solve_clamped(clamped(k, 5, n));
      const auto r = solve_relaxed(relaxed(k, 5, n, 1e-7, 10000000));
      EXPECT_LE(r.value, c.value + 1e-8) << k;
      return (c.value - r.value) / c.value;
    };
    const double g1 = gap(1001), g2 = gap(2001);
    if (k == 1) {
      EXPECT_LT(g1, 1e-8);
      EXPECT_LT(g2, 1e-8);
    } else {
      EXPECT_LT(g2, 1e-5);
      EXPECT_GT(g1 / g2, 1.8);
      EXPECT_LT(g1 / g2, 2.2);
    }
  }
}

TEST(Relaxed, KOneSandwich) {
  const auto r = solve_relaxed(relaxed(1, 10, 2001, 0.2, 1));
  EXPECT_GT(r.value, 0);
  EXPECT_LE(r.value, 8.0 / 3.0);
  // every feasible path crosses from -0.8 to 0.8
  EXPECT_GE(r.value, geodesic(-0.8, 0.8) - 1e-3);
}

TEST(Relaxed, Validation) {
  EXPECT_THROW(solve_relaxed(relaxed(1, 5, 501, 0.0, 1)), ConfigError);
  EXPECT_THROW(solve_relaxed(relaxed(1, 5, 501, -0.1, 1)), ConfigError);
  EXPECT_THROW(solve_relaxed(relaxed(1, 5, 501, 1.5, 1)), ConfigError);
  EXPECT_THROW(solve_relaxed(relaxed(1, 5, 501, 0.1, 0)), ConfigError);
}

TEST(Half, PositiveForAllOrders) {
  for (int k = 1; k <= 3; ++k) {
    const double m = m_star(k, DoubleWell::quartic(), 0.1, 10, 20);
    EXPECT_GT(m, 1e-3) << k;
  }
}

TEST(Half, KOneMatchesGeodesic) {
  const auto W = DoubleWell::quartic();
  for (double eta : {0.1, 0.25, 0.45}) {
    const double oracle = std::min(geodesic(1 - 2 * eta, 1 - eta), geodesic(1 + eta, 1 + 2 * eta));
    for (int sign : {1, -1}) {
      const auto r = solve_half(1, W, eta, 10, 20.0, sign);
      EXPECT_NEAR(r.value, oracle, 2e-3 + 1e-2 * oracle) << eta << " sign " << sign;
      EXPECT_EQ(r.rows.size(), 32u);
    }
  }
  // free ends give a first-order discretization error; halving h halves it
  HalfOptions fine;
  fine.h = 0.005;
  const double oracle = geodesic(0.8, 0.9);
  const double e1 = std::abs(solve_half(1, W, 0.1, 10, 20.0, 1).value - oracle);
  const double e2 = std::abs(solve_half(1, W, 0.1, 10, 20.0, 1, fine).value - oracle);
  EXPECT_GT(e1 / e2, 1.6);
  EXPECT_LT(e1 / e2, 2.4);
}

TEST(Half, SupersetGridCannotIncrease) {
  const auto W = DoubleWell::quartic();
  const std::vector<double> coarse{0.5, 2, 8};
  const std::vector<double> fine{0.25, 0.5, 1, 2, 4, 8};
  for (int k = 1; k <= 2; ++k) {
    const double a = solve_half(k, W, 0.1, 10, coarse, 1).value;
    const double b = solve_half(k, W, 0.1, 10, fine, 1).value;
    EXPECT_LE(b, a) << k;
  }
}

TEST(Half, ConstraintsHold) {
  ProfileProblem pb;
  pb.k = 2;
  pb.T = 2;
  pb.n = 201;
  pb.regime = Regime::half;
  pb.eta = 0.1;
  pb.N = 5;
  pb.sign = -1;
  pb.branch = 1;
  const auto r = solve_profile(pb);
  EXPECT_LE(std::abs(r.minimizer[0] + 1), 0.1 + 1e-10);
  EXPECT_NEAR(r.minimizer[200], -1 + 0.2, 1e-12);
  EXPECT_LE(std::abs(end_derivative(r.minimizer, 1, 0)), 0.2 + 1e-10);
}

TEST(Half, Validation) {
  const auto W = DoubleWell::quartic();
  EXPECT_THROW(solve_half(1, W, 0.1, 10, std::vector<double>{}, 1), ConfigError);
  EXPECT_THROW(solve_half(1, W, 0.1, 10, std::vector<double>{-1.0}, 1), ConfigError);
  EXPECT_THROW(geometric_grid(10, 100, 0), ConfigError);
  const auto t = geometric_grid(20, 100, 16);
  ASSERT_EQ(t.size(), 16u);
  EXPECT_NEAR(t.front(), 0.2, 1e-12);
  EXPECT_NEAR(t.back(), 20, 1e-12);
}

TEST(Glue, ConstantNeedsNothing) {
  const Grid1D g(-3, 3, 601);
  for (int k = 1; k <= 3; ++k) {
    const auto r = glue_to_constant(GridFunction1D(g, 1.0), 1, k, DoubleWell::quartic());
    EXPECT_NEAR(r.added_energy, 0, 1e-14);
    const auto l = glue_to_constant(GridFunction1D(g, -1.0), -1, k, DoubleWell::quartic());
    EXPECT_NEAR(l.added_energy, 0, 1e-14);
    EXPECT_EQ(l.extended.grid().b(), 3);
  }
}

TEST(Glue, ClampedMinimizerNeedsNothing) {
  for (int k = 1; k <= 3; ++k) {
    const auto c = solve_clamped(clamped(k, 5, 1001));
    for (int side : {1, -1}) {
      const auto r = glue_to_constant(c.minimizer, side, k, DoubleWell::quartic());
      EXPECT_LE(r.added_energy, 1e-8) << k;
    }
  }
}

TEST(Glue, OffsetEndpointMatchesQuadrature) {
  const Grid1D g(-2, 2, 401);  // h = 0.01, buffer exactly 1
  const auto W = DoubleWell::quartic();
  auto simpson = [](auto f) {
    const int m = 20000;
    double s = f(0.0) + f(1.0);
    for (int i = 1; i < m; ++i) s += (i % 2 ? 4 : 2) * f(static_cast<double>(i) / m);
    return s / (3.0 * m);
  };
  // k = 1: bridge p = 0.1 (1 - t), theta = 0.01.
  {
    const auto r = glue_to_constant(GridFunction1D(g, 1.1), 1, 1, W);
    const double wq = simpson([&](double t) { return W(1 + 0.1 * (1 - t)); });
    EXPECT_NEAR(r.theta, 0.01, 1e-12);
    EXPECT_NEAR(r.well_energy, wq, 1e-9);
    EXPECT_NEAR(r.added_energy, 0.01 + wq, 1e-9);
    // closed form of the well part: (1/0.1) int_0^0.1 (4s^2 + 4s^3 + s^4) ds
    EXPECT_NEAR(wq, 0.0143533333333333, 1e-12);
  }
  // k = 2: p = 0.1 (2t^3 - 3t^2 + 1), theta = 0.12.
  {
    const auto r = glue_to_constant(GridFunction1D(g, 1.1), 1, 2, W);
    const double wq = simpson([&](double t) { return W(1 + 0.1 * (2 * t * t * t - 3 * t * t + 1)); });
    EXPECT_NEAR(r.theta, 0.12, 1e-10);
    EXPECT_NEAR(r.added_energy, 0.12 + wq, 1e-9);
    EXPECT_GT(r.added_energy, 0);
  }
  // the extended function ends on the well
  const auto r = glue_to_constant(GridFunction1D(g, 1.1), 1, 2, W);
  EXPECT_EQ(r.extended.data().back(), 1.0);
  EXPECT_NEAR(r.buffer, 1.0, 1e-12);
}

TEST(Mk, KOneTable) {
  const auto t = estimate_mk(1, DoubleWell::quartic(), {5, 10}, {2001, 4001});
  const auto& e = t.estimate(1);
  EXPECT_NEAR(e.value, 8.0 / 3.0, 1e-3);
  EXPECT_EQ(e.monotonicity_violations, 0);
  EXPECT_TRUE(e.all_converged);
  EXPECT_EQ(t.rows.size(), 4u);
  // spacing is shared within a family
  EXPECT_EQ(t.rows[0].n, 1001);
  EXPECT_NEAR(t.rows[0].h, t.rows[1].h, 1e-15);
}

TEST(Mk, HigherOrdersPositiveAndStable) {
  const auto t = estimate_mk(std::vector<int>{2, 3}, DoubleWell::quartic(), {4, 8, 16}, {3201, 6401});
  for (int k : {2, 3}) {
    const auto& e = t.estimate(k);
    EXPECT_GT(e.value, 0);
    EXPECT_LT(e.uncertainty, 0.01 * e.value) << k;
    EXPECT_EQ(e.monotonicity_violations, 0) << k;
    EXPECT_TRUE(e.all_converged) << k;
  }
  EXPECT_EQ(t.violations(), 0);
}

TEST(Mk, CheckpointResumeReproducesTable) {
  MkOptions opt;
  std::vector<MkCell> cells;
  opt.on_cell = [&](const MkCell& c) { cells.push_back(c); };
  const auto first = estimate_mk(std::vector<int>{1, 2}, DoubleWell::quartic(), {2, 4}, {401, 801}, opt);
  ASSERT_EQ(cells.size(), 8u);

  MkOptions resume;
  for (const auto& c : cells) resume.completed.emplace(std::make_tuple(c.row.k, c.row.T, c.row.n), c);
  int recomputed = 0;
  resume.on_cell = [&](const MkCell&) { ++recomputed; };
  const auto second = estimate_mk(std::vector<int>{1, 2}, DoubleWell::quartic(), {2, 4}, {401, 801}, resume);
  EXPECT_EQ(recomputed, 0);
  ASSERT_EQ(first.rows.size(), second.rows.size());
  for (std::size_t i = 0; i < first.rows.size(); ++i) EXPECT_EQ(first.rows[i].value, second.rows[i].value);

  // partial checkpoint: drop the last cell of each family and recompute it
  MkOptions partial;
  for (const auto& c : cells)
    if (c.row.T < 4) partial.completed.emplace(std::make_tuple(c.row.k, c.row.T, c.row.n), c);
  int redone = 0;
  partial.on_cell = [&](const MkCell&) { ++redone; };
  const auto third = estimate_mk(std::vector<int>{1, 2}, DoubleWell::quartic(), {2, 4}, {401, 801}, partial);
  EXPECT_EQ(redone, 4);
  for (std::size_t i = 0; i < first.rows.size(); ++i)
    EXPECT_NEAR(first.rows[i].value, third.rows[i].value, 1e-12 * first.rows[i].value);
}

TEST(Mk, ParallelMatchesSerial) {
  MkOptions par;
  par.jobs = 3;
  const auto a = estimate_mk(std::vector<int>{1, 2}, DoubleWell::quartic(), {2, 4}, {401, 801});
  const auto b = estimate_mk(std::vector<int>{1, 2}, DoubleWell::quartic(), {2, 4}, {401, 801}, par);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].value, b.rows[i].value);
}

TEST(Mk, Validation) {
  const auto W = DoubleWell::quartic();
  EXPECT_THROW(estimate_mk(1, W, {4, 2}, {401}), ConfigError);
  EXPECT_THROW(estimate_mk(1, W, {2, 4}, {801, 401}), ConfigError);
  EXPECT_THROW(estimate_mk(1, W, {}, {401}), ConfigError);
  EXPECT_THROW(estimate_mk(0, W, {2}, {401}), ConfigError);
  EXPECT_THROW(solve_clamped(clamped(3, 5, 8)), ConfigError);
  EXPECT_THROW(solve_clamped(clamped(1, -1, 101)), ConfigError);
}
