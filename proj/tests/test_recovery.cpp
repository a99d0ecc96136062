#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "hopt/recovery.hpp"

using namespace hopt;

namespace {

const ProfileResult& profile(int k) {
  static std::map<int, ProfileResult> cache;
  auto it = cache.find(k);
  if (it == cache.end()) {
    ProfileProblem pb;
    pb.k = k;
    pb.T = 6;
    pb.n = 1201;
    it = cache.emplace(k, solve_clamped(pb)).first;
  }
  return it->second;
}

double mk(int k) {
  static std::map<int, double> cache;
  auto it = cache.find(k);
  if (it == cache.end())
    it = cache.emplace(k, estimate_mk(k, DoubleWell::quartic(), {4, 8, 16}, {3201}).estimate(k).value).first;
  return it->second;
}

}  // namespace

TEST(JumpFunction, Sampling) {
  const Grid1D g(0, 1, 11);
  const auto c = sample_jump_function(JumpFunction{0, 1, {}, 1}, g);
  for (double v : c.values()) EXPECT_EQ(v, 1.0);

  const auto s = sample_jump_function(JumpFunction{0, 1, {0.5}, -1}, g);
  for (int i = 0; i < 11; ++i) EXPECT_EQ(s[i], i < 5 ? -1.0 : 1.0) << i;  // node 0.5 takes the right limit

  const auto t = sample_jump_function(uniform_jumps(3), Grid1D(0, 1, 1001));
  int changes = 0;
  for (int i = 1; i < 1001; ++i) changes += t[i] != t[i - 1];
  EXPECT_EQ(changes, 3);
  EXPECT_EQ(t[0], -1.0);
  EXPECT_EQ(t[1000], 1.0);
}

TEST(JumpFunction, OrientationAndValidation) {
  const JumpFunction j{0, 1, {0.2, 0.5, 0.8}, 1};
  EXPECT_EQ(j.orientation(0), -1);
  EXPECT_EQ(j.orientation(1), 1);
  EXPECT_EQ(j.orientation(2), -1);
  EXPECT_NEAR(j.min_gap(), 0.2, 1e-15);
  EXPECT_EQ(j.negated().first_value, -1);
  EXPECT_THROW((JumpFunction{0, 1, {0.5, 0.4}, 1}.validate()), ConfigError);
  EXPECT_THROW((JumpFunction{0, 1, {1.0}, 1}.validate()), ConfigError);
  EXPECT_THROW((JumpFunction{0, 1, {0.5}, 0}.validate()), ConfigError);
}

TEST(Interpolant, ReproducesNodesAndSmoothFunctions) {
  const Grid1D g(-3, 3, 301);
  const auto f = GridFunction1D::sample(g, [](double s) { return std::tanh(s); });
  for (int k = 1; k <= 3; ++k) {
    const ProfileInterpolant v(f, k);
    EXPECT_EQ(v.degree(), std::max(3, 2 * k - 1));
    for (int i = 0; i < 301; i += 37) EXPECT_NEAR(v(g.node(i)), f[i], 1e-14);
    for (double s : {-2.345, -0.011, 0.5, 2.9})
      EXPECT_NEAR(v(s), std::tanh(s), 1e-7) << k;
    EXPECT_EQ(v(-10), f[0]);
    EXPECT_EQ(v(10), f[300]);
  }
}

TEST(Recovery, NoJumpsIsTarget) {
  const JumpFunction j{0, 1, {}, 1};
  const auto u = build_recovery_1d(j, 1e-2, profile(1), 1);
  for (double x : u.values()) EXPECT_EQ(x, 1.0);
  EXPECT_EQ(energy_F_eps(u, EnergyParams{1, 1e-2}), 0.0);
  const auto rows = gamma_sweep(j, 1, DoubleWell::quartic(), {1e-2, 5e-3}, profile(1).minimizer, 8.0 / 3);
  for (const auto& r : rows) {
    EXPECT_EQ(r.energy, 0.0);
    EXPECT_EQ(r.ratio, 0.0);
  }
}

TEST(Recovery, EqualsTargetOutsideWindows) {
  const auto j = uniform_jumps(2);
  const double eps = 1.0 / 64;
  const auto& p = profile(2);
  const auto u = build_recovery_1d(j, eps, p, 2);
  const auto s = sample_jump_function(j, u.grid());
  const double w = eps * 6;
  for (int i = 0; i < u.size(); ++i) {
    const double t = u.grid().node(i);
    bool inside = false;
    for (double x : j.jump_points) inside = inside || std::abs(t - x) < w;
    if (!inside) {
      EXPECT_EQ(u[i], s[i]) << t;
    }
  }
  // inside a window u is the oriented, rescaled profile
  const ProfileInterpolant v(p.minimizer, 2);
  for (int m = 0; m < j.jump_count(); ++m) {
    const double x = j.jump_points[m];
    const int i = u.grid().nearest(x);
    const double t = u.grid().node(i);
    EXPECT_NEAR(u[i], j.orientation(m) * v((t - x) / eps), 1e-12);
    EXPECT_NEAR(u[i], 0, 0.02);
  }
}

TEST(Recovery, EnergyLocalToWindows) {
  const auto j = uniform_jumps(1);
  const double eps = 1.0 / 64;
  const auto u = build_recovery_1d(j, eps, profile(2), 2);
  const double w = eps * 6;
  const EnergyParams p{2, eps};
  const double inner = energy_F_eps(u, p, std::pair{0.5 - w - 0.01, 0.5 + w + 0.01});
  EXPECT_NEAR(energy_F_eps(u, p), inner, 1e-12);
  EXPECT_EQ(energy_F_eps(u, p, std::pair{0.0, 0.5 - w - 0.02}), 0.0);
}

TEST(Recovery, GapConditionNamesPair) {
  const JumpFunction j{0, 1, {0.3, 0.35, 0.8}, 1};
  try {
    build_recovery_1d(j, 0.01, profile(1), 1);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("jumps 0 and 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(build_recovery_1d(JumpFunction{0, 1, {0.02}, 1}, 0.01, profile(1), 1), ConfigError);
}

TEST(Gamma, SingleJumpKOne) {
  const auto rows = gamma_sweep(uniform_jumps(1), 1, DoubleWell::quartic(),
                                {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256, 1.0 / 512, 1.0 / 1024},
                                profile(1).minimizer, 8.0 / 3);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_GE(rows.back().ratio, 0.98);
  EXPECT_LE(rows.back().ratio, 1.02);
  // ratios stay within a quadrature wiggle of each other
  for (const auto& r : rows) EXPECT_NEAR(r.ratio, rows.back().ratio, 1e-3);
}

TEST(Gamma, MultipleJumpsAllOrders) {
  for (int k = 1; k <= 3; ++k) {
    for (int jumps = 1; jumps <= 3; ++jumps) {
      const auto rows = gamma_sweep(uniform_jumps(jumps), k, DoubleWell::quartic(), {1.0 / 64, 1.0 / 256},
                                    profile(k).minimizer, mk(k));
      const double r = rows.back().ratio;
      EXPECT_GE(r, 0.98) << k << "," << jumps;
      EXPECT_LE(r, 1.02) << k << "," << jumps;
    }
  }
}

TEST(Gamma, L1Bound) {
  for (int k = 1; k <= 2; ++k) {
    const auto j = uniform_jumps(3);
    const double eps = 1.0 / 128;
    const auto rows = gamma_sweep(j, k, DoubleWell::quartic(), {eps}, profile(k).minimizer, 1.0);
    // |u - target| <= 2 on each window of length 2 eps T
    EXPECT_LE(rows[0].l1, 2 * 3 * eps * 6 * 2);
    EXPECT_GT(rows[0].l1, 0);
  }
}

TEST(Gamma, ReflectionSymmetry) {
  for (int k = 1; k <= 3; ++k) {
    const auto j = uniform_jumps(2);
    const auto a = gamma_sweep(j, k, DoubleWell::quartic(), {1.0 / 64}, profile(k).minimizer, 1.0);
    const auto b = gamma_sweep(j.negated(), k, DoubleWell::quartic(), {1.0 / 64}, profile(k).minimizer, 1.0);
    EXPECT_NEAR(a[0].energy, b[0].energy, 1e-10) << k;
  }
}

TEST(Gamma, Validation) {
  const auto& v = profile(1).minimizer;
  const auto W = DoubleWell::quartic();
  EXPECT_THROW(gamma_sweep(uniform_jumps(1), 1, W, {}, v, 1.0), ConfigError);
  EXPECT_THROW(gamma_sweep(uniform_jumps(1), 1, W, {0.01, 0.02}, v, 1.0), ConfigError);
  EXPECT_THROW(gamma_sweep(uniform_jumps(1), 1, W, {0.01}, v, 0.0), ConfigError);
  EXPECT_THROW(gamma_sweep(uniform_jumps(3), 1, W, {0.1}, v, 1.0), ConfigError);
}

TEST(Gamma, ParallelMatchesSerial) {
  GammaOptions par;
  par.jobs = 3;
  const std::vector<double> eps{1.0 / 64, 1.0 / 128, 1.0 / 256};
  const auto a = gamma_sweep(uniform_jumps(2), 2, DoubleWell::quartic(), eps, profile(2).minimizer, 1.0);
  const auto b = gamma_sweep(uniform_jumps(2), 2, DoubleWell::quartic(), eps, profile(2).minimizer, 1.0, par);
  for (std::size_t i = 0; i < eps.size(); ++i) EXPECT_EQ(a[i].energy, b[i].energy);
}
