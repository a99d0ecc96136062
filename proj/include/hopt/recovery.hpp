// 1-D recovery sequences: the optimal profile, rescaled to eps, placed at
// every jump of a +-1 target.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hopt/core.hpp"
#include "hopt/energy.hpp"
#include "hopt/parallel.hpp"
#include "hopt/profile.hpp"

namespace hopt {

/// Piecewise-constant +-1 function on (a, b) with finitely many jumps.
struct JumpFunction {
  double a = 0;
  double b = 1;
  std::vector<double> jump_points;
  int first_value = 1;

  void validate() const {
    if (!(b > a)) throw ConfigError("jump function: need a < b");
    if (first_value != 1 && first_value != -1)
      throw ConfigError("jump function: first_value must be +-1");
    double prev = a;
    for (double x : jump_points) {
      if (!(x > prev)) throw ConfigError("jump function: jump points must be increasing in (a, b)");
      prev = x;
    }
    if (!jump_points.empty() && !(jump_points.back() < b))
      throw ConfigError("jump function: jump points must lie inside (a, b)");
  }

  int jump_count() const { return static_cast<int>(jump_points.size()); }

  /// Value on the right of x (the right limit at a jump).
  int value(double x) const {
    const auto c = std::upper_bound(jump_points.begin(), jump_points.end(), x) - jump_points.begin();
    return (c % 2) ? -first_value : first_value;
  }

  /// +1 if the i-th jump goes from -1 to 1, -1 otherwise.
  int orientation(int i) const { return (i % 2) ? first_value : -first_value; }

  double min_gap() const {
    double g = b - a;
    double prev = a;
    for (double x : jump_points) {
      g = std::min(g, x - prev);
      prev = x;
    }
    return std::min(g, b - prev);
  }

  JumpFunction negated() const { return {a, b, jump_points, -first_value}; }
};

/// Evenly spaced jumps at (i + 1) / (count + 1) of the interval.
inline JumpFunction uniform_jumps(int count, double a = 0, double b = 1, int first_value = -1) {
  if (count < 0) throw ConfigError("uniform_jumps: count must be >= 0");
  JumpFunction j{a, b, {}, first_value};
  for (int i = 0; i < count; ++i) j.jump_points.push_back(a + (b - a) * (i + 1) / (count + 1));
  return j;
}

inline GridFunction1D sample_jump_function(const JumpFunction& j, const Grid1D& grid) {
  j.validate();
  return GridFunction1D::sample(grid, [&](double t) { return static_cast<double>(j.value(t)); });
}

/// Smooth resampling of a profile given on a uniform grid of [-T, T], with
/// constant extension outside. Uses local Lagrange interpolation of degree
/// max(3, 2k - 1) on the nodes nearest to the evaluation point.
class ProfileInterpolant {
 public:
  ProfileInterpolant(const GridFunction1D& v, int k)
      : grid_(v.grid()), v_(v.data()), degree_(std::max(3, 2 * k - 1)) {
    if (grid_.n() < degree_ + 1) throw ConfigError("profile interpolant: grid too coarse");
  }

  double half_length() const { return std::max(-grid_.a(), grid_.b()); }
  double left_value() const { return v_.front(); }
  double right_value() const { return v_.back(); }
  int degree() const { return degree_; }

  double operator()(double s) const {
    const double h = grid_.h();
    const int n = grid_.n();
    if (s <= grid_.a()) return v_.front();
    if (s >= grid_.b()) return v_.back();
    const double x = (s - grid_.a()) / h;
    const int m = degree_ + 1;
    int i0 = static_cast<int>(std::floor(x)) - (m - 1) / 2;
    auto val = [&](int i) { return i < 0 ? v_.front() : (i >= n ? v_.back() : v_[i]); };
    bool flat = true;
    for (int j = 1; j < m; ++j) flat = flat && val(i0 + j) == val(i0);
    if (flat) return val(i0);
    double sum = 0;
    for (int j = 0; j < m; ++j) {
      double l = 1;
      for (int q = 0; q < m; ++q)
        if (q != j) l *= (x - (i0 + q)) / static_cast<double>(j - q);
      sum += l * val(i0 + j);
    }
    return sum;
  }

 private:
  Grid1D grid_;
  std::vector<double> v_;
  int degree_;
};

/// Checks eps * T against the gaps of the target: windows around
/// consecutive jumps must be disjoint and must stay inside (a, b).
inline void check_recovery_gap(const JumpFunction& target, double eps, double T) {
  if (!(eps > 0)) throw ConfigError("recovery: eps must be positive");
  const double w = eps * T;
  const auto& x = target.jump_points;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i == 0 && !(x[0] - target.a > w))
      throw ConfigError("recovery: eps*T = " + std::to_string(w) + " too large for the gap between a and jump 0");
    if (i + 1 == x.size() && !(target.b - x[i] > w))
      throw ConfigError("recovery: eps*T = " + std::to_string(w) + " too large for the gap between jump " +
                        std::to_string(i) + " and b");
    if (i + 1 < x.size() && !(x[i + 1] - x[i] > 2 * w))
      throw ConfigError("recovery: eps*T = " + std::to_string(w) + " not below half the gap between jumps " +
                        std::to_string(i) + " and " + std::to_string(i + 1));
  }
}

/// Default recovery grid: spacing eps / cells_per_eps over (a, b).
inline Grid1D recovery_grid(const JumpFunction& target, double eps, int cells_per_eps = 50) {
  if (cells_per_eps < 1) throw ConfigError("recovery: cells_per_eps must be >= 1");
  const double cells = std::ceil((target.b - target.a) / eps * cells_per_eps);
  if (cells > 5e7) throw ConfigError("recovery: grid too large");
  return Grid1D(target.a, target.b, static_cast<int>(cells) + 1);
}

/// u(t) = o_n v((t - x_n) / eps) within eps*T of jump x_n (o_n = +1 for an
/// upward jump, -1 for a downward one), the target elsewhere.
inline GridFunction1D build_recovery_1d(const JumpFunction& target, double eps,
                                        const GridFunction1D& profile, int k, const Grid1D& grid) {
  target.validate();
  const ProfileInterpolant v(profile, k);
  const double T = v.half_length();
  check_recovery_gap(target, eps, T);
  const auto& x = target.jump_points;
  return GridFunction1D::sample(grid, [&](double t) {
    if (!x.empty()) {
      const auto it = std::lower_bound(x.begin(), x.end(), t);
      int best = -1;
      double dist = std::numeric_limits<double>::infinity();
      if (it != x.end()) {
        best = static_cast<int>(it - x.begin());
        dist = *it - t;
      }
      if (it != x.begin() && t - *(it - 1) < dist) {
        best = static_cast<int>(it - x.begin()) - 1;
        dist = t - *(it - 1);
      }
      if (dist < eps * T) return target.orientation(best) * v((t - x[best]) / eps);
    }
    return static_cast<double>(target.value(t));
  });
}

inline GridFunction1D build_recovery_1d(const JumpFunction& target, double eps,
                                        const ProfileResult& profile, int k, int cells_per_eps = 50) {
  return build_recovery_1d(target, eps, profile.minimizer, k, recovery_grid(target, eps, cells_per_eps));
}

struct GammaRow {
  double eps = 0;
  int n = 0;
  double energy = 0;
  double ratio = 0;
  double l1 = 0;  // trapezoid L1 distance to the target
};

struct GammaOptions {
  int cells_per_eps = 50;
  int jobs = 1;
};

/// F_eps of the recovery sequence for each eps, and its ratio to mk * #S.
inline std::vector<GammaRow> gamma_sweep(const JumpFunction& target, int k, const DoubleWell& well,
                                         const std::vector<double>& eps_list,
                                         const GridFunction1D& profile, double mk,
                                         const GammaOptions& opt = {}) {
  target.validate();
  validate(EnergyParams{k, 1.0, well});
  if (eps_list.empty()) throw ConfigError("gamma_sweep: empty eps list");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1])) throw ConfigError("gamma_sweep: eps list must be decreasing");
  if (!(mk > 0)) throw ConfigError("gamma_sweep: m_k must be positive");
  const ProfileInterpolant probe(profile, k);
  for (double e : eps_list) {
    check_recovery_gap(target, e, probe.half_length());
    recovery_grid(target, e, opt.cells_per_eps);
  }
  return parallel_map<GammaRow>(opt.jobs, eps_list.size(), [&](std::size_t i) {
    const double e = eps_list[i];
    const Grid1D g = recovery_grid(target, e, opt.cells_per_eps);
    const auto u = build_recovery_1d(target, e, profile, k, g);
    GammaRow row;
    row.eps = e;
    row.n = g.n();
    row.energy = energy_F_eps(u, EnergyParams{k, e, well});
    row.ratio = target.jump_count() == 0 ? 0.0 : row.energy / (mk * target.jump_count());
    const auto s = sample_jump_function(target, g);
    std::vector<double> d(g.n());
    for (int j = 0; j < g.n(); ++j) d[j] = std::abs(u[j] - s[j]);
    row.l1 = trapezoid(d, g.h(), 0, g.n() - 1);
    return row;
  });
}

}  // namespace hopt
