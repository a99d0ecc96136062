// Optimal-profile problems on finite intervals: clamped (compact transition),
// relaxed endpoint conditions, half transitions, and the m_k estimation
// pipeline built on them.
//
// Unknowns are nodal values, except for the first/last k nodes, which are
// parametrized by the endpoint value and the one-sided difference quotients
//   c_l = Delta^l u_0 / h^l  (left),   c_l = nabla^l u_{n-1} / h^l  (right),
// so every endpoint condition of the three regimes is a box constraint.
#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "hopt/core.hpp"
#include "hopt/energy.hpp"
#include "hopt/hermite.hpp"
#include "hopt/optim.hpp"
#include "hopt/parallel.hpp"
#include "hopt/rng.hpp"

namespace hopt {

enum class Regime { clamped, relaxed, half };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::clamped: return "clamped";
    case Regime::relaxed: return "relaxed";
    case Regime::half: return "half";
  }
  return "?";
}

struct ProfileProblem {
  int k = 1;
  double T = 10;  // half-length for clamped/relaxed, length for half
  Regime regime = Regime::clamped;
  double eta = 0;  // relaxed / half
  int N = 1;       // relaxed / half
  int sign = 1;    // half: well the transition starts from
  int branch = 1;  // half: terminal value sign + branch * 2 eta
  int n = 2001;
  double tol = 1e-9;
  int max_iter = 500;
  DoubleWell well = DoubleWell::quartic();
  Method method = Method::newton;
  int restarts = 0;
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> initial;  // nodal values on the solve grid
};

struct ProfileResult {
  GridFunction1D minimizer;
  double value = 0;
  double grad_norm = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;         // energy per accepted step of the best run
  std::vector<double> restart_values;  // final value of every run (first = default start)
};

/// Number of nodes pinned to +-1 at each end of a clamped grid. With k + 2
/// constant nodes every stencil row near the ends sees constant data, so the
/// discrete derivatives of order 1..k vanish there exactly.
inline int clamped_layers(int k) { return k + 2; }

namespace detail {

inline double binom(int n, int r) {
  double b = 1;
  for (int i = 1; i <= r; ++i) b = b * (n - r + i) / i;
  return b;
}

// u = M c for the endpoint blocks; identity elsewhere.
class EndpointMap {
 public:
  EndpointMap(int n, int left, int right, double h) : n_(n), left_(left), right_(right), h_(h) {
    ml_.assign(left, std::vector<double>(left, 0.0));
    mr_.assign(right, std::vector<double>(right, 0.0));
    for (int j = 0; j < left; ++j)
      for (int l = 0; l <= j; ++l) ml_[j][l] = binom(j, l) * std::pow(h, l);
    for (int j = 0; j < right; ++j)
      for (int l = 0; l <= j; ++l)
        mr_[j][l] = binom(j, l) * std::pow(-h, l);
  }

  int n() const { return n_; }

  std::vector<double> to_u(std::span<const double> c) const {
    std::vector<double> u(c.begin(), c.end());
    for (int j = 0; j < left_; ++j) {
      double s = 0;
      for (int l = 0; l <= j; ++l) s += ml_[j][l] * c[l];
      u[j] = s;
    }
    for (int j = 0; j < right_; ++j) {
      double s = 0;
      for (int l = 0; l <= j; ++l) s += mr_[j][l] * c[n_ - 1 - l];
      u[n_ - 1 - j] = s;
    }
    return u;
  }

  std::vector<double> to_c(std::span<const double> u) const {
    std::vector<double> c(u.begin(), u.end());
    for (int l = 0; l < left_; ++l) {
      double s = 0;
      for (int j = 0; j <= l; ++j) s += binom(l, j) * ((l - j) % 2 ? -1 : 1) * u[j];
      c[l] = s / std::pow(h_, l);
    }
    for (int l = 0; l < right_; ++l) {
      double s = 0;
      for (int j = 0; j <= l; ++j) s += binom(l, j) * (j % 2 ? -1 : 1) * u[n_ - 1 - j];
      c[n_ - 1 - l] = s / std::pow(h_, l);
    }
    return c;
  }

  void grad_to_c(std::span<const double> gu, std::span<double> gc) const {
    std::copy(gu.begin(), gu.end(), gc.begin());
    for (int l = 0; l < left_; ++l) {
      double s = 0;
      for (int j = l; j < left_; ++j) s += ml_[j][l] * gu[j];
      gc[l] = s;
    }
    for (int l = 0; l < right_; ++l) {
      double s = 0;
      for (int j = l; j < right_; ++j) s += mr_[j][l] * gu[n_ - 1 - j];
      gc[n_ - 1 - l] = s;
    }
  }

  Eigen::SparseMatrix<double> matrix() const {
    std::vector<Eigen::Triplet<double>> t;
    for (int i = left_; i < n_ - right_; ++i) t.emplace_back(i, i, 1.0);
    for (int j = 0; j < left_; ++j)
      for (int l = 0; l <= j; ++l) t.emplace_back(j, l, ml_[j][l]);
    for (int j = 0; j < right_; ++j)
      for (int l = 0; l <= j; ++l) t.emplace_back(n_ - 1 - j, n_ - 1 - l, mr_[j][l]);
    Eigen::SparseMatrix<double> M(n_, n_);
    M.setFromTriplets(t.begin(), t.end());
    return M;
  }

 private:
  int n_, left_, right_;
  double h_;
  std::vector<std::vector<double>> ml_, mr_;
};

struct Setup {
  Grid1D grid;
  EndpointMap map;
  Bounds bounds;
};

inline Setup make_setup(const ProfileProblem& pb) {
  const int k = pb.k, n = pb.n;
  const double inf = std::numeric_limits<double>::infinity();
  if (pb.regime == Regime::half) {
    Grid1D g(0.0, pb.T, n);
    EndpointMap m(n, k, 1, g.h());
    Bounds b{std::vector<double>(n, -inf), std::vector<double>(n, inf)};
    b.lo[0] = pb.sign - pb.eta;
    b.hi[0] = pb.sign + pb.eta;
    for (int l = 1; l < k; ++l) {
      b.lo[l] = -1.0 / pb.N;
      b.hi[l] = 1.0 / pb.N;
    }
    b.lo[n - 1] = b.hi[n - 1] = pb.sign + pb.branch * 2.0 * pb.eta;
    return {g, m, b};
  }
  Grid1D g(-pb.T, pb.T, n);
  EndpointMap m(n, k, k, g.h());
  Bounds b{std::vector<double>(n, -inf), std::vector<double>(n, inf)};
  if (pb.regime == Regime::clamped) {
    for (int l = 0; l < k; ++l) {
      b.lo[l] = b.hi[l] = l == 0 ? -1.0 : 0.0;
      b.lo[n - 1 - l] = b.hi[n - 1 - l] = l == 0 ? 1.0 : 0.0;
    }
    for (int i = k; i < clamped_layers(k); ++i) {
      b.lo[i] = b.hi[i] = -1.0;
      b.lo[n - 1 - i] = b.hi[n - 1 - i] = 1.0;
    }
  } else {
    b.lo[0] = -1 - pb.eta;
    b.hi[0] = -1 + pb.eta;
    b.lo[n - 1] = 1 - pb.eta;
    b.hi[n - 1] = 1 + pb.eta;
    for (int l = 1; l < k; ++l) {
      b.lo[l] = b.lo[n - 1 - l] = -1.0 / pb.N;
      b.hi[l] = b.hi[n - 1 - l] = 1.0 / pb.N;
    }
  }
  return {g, m, b};
}

// Smooth step from lo (t <= -L) to hi (t >= L) with k-1 vanishing
// derivatives at both ends.
inline double smooth_step(int k, double t, double L, double lo, double hi) {
  if (t <= -L) return lo;
  if (t >= L) return hi;
  static thread_local std::map<int, Polynomial> cache;
  auto it = cache.find(k);
  if (it == cache.end()) {
    std::vector<double> z(k, 0.0);
    z[0] = 1.0;
    it = cache.emplace(k, hermite_extension(k, z).poly).first;
  }
  const double tau = (t + L) / (2 * L);
  return lo + (hi - lo) * (1.0 - it->second(tau));
}

}  // namespace detail

/// Default starting point: an odd ramp clamp(t / min(1, T), -1, 1) whose
/// corners are replaced by the order-k Hermite bridge (a smooth step).
inline std::vector<double> clamped_initial_guess(int k, const Grid1D& g) {
  const double T = g.b();
  const double Teff = T - clamped_layers(k) * g.h();
  const double L = std::max(std::min(1.0, Teff), g.h());
  std::vector<double> u(g.n());
  for (int i = 0; i < g.n(); ++i) u[i] = detail::smooth_step(k, g.node(i), L, -1.0, 1.0);
  return u;
}

inline void validate(const ProfileProblem& pb) {
  if (pb.k < 1 || pb.k > kMaxOrder)
    throw ConfigError("profile: k must be in [1, " + std::to_string(kMaxOrder) + "]");
  if (!(pb.T > 0) || !std::isfinite(pb.T)) throw ConfigError("profile: T must be positive");
  const int need = pb.regime == Regime::clamped ? 2 * clamped_layers(pb.k) + 1
                                                : std::max(min_nodes(pb.k), pb.k + 2);
  if (pb.n < std::max(need, min_nodes(pb.k)))
    throw ConfigError("profile: n too small for k = " + std::to_string(pb.k));
  if (!(pb.tol > 0)) throw ConfigError("profile: tol must be positive");
  if (pb.max_iter < 1) throw ConfigError("profile: max_iter must be >= 1");
  if (pb.restarts < 0) throw ConfigError("profile: restarts must be >= 0");
  if (pb.regime != Regime::clamped) {
    const double sb = std::sqrt(pb.well.beta());
    const double cap = pb.regime == Regime::half ? std::min(1.0, sb) : sb;
    if (!(pb.eta > 0) || !(pb.eta < cap))
      throw ConfigError("profile: eta must lie in (0, " + std::to_string(cap) + ")");
    if (pb.N < 1) throw ConfigError("profile: N must be >= 1");
  }
  if (pb.regime == Regime::half) {
    if (pb.sign != 1 && pb.sign != -1) throw ConfigError("profile: sign must be +-1");
    if (pb.branch != 1 && pb.branch != -1) throw ConfigError("profile: branch must be +-1");
  }
  if (pb.initial && static_cast<int>(pb.initial->size()) != pb.n)
    throw ConfigError("profile: initial guess has wrong length");
}

/// Solves any regime. Runs from the given (or default) start and from
/// `restarts` randomly perturbed copies of it; returns the best run.
inline ProfileResult solve_profile(const ProfileProblem& pb) {
  validate(pb);
  const auto setup = detail::make_setup(pb);
  const Grid1D& g = setup.grid;
  DiscreteEnergy E(g, pb.k, pb.well, 1.0);
  const auto& map = setup.map;
  const Eigen::SparseMatrix<double> M = map.matrix();
  const Eigen::SparseMatrix<double> Mt = M.transpose();

  BoxObjective obj;
  obj.value = [&](std::span<const double> c) { return E.value(map.to_u(c)); };
  obj.value_grad = [&](std::span<const double> c, std::span<double> gc) {
    const auto u = map.to_u(c);
    std::vector<double> gu(u.size());
    const double v = E.value_and_gradient(u, gu);
    map.grad_to_c(gu, gc);
    return v;
  };
  obj.hessian = [&](std::span<const double> c, bool convexify) {
    const auto u = map.to_u(c);
    Eigen::SparseMatrix<double> H = E.hessian(u, convexify);
    return Eigen::SparseMatrix<double>(Mt * H * M);
  };

  std::vector<double> u0;
  if (pb.initial) {
    u0 = *pb.initial;
  } else if (pb.regime == Regime::half) {
    const double target = pb.sign + pb.branch * 2.0 * pb.eta;
    std::vector<double> z(pb.k, 0.0);
    z[0] = 1.0;
    const auto p = hermite_extension(pb.k, z).poly;
    u0.resize(g.n());
    for (int i = 0; i < g.n(); ++i) u0[i] = target + (pb.sign - target) * p(g.node(i) / pb.T);
  } else {
    u0 = clamped_initial_guess(pb.k, g);
    if (pb.regime == Regime::relaxed) {
      ProfileProblem cl = pb;
      cl.regime = Regime::clamped;
      cl.restarts = 0;
      u0 = solve_profile(cl).minimizer.data();
    }
  }

  OptimOptions opt;
  opt.method = pb.method;
  opt.tol = pb.tol;
  opt.max_iter = pb.max_iter;

  std::optional<OptimResult> best;
  std::vector<double> values;
  for (int r = 0; r <= pb.restarts; ++r) {
    std::vector<double> start = u0;
    if (r > 0) {
      Rng rng(derive_seed(pb.seed, static_cast<std::uint64_t>(r)));
      const double a = g.a(), len = g.length();
      std::vector<double> amp(4);
      for (auto& x : amp) x = 0.1 * rng.normal();
      for (int i = 0; i < g.n(); ++i) {
        const double s = (g.node(i) - a) / len;
        double d = 0;
        for (int m = 0; m < 4; ++m) d += amp[m] * std::sin((m + 1) * std::numbers::pi * s);
        start[i] += d;
      }
    }
    auto res = minimize_box(obj, map.to_c(start), setup.bounds, opt);
    values.push_back(res.value);
    if (!best || res.value < best->value) best = std::move(res);
  }

  ProfileResult out{GridFunction1D(g, map.to_u(best->x)), 0, 0, 0, false, {}, {}};
  out.value = energy_profile(out.minimizer, pb.k, pb.well);
  out.grad_norm = best->grad_norm;
  out.iterations = best->iterations;
  out.converged = best->converged;
  out.history = std::move(best->history);
  out.restart_values = std::move(values);
  return out;
}

inline ProfileResult solve_clamped(ProfileProblem pb) {
  pb.regime = Regime::clamped;
  return solve_profile(pb);
}

inline ProfileResult solve_relaxed(ProfileProblem pb) {
  pb.regime = Regime::relaxed;
  return solve_profile(pb);
}

/// (u(t) - u(-t)) / 2 on a grid symmetric about 0.
inline GridFunction1D symmetrize(const GridFunction1D& u) {
  const auto& g = u.grid();
  if (std::abs(g.a() + g.b()) > 1e-12 * g.length())
    throw ConfigError("symmetrize: grid must be symmetric about 0");
  std::vector<double> v(g.n());
  for (int i = 0; i < g.n(); ++i) v[i] = 0.5 * (u[i] - u[g.n() - 1 - i]);
  return GridFunction1D(g, std::move(v));
}

// ---------------------------------------------------------------------------
// Half transitions
// ---------------------------------------------------------------------------

struct HalfOptions {
  double h = 0.01;       // target spacing of each solve grid
  int t_points = 16;     // geometric T-grid size
  double t_ratio = 100;  // T-grid spans [Tbar / t_ratio, Tbar]
  double tol = 1e-9;
  int max_iter = 500;
  Method method = Method::newton;
};

struct HalfRow {
  double T;
  int branch;
  double value;
  bool converged;
};

struct HalfResult {
  int sign = 1;
  double value = std::numeric_limits<double>::infinity();
  double T_star = 0;
  int branch_star = 0;
  std::vector<HalfRow> rows;
};

inline std::vector<double> geometric_grid(double hi, double ratio, int points) {
  if (points < 1) throw ConfigError("T-grid: need at least one point");
  if (!(hi > 0) || !(ratio >= 1)) throw ConfigError("T-grid: invalid range");
  std::vector<double> t(points);
  for (int i = 0; i < points; ++i)
    t[i] = points == 1 ? hi : hi / ratio * std::pow(ratio, static_cast<double>(i) / (points - 1));
  return t;
}

/// Minimal energy to leave the eta-neighbourhood of the well `sign` (with
/// derivatives bounded by 1/N at the start) and reach distance exactly
/// 2 eta from it, minimized over both terminal branches and the T-grid.
inline HalfResult solve_half(int k, const DoubleWell& well, double eta, int N,
                             const std::vector<double>& T_grid, int sign,
                             const HalfOptions& opt = {}) {
  if (T_grid.empty()) throw ConfigError("solve_half: empty T-grid");
  if (!(opt.h > 0)) throw ConfigError("solve_half: spacing must be positive");
  HalfResult out;
  out.sign = sign;
  for (double T : T_grid) {
    if (!(T > 0)) throw ConfigError("solve_half: T values must be positive");
    const int n = std::max({min_nodes(k), k + 3, static_cast<int>(std::lround(T / opt.h)) + 1});
    for (int branch : {-1, 1}) {
      ProfileProblem pb;
      pb.k = k;
      pb.T = T;
      pb.regime = Regime::half;
      pb.eta = eta;
      pb.N = N;
      pb.sign = sign;
      pb.branch = branch;
      pb.n = n;
      pb.tol = opt.tol;
      pb.max_iter = opt.max_iter;
      pb.well = well;
      pb.method = opt.method;
      const auto r = solve_profile(pb);
      out.rows.push_back({T, branch, r.value, r.converged});
      if (r.value < out.value) {
        out.value = r.value;
        out.T_star = T;
        out.branch_star = branch;
      }
    }
  }
  return out;
}

inline HalfResult solve_half(int k, const DoubleWell& well, double eta, int N, double Tbar,
                             int sign, const HalfOptions& opt = {}) {
  return solve_half(k, well, eta, N, geometric_grid(Tbar, opt.t_ratio, opt.t_points), sign, opt);
}

/// min over both wells of the half-transition infimum.
inline double m_star(int k, const DoubleWell& well, double eta, int N, double Tbar,
                     const HalfOptions& opt = {}) {
  return std::min(solve_half(k, well, eta, N, Tbar, 1, opt).value,
                  solve_half(k, well, eta, N, Tbar, -1, opt).value);
}

// ---------------------------------------------------------------------------
// Gluing to the wells
// ---------------------------------------------------------------------------

struct GlueResult {
  GridFunction1D extended;
  double theta = 0;        // integral of (bridge^(k))^2 over the buffer
  double well_energy = 0;  // integral of W(bridge) over the buffer
  double added_energy = 0;
  double buffer = 0;       // buffer length (a whole number of cells, ~ 1)
};

/// Extends v beyond its right end (side = +1, towards +1) or left end
/// (side = -1, towards -1) by the minimal Hermite bridge over a unit-length
/// buffer, then by k + 2 constant nodes.
inline GlueResult glue_to_constant(const GridFunction1D& v, int side, int k,
                                   const DoubleWell& well) {
  if (side != 1 && side != -1) throw ConfigError("glue_to_constant: side must be +-1");
  if (k < 1 || k > kMaxOrder) throw ConfigError("glue_to_constant: k out of range");
  const Grid1D& g = v.grid();
  const int n = g.n();
  const double h = g.h();
  const int end = side > 0 ? n - 1 : 0;

  std::vector<double> z(k);
  z[0] = v[end] - side;
  for (int l = 1; l < k; ++l) {
    DiffOperator d(g, l);
    const double dl = d.apply_row(end, v.values());
    z[l] = side > 0 ? dl : ((l % 2) ? -dl : dl);
  }
  const int m = std::max(1, static_cast<int>(std::lround(1.0 / h)));
  const double L = m * h;
  std::vector<double> zs(k);
  for (int l = 0; l < k; ++l) zs[l] = z[l] * std::pow(L, l);
  const auto he = hermite_extension(k, zs);

  GlueResult out{GridFunction1D(g)};
  out.buffer = L;
  out.theta = he.theta * std::pow(L, 1 - 2 * k);
  // composite Simpson on the unit interval
  const int panels = 4096;
  double s = 0;
  for (int i = 0; i <= panels; ++i) {
    const double tau = static_cast<double>(i) / panels;
    const double wq = (i == 0 || i == panels) ? 1 : (i % 2 ? 4 : 2);
    s += wq * well(side + he.poly(tau));
  }
  out.well_energy = L * s / (3.0 * panels);
  out.added_energy = out.theta + out.well_energy;

  const int pad = k + 2;
  std::vector<double> vals;
  vals.reserve(n + m + pad);
  if (side > 0) {
    vals.assign(v.data().begin(), v.data().end());
    for (int j = 1; j <= m; ++j) vals.push_back(j == m ? 1.0 : 1.0 + he.poly(static_cast<double>(j) / m));
    for (int j = 0; j < pad; ++j) vals.push_back(1.0);
    out.extended = GridFunction1D(Grid1D(g.a(), g.b() + (m + pad) * h, n + m + pad), std::move(vals));
  } else {
    for (int j = 0; j < pad; ++j) vals.push_back(-1.0);
    for (int j = m; j >= 1; --j) vals.push_back(j == m ? -1.0 : -1.0 + he.poly(static_cast<double>(j) / m));
    vals.insert(vals.end(), v.data().begin(), v.data().end());
    out.extended = GridFunction1D(Grid1D(g.a() - (m + pad) * h, g.b(), n + m + pad), std::move(vals));
  }
  return out;
}

// ---------------------------------------------------------------------------
// m_k tables
// ---------------------------------------------------------------------------

struct MkRow {
  int k = 1;
  double T = 0;
  int n = 0;
  double h = 0;
  double value = 0;
  double grad_norm = 0;
  bool converged = false;
  int iterations = 0;
};

struct MkEstimate {
  int k = 1;
  double value = 0;
  double uncertainty = 0;
  int monotonicity_violations = 0;
  bool all_converged = true;
};

struct MkTable {
  std::vector<MkRow> rows;
  std::vector<MkEstimate> estimates;

  int violations() const {
    int v = 0;
    for (const auto& e : estimates) v += e.monotonicity_violations;
    return v;
  }
  const MkEstimate& estimate(int k) const {
    for (const auto& e : estimates)
      if (e.k == k) return e;
    throw ConfigError("MkTable: no estimate for k = " + std::to_string(k));
  }
};

/// A finished table cell together with its minimizer (for resuming).
struct MkCell {
  MkRow row;
  std::vector<double> minimizer;
};

struct MkOptions {
  double tol = 1e-9;
  int max_iter = 500;
  Method method = Method::newton;
  int restarts = 0;
  std::uint64_t seed = 0;
  double monotone_factor = 10;  // violations are increases beyond factor * tol
  int jobs = 1;
  /// Already computed cells, keyed by (k, T, n); skipped when present.
  std::map<std::tuple<int, double, int>, MkCell> completed;
  /// Called after each newly computed cell, serialized by a mutex.
  std::function<void(const MkCell&)> on_cell;
  /// Keep the best minimizer of each (k, largest T, largest n) cell.
  std::map<int, GridFunction1D>* minimizers = nullptr;
};

namespace detail {

// One row family: fixed k and spacing, T increasing. Each T also starts from
// the previous minimizer padded with constants (a feasible point), so values
// are nonincreasing in T up to the solver tolerance.
inline std::vector<std::pair<MkRow, std::optional<GridFunction1D>>> mk_family(
    int k, const DoubleWell& well, const std::vector<double>& T_list, int n_at_max,
    const MkOptions& opt, std::mutex* cb_mu) {
  const double Tmax = T_list.back();
  const double h = 2 * Tmax / (n_at_max - 1);
  std::vector<std::pair<MkRow, std::optional<GridFunction1D>>> out;
  std::optional<GridFunction1D> prev;
  for (double T : T_list) {
    const int n = static_cast<int>(std::lround(2 * T / h)) + 1;
    MkRow row{k, T, n, 2 * T / (n - 1)};
    auto key = std::make_tuple(k, T, n);
    if (auto it = opt.completed.find(key); it != opt.completed.end()) {
      const auto& cell = it->second;
      if (static_cast<int>(cell.minimizer.size()) != n)
        throw ConfigError("estimate_mk: checkpoint cell has the wrong size");
      GridFunction1D m(Grid1D(-T, T, n), cell.minimizer);
      out.push_back({cell.row, m});
      prev = std::move(m);
      continue;
    }
    ProfileProblem pb;
    pb.k = k;
    pb.T = T;
    pb.n = n;
    pb.tol = opt.tol;
    pb.max_iter = opt.max_iter;
    pb.well = well;
    pb.method = opt.method;
    pb.restarts = opt.restarts;
    pb.seed = derive_seed(opt.seed, static_cast<std::uint64_t>(k * 1000003 + n));
    ProfileResult best = solve_clamped(pb);
    if (prev && (n - prev->size()) % 2 == 0 && n >= prev->size() &&
        std::abs(prev->grid().h() - row.h) <= 1e-12 * row.h) {
      const int pad = (n - prev->size()) / 2;
      std::vector<double> init(pad, -1.0);
      init.insert(init.end(), prev->data().begin(), prev->data().end());
      init.insert(init.end(), pad, 1.0);
      pb.initial = std::move(init);
      pb.restarts = 0;
      auto warm = solve_clamped(pb);
      if (warm.value < best.value) best = std::move(warm);
    }
    row.value = best.value;
    row.grad_norm = best.grad_norm;
    row.converged = best.converged;
    row.iterations = best.iterations;
    if (opt.on_cell) {
      std::lock_guard lk(*cb_mu);
      opt.on_cell(MkCell{row, best.minimizer.data()});
    }
    prev = best.minimizer;
    out.push_back({row, best.minimizer});
  }
  return out;
}

}  // namespace detail

/// Runs solve_clamped over the product of T_list and n_list for each k.
///
/// n_list gives node counts at the largest T; smaller T reuse the same
/// spacing (n scaled accordingly), so each n-level is a row family with
/// nested discrete feasible sets. The estimate is the value at (max T,
/// max n); its uncertainty is the sum of the last T-step and last n-step
/// differences.
inline MkTable estimate_mk(const std::vector<int>& ks, const DoubleWell& well,
                           std::vector<double> T_list, std::vector<int> n_list,
                           const MkOptions& opt = {}) {
  if (ks.empty()) throw ConfigError("estimate_mk: empty k list");
  if (T_list.empty()) throw ConfigError("estimate_mk: empty T list");
  if (n_list.empty()) throw ConfigError("estimate_mk: empty n list");
  for (std::size_t i = 1; i < T_list.size(); ++i)
    if (!(T_list[i] > T_list[i - 1])) throw ConfigError("estimate_mk: T list must be increasing");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (!(n_list[i] > n_list[i - 1])) throw ConfigError("estimate_mk: n list must be increasing");
  for (int k : ks)
    if (k < 1 || k > kMaxOrder) throw ConfigError("estimate_mk: k out of range");
  if (!(T_list.front() > 0)) throw ConfigError("estimate_mk: T values must be positive");

  struct Task {
    int k;
    int n;
  };
  std::vector<Task> tasks;
  for (int k : ks)
    for (int n : n_list) tasks.push_back({k, n});

  std::mutex cb_mu;
  auto fams = parallel_map<std::vector<std::pair<MkRow, std::optional<GridFunction1D>>>>(
      opt.jobs, tasks.size(), [&](std::size_t i) {
        return detail::mk_family(tasks[i].k, well, T_list, tasks[i].n, opt, &cb_mu);
      });

  MkTable table;
  std::size_t ti = 0;
  for (int k : ks) {
    MkEstimate est;
    est.k = k;
    std::vector<std::vector<MkRow>> grid;  // [n-level][T-level]
    for (std::size_t nl = 0; nl < n_list.size(); ++nl, ++ti) {
      std::vector<MkRow> fam;
      for (auto& [row, mn] : fams[ti]) {
        fam.push_back(row);
        table.rows.push_back(row);
        est.all_converged = est.all_converged && row.converged;
        if (opt.minimizers && nl + 1 == n_list.size() && mn && &row == &fams[ti].back().first)
          opt.minimizers->insert_or_assign(k, *mn);
      }
      for (std::size_t t = 1; t < fam.size(); ++t)
        if (fam[t].value > fam[t - 1].value + opt.monotone_factor * opt.tol)
          ++est.monotonicity_violations;
      grid.push_back(std::move(fam));
    }
    const auto& fin = grid.back();
    est.value = fin.back().value;
    if (fin.size() > 1) est.uncertainty += std::abs(fin.back().value - fin[fin.size() - 2].value);
    if (grid.size() > 1)
      est.uncertainty += std::abs(fin.back().value - grid[grid.size() - 2].back().value);
    table.estimates.push_back(est);
  }
  return table;
}

inline MkTable estimate_mk(int k, const DoubleWell& well, std::vector<double> T_list,
                           std::vector<int> n_list, const MkOptions& opt = {}) {
  return estimate_mk(std::vector<int>{k}, well, std::move(T_list), std::move(n_list), opt);
}

}  // namespace hopt
