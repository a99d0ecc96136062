// Box-constrained descent: projected Newton on a sparse (banded) Hessian and
// projected L-BFGS. Both use a backtracking Armijo search along the
// projected path, so the objective is nonincreasing across iterations.
#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hopt/core.hpp"

namespace hopt {

enum class Method { newton, lbfgs };

inline std::string to_string(Method m) { return m == Method::newton ? "newton" : "lbfgs"; }

inline Method parse_method(const std::string& s) {
  if (s == "newton") return Method::newton;
  if (s == "lbfgs") return Method::lbfgs;
  throw ConfigError("unknown optimizer method '" + s + "' (expected newton|lbfgs)");
}

struct BoxObjective {
  /// f(x); may throw ExtrapolationError, treated as +inf.
  std::function<double(std::span<const double>)> value;
  /// f(x), writing grad f(x) into g.
  std::function<double(std::span<const double>, std::span<double>)> value_grad;
  /// Hessian at x; convexified variant must be positive semidefinite.
  std::function<Eigen::SparseMatrix<double>(std::span<const double>, bool)> hessian;
};

/// lo[i] == hi[i] marks a fixed variable.
struct Bounds {
  std::vector<double> lo;
  std::vector<double> hi;

  static Bounds unbounded(std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {std::vector<double>(n, -inf), std::vector<double>(n, inf)};
  }
  bool fixed(std::size_t i) const { return lo[i] == hi[i]; }
};

struct OptimOptions {
  Method method = Method::newton;
  double tol = 1e-9;     // projected-gradient sup-norm
  int max_iter = 500;
  int lbfgs_memory = 12;
  double armijo = 1e-4;
  int max_backtrack = 60;
  /// Newton: also converged when half the squared Newton decrement -g.d / 2
  /// is below decrement_tol * (1 + |f|); the value is then accurate to that
  /// relative level even when the gradient sits at its round-off floor of an
  /// ill-conditioned Hessian. L-BFGS applies the same test to its predicted
  /// decrease, but only once the value has stalled.
  double decrement_tol = 1e-12;
  /// Give up after this many accepted steps without relative decrease
  /// above 1e-15.
  int stall_steps = 5;
};

struct OptimResult {
  std::vector<double> x;
  double value = 0;
  double grad_norm = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective after each accepted step (incl. start)
};

namespace detail {

inline double safe_value(const BoxObjective& f, std::span<const double> x) {
  try {
    const double v = f.value(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  } catch (const ExtrapolationError&) {
    return std::numeric_limits<double>::infinity();
  }
}

inline double project(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

inline double projected_grad_norm(std::span<const double> x, std::span<const double> g,
                                  const Bounds& b) {
  double m = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (b.fixed(i)) continue;
    double pg = g[i];
    if (x[i] <= b.lo[i] && g[i] > 0) pg = 0;
    if (x[i] >= b.hi[i] && g[i] < 0) pg = 0;
    m = std::max(m, std::abs(pg));
  }
  return m;
}

// Variables moved by the current step: not fixed, and not sitting on a bound
// with the gradient pushing outward.
inline std::vector<int> free_set(std::span<const double> x, std::span<const double> g,
                                 const Bounds& b) {
  std::vector<int> f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (b.fixed(i)) continue;
    const double tl = 1e-12 * (1 + std::abs(b.lo[i]));
    const double th = 1e-12 * (1 + std::abs(b.hi[i]));
    if (x[i] <= b.lo[i] + tl && g[i] > 0) continue;
    if (x[i] >= b.hi[i] - th && g[i] < 0) continue;
    f.push_back(static_cast<int>(i));
  }
  return f;
}

struct LineSearchOutcome {
  bool ok = false;
  double value = 0;
  std::vector<double> x;
};

inline LineSearchOutcome projected_search(const BoxObjective& f, std::span<const double> x,
                                          double fx, std::span<const double> g,
                                          std::span<const double> d, const Bounds& b,
                                          const OptimOptions& opt, double alpha0 = 1.0) {
  LineSearchOutcome out;
  std::vector<double> trial(x.size());
  double alpha = alpha0;
  for (int it = 0; it < opt.max_backtrack; ++it, alpha *= 0.5) {
    double lin = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      trial[i] = project(x[i] + alpha * d[i], b.lo[i], b.hi[i]);
      lin += g[i] * (trial[i] - x[i]);
    }
    if (lin >= 0) continue;
    const double ft = safe_value(f, trial);
    if (ft <= fx + opt.armijo * lin) {
      out.ok = true;
      out.value = ft;
      out.x = trial;
      return out;
    }
  }
  return out;
}

// Newton direction on the free set; falls back to the convexified Hessian
// and then to increasing diagonal shifts until the factorization is
// positive definite.
inline std::vector<double> newton_direction(const BoxObjective& f, std::span<const double> x,
                                            std::span<const double> g,
                                            const std::vector<int>& free) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(free.size());
  std::vector<int> pos(n, -1);
  for (int j = 0; j < m; ++j) pos[free[j]] = j;

  auto restrict = [&](const Eigen::SparseMatrix<double>& H) {
    std::vector<Eigen::Triplet<double>> t;
    for (int c = 0; c < H.outerSize(); ++c) {
      if (pos[c] < 0) continue;
      for (Eigen::SparseMatrix<double>::InnerIterator it(H, c); it; ++it)
        if (pos[it.row()] >= 0) t.emplace_back(pos[it.row()], pos[c], it.value());
    }
    Eigen::SparseMatrix<double> R(m, m);
    R.setFromTriplets(t.begin(), t.end());
    return R;
  };

  Eigen::VectorXd rhs(m);
  for (int j = 0; j < m; ++j) rhs[j] = -g[free[j]];

  using Solver = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower,
                                       Eigen::NaturalOrdering<int>>;
  auto try_solve = [&](const Eigen::SparseMatrix<double>& A, Eigen::VectorXd& sol) {
    Solver s(A);
    if (s.info() != Eigen::Success) return false;
    if (s.vectorD().size() != m || !(s.vectorD().minCoeff() > 0)) return false;
    sol = s.solve(rhs);
    return s.info() == Eigen::Success && sol.allFinite();
  };

  std::vector<double> d(n, 0.0);
  Eigen::VectorXd sol;
  Eigen::SparseMatrix<double> H = restrict(f.hessian(x, false));
  bool ok = try_solve(H, sol);
  if (!ok) {
    Eigen::SparseMatrix<double> Hc = restrict(f.hessian(x, true));
    double dmax = 0;
    for (int j = 0; j < m; ++j) dmax = std::max(dmax, std::abs(Hc.coeff(j, j)));
    if (dmax == 0) dmax = 1;
    double mu = 0;
    for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
      Eigen::SparseMatrix<double> A = Hc;
      if (mu > 0) {
        Eigen::SparseMatrix<double> I(m, m);
        I.setIdentity();
        A += mu * I;
      }
      ok = try_solve(A, sol);
      mu = mu == 0 ? 1e-12 * dmax : mu * 100;
    }
  }
  if (!ok) {
    for (int j = 0; j < m; ++j) d[free[j]] = rhs[j];
    return d;
  }
  for (int j = 0; j < m; ++j) d[free[j]] = sol[j];
  return d;
}

}  // namespace detail

/// Minimize f over the box [lo, hi] starting from x0 (projected onto it).
inline OptimResult minimize_box(const BoxObjective& f, std::vector<double> x0,
                                const Bounds& bounds, const OptimOptions& opt = {}) {
  const std::size_t n = x0.size();
  if (bounds.lo.size() != n || bounds.hi.size() != n)
    throw ConfigError("minimize_box: bounds size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(bounds.lo[i] <= bounds.hi[i])) throw ConfigError("minimize_box: empty box");
    x0[i] = detail::project(x0[i], bounds.lo[i], bounds.hi[i]);
  }
  if (opt.method == Method::newton && !f.hessian)
    throw ConfigError("minimize_box: newton method needs a Hessian");

  OptimResult res;
  res.x = std::move(x0);
  std::vector<double> g(n);
  double fx = f.value_grad(res.x, g);
  if (!std::isfinite(fx)) throw NumericalError("minimize_box: non-finite initial objective");
  res.history.push_back(fx);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> mem;
  int stalled = 0;
  // predicted decrease of the last direction; decides whether a stall counts
  // as convergence
  double predicted = INFINITY;

  for (int it = 0; it < opt.max_iter; ++it) {
    res.grad_norm = detail::projected_grad_norm(res.x, g, bounds);
    if (res.grad_norm <= opt.tol) {
      res.converged = true;
      break;
    }
    const auto free = detail::free_set(res.x, g, bounds);
    if (free.empty()) {
      res.converged = true;
      break;
    }

    std::vector<double> d(n, 0.0);
    if (opt.method == Method::newton) {
      d = detail::newton_direction(f, res.x, g, free);
    } else {
      // two-loop recursion restricted to the free set
      std::vector<char> is_free(n, 0);
      for (int i : free) is_free[i] = 1;
      std::vector<double> q(n, 0.0);
      for (int i : free) q[i] = -g[i];
      std::vector<double> alph(mem.size());
      for (int j = static_cast<int>(mem.size()) - 1; j >= 0; --j) {
        double a = 0;
        for (int i : free) a += mem[j].s[i] * q[i];
        a *= mem[j].rho;
        alph[j] = a;
        for (int i : free) q[i] -= a * mem[j].y[i];
      }
      double gamma = 1.0;
      if (!mem.empty()) {
        const auto& last = mem.back();
        double sy = 0, yy = 0;
        for (std::size_t i = 0; i < n; ++i) {
          sy += last.s[i] * last.y[i];
          yy += last.y[i] * last.y[i];
        }
        if (yy > 0) gamma = sy / yy;
      } else {
        double gn = 0;
        for (int i : free) gn = std::max(gn, std::abs(g[i]));
        gamma = gn > 0 ? 1e-2 / gn : 1.0;
      }
      for (int i : free) q[i] *= gamma;
      for (std::size_t j = 0; j < mem.size(); ++j) {
        double bb = 0;
        for (int i : free) bb += mem[j].y[i] * q[i];
        bb *= mem[j].rho;
        for (int i : free) q[i] += (alph[j] - bb) * mem[j].s[i];
      }
      d = std::move(q);
    }

    double slope = 0;
    for (int i : free) slope += g[i] * d[i];
    if (!(slope < 0)) {
      mem.clear();
      std::fill(d.begin(), d.end(), 0.0);
      for (int i : free) d[i] = -g[i];
      slope = 0;
      for (int i : free) slope += g[i] * d[i];
    }
    predicted = -0.5 * slope;
    if (opt.method == Method::newton && predicted <= opt.decrement_tol * (1 + std::abs(fx))) {
      res.converged = true;
      break;
    }

    auto ls = detail::projected_search(f, res.x, fx, g, d, bounds, opt);
    if (!ls.ok) {
      // steepest-descent fallback with a step scaled to the gradient
      mem.clear();
      std::vector<double> sd(n, 0.0);
      double gn = 0;
      for (int i : free) {
        sd[i] = -g[i];
        gn = std::max(gn, std::abs(g[i]));
      }
      ls = detail::projected_search(f, res.x, fx, g, sd, bounds, opt, gn > 0 ? 1.0 / gn : 1.0);
      if (!ls.ok) {  // no decrease representable
        res.converged = predicted <= opt.decrement_tol * (1 + std::abs(fx));
        break;
      }
    }

    std::vector<double> gnew(n);
    const double fnew = f.value_grad(ls.x, gnew);
    if (fnew > fx) throw NumericalError("minimize_box: descent contract violated");
    if (opt.method == Method::lbfgs) {
      Pair p{std::vector<double>(n), std::vector<double>(n), 0};
      double sy = 0;
      for (std::size_t i = 0; i < n; ++i) {
        p.s[i] = ls.x[i] - res.x[i];
        p.y[i] = gnew[i] - g[i];
        sy += p.s[i] * p.y[i];
      }
      if (sy > 1e-300) {
        p.rho = 1.0 / sy;
        mem.push_back(std::move(p));
        if (static_cast<int>(mem.size()) > opt.lbfgs_memory) mem.pop_front();
      }
    }
    stalled = fx - fnew <= 1e-15 * (1 + std::abs(fx)) ? stalled + 1 : 0;
    res.x = std::move(ls.x);
    g = std::move(gnew);
    fx = fnew;
    res.history.push_back(fx);
    res.iterations = it + 1;
    if (stalled >= opt.stall_steps) {
      res.converged = predicted <= opt.decrement_tol * (1 + std::abs(fx));
      break;
    }
  }
  res.value = fx;
  res.grad_norm = detail::projected_grad_norm(res.x, g, bounds);
  if (res.grad_norm <= opt.tol) res.converged = true;
  return res;
}

}  // namespace hopt
