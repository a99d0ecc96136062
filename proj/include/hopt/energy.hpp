// Discrete eps-scaled and profile-scaled energies with exact algebraic
// gradients and Hessians.
//
// The discrete functional is defined first (nodal values, DiffOperator
// stencils, trapezoid weights); gradient and Hessian are derived from it,
// not from a discretized Euler-Lagrange equation.
#pragma once

#include <Eigen/Sparse>

#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hopt/core.hpp"

namespace hopt {

struct EnergyParams {
  int k = 1;
  std::optional<double> eps;  // absent: profile scaling (eps = 1)
  DoubleWell well = DoubleWell::quartic();
};

inline void validate(const EnergyParams& p) {
  if (p.k < 1 || p.k > kMaxOrder)
    throw ConfigError("energy: k must be in [1, " + std::to_string(kMaxOrder) + "]");
  if (p.eps && !(*p.eps > 0 && std::isfinite(*p.eps)))
    throw ConfigError("energy: eps must be positive");
}

/// E(u) = sum_i w_i [ a W(u_i) + b (D_k u)_i^2 ], with a = 1/eps and
/// b = eps^(2k-1), w the trapezoid weights of nodes i0..i1.
class DiscreteEnergy {
 public:
  DiscreteEnergy(const Grid1D& grid, int k, DoubleWell well, double eps = 1.0)
      : grid_(grid), k_(k), well_(std::move(well)), dk_(grid, k),
        a_(1.0 / eps), b_(std::pow(eps, 2 * k - 1)), w_(grid.n(), 0.0) {
    validate(EnergyParams{k, eps, well_});
    set_range(0, grid.n() - 1);
  }

  /// Restrict the quadrature to nodes i0..i1; derivatives still use the
  /// full-grid stencils.
  void set_range(int i0, int i1) {
    std::fill(w_.begin(), w_.end(), 0.0);
    i0_ = i0;
    i1_ = i1;
    if (i1 <= i0) return;
    for (int i = i0; i <= i1; ++i) w_[i] = grid_.h();
    w_[i0] *= 0.5;
    w_[i1] *= 0.5;
  }

  const Grid1D& grid() const { return grid_; }
  int k() const { return k_; }
  const DoubleWell& well() const { return well_; }
  const DiffOperator& op() const { return dk_; }
  double well_coeff() const { return a_; }
  double derivative_coeff() const { return b_; }

  double value(std::span<const double> u) const {
    double s = 0;
    for (int i = i0_; i <= i1_; ++i) {
      if (w_[i] == 0.0) continue;
      const double d = dk_.apply_row(i, u);
      s += w_[i] * (a_ * well_(u[i]) + b_ * d * d);
    }
    return s;
  }

  /// Splits value() into its potential and derivative parts.
  std::pair<double, double> parts(std::span<const double> u) const {
    double pw = 0, pd = 0;
    for (int i = i0_; i <= i1_; ++i) {
      if (w_[i] == 0.0) continue;
      const double d = dk_.apply_row(i, u);
      pw += w_[i] * a_ * well_(u[i]);
      pd += w_[i] * b_ * d * d;
    }
    return {pw, pd};
  }

  double value_and_gradient(std::span<const double> u, std::span<double> g) const {
    std::fill(g.begin(), g.end(), 0.0);
    std::vector<double> r(grid_.n(), 0.0);
    double s = 0;
    for (int i = i0_; i <= i1_; ++i) {
      if (w_[i] == 0.0) continue;
      const double d = dk_.apply_row(i, u);
      s += w_[i] * (a_ * well_(u[i]) + b_ * d * d);
      g[i] += w_[i] * a_ * well_.prime(u[i]);
      r[i] = 2.0 * b_ * w_[i] * d;
    }
    dk_.apply_transpose_add(r, g);
    return s;
  }

  /// Hessian a diag(w W'') + 2 b D^T diag(w) D. With `convexify`, W'' is
  /// replaced by max(W'', 0), giving a positive semidefinite matrix.
  Eigen::SparseMatrix<double> hessian(std::span<const double> u, bool convexify) const {
    const int n = grid_.n();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 50);
    for (int i = i0_; i <= i1_; ++i) {
      if (w_[i] == 0.0) continue;
      double c = a_ * w_[i] * well_.second(u[i]);
      if (convexify) c = std::max(c, 0.0);
      trip.emplace_back(i, i, c);
      const auto row = dk_.row(i);
      const int st = dk_.row_start(i);
      const double f = 2.0 * b_ * w_[i];
      for (std::size_t p = 0; p < row.size(); ++p)
        for (std::size_t q = 0; q < row.size(); ++q)
          trip.emplace_back(st + static_cast<int>(p), st + static_cast<int>(q),
                            f * row[p] * row[q]);
    }
    Eigen::SparseMatrix<double> H(n, n);
    H.setFromTriplets(trip.begin(), trip.end());
    return H;
  }

 private:
  Grid1D grid_;
  int k_;
  DoubleWell well_;
  DiffOperator dk_;
  double a_;
  double b_;
  std::vector<double> w_;
  int i0_ = 0;
  int i1_ = 0;
};

/// Trapezoid value of the integral of (1/eps) W(u) + eps^(2k-1) (D_h^k u)^2,
/// over the whole grid or over `sub` (endpoints snapped to nodes).
inline double energy_F_eps(const GridFunction1D& u, const EnergyParams& p,
                           std::optional<std::pair<double, double>> sub = std::nullopt) {
  validate(p);
  DiscreteEnergy e(u.grid(), p.k, p.well, p.eps.value_or(1.0));
  if (sub) {
    const auto [i0, i1] = snap_interval(u.grid(), sub->first, sub->second);
    e.set_range(i0, i1);
  }
  return e.value(u.values());
}

/// Trapezoid value of the integral of W(v) + (D_h^k v)^2 over the grid.
inline double energy_profile(const GridFunction1D& v, int k, const DoubleWell& well) {
  return energy_F_eps(v, EnergyParams{k, std::nullopt, well});
}

/// Exact gradient of the discrete functional with respect to nodal values.
inline GridFunction1D energy_gradient(const GridFunction1D& u, const EnergyParams& p) {
  validate(p);
  DiscreteEnergy e(u.grid(), p.k, p.well, p.eps.value_or(1.0));
  std::vector<double> g(u.size());
  e.value_and_gradient(u.values(), g);
  return GridFunction1D(u.grid(), std::move(g));
}

}  // namespace hopt
