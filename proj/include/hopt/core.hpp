// Grids, grid functions, double-well potentials and finite-difference
// operators shared by the rest of the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hopt {

/// Largest derivative order supported by the stencil machinery.
inline constexpr int kMaxOrder = 5;

/// Invalid parameters or inputs detected before any computation starts.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A tabulated potential was queried outside its sample range.
class ExtrapolationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical contract (descent, feasibility, ...) was broken.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Grid1D / GridFunction1D
// ---------------------------------------------------------------------------

/// Uniform grid on [a, b] with n nodes a + i*h, h = (b - a)/(n - 1).
class Grid1D {
 public:
  Grid1D(double a, double b, int n) : a_(a), b_(b), n_(n) {
    if (!std::isfinite(a) || !std::isfinite(b))
      throw ConfigError("grid: non-finite endpoint");
    if (!(a < b)) throw ConfigError("grid: need a < b");
    if (n < 2) throw ConfigError("grid: need n >= 2");
    h_ = (b - a) / (n - 1);
  }

  double a() const { return a_; }
  double b() const { return b_; }
  int n() const { return n_; }
  double h() const { return h_; }
  double length() const { return b_ - a_; }
  double node(int i) const { return a_ + i * h_; }

  std::vector<double> nodes() const {
    std::vector<double> t(n_);
    for (int i = 0; i < n_; ++i) t[i] = node(i);
    return t;
  }

  /// Index of the node nearest to t, clamped to the grid.
  int nearest(double t) const {
    const long i = std::lround((t - a_) / h_);
    return static_cast<int>(std::clamp<long>(i, 0, n_ - 1));
  }

  bool operator==(const Grid1D&) const = default;

 private:
  double a_;
  double b_;
  int n_;
  double h_;
};

inline Grid1D make_grid(double a, double b, int n) { return Grid1D(a, b, n); }

/// Nodal values of a function on a Grid1D.
class GridFunction1D {
 public:
  GridFunction1D(Grid1D grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)) {
    if (static_cast<int>(values_.size()) != grid_.n())
      throw ConfigError("grid function: value count does not match grid");
    for (double v : values_)
      if (!std::isfinite(v))
        throw ConfigError("grid function: non-finite value");
  }

  explicit GridFunction1D(Grid1D grid, double fill = 0.0)
      : grid_(grid), values_(grid.n(), fill) {}

  template <class F>
  static GridFunction1D sample(Grid1D grid, F&& f) {
    std::vector<double> v(grid.n());
    for (int i = 0; i < grid.n(); ++i) v[i] = f(grid.node(i));
    return GridFunction1D(grid, std::move(v));
  }

  const Grid1D& grid() const { return grid_; }
  int size() const { return grid_.n(); }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& data() const { return values_; }
  double operator[](int i) const { return values_[i]; }

 private:
  Grid1D grid_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// DoubleWell
// ---------------------------------------------------------------------------

enum class WellKind { quartic, piecewise_quadratic, tabulated };

/// Nonnegative potential vanishing at -1 and 1, with growth constants
/// alpha, beta such that W(z) >= alpha * min{(z+1)^2, (z-1)^2, beta}.
///
/// All shipped kinds are piecewise C^1; second() returns the a.e. second
/// derivative used by the Newton solvers.
class DoubleWell {
 public:
  /// W(z) = (1 - z^2)^2.
  static DoubleWell quartic() { return DoubleWell(WellKind::quartic, 0.25, 1.0); }

  /// W(z) = min{(z - 1)^2, (z + 1)^2}.
  static DoubleWell piecewise_quadratic() {
    return DoubleWell(WellKind::piecewise_quadratic, 1.0, 1.0);
  }

  static DoubleWell tabulated(std::vector<double> z, std::vector<double> w,
                              double alpha, double beta) {
    if (z.size() != w.size() || z.size() < 2)
      throw ConfigError("tabulated well: need >= 2 (z, W) pairs");
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (!std::isfinite(z[i]) || !std::isfinite(w[i]))
        throw ConfigError("tabulated well: non-finite sample");
      if (w[i] < 0) throw ConfigError("tabulated well: negative W sample");
      if (i > 0 && !(z[i] > z[i - 1]))
        throw ConfigError("tabulated well: z must be strictly increasing");
    }
    if (z.front() > -1.0 || z.back() < 1.0)
      throw ConfigError("tabulated well: table must cover [-1, 1]");
    DoubleWell W(WellKind::tabulated, alpha, beta);
    W.z_ = std::move(z);
    W.w_ = std::move(w);
    if (std::abs(W(-1.0)) > 1e-12 || std::abs(W(1.0)) > 1e-12)
      throw ConfigError("tabulated well: W(-1) and W(1) must vanish");
    return W;
  }

  /// Two-column CSV "z,W" (an optional non-numeric header line is skipped).
  static DoubleWell load_csv(const std::string& path, double alpha, double beta) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open well table: " + path);
    std::vector<double> z, w;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ss(line);
      double zi, wi;
      if (!(ss >> zi >> wi)) {
        if (lineno == 1) continue;
        throw ConfigError("well table " + path + ": bad line " +
                          std::to_string(lineno));
      }
      z.push_back(zi);
      w.push_back(wi);
    }
    return tabulated(std::move(z), std::move(w), alpha, beta);
  }

  WellKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  std::pair<double, double> range() const {
    if (kind_ != WellKind::tabulated)
      return {-std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity()};
    return {z_.front(), z_.back()};
  }

  double operator()(double z) const {
    switch (kind_) {
      case WellKind::quartic: {
        const double s = 1.0 - z * z;
        return s * s;
      }
      case WellKind::piecewise_quadratic: {
        const double d = std::abs(z) - 1.0;
        return d * d;
      }
      case WellKind::tabulated: {
        const auto [i, t] = locate(z);
        return w_[i] + t * (w_[i + 1] - w_[i]);
      }
    }
    return 0.0;
  }

  double prime(double z) const {
    switch (kind_) {
      case WellKind::quartic:
        return -4.0 * z * (1.0 - z * z);
      case WellKind::piecewise_quadratic:
        return z >= 0 ? 2.0 * (z - 1.0) : 2.0 * (z + 1.0);
      case WellKind::tabulated: {
        const auto [i, t] = locate(z);
        return (w_[i + 1] - w_[i]) / (z_[i + 1] - z_[i]);
      }
    }
    return 0.0;
  }

  double second(double z) const {
    switch (kind_) {
      case WellKind::quartic:
        return 12.0 * z * z - 4.0;
      case WellKind::piecewise_quadratic:
        return 2.0;
      case WellKind::tabulated:
        (void)locate(z);
        return 0.0;
    }
    return 0.0;
  }

  /// Checks W >= 0 and the quadratic-floor growth bound on `samples` points
  /// of [lo, hi] (intersected with the table range for tabulated wells).
  bool satisfies_growth(double lo = -3.0, double hi = 3.0, int samples = 10000) const {
    const auto [r0, r1] = range();
    lo = std::max(lo, r0);
    hi = std::min(hi, r1);
    for (int i = 0; i < samples; ++i) {
      const double z = lo + (hi - lo) * i / (samples - 1);
      const double floor =
          alpha_ * std::min({(z + 1) * (z + 1), (z - 1) * (z - 1), beta_});
      const double w = (*this)(z);
      if (w < 0 || w < floor - 1e-14) return false;
    }
    return true;
  }

 private:
  DoubleWell(WellKind kind, double alpha, double beta)
      : kind_(kind), alpha_(alpha), beta_(beta) {
    if (!(alpha > 0) || !(beta > 0))
      throw ConfigError("double well: alpha_W and beta_W must be positive");
  }

  std::pair<std::size_t, double> locate(double z) const {
    if (!(z >= z_.front() && z <= z_.back()))
      throw ExtrapolationError("tabulated well queried outside its range at z = " +
                               std::to_string(z));
    auto it = std::upper_bound(z_.begin(), z_.end(), z);
    std::size_t i = std::min<std::size_t>(
        static_cast<std::size_t>(it - z_.begin()) - 1, z_.size() - 2);
    return {i, (z - z_[i]) / (z_[i + 1] - z_[i])};
  }

  WellKind kind_;
  double alpha_;
  double beta_;
  std::vector<double> z_;
  std::vector<double> w_;
};

// ---------------------------------------------------------------------------
// Stencils
// ---------------------------------------------------------------------------

/// Finite-difference weights for the derivative of order `order` at offset 0,
/// on unit spacing. Divide by h^order for spacing h.
struct Stencil {
  int order = 0;
  std::vector<int> offsets;
  std::vector<double> weights;
  int accuracy_order = 0;
};

namespace detail {

// Fornberg's recursion for weights of derivatives 0..m at x0 = 0.
inline std::vector<long double> fornberg(const std::vector<int>& x, int m) {
  const int np = static_cast<int>(x.size());
  std::vector<std::vector<std::vector<long double>>> d(
      m + 1, std::vector<std::vector<long double>>(np, std::vector<long double>(np, 0)));
  d[0][0][0] = 1;
  long double c1 = 1;
  for (int i = 1; i < np; ++i) {
    long double c2 = 1;
    for (int j = 0; j < i; ++j) {
      const long double c3 = static_cast<long double>(x[i]) - x[j];
      c2 *= c3;
      for (int k = std::min(i, m); k >= 0; --k) {
        const long double prev = k > 0 ? d[k - 1][i - 1][j] : 0;
        d[k][i][j] = (x[i] * d[k][i - 1][j] - k * prev) / c3;
      }
    }
    for (int k = std::min(i, m); k >= 0; --k) {
      const long double prev = k > 0 ? d[k - 1][i - 1][i - 1] : 0;
      d[k][i][i] = c1 / c2 * (k * prev - x[i - 1] * d[k][i - 1][i - 1]);
    }
    c1 = c2;
  }
  std::vector<long double> w(np);
  for (int j = 0; j < np; ++j) w[j] = d[m][np - 1][j];
  return w;
}

inline long double factorial(int n) {
  long double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace detail

/// Weights for the `order`-th derivative on the given integer offsets.
/// The accuracy order is measured from the moment conditions.
inline Stencil make_stencil(int order, const std::vector<int>& offsets) {
  if (order < 0 || order > kMaxOrder)
    throw ConfigError("stencil: order out of range");
  if (static_cast<int>(offsets.size()) < order + 1)
    throw ConfigError("stencil: too few points for the requested order");
  const auto wl = detail::fornberg(offsets, order);
  Stencil s;
  s.order = order;
  s.offsets = offsets;
  s.weights.assign(wl.begin(), wl.end());
  // exact on t^j for j <= deg; accuracy = deg - order + 1
  int deg = -1;
  for (int j = 0; j < static_cast<int>(offsets.size()) + 2; ++j) {
    long double m = 0, scale = 0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      const long double term = wl[i] * std::pow(static_cast<long double>(offsets[i]), j);
      m += term;
      scale += std::abs(term);
    }
    const long double expect = j == order ? detail::factorial(order) : 0;
    if (std::abs(m - expect) > 1e-12L * (1 + scale)) break;
    deg = j;
  }
  s.accuracy_order = deg - order + 1;
  return s;
}

/// Half-width of the centered second-order stencil for the given order.
inline int centered_radius(int order) { return order == 0 ? 0 : (order + 1) / 2; }

inline Stencil centered_stencil(int order) {
  const int p = centered_radius(order);
  std::vector<int> off;
  for (int j = -p; j <= p; ++j) off.push_back(j);
  return make_stencil(order, off);
}

/// Minimal node count for a grid carrying the order-k operator.
inline int min_nodes(int order) { return 2 * order + 3; }

/// Banded matrix of the discrete `order`-th derivative on a grid: centered
/// second-order stencils in the interior, shifted one-sided stencils of the
/// same accuracy near the ends. Order 0 is the identity.
class DiffOperator {
 public:
  DiffOperator(const Grid1D& grid, int order) : n_(grid.n()), order_(order) {
    if (order < 0 || order > kMaxOrder)
      throw ConfigError("derivative order " + std::to_string(order) +
                        " outside [0, " + std::to_string(kMaxOrder) + "]");
    if (order > 0 && n_ < min_nodes(order))
      throw ConfigError("grid too small for derivative order " + std::to_string(order) +
                        ": need n >= " + std::to_string(min_nodes(order)));
    start_.resize(n_);
    offset_.resize(n_ + 1);
    if (order == 0) {
      for (int i = 0; i < n_; ++i) {
        start_[i] = i;
        offset_[i] = i;
        w_.push_back(1.0);
      }
      offset_[n_] = n_;
      return;
    }
    const int p = centered_radius(order);
    const double scale = std::pow(grid.h(), -order);
    const Stencil center = centered_stencil(order);
    const int width = order + 2;
    std::vector<Stencil> left, right;
    for (int i = 0; i < p; ++i) {
      std::vector<int> off;
      for (int j = 0; j < width; ++j) off.push_back(j - i);
      left.push_back(make_stencil(order, off));
      std::vector<int> offr;
      for (int j = 0; j < width; ++j) offr.push_back(j - (width - 1) + i);
      right.push_back(make_stencil(order, offr));
    }
    for (int i = 0; i < n_; ++i) {
      const Stencil* s;
      int st;
      if (i < p) {
        s = &left[i];
        st = 0;
      } else if (i >= n_ - p) {
        s = &right[n_ - 1 - i];
        st = n_ - width;
      } else {
        s = &center;
        st = i - p;
      }
      start_[i] = st;
      offset_[i] = w_.size();
      const std::size_t first = w_.size();
      for (double w : s->weights) w_.push_back(w * scale);
      // close the row so constants are annihilated exactly in summation order
      double acc = 0;
      for (std::size_t j = first; j + 1 < w_.size(); ++j) acc += w_[j];
      w_.back() = -acc;
    }
    offset_[n_] = w_.size();
  }

  int n() const { return n_; }
  int order() const { return order_; }
  int row_start(int i) const { return start_[i]; }
  std::span<const double> row(int i) const {
    return {w_.data() + offset_[i], offset_[i + 1] - offset_[i]};
  }

  double apply_row(int i, std::span<const double> u) const {
    const auto r = row(i);
    const double* x = u.data() + start_[i];
    double s = 0;
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
    return s;
  }

  void apply(std::span<const double> u, std::span<double> out) const {
    for (int i = 0; i < n_; ++i) out[i] = apply_row(i, u);
  }

  std::vector<double> apply(std::span<const double> u) const {
    std::vector<double> out(n_);
    apply(u, out);
    return out;
  }

  /// out += scale * D^T r
  void apply_transpose_add(std::span<const double> r, std::span<double> out,
                           double scale = 1.0) const {
    for (int i = 0; i < n_; ++i) {
      const auto w = row(i);
      const double ri = scale * r[i];
      double* o = out.data() + start_[i];
      for (std::size_t j = 0; j < w.size(); ++j) o[j] += w[j] * ri;
    }
  }

 private:
  int n_;
  int order_;
  std::vector<int> start_;
  std::vector<std::size_t> offset_;
  std::vector<double> w_;
};

/// Discrete k-th derivative of u (nodal values).
inline GridFunction1D derivative_k(const GridFunction1D& u, int k) {
  if (k < 1) throw ConfigError("derivative_k: k must be >= 1");
  DiffOperator d(u.grid(), k);
  return GridFunction1D(u.grid(), d.apply(u.values()));
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Composite trapezoid weights on the grid.
inline std::vector<double> trapezoid_weights(const Grid1D& g) {
  std::vector<double> w(g.n(), g.h());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

/// Trapezoid rule over nodes i0..i1 (inclusive) of values f.
inline double trapezoid(std::span<const double> f, double h, int i0, int i1) {
  if (i1 <= i0) return 0.0;
  double s = 0.5 * (f[i0] + f[i1]);
  for (int i = i0 + 1; i < i1; ++i) s += f[i];
  return s * h;
}

/// Composite trapezoid value of the integral of f over its grid interval.
inline double quadrature(const GridFunction1D& f) {
  return trapezoid(f.values(), f.grid().h(), 0, f.size() - 1);
}

/// Node index range [i0, i1] for the subinterval [lo, hi], snapped to the
/// nearest nodes.
inline std::pair<int, int> snap_interval(const Grid1D& g, double lo, double hi) {
  if (!(lo <= hi)) throw ConfigError("subinterval: need lo <= hi");
  const double tol = 0.5 * g.h();
  if (lo < g.a() - tol || hi > g.b() + tol)
    throw ConfigError("subinterval outside the grid interval");
  return {g.nearest(lo), g.nearest(hi)};
}

}  // namespace hopt
