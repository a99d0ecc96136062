// Two-dimensional recovery by composing the profile with a signed distance,
// and the eps-energy with the operator norm of the k-th derivative tensor.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hopt/core.hpp"
#include "hopt/parallel.hpp"
#include "hopt/recovery.hpp"

namespace hopt {

/// Uniform n x n grid of the unit square.
class Grid2D {
 public:
  explicit Grid2D(int n) : axis_(0.0, 1.0, n) {}
  int n() const { return axis_.n(); }
  double h() const { return axis_.h(); }
  double node(int i) const { return axis_.node(i); }
  const Grid1D& axis() const { return axis_; }
  std::size_t size() const { return static_cast<std::size_t>(n()) * n(); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * n() + i; }
  bool operator==(const Grid2D&) const = default;

 private:
  Grid1D axis_;
};

/// Nodal values, row-major with x fastest: value(i, j) at (x_i, y_j).
class GridFunction2D {
 public:
  explicit GridFunction2D(Grid2D g, double fill = 0.0) : grid_(g), v_(g.size(), fill) {}
  GridFunction2D(Grid2D g, std::vector<double> v) : grid_(g), v_(std::move(v)) {
    if (v_.size() != grid_.size()) throw ConfigError("grid function 2d: size mismatch");
  }
  template <class F>
  static GridFunction2D sample(Grid2D g, F&& f) {
    GridFunction2D u(g);
    for (int j = 0; j < g.n(); ++j)
      for (int i = 0; i < g.n(); ++i) u.v_[g.index(i, j)] = f(g.node(i), g.node(j));
    return u;
  }
  const Grid2D& grid() const { return grid_; }
  double operator()(int i, int j) const { return v_[grid_.index(i, j)]; }
  double& at(int i, int j) { return v_[grid_.index(i, j)]; }
  const std::vector<double>& data() const { return v_; }
  std::vector<double>& data() { return v_; }

 private:
  Grid2D grid_;
  std::vector<double> v_;
};

struct Point {
  double x = 0;
  double y = 0;
};

struct Circle {
  Point center{0.5, 0.5};
  double radius = 0.25;
};

struct Line {
  Point point{0.5, 0.5};
  Point normal{0.0, 1.0};
};

/// Interface M = boundary of the phase-1 region E.
struct InterfaceShape {
  std::variant<Circle, Line> shape;

  static InterfaceShape circle(Point c, double r) { return {Circle{c, r}}; }
  static InterfaceShape line(Point p, Point nu) {
    const double len = std::hypot(nu.x, nu.y);
    if (!(len > 0)) throw ConfigError("line: normal must be nonzero");
    return {Line{p, {nu.x / len, nu.y / len}}};
  }

  void validate() const {
    if (const auto* c = std::get_if<Circle>(&shape)) {
      if (!(c->radius > 0)) throw ConfigError("circle: radius must be positive");
      if (clearance() <= 0) throw ConfigError("circle: must lie strictly inside the unit square");
    } else {
      const auto& l = std::get<Line>(shape);
      if (std::abs(std::hypot(l.normal.x, l.normal.y) - 1) > 1e-12)
        throw ConfigError("line: normal must have unit length");
      if (length() <= 0) throw ConfigError("line: does not cross the unit square");
    }
  }

  /// Circle: distance from the circle to the square's boundary.
  double clearance() const {
    const auto& c = std::get<Circle>(shape);
    const double d = std::min({c.center.x, 1 - c.center.x, c.center.y, 1 - c.center.y});
    return d - c.radius;
  }

  /// Largest tube half-width the construction accepts: circle radius and
  /// clearance; for a line, the distance to the nearest corner of the square.
  double reach() const {
    if (const auto* c = std::get_if<Circle>(&shape)) return std::min(c->radius, clearance());
    const auto& l = std::get<Line>(shape);
    double r = std::numeric_limits<double>::infinity();
    for (Point q : {Point{0, 0}, Point{1, 0}, Point{0, 1}, Point{1, 1}})
      r = std::min(r, std::abs((q.x - l.point.x) * l.normal.x + (q.y - l.point.y) * l.normal.y));
    return r;
  }

  /// Length of M inside the unit square.
  double length() const {
    if (const auto* c = std::get_if<Circle>(&shape)) return 2 * std::numbers::pi * c->radius;
    const auto& l = std::get<Line>(shape);
    // clip the line p + s * tau to [0, 1]^2
    const Point tau{-l.normal.y, l.normal.x};
    double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
    auto clip = [&](double p, double d) {
      if (std::abs(d) < 1e-15) {
        if (p < 0 || p > 1) hi = lo - 1;
        return;
      }
      double s0 = (0 - p) / d, s1 = (1 - p) / d;
      if (s0 > s1) std::swap(s0, s1);
      lo = std::max(lo, s0);
      hi = std::min(hi, s1);
    };
    clip(l.point.x, tau.x);
    clip(l.point.y, tau.y);
    return std::max(0.0, hi - lo);
  }
};

/// Negative inside E.
inline double signed_distance(const InterfaceShape& s, Point x) {
  if (const auto* c = std::get_if<Circle>(&s.shape))
    return std::hypot(x.x - c->center.x, x.y - c->center.y) - c->radius;
  const auto& l = std::get<Line>(s.shape);
  return (x.x - l.point.x) * l.normal.x + (x.y - l.point.y) * l.normal.y;
}

/// u(x) = v(-d(x) / eps) within distance eps*T of M, +1 in E and -1
/// outside it elsewhere. The profile goes from -1 to +1.
inline GridFunction2D build_recovery_2d(const InterfaceShape& shape, double eps,
                                        const GridFunction1D& profile, int k, const Grid2D& grid) {
  shape.validate();
  if (!(eps > 0)) throw ConfigError("recovery 2d: eps must be positive");
  const ProfileInterpolant v(profile, k);
  const double T = v.half_length();
  if (!(eps * T < shape.reach()))
    throw ConfigError("recovery 2d: tube half-width eps*T = " + std::to_string(eps * T) +
                      " exceeds the reach " + std::to_string(shape.reach()));
  return GridFunction2D::sample(grid, [&](double x, double y) {
    const double d = signed_distance(shape, {x, y});
    if (std::abs(d) >= eps * T) return d < 0 ? 1.0 : -1.0;
    return v(-d / eps);
  });
}

// ---------------------------------------------------------------------------
// Symmetric tensors
// ---------------------------------------------------------------------------

/// Symmetric k-tensor in the plane, stored by multiplicity: c[j] is the
/// component with j indices equal to 2 (j derivatives in y).
struct TensorK2 {
  int k = 0;
  std::vector<double> c;

  TensorK2() = default;
  TensorK2(int order, std::vector<double> comps) : k(order), c(std::move(comps)) {
    if (order < 0 || order > kMaxOrder) throw ConfigError("tensor: order out of range");
    if (static_cast<int>(c.size()) != order + 1) throw ConfigError("tensor: need k + 1 components");
  }

  static TensorK2 zero(int order) { return TensorK2(order, std::vector<double>(order + 1, 0.0)); }

  /// w tensored k times.
  static TensorK2 rank_one(int order, double wx, double wy) {
    std::vector<double> c(order + 1);
    for (int j = 0; j <= order; ++j) c[j] = std::pow(wx, order - j) * std::pow(wy, j);
    return TensorK2(order, std::move(c));
  }

  /// <T, w^{(x)k}> = sum_j C(k, j) c_j wx^(k-j) wy^j.
  double form(double wx, double wy) const {
    double s = 0;
    for (int j = 0; j <= k; ++j)
      s += detail::binom(k, j) * c[j] * std::pow(wx, k - j) * std::pow(wy, j);
    return s;
  }

  TensorK2 scaled(double lambda) const {
    TensorK2 t = *this;
    for (auto& x : t.c) x *= lambda;
    return t;
  }

  /// Pullback by the rotation R(phi): components of T(R., ..., R.), so that
  /// form_rotated(w) = form(R w).
  TensorK2 rotate(double phi) const {
    // the form is a homogeneous binary polynomial; recover coefficients by
    // expanding (cos x - sin y)^(k-j) (sin x + cos y)^j
    const double cs = std::cos(phi), sn = std::sin(phi);
    std::vector<double> poly(k + 1, 0.0);  // coefficient of wx^(k-m) wy^m
    for (int j = 0; j <= k; ++j) {
      std::vector<double> p{1.0};
      auto mul = [&](double a, double b) {  // times (a wx + b wy)
        std::vector<double> q(p.size() + 1, 0.0);
        for (std::size_t m = 0; m < p.size(); ++m) {
          q[m] += a * p[m];
          q[m + 1] += b * p[m];
        }
        p = std::move(q);
      };
      for (int r = 0; r < k - j; ++r) mul(cs, -sn);
      for (int r = 0; r < j; ++r) mul(sn, cs);
      const double f = detail::binom(k, j) * c[j];
      for (int m = 0; m <= k; ++m) poly[m] += f * p[m];
    }
    std::vector<double> out(k + 1);
    for (int m = 0; m <= k; ++m) out[m] = poly[m] / detail::binom(k, m);
    return TensorK2(k, std::move(out));
  }
};

namespace detail {

struct AngleTable {
  static constexpr int samples = 720;
  std::vector<double> pw;  // [angle][j] = C(k,j) cos^(k-j) sin^j
  int k;
  explicit AngleTable(int order) : pw(static_cast<std::size_t>(samples) * (order + 1)), k(order) {
    for (int a = 0; a < samples; ++a) {
      const double phi = std::numbers::pi * a / samples;
      for (int j = 0; j <= k; ++j)
        pw[a * (k + 1) + j] = binom(k, j) * std::pow(std::cos(phi), k - j) * std::pow(std::sin(phi), j);
    }
  }
  static const AngleTable& get(int order) {
    static const std::array<AngleTable, kMaxOrder + 1> t{AngleTable(0), AngleTable(1), AngleTable(2),
                                                         AngleTable(3), AngleTable(4), AngleTable(5)};
    return t[order];
  }
};

}  // namespace detail

/// sup over unit w of |<T, w^{(x)k}>|: 720 angles on [0, pi), then
/// golden-section refinement around the best sample.
inline double operator_norm(const TensorK2& t) {
  if (t.k == 0) return std::abs(t.c[0]);
  bool zero = true;
  for (double x : t.c) zero = zero && x == 0.0;
  if (zero) return 0.0;
  const auto& tab = detail::AngleTable::get(t.k);
  const int K = t.k + 1;
  int best = 0;
  double bv = -1;
  for (int a = 0; a < detail::AngleTable::samples; ++a) {
    double s = 0;
    for (int j = 0; j < K; ++j) s += tab.pw[a * K + j] * t.c[j];
    if (std::abs(s) > bv) {
      bv = std::abs(s);
      best = a;
    }
  }
  const double step = std::numbers::pi / detail::AngleTable::samples;
  auto f = [&](double phi) { return std::abs(t.form(std::cos(phi), std::sin(phi))); };
  double lo = (best - 1) * step, hi = (best + 1) * step;
  const double gr = (std::sqrt(5.0) - 1) / 2;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::max({bv, f1, f2});
}

namespace detail {

// d^a/dx^a d^b/dy^b of u on the whole grid by tensorized 1-D stencils.
inline std::vector<double> mixed_partial(const GridFunction2D& u, int ax, int by) {
  const Grid2D& g = u.grid();
  const int n = g.n();
  std::vector<double> tmp(g.size()), out(g.size());
  const DiffOperator dx(g.axis(), ax), dy(g.axis(), by);
  std::vector<double> line(n), res(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) line[i] = u(i, j);
    dx.apply(line, res);
    for (int i = 0; i < n; ++i) tmp[g.index(i, j)] = res[i];
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) line[j] = tmp[g.index(i, j)];
    dy.apply(line, res);
    for (int j = 0; j < n; ++j) out[g.index(i, j)] = res[j];
  }
  return out;
}

inline void check_2d(const GridFunction2D& u, int k) {
  if (k < 1 || k > kMaxOrder) throw ConfigError("2d: k must be in [1, " + std::to_string(kMaxOrder) + "]");
  if (u.grid().n() < min_nodes(k)) throw ConfigError("2d: grid too small for k");
}

}  // namespace detail

/// All k-th partials of u on the grid, one array per component j.
inline std::vector<std::vector<double>> tensor_Dk(const GridFunction2D& u, int k) {
  detail::check_2d(u, k);
  std::vector<std::vector<double>> comps;
  for (int j = 0; j <= k; ++j) comps.push_back(detail::mixed_partial(u, k - j, j));
  return comps;
}

/// D^k u at node (i, j); one-sided stencils in the boundary band.
inline TensorK2 tensor_Dk_at(const GridFunction2D& u, int i, int j, int k) {
  detail::check_2d(u, k);
  const Grid2D& g = u.grid();
  if (i < 0 || j < 0 || i >= g.n() || j >= g.n()) throw ConfigError("tensor_Dk_at: node outside the grid");
  std::vector<double> c(k + 1);
  for (int m = 0; m <= k; ++m) {
    const DiffOperator dx(g.axis(), k - m), dy(g.axis(), m);
    const auto ry = dy.row(j);
    const int sy = dy.row_start(j);
    const auto rx = dx.row(i);
    const int sx = dx.row_start(i);
    double s = 0;
    for (std::size_t q = 0; q < ry.size(); ++q) {
      double sxv = 0;
      for (std::size_t p = 0; p < rx.size(); ++p) sxv += rx[p] * u(sx + static_cast<int>(p), sy + static_cast<int>(q));
      s += ry[q] * sxv;
    }
    c[m] = s;
  }
  return TensorK2(k, std::move(c));
}

/// Tensorized trapezoid value of the integral of (1/eps) W(u) + eps^(2k-1) ||D^k u||^2.
inline double energy_F_eps_2d(const GridFunction2D& u, double eps, int k, const DoubleWell& well,
                              int jobs = 1) {
  detail::check_2d(u, k);
  if (!(eps > 0)) throw ConfigError("2d energy: eps must be positive");
  const Grid2D& g = u.grid();
  const int n = g.n();
  const auto comps = tensor_Dk(u, k);
  const auto w = trapezoid_weights(g.axis());
  const double a = 1 / eps, b = std::pow(eps, 2 * k - 1);
  const auto rows = parallel_map<double>(jobs, n, [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    double s = 0;
    std::vector<double> c(k + 1);
    for (int i = 0; i < n; ++i) {
      const std::size_t id = g.index(i, j);
      for (int m = 0; m <= k; ++m) c[m] = comps[m][id];
      const double nrm = operator_norm(TensorK2(k, c));
      s += w[i] * (a * well(u(i, j)) + b * nrm * nrm);
    }
    return s * w[j];
  });
  double tot = 0;
  for (double r : rows) tot += r;
  return tot;
}

// ---------------------------------------------------------------------------
// Field I/O
// ---------------------------------------------------------------------------

/// Binary layout: uint64 n, double h, double eps, uint64 k, then n*n
/// doubles with index j * n + i, all in host byte order.
inline void write_field_binary(const std::string& path, const GridFunction2D& u, double eps, int k) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  const std::uint64_t n = u.grid().n(), kk = k;
  const double h = u.grid().h();
  f.write(reinterpret_cast<const char*>(&n), sizeof n);
  f.write(reinterpret_cast<const char*>(&h), sizeof h);
  f.write(reinterpret_cast<const char*>(&eps), sizeof eps);
  f.write(reinterpret_cast<const char*>(&kk), sizeof kk);
  f.write(reinterpret_cast<const char*>(u.data().data()), static_cast<std::streamsize>(u.data().size() * sizeof(double)));
  if (!f) throw IoError("write failed: " + path);
}

struct FieldFile {
  GridFunction2D field;
  double eps;
  int k;
};

inline FieldFile read_field_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::uint64_t n = 0, k = 0;
  double h = 0, eps = 0;
  f.read(reinterpret_cast<char*>(&n), sizeof n);
  f.read(reinterpret_cast<char*>(&h), sizeof h);
  f.read(reinterpret_cast<char*>(&eps), sizeof eps);
  f.read(reinterpret_cast<char*>(&k), sizeof k);
  if (!f || n < 2 || n > 100000) throw IoError("bad field header: " + path);
  Grid2D g(static_cast<int>(n));
  std::vector<double> v(g.size());
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!f) throw IoError("truncated field: " + path);
  return {GridFunction2D(g, std::move(v)), eps, static_cast<int>(k)};
}

/// CSV rows x,y,u (intended for small grids).
inline void write_field_csv(const std::string& path, const GridFunction2D& u) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "x,y,u\n" << std::setprecision(17);
  const Grid2D& g = u.grid();
  for (int j = 0; j < g.n(); ++j)
    for (int i = 0; i < g.n(); ++i) f << g.node(i) << ',' << g.node(j) << ',' << u(i, j) << '\n';
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace hopt
