// Well sets, derivative-smallness sets, transition counting, BV projection,
// and empirical probes of the interpolation inequalities.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hopt/core.hpp"
#include "hopt/parallel.hpp"
#include "hopt/recovery.hpp"
#include "hopt/rng.hpp"

namespace hopt {

class DiagnosticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo = 0;
  double hi = 0;
  double length() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

enum class TransitionKind { effective, oscillation };

inline std::string to_string(TransitionKind k) {
  return k == TransitionKind::effective ? "effective" : "oscillation";
}

struct Transition {
  Interval interval;  // between the last and first well nodes on either side
  TransitionKind kind;
  int from = 0;       // well (+-1) on the left
  int to = 0;         // well on the right
};

/// Node labels: +1 / -1 for the wells, 0 outside both.
struct WellPartition {
  double eta = 0;
  int N = 1;
  double eps = 1;
  int k = 1;
  std::vector<int> well;      // per node
  std::vector<char> small;    // per node: in A_eta_N
  std::vector<Interval> A_plus, A_minus, A_eta_N;
  std::vector<Transition> transitions;

  int effective_count() const {
    int c = 0;
    for (const auto& t : transitions) c += t.kind == TransitionKind::effective;
    return c;
  }
  /// Longest effective transition interval.
  double max_transition_length() const {
    double m = 0;
    for (const auto& t : transitions)
      if (t.kind == TransitionKind::effective) m = std::max(m, t.interval.length());
    return m;
  }
};

namespace detail {

inline void check_well_args(double eps, double eta, int N, int k, const DoubleWell& well) {
  if (!(eps > 0)) throw ConfigError("well_sets: eps must be positive");
  if (!(eta > 0) || !(eta < std::sqrt(well.beta())))
    throw ConfigError("well_sets: eta must lie in (0, sqrt(beta))");
  if (eta >= 1) throw ConfigError("well_sets: eta must be < 1 so the wells are disjoint");
  if (N < 1) throw ConfigError("well_sets: N must be >= 1");
  if (k < 1 || k > kMaxOrder) throw ConfigError("well_sets: k out of range");
}

// Maximal runs of flagged nodes, as half-open node cells clipped to [a, b].
inline std::vector<Interval> runs(const Grid1D& g, const std::vector<char>& flag) {
  std::vector<Interval> out;
  const double h = g.h();
  for (int i = 0; i < g.n();) {
    if (!flag[i]) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < g.n() && flag[j + 1]) ++j;
    out.push_back({std::max(g.a(), g.node(i) - 0.5 * h), std::min(g.b(), g.node(j) + 0.5 * h)});
    i = j + 1;
  }
  return out;
}

}  // namespace detail

/// Node-wise classification into the sets {| |u| - 1 | <= eta} (split by
/// sign) and the subsets where additionally |u^(l)| <= 1 / (N eps^l) for
/// l = 1..k-1. Consecutive well-and-small runs with opposite wells bound
/// an effective transition, equal wells an oscillation.
inline WellPartition well_sets(const GridFunction1D& u, double eps, double eta, int N, int k,
                               const DoubleWell& well = DoubleWell::quartic()) {
  detail::check_well_args(eps, eta, N, k, well);
  const Grid1D& g = u.grid();
  const int n = g.n();
  WellPartition p;
  p.eta = eta;
  p.N = N;
  p.eps = eps;
  p.k = k;
  p.well.assign(n, 0);
  p.small.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    if (std::abs(u[i] - 1) <= eta) p.well[i] = 1;
    else if (std::abs(u[i] + 1) <= eta) p.well[i] = -1;
    p.small[i] = p.well[i] != 0;
  }
  for (int l = 1; l < k; ++l) {
    if (n < min_nodes(l)) throw ConfigError("well_sets: grid too coarse for k");
    const DiffOperator d(g, l);
    const double thr = 1.0 / (N * std::pow(eps, l));
    for (int i = 0; i < n; ++i)
      if (p.small[i] && !(std::abs(d.apply_row(i, u.values())) <= thr)) p.small[i] = 0;
  }
  std::vector<char> fp(n), fm(n);
  for (int i = 0; i < n; ++i) {
    fp[i] = p.well[i] == 1;
    fm[i] = p.well[i] == -1;
  }
  p.A_plus = detail::runs(g, fp);
  p.A_minus = detail::runs(g, fm);
  p.A_eta_N = detail::runs(g, p.small);

  int last = -1;
  for (int i = 0; i < n; ++i) {
    if (!p.small[i]) continue;
    if (last >= 0 && i > last + 1) {
      const auto kind = p.well[i] != p.well[last] ? TransitionKind::effective : TransitionKind::oscillation;
      p.transitions.push_back({{g.node(last), g.node(i)}, kind, p.well[last], p.well[i]});
    } else if (last >= 0 && p.well[i] != p.well[last]) {
      // adjacent nodes in opposite wells
      p.transitions.push_back({{g.node(last), g.node(i)}, TransitionKind::effective, p.well[last], p.well[i]});
    }
    last = i;
  }
  return p;
}

inline int count_transitions(const GridFunction1D& u, double eps, double eta, int N, int k,
                             const DoubleWell& well = DoubleWell::quartic()) {
  return well_sets(u, eps, eta, N, k, well).effective_count();
}

struct BVProjection {
  JumpFunction jumps;
  double l1 = 0;  // trapezoid L1 distance between u and the projection
};

/// Piecewise +-1 function following the wells of u, jumping at the midpoint
/// of each effective transition interval.
inline BVProjection project_BV(const GridFunction1D& u, double eps, double eta, int N, int k,
                               const DoubleWell& well = DoubleWell::quartic()) {
  const auto p = well_sets(u, eps, eta, N, k, well);
  const Grid1D& g = u.grid();
  int first = 0;
  for (int i = 0; i < g.n() && first == 0; ++i)
    if (p.small[i]) first = p.well[i];
  if (first == 0) {
    if (p.A_plus.empty() && p.A_minus.empty())
      throw DiagnosticError("project_BV: A_plus and A_minus are empty (no node within eta of a well)");
    throw DiagnosticError("project_BV: A_eta_N is empty (no well node has small derivatives)");
  }
  BVProjection out;
  out.jumps = {g.a(), g.b(), {}, first};
  for (const auto& t : p.transitions)
    if (t.kind == TransitionKind::effective)
      out.jumps.jump_points.push_back(0.5 * (t.interval.lo + t.interval.hi));
  const auto s = sample_jump_function(out.jumps, g);
  std::vector<double> d(g.n());
  for (int i = 0; i < g.n(); ++i) d[i] = std::abs(u[i] - s[i]);
  out.l1 = trapezoid(d, g.h(), 0, g.n() - 1);
  return out;
}

// ---------------------------------------------------------------------------
// Interpolation probes
// ---------------------------------------------------------------------------

/// Analytic test function on an interval, a sum of polynomial,
/// trigonometric and exponential terms with exact derivatives.
struct ProbeFunction {
  struct Trig {
    double amp, omega, phase;  // amp sin(omega t + phase)
  };
  struct Exp {
    double amp, rate, center;  // amp exp(rate (t - center))
  };
  std::string family;
  std::vector<double> poly;  // coefficients in (t - center_poly)
  double poly_center = 0;
  std::vector<Trig> trig;
  std::vector<Exp> exps;

  double derivative(int m, double t) const {
    double s = 0;
    const double x = t - poly_center;
    for (std::size_t j = m; j < poly.size(); ++j) {
      double f = 1;
      for (int q = 0; q < m; ++q) f *= static_cast<double>(j - q);
      s += poly[j] * f * std::pow(x, static_cast<double>(j - m));
    }
    for (const auto& tr : trig)
      s += tr.amp * std::pow(tr.omega, m) * std::sin(tr.omega * t + tr.phase + m * std::numbers::pi / 2);
    for (const auto& e : exps) s += e.amp * std::pow(e.rate, m) * std::exp(e.rate * (t - e.center));
    return s;
  }

  ProbeFunction scaled(double lambda) const {
    ProbeFunction p = *this;
    for (auto& c : p.poly) c *= lambda;
    for (auto& t : p.trig) t.amp *= lambda;
    for (auto& e : p.exps) e.amp *= lambda;
    return p;
  }
};

enum class CoefficientLaw { normal, uniform };

/// Random trigonometric polynomials on the interval plus, if `adversarial`,
/// near-polynomials and boundary layers mixed in cyclically.
struct EnsembleSpec {
  double a = 0;
  double b = 1;
  int samples = 1000;
  int max_frequency = 8;
  CoefficientLaw law = CoefficientLaw::normal;
  bool adversarial = true;
  int max_poly_degree = 2;  // near-polynomial members
  int grid_points = 2049;   // fine grid for the discrete L2 norms
  std::uint64_t seed = 0;
  std::vector<ProbeFunction> fixed;  // if nonempty, used instead of random members
};

inline void validate(const EnsembleSpec& e) {
  if (!(e.b > e.a)) throw ConfigError("ensemble: need a < b");
  if (e.fixed.empty() && e.samples < 1) throw ConfigError("ensemble: samples must be >= 1");
  if (e.max_frequency < 1) throw ConfigError("ensemble: max_frequency must be >= 1");
  if (e.grid_points < 3) throw ConfigError("ensemble: grid_points must be >= 3");
  if (e.max_poly_degree < 0 || e.max_poly_degree > 8)
    throw ConfigError("ensemble: max_poly_degree must be in [0, 8]");
}

inline ProbeFunction ensemble_member(const EnsembleSpec& e, std::size_t index) {
  if (!e.fixed.empty()) return e.fixed.at(index);
  Rng rng(derive_seed(e.seed, index));
  const double L = e.b - e.a;
  auto coef = [&] { return e.law == CoefficientLaw::normal ? rng.normal() : rng.uniform(-1, 1); };
  ProbeFunction f;
  const int kind = e.adversarial ? static_cast<int>(index % 4) : 0;
  if (kind <= 1) {
    f.family = "trig";
    const int M = rng.integer(1, e.max_frequency);
    f.poly = {coef()};
    for (int m = 1; m <= M; ++m) {
      const double w = m * std::numbers::pi / L;
      f.trig.push_back({coef(), w, -w * e.a});
      f.trig.push_back({coef(), w, -w * e.a + std::numbers::pi / 2});
    }
  } else if (kind == 2) {
    f.family = "near_polynomial";
    f.poly_center = e.a;
    // orthonormal shifted Legendre basis, so random directions reach the
    // extremal ones
    const int deg = rng.integer(0, e.max_poly_degree);
    f.poly.assign(deg + 1, 0.0);
    for (int j = 0; j <= deg; ++j) {
      const double c = coef() * std::sqrt(2.0 * j + 1);
      for (int i = 0; i <= j; ++i)
        f.poly[i] += c * (((j + i) % 2) ? -1 : 1) * detail::binom(j, i) * detail::binom(j + i, i) /
                     std::pow(L, i);
    }
    const double delta = std::pow(10.0, rng.uniform(-9, -6));
    const double w = rng.integer(1, 4 * e.max_frequency) * std::numbers::pi / L;
    f.trig.push_back({delta * coef(), w, rng.uniform(0, 2 * std::numbers::pi)});
  } else {
    f.family = "boundary_layer";
    const double width = L * std::pow(10.0, rng.uniform(-3, -1));
    if (rng.uniform() < 0.5) f.exps.push_back({coef(), -1.0 / width, e.a});
    else f.exps.push_back({coef(), 1.0 / width, e.b});
    f.poly = {coef()};
  }
  return f;
}

inline std::size_t ensemble_size(const EnsembleSpec& e) {
  return e.fixed.empty() ? static_cast<std::size_t>(e.samples) : e.fixed.size();
}

/// Discrete L2 norms of v^(m), m = 0..k, on a uniform grid of the interval.
inline std::vector<double> probe_norms(const ProbeFunction& f, int k, double a, double b, int points) {
  const Grid1D g(a, b, points);
  std::vector<double> out(k + 1);
  std::vector<double> sq(points);
  for (int m = 0; m <= k; ++m) {
    for (int i = 0; i < points; ++i) {
      const double d = f.derivative(m, g.node(i));
      sq[i] = d * d;
    }
    out[m] = std::sqrt(trapezoid(sq, g.h(), 0, points - 1));
  }
  return out;
}

/// ||v^(l)|| / (||v||^theta ||v^(k)||^(1-theta) + |I|^(-l) ||v||), theta = (k-l)/k;
/// 0 when the numerator vanishes.
inline double interp_ratio(const std::vector<double>& norms, int k, int ell, double len) {
  const double theta = static_cast<double>(k - ell) / k;
  const double num = norms[ell];
  if (num == 0) return 0;
  const double den = std::pow(norms[0], theta) * std::pow(norms[k], 1 - theta) +
                     std::pow(len, -ell) * norms[0];
  return den > 0 ? num / den : std::numeric_limits<double>::infinity();
}

/// eps^(2l-1) ||v^(l)||^2 / ((1/eps) ||v||^2 + eps^(2k-1) ||v^(k)||^2 + eps^(2l-1) |I|^(-2l) ||v||^2).
inline double split_ratio(const std::vector<double>& norms, int k, int ell, double len, double eps) {
  const double num = std::pow(eps, 2 * ell - 1) * norms[ell] * norms[ell];
  if (num == 0) return 0;
  const double den = norms[0] * norms[0] / eps + std::pow(eps, 2 * k - 1) * norms[k] * norms[k] +
                     std::pow(eps, 2 * ell - 1) * std::pow(len, -2 * ell) * norms[0] * norms[0];
  return den > 0 ? num / den : std::numeric_limits<double>::infinity();
}

struct ProbeReport {
  int k = 0;
  int ell = 0;
  double max_ratio = 0;
  std::size_t argmax_index = 0;
  std::uint64_t argmax_seed = 0;
  std::string argmax_family;
  std::vector<double> ratios;       // per sample
  std::vector<double> bucket_edges; // histogram over [0, max_ratio]
  std::vector<int> histogram;
};

namespace detail {

inline void check_probe_args(int k, int ell) {
  if (k < 2 || k > kMaxOrder) throw ConfigError("interp_probe: k must be in [2, " + std::to_string(kMaxOrder) + "]");
  if (ell < 1 || ell > k - 1) throw ConfigError("interp_probe: need 1 <= ell <= k-1");
}

inline void fill_histogram(ProbeReport& r, int buckets) {
  r.bucket_edges.resize(buckets + 1);
  r.histogram.assign(buckets, 0);
  for (int i = 0; i <= buckets; ++i) r.bucket_edges[i] = r.max_ratio * i / buckets;
  for (double x : r.ratios) {
    int b = r.max_ratio > 0 ? static_cast<int>(x / r.max_ratio * buckets) : 0;
    r.histogram[std::clamp(b, 0, buckets - 1)]++;
  }
}

template <class RatioFn>
ProbeReport run_probe(const EnsembleSpec& e, int k, int ell, int jobs, int buckets, RatioFn&& ratio) {
  validate(e);
  check_probe_args(k, ell);
  const std::size_t count = ensemble_size(e);
  ProbeReport r;
  r.k = k;
  r.ell = ell;
  r.ratios = parallel_map<double>(jobs, count, [&](std::size_t i) {
    const auto f = ensemble_member(e, i);
    return ratio(probe_norms(f, k, e.a, e.b, e.grid_points));
  });
  for (std::size_t i = 0; i < count; ++i)
    if (i == 0 || r.ratios[i] > r.max_ratio) {
      r.max_ratio = r.ratios[i];
      r.argmax_index = i;
    }
  r.argmax_seed = e.fixed.empty() ? derive_seed(e.seed, r.argmax_index) : 0;
  r.argmax_family = ensemble_member(e, r.argmax_index).family;
  fill_histogram(r, buckets);
  return r;
}

}  // namespace detail

inline ProbeReport interp_probe(const EnsembleSpec& e, int k, int ell, int jobs = 1, int buckets = 20) {
  const double len = e.b - e.a;
  return detail::run_probe(e, k, ell, jobs, buckets,
                           [&](const std::vector<double>& nm) { return interp_ratio(nm, k, ell, len); });
}

/// Max over samples and over eps_list of split_ratio.
inline ProbeReport interp_split_probe(const EnsembleSpec& e, int k, int ell,
                                      const std::vector<double>& eps_list, int jobs = 1,
                                      int buckets = 20) {
  if (eps_list.empty()) throw ConfigError("interp_split_probe: empty eps list");
  for (double x : eps_list)
    if (!(x > 0)) throw ConfigError("interp_split_probe: eps values must be positive");
  const double len = e.b - e.a;
  return detail::run_probe(e, k, ell, jobs, buckets, [&](const std::vector<double>& nm) {
    double m = 0;
    for (double x : eps_list) m = std::max(m, split_ratio(nm, k, ell, len, x));
    return m;
  });
}

/// The single-member ensemble {sin(pi (t - a) / |I|)}.
inline EnsembleSpec sine_fixture(double a = 0, double b = 1) {
  EnsembleSpec e;
  e.a = a;
  e.b = b;
  ProbeFunction f;
  f.family = "sine";
  const double w = std::numbers::pi / (b - a);
  f.trig.push_back({1.0, w, -w * a});
  e.fixed = {f};
  return e;
}

}  // namespace hopt
