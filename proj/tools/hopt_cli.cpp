// Batch front-end: hopt <subcommand> [--config PATH] [--seed U64] [--out DIR]
//                                   [--jobs N] [--format csv|json]
//
// Exit codes: 0 success, 1 validation, 2 numerical invariant violation, 3 I/O.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hopt/hopt.hpp"

namespace fs = std::filesystem;
using namespace hopt;

namespace {

constexpr const char* kVersion = "1.0.0";

/// Numerical invariant failed after a successful computation; outputs are
/// still written.
struct InvariantFailure {
  std::vector<std::string> messages;
  void add(std::string m) { messages.push_back(std::move(m)); }
  bool any() const { return !messages.empty(); }
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int jobs = default_jobs();
  std::string format = "json";
};

// ---------------------------------------------------------------------------
// Config reading with field-path error messages and unknown-key rejection
// ---------------------------------------------------------------------------

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object() && !j_.is_null()) fail("", "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.is_object() && j_.contains(key) && !j_.at(key).is_null();
  }

  template <class T>
  T get(const std::string& key, T def) {
    if (!has(key)) return def;
    return convert<T>(key, j_.at(key));
  }

  template <class T>
  std::vector<T> list(const std::string& key, std::vector<T> def) {
    if (!has(key)) return def;
    const Json& a = j_.at(key);
    if (!a.is_array()) fail(key, "expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(convert<T>(key + "[" + std::to_string(i) + "]", a[i]));
    return out;
  }

  Reader sub(const std::string& key) {
    const bool present = has(key);
    return Reader(present ? j_.at(key) : Json(), field(key));
  }

  std::vector<Reader> sublist(const std::string& key) {
    std::vector<Reader> out;
    if (!has(key)) return out;
    const Json& a = j_.at(key);
    if (!a.is_array()) fail(key, "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) out.emplace_back(a[i], field(key) + "[" + std::to_string(i) + "]");
    return out;
  }

  bool present() const { return !j_.is_null(); }

  void finish() const {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(it.key(), "unknown field");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError("config field '" + field(key) + "': " + msg);
  }

  std::string field(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <class T>
  T convert(const std::string& key, const Json& v) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) fail(key, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(key, "must be finite");
        return x;
      } else if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) fail(key, "expected an integer");
        return v.get<int>();
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
          fail(key, "expected a nonnegative integer");
        return v.get<std::uint64_t>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
      } else {
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      fail(key, e.what());
    }
  }

  const Json j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  const std::string text = read_text(path);
  try {
    Json j = Json::parse(text);
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: cannot parse ") + path + ": " + e.what());
  }
}

struct WellSpec {
  std::string kind = "quartic";
  std::string path;
  double alpha = 0.25;
  double beta = 1;
  Json json() const {
    Json j{{"kind", kind}};
    if (kind == "tabulated") {
      j["path"] = path;
      j["alpha"] = alpha;
      j["beta"] = beta;
    }
    return j;
  }
};

DoubleWell read_well(Reader r, WellSpec& spec) {
  spec.kind = r.get<std::string>("kind", "quartic");
  DoubleWell w = DoubleWell::quartic();
  if (spec.kind == "quartic") {
  } else if (spec.kind == "piecewise_quadratic") {
    w = DoubleWell::piecewise_quadratic();
  } else if (spec.kind == "tabulated") {
    spec.path = r.get<std::string>("path", "");
    spec.alpha = r.get<double>("alpha", 0.25);
    spec.beta = r.get<double>("beta", 1.0);
    if (spec.path.empty()) r.fail("path", "required for a tabulated well");
    w = DoubleWell::load_csv(spec.path, spec.alpha, spec.beta);
  } else {
    r.fail("kind", "must be quartic, piecewise_quadratic or tabulated");
  }
  r.finish();
  if (!w.satisfies_growth()) throw ConfigError("config field 'well': growth condition fails on [-3, 3]");
  return w;
}

Method read_method(Reader& r) {
  const auto s = r.get<std::string>("method", "newton");
  try {
    return parse_method(s);
  } catch (const ConfigError&) {
    r.fail("method", "must be newton or lbfgs");
  }
}

std::vector<double> default_eps_list() {
  std::vector<double> e;
  for (int p = 6; p <= 10; ++p) e.push_back(std::ldexp(1.0, -p));
  return e;
}

JumpFunction read_target(Reader r) {
  JumpFunction j;
  j.a = r.get<double>("a", 0.0);
  j.b = r.get<double>("b", 1.0);
  j.first_value = r.get<int>("first_value", -1);
  j.jump_points = r.list<double>("jumps", {});
  r.finish();
  j.validate();
  return j;
}

Json target_json(const JumpFunction& j) { return to_json(j); }

std::vector<JumpFunction> default_targets() { return {uniform_jumps(1), uniform_jumps(2), uniform_jumps(3)}; }

struct ProfileSpec {
  double T = 6;
  int n = 1201;
  Json json() const { return Json{{"T", T}, {"n", n}}; }
};

ProfileSpec read_profile_spec(Reader r, int kmax) {
  ProfileSpec p;
  p.T = r.get<double>("T", p.T);
  p.n = r.get<int>("n", p.n);
  r.finish();
  if (!(p.T > 0)) r.fail("T", "must be positive");
  if (p.n < 2 * clamped_layers(kmax) + 1 || p.n < min_nodes(kmax)) r.fail("n", "too small for the largest k");
  return p;
}

struct MkSpec {
  std::optional<double> value;
  std::vector<double> T{2, 4, 8, 16};
  std::vector<int> n{3201};
  Json json() const {
    if (value) return Json{{"value", *value}};
    return Json{{"T", T}, {"n", n}};
  }
};

void check_increasing_T(Reader& r, const std::vector<double>& T) {
  if (T.empty()) r.fail("T", "must not be empty");
  for (std::size_t i = 0; i < T.size(); ++i) {
    if (!(T[i] > 0)) r.fail("T", "values must be positive");
    if (i > 0 && !(T[i] > T[i - 1])) r.fail("T", "must be strictly increasing");
  }
}

void check_increasing_n(Reader& r, const std::vector<int>& n, int k) {
  if (n.empty()) r.fail("n", "must not be empty");
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] < 2 * clamped_layers(k) + 1) r.fail("n", "values too small for k = " + std::to_string(k));
    if (i > 0 && !(n[i] > n[i - 1])) r.fail("n", "must be strictly increasing");
  }
}

// smallest T of the table must still leave room for the clamped layers
void check_table_grid(Reader& r, const std::vector<double>& T, const std::vector<int>& n, int k) {
  for (int nn : n) {
    const double h = 2 * T.back() / (nn - 1);
    const int n0 = static_cast<int>(std::lround(2 * T.front() / h)) + 1;
    if (n0 < std::max(min_nodes(k), 2 * clamped_layers(k) + 1))
      r.fail("T", "smallest T too short for n = " + std::to_string(nn) + " at k = " + std::to_string(k));
  }
}

MkSpec read_mk_spec(Reader r, const std::vector<int>& ks) {
  MkSpec m;
  if (r.has("value")) {
    m.value = r.get<double>("value", 0);
    if (!(*m.value > 0)) r.fail("value", "must be positive");
  }
  m.T = r.list<double>("T", m.T);
  m.n = r.list<int>("n", m.n);
  r.finish();
  if (!m.value) {
    check_increasing_T(r, m.T);
    for (int k : ks) {
      check_increasing_n(r, m.n, k);
      check_table_grid(r, m.T, m.n, k);
    }
  }
  return m;
}

std::vector<int> read_ks(Reader& r, std::vector<int> def, int kmin = 1) {
  auto ks = r.list<int>("k", def);
  if (ks.empty()) r.fail("k", "must not be empty");
  for (int k : ks)
    if (k < kmin || k > kMaxOrder)
      r.fail("k", "values must lie in [" + std::to_string(kmin) + ", " + std::to_string(kMaxOrder) + "]");
  return ks;
}

struct Solver {
  double tol = 1e-9;
  int max_iter = 500;
  Method method = Method::newton;
  Json json() const { return Json{{"tol", tol}, {"max_iter", max_iter}, {"method", to_string(method)}}; }
};

Solver read_solver(Reader& r) {
  Solver s;
  s.tol = r.get<double>("tol", s.tol);
  s.max_iter = r.get<int>("max_iter", s.max_iter);
  s.method = read_method(r);
  if (!(s.tol > 0)) r.fail("tol", "must be positive");
  if (s.max_iter < 1) r.fail("max_iter", "must be >= 1");
  return s;
}

ProfileResult solve_recovery_profile(int k, const ProfileSpec& ps, const DoubleWell& w, const Solver& s) {
  ProfileProblem pb;
  pb.k = k;
  pb.T = ps.T;
  pb.n = ps.n;
  pb.well = w;
  pb.tol = s.tol;
  pb.max_iter = s.max_iter;
  pb.method = s.method;
  return solve_clamped(pb);
}

double resolve_mk(int k, const MkSpec& m, const DoubleWell& w, const Solver& s, int jobs) {
  if (m.value) return *m.value;
  MkOptions opt;
  opt.tol = s.tol;
  opt.max_iter = s.max_iter;
  opt.method = s.method;
  opt.jobs = jobs;
  return estimate_mk(k, w, m.T, m.n, opt).estimate(k).value;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

Json header(const std::string& cmd, std::uint64_t seed, const Json& cfg) {
  return Json{{"command", cmd}, {"version", kVersion}, {"seed", seed}, {"config", cfg}};
}

void prepare_out(const Common& c) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec || !fs::is_directory(c.out)) throw IoError("cannot create output directory " + c.out);
}

std::string out_path(const Common& c, const std::string& stem, const std::string& ext) {
  return (fs::path(c.out) / (stem + "." + ext)).string();
}

void emit(const Common& c, const std::string& stem, const Json& doc, const CsvTable& csv) {
  if (c.format == "json") {
    write_text(out_path(c, stem, "json"), dump(doc));
  } else {
    std::string comment = "command=" + doc.at("command").get<std::string>() +
                          " version=" + kVersion + " seed=" + std::to_string(doc.at("seed").get<std::uint64_t>());
    write_text(out_path(c, stem, "csv"), csv.str(comment));
  }
}

// ---------------------------------------------------------------------------
// mk-table
// ---------------------------------------------------------------------------

int cmd_mk_table(const Common& c, InvariantFailure& inv) {
  const Json raw = load_config(c.config);
  Reader r(raw, "");
  const auto ks = read_ks(r, {1, 2, 3});
  WellSpec ws;
  const DoubleWell well = read_well(r.sub("well"), ws);
  const Solver s = read_solver(r);
  auto T = r.list<double>("T", {4, 8, 16});
  auto n = r.list<int>("n", {3201, 6401});
  const int restarts = r.get<int>("restarts", 0);
  const std::uint64_t seed = c.seed.value_or(r.get<std::uint64_t>("seed", 0));
  const bool checkpoint = r.get<bool>("checkpoint", true);
  const double mono = r.get<double>("monotone_factor", 10.0);
  Reader hr = r.sub("half");
  double h_eta = hr.get<double>("eta", 0.1), h_T = hr.get<double>("T_bar", 10.0), h_h = hr.get<double>("h", 0.01);
  int h_N = hr.get<int>("N", 20), h_pts = hr.get<int>("t_points", 16);
  const bool half_on = hr.get<bool>("enabled", true);
  hr.finish();
  r.finish();

  check_increasing_T(r, T);
  for (int k : ks) {
    check_increasing_n(r, n, k);
    check_table_grid(r, T, n, k);
  }
  if (restarts < 0) r.fail("restarts", "must be >= 0");
  if (!(mono >= 0)) r.fail("monotone_factor", "must be >= 0");
  if (half_on) {
    if (!(h_eta > 0 && h_eta < std::min(1.0, std::sqrt(well.beta())))) hr.fail("eta", "must lie in (0, min(1, sqrt(beta)))");
    if (h_N < 1) hr.fail("N", "must be >= 1");
    if (!(h_T > 0)) hr.fail("T_bar", "must be positive");
    if (!(h_h > 0)) hr.fail("h", "must be positive");
    if (h_pts < 1) hr.fail("t_points", "must be >= 1");
  }

  Json cfg{{"k", ks}, {"well", ws.json()}, {"T", T}, {"n", n}, {"restarts", restarts}};
  cfg.update(s.json());
  cfg["monotone_factor"] = mono;
  cfg["half"] = half_on ? Json{{"eta", h_eta}, {"N", h_N}, {"T_bar", h_T}, {"h", h_h}, {"t_points", h_pts}}
                        : Json{{"enabled", false}};
  prepare_out(c);

  MkOptions opt;
  opt.tol = s.tol;
  opt.max_iter = s.max_iter;
  opt.method = s.method;
  opt.restarts = restarts;
  opt.seed = seed;
  opt.monotone_factor = mono;
  opt.jobs = c.jobs;

  // resume from a checkpoint written by an interrupted run of the same config
  const std::string ckpt = out_path(c, "mk_table", "checkpoint.jsonl");
  const std::string digest = Json{{"seed", seed}, {"config", cfg}}.dump();
  std::ofstream ck;
  if (checkpoint) {
    if (fs::exists(ckpt)) {
      std::istringstream in(read_text(ckpt));
      std::string line;
      if (std::getline(in, line) && line == digest) {
        while (std::getline(in, line)) {
          try {
            const Json j = Json::parse(line);
            MkCell cell{mk_row_from_json(j.at("row")), j.at("minimizer").get<std::vector<double>>()};
            opt.completed[{cell.row.k, cell.row.T, cell.row.n}] = std::move(cell);
          } catch (const std::exception&) {
            break;  // truncated last line
          }
        }
      }
    }
    ck.open(ckpt, std::ios::binary | std::ios::trunc);
    if (!ck) throw IoError("cannot open checkpoint " + ckpt);
    ck << digest << '\n';
    for (const auto& [key, cell] : opt.completed)
      ck << Json{{"row", to_json(cell.row)}, {"minimizer", cell.minimizer}}.dump() << '\n';
    ck.flush();
    opt.on_cell = [&](const MkCell& cell) {
      ck << Json{{"row", to_json(cell.row)}, {"minimizer", cell.minimizer}}.dump() << '\n';
      ck.flush();
    };
  }

  const MkTable table = estimate_mk(ks, well, T, n, opt);
  Json doc = header("mk-table", seed, cfg);
  doc["table"] = to_json(table);
  CsvTable csv;
  csv.header = {"kind", "k", "T", "n", "h", "value", "grad_norm", "converged", "iterations", "uncertainty"};
  for (const auto& row : table.rows)
    csv.add("row", row.k, row.T, row.n, row.h, row.value, row.grad_norm, row.converged, row.iterations, std::string());
  for (const auto& e : table.estimates)
    csv.add("estimate", e.k, T.back(), n.back(), 2 * T.back() / (n.back() - 1), e.value, std::string(),
            e.all_converged, std::string(), e.uncertainty);
  if (half_on) {
    HalfOptions ho;
    ho.h = h_h;
    ho.t_points = h_pts;
    ho.tol = s.tol;
    ho.max_iter = s.max_iter;
    ho.method = s.method;
    const auto halves = parallel_map<std::pair<HalfResult, HalfResult>>(c.jobs, ks.size(), [&](std::size_t i) {
      return std::make_pair(solve_half(ks[i], well, h_eta, h_N, h_T, 1, ho),
                            solve_half(ks[i], well, h_eta, h_N, h_T, -1, ho));
    });
    Json hj = Json::array();
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const double ms = std::min(halves[i].first.value, halves[i].second.value);
      hj.push_back(Json{{"k", ks[i]}, {"m_star", ms}, {"plus", to_json(halves[i].first)},
                        {"minus", to_json(halves[i].second)}});
      csv.add("m_star", ks[i], h_T, 0, h_h, ms, std::string(), true, std::string(), std::string());
      if (!(ms > 0)) inv.add("m_star for k = " + std::to_string(ks[i]) + " is not positive");
    }
    doc["half"] = hj;
  }
  for (const auto& e : table.estimates)
    if (e.monotonicity_violations > 0)
      inv.add("k = " + std::to_string(e.k) + ": " + std::to_string(e.monotonicity_violations) +
              " monotonicity violation(s) in T");
  emit(c, "mk_table", doc, csv);
  if (checkpoint) {
    ck.close();
    fs::remove(ckpt);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gamma-1d
// ---------------------------------------------------------------------------

int cmd_gamma_1d(const Common& c, InvariantFailure& inv) {
  const Json raw = load_config(c.config);
  Reader r(raw, "");
  const auto ks = read_ks(r, {1, 2, 3});
  const int kmax = *std::max_element(ks.begin(), ks.end());
  WellSpec ws;
  const DoubleWell well = read_well(r.sub("well"), ws);
  const Solver s = read_solver(r);
  std::vector<JumpFunction> targets;
  for (auto& t : r.sublist("targets")) targets.push_back(read_target(std::move(t)));
  if (!r.has("targets")) targets = default_targets();
  if (targets.empty()) r.fail("targets", "must not be empty");
  const auto eps = r.list<double>("eps", default_eps_list());
  const ProfileSpec ps = read_profile_spec(r.sub("profile"), kmax);
  const MkSpec ms = read_mk_spec(r.sub("mk"), ks);
  const int cells = r.get<int>("cells_per_eps", 50);
  const double tolr = r.get<double>("ratio_tolerance", 0.02);
  const bool gp = r.get<bool>("gnuplot", false);
  const std::uint64_t seed = c.seed.value_or(r.get<std::uint64_t>("seed", 0));
  r.finish();
  if (eps.empty()) r.fail("eps", "must not be empty");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0)) r.fail("eps", "values must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1])) r.fail("eps", "must be strictly decreasing");
  }
  if (cells < 1) r.fail("cells_per_eps", "must be >= 1");
  if (!(tolr > 0)) r.fail("ratio_tolerance", "must be positive");
  for (std::size_t t = 0; t < targets.size(); ++t)
    for (double e : eps) {
      try {
        check_recovery_gap(targets[t], e, ps.T);
        recovery_grid(targets[t], e, cells);
      } catch (const ConfigError& err) {
        throw ConfigError("config field 'targets[" + std::to_string(t) + "]' with eps = " + format_number(e) +
                          ": " + err.what());
      }
    }

  Json cfg{{"k", ks}, {"well", ws.json()}};
  Json tj = Json::array();
  for (const auto& t : targets) tj.push_back(target_json(t));
  cfg["targets"] = tj;
  cfg["eps"] = eps;
  cfg["profile"] = ps.json();
  cfg["mk"] = ms.json();
  cfg["cells_per_eps"] = cells;
  cfg["ratio_tolerance"] = tolr;
  cfg.update(s.json());
  prepare_out(c);

  struct PerK {
    double mk;
    ProfileResult prof;
  };
  const auto per = parallel_map<std::optional<PerK>>(c.jobs, ks.size(), [&](std::size_t i) {
    return std::optional<PerK>(PerK{resolve_mk(ks[i], ms, well, s, 1), solve_recovery_profile(ks[i], ps, well, s)});
  });

  Json res = Json::array();
  CsvTable csv;
  csv.header = {"k", "target", "jumps", "eps", "n", "energy", "ratio", "l1"};
  std::ostringstream dat;
  GammaOptions go;
  go.cells_per_eps = cells;
  go.jobs = c.jobs;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const auto rows = gamma_sweep(targets[t], ks[i], well, eps, per[i]->prof.minimizer, per[i]->mk, go);
      Json rj = Json::array();
      for (const auto& row : rows) {
        rj.push_back(to_json(row));
        csv.add(ks[i], static_cast<int>(t), targets[t].jump_count(), row.eps, row.n, row.energy, row.ratio, row.l1);
        dat << std::log(row.eps) << ' ' << format_number(row.ratio) << '\n';
      }
      dat << "\n\n";
      const double fin = rows.back().ratio;
      const bool ok = targets[t].jump_count() == 0 ? rows.back().energy < 1e-12 : std::abs(fin - 1) <= tolr;
      if (!ok)
        inv.add("k = " + std::to_string(ks[i]) + ", target " + std::to_string(t) + ": final ratio " +
                format_number(fin) + " outside 1 +- " + format_number(tolr));
      res.push_back(Json{{"k", ks[i]}, {"target", t}, {"m_k", per[i]->mk},
                         {"profile_value", per[i]->prof.value}, {"rows", rj}, {"final_ratio", fin}, {"ok", ok}});
    }
  }
  Json doc = header("gamma-1d", seed, cfg);
  doc["results"] = res;
  emit(c, "gamma_1d", doc, csv);
  if (gp) write_text(out_path(c, "gamma_1d", "dat"), "# log(eps) ratio; one block per (k, target)\n" + dat.str());
  return 0;
}

// ---------------------------------------------------------------------------
// gamma-2d
// ---------------------------------------------------------------------------

struct ShapeSpec {
  InterfaceShape shape;
  std::string name;
  Json json;
};

ShapeSpec read_shape(Reader r) {
  const auto type = r.get<std::string>("type", "circle");
  ShapeSpec s;
  s.name = type;
  if (type == "circle") {
    const auto c = r.list<double>("center", {0.5, 0.5});
    const double rad = r.get<double>("radius", 0.25);
    if (c.size() != 2) r.fail("center", "needs two coordinates");
    s.shape = InterfaceShape::circle({c[0], c[1]}, rad);
    s.json = Json{{"type", type}, {"center", c}, {"radius", rad}};
  } else if (type == "line") {
    const auto p = r.list<double>("point", {0.5, 0.5});
    const auto nu = r.list<double>("normal", {0.0, 1.0});
    if (p.size() != 2) r.fail("point", "needs two coordinates");
    if (nu.size() != 2) r.fail("normal", "needs two coordinates");
    if (!(std::hypot(nu[0], nu[1]) > 0)) r.fail("normal", "must be nonzero");
    s.shape = InterfaceShape::line({p[0], p[1]}, {nu[0], nu[1]});
    s.json = Json{{"type", type}, {"point", p}, {"normal", nu}};
  } else {
    r.fail("type", "must be circle or line");
  }
  r.finish();
  try {
    s.shape.validate();
  } catch (const ConfigError& e) {
    r.fail("", e.what());
  }
  return s;
}

int cmd_gamma_2d(const Common& c, InvariantFailure& inv) {
  const Json raw = load_config(c.config);
  Reader r(raw, "");
  const auto ks = read_ks(r, {1, 2});
  const int kmax = *std::max_element(ks.begin(), ks.end());
  WellSpec ws;
  const DoubleWell well = read_well(r.sub("well"), ws);
  const Solver s = read_solver(r);
  std::vector<ShapeSpec> shapes;
  for (auto& x : r.sublist("shapes")) shapes.push_back(read_shape(std::move(x)));
  if (!r.has("shapes")) {
    shapes.push_back({InterfaceShape::circle({0.5, 0.5}, 0.25), "circle",
                      Json{{"type", "circle"}, {"center", {0.5, 0.5}}, {"radius", 0.25}}});
    shapes.push_back({InterfaceShape::line({0.5, 0.5}, {0, 1}), "line",
                      Json{{"type", "line"}, {"point", {0.5, 0.5}}, {"normal", {0.0, 1.0}}}});
  }
  if (shapes.empty()) r.fail("shapes", "must not be empty");
  const auto eps = r.list<double>("eps", {std::ldexp(1.0, -6)});
  const auto ns = r.list<int>("n", {513});
  const ProfileSpec ps = read_profile_spec(r.sub("profile"), kmax);
  const MkSpec ms = read_mk_spec(r.sub("mk"), ks);
  Reader tr = r.sub("tolerance");
  const double tol_line = tr.get<double>("line", 0.02), tol_circle = tr.get<double>("circle", 0.05);
  tr.finish();
  const int min_cells = r.get<int>("min_cells_per_eps", 8);
  const bool fields = r.get<bool>("write_fields", false);
  const std::uint64_t seed = c.seed.value_or(r.get<std::uint64_t>("seed", 0));
  r.finish();
  if (eps.empty()) r.fail("eps", "must not be empty");
  if (ns.size() != eps.size()) r.fail("n", "needs one grid size per eps value");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0)) r.fail("eps", "values must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1])) r.fail("eps", "must be strictly decreasing");
    if (ns[i] < min_nodes(kmax) || ns[i] > 8193) r.fail("n", "values must lie in [2k+3, 8193]");
    if (1.0 / (ns[i] - 1) > eps[i] / min_cells + 1e-15)
      r.fail("n", "grid spacing exceeds eps / " + std::to_string(min_cells) + " at eps = " + format_number(eps[i]));
    for (std::size_t q = 0; q < shapes.size(); ++q)
      if (!(eps[i] * ps.T < shapes[q].shape.reach()))
        r.fail("shapes", "shape " + std::to_string(q) + ": tube half-width eps*T exceeds its reach at eps = " +
                             format_number(eps[i]));
  }
  if (min_cells < 1) r.fail("min_cells_per_eps", "must be >= 1");
  if (!(tol_line > 0) || !(tol_circle > 0)) tr.fail("", "tolerances must be positive");

  Json cfg{{"k", ks}, {"well", ws.json()}};
  Json sj = Json::array();
  for (const auto& x : shapes) sj.push_back(x.json);
  cfg["shapes"] = sj;
  cfg["eps"] = eps;
  cfg["n"] = ns;
  cfg["profile"] = ps.json();
  cfg["mk"] = ms.json();
  cfg["tolerance"] = Json{{"line", tol_line}, {"circle", tol_circle}};
  cfg["min_cells_per_eps"] = min_cells;
  cfg.update(s.json());
  prepare_out(c);

  Json res = Json::array();
  CsvTable csv;
  csv.header = {"k", "shape", "eps", "n", "energy", "length", "ratio"};
  for (int k : ks) {
    const double mk = resolve_mk(k, ms, well, s, c.jobs);
    const auto prof = solve_recovery_profile(k, ps, well, s);
    for (std::size_t q = 0; q < shapes.size(); ++q) {
      Json rj = Json::array();
      double last = 0;
      for (std::size_t i = 0; i < eps.size(); ++i) {
        const Grid2D g(ns[i]);
        const auto u = build_recovery_2d(shapes[q].shape, eps[i], prof.minimizer, k, g);
        const double E = energy_F_eps_2d(u, eps[i], k, well, c.jobs);
        const double len = shapes[q].shape.length();
        last = E / (mk * len);
        rj.push_back(Json{{"eps", eps[i]}, {"n", ns[i]}, {"energy", E}, {"length", len}, {"ratio", last}});
        csv.add(k, shapes[q].name, eps[i], ns[i], E, len, last);
        if (fields)
          write_field_binary(out_path(c, "field_k" + std::to_string(k) + "_s" + std::to_string(q) + "_e" +
                                             std::to_string(i), "bin"), u, eps[i], k);
      }
      const double tol = shapes[q].name == "line" ? tol_line : tol_circle;
      const bool ok = std::abs(last - 1) <= tol;
      if (!ok)
        inv.add("k = " + std::to_string(k) + ", shape " + std::to_string(q) + ": ratio " + format_number(last) +
                " outside 1 +- " + format_number(tol));
      res.push_back(Json{{"k", k}, {"shape", q}, {"m_k", mk}, {"rows", rj}, {"final_ratio", last}, {"ok", ok}});
    }
  }
  Json doc = header("gamma-2d", seed, cfg);
  doc["results"] = res;
  emit(c, "gamma_2d", doc, csv);
  return 0;
}

// ---------------------------------------------------------------------------
// probe-interp
// ---------------------------------------------------------------------------

int cmd_probe(const Common& c, InvariantFailure& inv) {
  const Json raw = load_config(c.config);
  Reader r(raw, "");
  const int k = r.get<int>("k", 3);
  if (k < 2 || k > kMaxOrder) r.fail("k", "must lie in [2, " + std::to_string(kMaxOrder) + "]");
  std::vector<int> def_ell;
  for (int l = 1; l < k; ++l) def_ell.push_back(l);
  const auto ells = r.list<int>("ell", def_ell);
  for (int l : ells)
    if (l < 1 || l >= k) r.fail("ell", "values must lie in [1, k-1]");
  if (ells.empty()) r.fail("ell", "must not be empty");
  const std::uint64_t seed = c.seed.value_or(r.get<std::uint64_t>("seed", 0));
  const auto fixture = r.get<std::string>("fixture", "");
  Reader er = r.sub("ensemble");
  EnsembleSpec e;
  e.a = er.get<double>("a", 0.0);
  e.b = er.get<double>("b", 1.0);
  e.samples = er.get<int>("samples", 1000);
  e.max_frequency = er.get<int>("max_frequency", 8);
  const auto law = er.get<std::string>("law", "normal");
  if (law == "normal") e.law = CoefficientLaw::normal;
  else if (law == "uniform") e.law = CoefficientLaw::uniform;
  else er.fail("law", "must be normal or uniform");
  e.adversarial = er.get<bool>("adversarial", true);
  e.max_poly_degree = er.get<int>("max_poly_degree", 2);
  e.grid_points = er.get<int>("grid_points", 2049);
  er.finish();
  e.seed = seed;
  const auto split = r.list<double>("split_eps", {1.0, 0.1, 0.01, 0.001});
  const int buckets = r.get<int>("buckets", 20);
  r.finish();
  if (!fixture.empty()) {
    if (fixture != "sine") r.fail("fixture", "only \"sine\" is available");
    const auto f = sine_fixture(e.a, e.b);
    e.fixed = f.fixed;
  }
  try {
    validate(e);
  } catch (const ConfigError& err) {
    er.fail("", err.what());
  }
  for (double x : split)
    if (!(x > 0)) r.fail("split_eps", "values must be positive");
  if (buckets < 1) r.fail("buckets", "must be >= 1");

  Json cfg{{"k", k}, {"ell", ells}, {"fixture", fixture},
           {"ensemble", Json{{"a", e.a}, {"b", e.b}, {"samples", e.samples}, {"max_frequency", e.max_frequency},
                             {"law", law}, {"adversarial", e.adversarial}, {"max_poly_degree", e.max_poly_degree},
                             {"grid_points", e.grid_points}}},
           {"split_eps", split}, {"buckets", buckets}};
  prepare_out(c);

  Json res = Json::array();
  CsvTable csv;
  csv.header = {"k", "ell", "probe", "max_ratio", "argmax_index", "argmax_seed", "argmax_family", "samples"};
  for (int l : ells) {
    const auto p = interp_probe(e, k, l, c.jobs, buckets);
    Json entry{{"interp", to_json(p)}};
    csv.add(k, l, "interp", p.max_ratio, p.argmax_index, std::to_string(p.argmax_seed), p.argmax_family,
            p.ratios.size());
    if (!split.empty()) {
      const auto q = interp_split_probe(e, k, l, split, c.jobs, buckets);
      const double bound = 2 * p.max_ratio * p.max_ratio;
      const bool ok = q.max_ratio <= bound * (1 + 1e-12);
      entry["split"] = to_json(q);
      entry["split_bound"] = bound;
      entry["split_ok"] = ok;
      csv.add(k, l, "split", q.max_ratio, q.argmax_index, std::to_string(q.argmax_seed), q.argmax_family,
              q.ratios.size());
      if (!ok) inv.add("ell = " + std::to_string(l) + ": split ratio exceeds 2 r^2");
    }
    res.push_back(entry);
  }
  Json doc = header("probe-interp", seed, cfg);
  doc["results"] = res;
  emit(c, "probe_interp", doc, csv);
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

int cmd_diagnose(const Common& c, InvariantFailure& inv) {
  const Json raw = load_config(c.config);
  Reader r(raw, "");
  const int k = r.get<int>("k", 2);
  if (k < 1 || k > kMaxOrder) r.fail("k", "out of range");
  const double eps = r.get<double>("eps", 1e-3);
  const double eta = r.get<double>("eta", 0.1);
  const int N = r.get<int>("N", 4);
  WellSpec ws;
  const DoubleWell well = read_well(r.sub("well"), ws);
  const Solver s = read_solver(r);
  const auto input = r.get<std::string>("input", "");
  std::vector<JumpFunction> fixtures;
  for (auto& t : r.sublist("fixtures")) fixtures.push_back(read_target(std::move(t)));
  if (!r.has("fixtures") && input.empty()) fixtures = default_targets();
  const ProfileSpec ps = read_profile_spec(r.sub("profile"), k);
  const int cells = r.get<int>("cells_per_eps", 50);
  const std::uint64_t seed = c.seed.value_or(r.get<std::uint64_t>("seed", 0));
  r.finish();
  if (!(eps > 0)) r.fail("eps", "must be positive");
  if (!(eta > 0 && eta < std::min(1.0, std::sqrt(well.beta())))) r.fail("eta", "must lie in (0, min(1, sqrt(beta)))");
  if (N < 1) r.fail("N", "must be >= 1");
  if (cells < 1) r.fail("cells_per_eps", "must be >= 1");
  for (std::size_t t = 0; t < fixtures.size(); ++t) {
    try {
      check_recovery_gap(fixtures[t], eps, ps.T);
      recovery_grid(fixtures[t], eps, cells);
    } catch (const ConfigError& err) {
      throw ConfigError("config field 'fixtures[" + std::to_string(t) + "]': " + err.what());
    }
  }
  std::optional<GridFunction1D> in;
  if (!input.empty()) in = read_profile_csv(input);

  Json cfg{{"k", k}, {"eps", eps}, {"eta", eta}, {"N", N}, {"well", ws.json()}, {"input", input}};
  Json fj = Json::array();
  for (const auto& t : fixtures) fj.push_back(target_json(t));
  cfg["fixtures"] = fj;
  cfg["profile"] = ps.json();
  cfg["cells_per_eps"] = cells;
  cfg.update(s.json());
  prepare_out(c);

  Json res = Json::array();
  CsvTable csv;
  csv.header = {"source", "expected", "transitions", "max_location_error", "tolerance", "l1"};
  auto report = [&](const GridFunction1D& u, const std::string& name, const JumpFunction* truth) {
    const auto part = well_sets(u, eps, eta, N, k, well);
    Json entry{{"source", name}, {"partition", to_json(part)}};
    int expected = truth ? truth->jump_count() : -1;
    double err = 0;
    try {
      const auto bv = project_BV(u, eps, eta, N, k, well);
      entry["projection"] = Json{{"jumps", to_json(bv.jumps)}, {"l1", bv.l1}};
      if (truth && bv.jumps.jump_count() == expected)
        for (int i = 0; i < expected; ++i)
          err = std::max(err, std::abs(bv.jumps.jump_points[i] - truth->jump_points[i]));
      csv.add(name, expected, part.effective_count(), truth ? format_number(err) : std::string(),
              format_number(2 * eps * ps.T), bv.l1);
    } catch (const DiagnosticError& e) {
      entry["projection_error"] = e.what();
      if (truth) inv.add(name + ": " + e.what());
      csv.add(name, expected, part.effective_count(), std::string(), std::string(), std::string());
    }
    if (truth) {
      const bool ok = part.effective_count() == expected && err <= 2 * eps * ps.T;
      entry["expected"] = expected;
      entry["max_location_error"] = err;
      entry["ok"] = ok;
      if (!ok) inv.add(name + ": counted " + std::to_string(part.effective_count()) + " transitions, expected " +
                       std::to_string(expected) + " (location error " + format_number(err) + ")");
    }
    res.push_back(entry);
  };
  if (in) report(*in, input, nullptr);
  if (!fixtures.empty()) {
    const auto prof = solve_recovery_profile(k, ps, well, s);
    for (std::size_t t = 0; t < fixtures.size(); ++t) {
      const auto u = build_recovery_1d(fixtures[t], eps, prof, k, cells);
      report(u, "fixture " + std::to_string(t), &fixtures[t]);
    }
  }
  Json doc = header("diagnose", seed, cfg);
  doc["results"] = res;
  emit(c, "diagnose", doc, csv);
  return 0;
}

// ---------------------------------------------------------------------------
// hermite
// ---------------------------------------------------------------------------

int cmd_hermite(const Common& c, InvariantFailure&) {
  const Json raw = load_config(c.config);
  Reader r(raw, "");
  struct Case {
    int k;
    std::vector<double> z;
  };
  std::vector<Case> cases;
  for (auto cr : r.sublist("cases")) {
    Case cs{cr.get<int>("k", 1), cr.list<double>("z", {})};
    cr.finish();
    if (cs.k < 1 || cs.k > kMaxOrder) cr.fail("k", "out of range");
    if (static_cast<int>(cs.z.size()) != cs.k) cr.fail("z", "needs exactly k values");
    cases.push_back(cs);
  }
  if (!r.has("cases")) cases = {{1, {1}}, {2, {1, 0}}, {3, {1, 0, 0}}};
  const std::uint64_t seed = c.seed.value_or(r.get<std::uint64_t>("seed", 0));
  r.finish();
  if (cases.empty()) r.fail("cases", "must not be empty");

  Json cj = Json::array();
  for (const auto& cs : cases) cj.push_back(Json{{"k", cs.k}, {"z", cs.z}});
  prepare_out(c);
  Json res = Json::array();
  CsvTable csv;
  csv.header = {"k", "z", "theta"};
  for (const auto& cs : cases) {
    const auto h = hermite_extension(cs.k, cs.z);
    Json e = to_json(h);
    e["k"] = cs.k;
    e["z"] = cs.z;
    res.push_back(e);
    std::string zs;
    for (std::size_t i = 0; i < cs.z.size(); ++i) zs += (i ? " " : "") + format_number(cs.z[i]);
    csv.add(cs.k, zs, h.theta);
  }
  Json doc = header("hermite", seed, Json{{"cases", cj}});
  doc["results"] = res;
  emit(c, "hermite", doc, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Higher-order phase-transition energies: profiles, recovery sequences and diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Common common;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sc) {
    sc->add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
    sc->add_option("--seed", seed, "master seed (overrides the config)");
    sc->add_option("--out", common.out, "output directory")->capture_default_str();
    sc->add_option("--jobs", common.jobs, "worker threads")->check(CLI::Range(1, 1024))->capture_default_str();
    sc->add_option("--format", common.format, "output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  };
  using Cmd = int (*)(const Common&, InvariantFailure&);
  const std::vector<std::tuple<const char*, const char*, Cmd>> cmds{
      {"mk-table", "estimate m_k from clamped profile problems", cmd_mk_table},
      {"gamma-1d", "energies of 1-D recovery sequences", cmd_gamma_1d},
      {"gamma-2d", "energies of 2-D recovery sequences", cmd_gamma_2d},
      {"probe-interp", "empirical interpolation-inequality constants", cmd_probe},
      {"diagnose", "well sets and transition counting", cmd_diagnose},
      {"hermite", "minimal Hermite bridges", cmd_hermite}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, desc, fn] : cmds) {
    auto* sc = app.add_subcommand(name, desc);
    add_common(sc);
    subs.push_back(sc);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      if (subs[i]->count("--seed")) common.seed = seed;
      InvariantFailure inv;
      std::get<2>(cmds[i])(common, inv);
      if (inv.any()) {
        for (const auto& m : inv.messages) std::cerr << "invariant violated: " << m << '\n';
        return 2;
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const ExtrapolationError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const DiagnosticError& e) {
    std::cerr << "diagnostic error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
