// JSON and CSV serialization of result types. Key order is fixed and no
// timestamps are written, so identical inputs give identical bytes.
#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hopt/diagnostics.hpp"
#include "hopt/hermite.hpp"
#include "hopt/multidim.hpp"
#include "hopt/profile.hpp"
#include "hopt/recovery.hpp"

namespace hopt {

using Json = nlohmann::ordered_json;

inline Json to_json(const MkRow& r) {
  return Json{{"k", r.k},       {"T", r.T},
              {"n", r.n},       {"h", r.h},
              {"value", r.value}, {"grad_norm", r.grad_norm},
              {"converged", r.converged}, {"iterations", r.iterations}};
}

inline MkRow mk_row_from_json(const Json& j) {
  MkRow r;
  r.k = j.at("k").get<int>();
  r.T = j.at("T").get<double>();
  r.n = j.at("n").get<int>();
  r.h = j.at("h").get<double>();
  r.value = j.at("value").get<double>();
  r.grad_norm = j.at("grad_norm").get<double>();
  r.converged = j.at("converged").get<bool>();
  r.iterations = j.at("iterations").get<int>();
  return r;
}

inline Json to_json(const MkEstimate& e) {
  return Json{{"k", e.k},
              {"value", e.value},
              {"uncertainty", e.uncertainty},
              {"monotonicity_violations", e.monotonicity_violations},
              {"all_converged", e.all_converged}};
}

inline Json to_json(const MkTable& t) {
  Json rows = Json::array(), est = Json::array();
  for (const auto& r : t.rows) rows.push_back(to_json(r));
  for (const auto& e : t.estimates) est.push_back(to_json(e));
  return Json{{"rows", rows}, {"estimates", est}};
}

inline Json to_json(const HalfResult& h) {
  Json rows = Json::array();
  for (const auto& r : h.rows)
    rows.push_back(Json{{"T", r.T}, {"branch", r.branch}, {"value", r.value}, {"converged", r.converged}});
  return Json{{"sign", h.sign}, {"value", h.value}, {"T_star", h.T_star},
              {"branch_star", h.branch_star}, {"rows", rows}};
}

inline Json to_json(const JumpFunction& j) {
  return Json{{"a", j.a}, {"b", j.b}, {"jump_points", j.jump_points}, {"first_value", j.first_value}};
}

inline Json to_json(const GammaRow& r) {
  return Json{{"eps", r.eps}, {"n", r.n}, {"energy", r.energy}, {"ratio", r.ratio}, {"l1", r.l1}};
}

inline Json to_json(const Interval& i) { return Json::array({i.lo, i.hi}); }

inline Json to_json(const WellPartition& p) {
  auto list = [](const std::vector<Interval>& v) {
    Json a = Json::array();
    for (const auto& i : v) a.push_back(to_json(i));
    return a;
  };
  Json tr = Json::array();
  for (const auto& t : p.transitions)
    tr.push_back(Json{{"interval", to_json(t.interval)}, {"kind", to_string(t.kind)},
                      {"from", t.from}, {"to", t.to}});
  return Json{{"eta", p.eta},         {"N", p.N},
              {"eps", p.eps},         {"k", p.k},
              {"A_plus", list(p.A_plus)}, {"A_minus", list(p.A_minus)},
              {"A_eta_N", list(p.A_eta_N)}, {"transitions", tr},
              {"effective_transitions", p.effective_count()},
              {"max_transition_length", p.max_transition_length()}};
}

inline Json to_json(const ProbeReport& r) {
  return Json{{"k", r.k},
              {"ell", r.ell},
              {"max_ratio", r.max_ratio},
              {"argmax_index", r.argmax_index},
              {"argmax_seed", r.argmax_seed},
              {"argmax_family", r.argmax_family},
              {"samples", r.ratios.size()},
              {"bucket_edges", r.bucket_edges},
              {"histogram", r.histogram}};
}

inline Json to_json(const HermiteResult& h) {
  return Json{{"coefficients", h.poly.c}, {"theta", h.theta}};
}

/// Stable dump: two-space indent, trailing newline.
inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

/// Shortest round-trip decimal form (the same as the JSON writer).
inline std::string format_number(double x) {
  Json j = x;
  return j.dump();
}

/// Minimal CSV table: header plus rows of preformatted cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  template <class... Cells>
  void add(const Cells&... cells) {
    std::vector<std::string> r;
    (r.push_back(cell(cells)), ...);
    rows.push_back(std::move(r));
  }

  std::string str(const std::string& comment = {}) const {
    std::ostringstream o;
    if (!comment.empty()) o << "# " << comment << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) o << (i ? "," : "") << header[i];
    o << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) o << (i ? "," : "") << r[i];
      o << '\n';
    }
    return o.str();
  }

 private:
  static std::string cell(double x) { return format_number(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(std::size_t x) { return std::to_string(x); }
  static std::string cell(bool x) { return x ? "true" : "false"; }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

/// Reads a two-column CSV "t,u" (header optional) on a uniform grid.
inline GridFunction1D read_profile_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<double> t, u;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    double a, b;
    if (std::sscanf(line.c_str(), "%lf,%lf", &a, &b) != 2) {
      if (t.empty()) continue;  // header
      throw ConfigError("csv: malformed line in " + path + ": " + line);
    }
    t.push_back(a);
    u.push_back(b);
  }
  if (t.size() < 2) throw ConfigError("csv: need at least two samples in " + path);
  const Grid1D g(t.front(), t.back(), static_cast<int>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i)
    if (std::abs(t[i] - g.node(static_cast<int>(i))) > 1e-9 * (1 + std::abs(g.length())))
      throw ConfigError("csv: samples in " + path + " are not uniformly spaced");
  return GridFunction1D(g, std::move(u));
}

}  // namespace hopt
