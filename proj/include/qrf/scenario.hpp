#pragma once

#include "qrf/thermo.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace qrf::scenario {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "1.0.0";

struct ConfigError : Error {
  ConfigError(const std::string& path, const std::string& msg) : Error(path.empty() ? msg : path + ": " + msg) {}
};

struct UnknownScenario : Error {
  using Error::Error;
};

// ---- json helpers ------------------------------------------------------------

inline std::string sub(const std::string& p, const std::string& key) { return p.empty() ? key : p + "." + key; }
inline std::string sub(const std::string& p, std::size_t k) { return p + "[" + std::to_string(k) + "]"; }

inline const json& need(const json& j, const char* key, const std::string& p) {
  if (!j.is_object()) throw ConfigError(p, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(sub(p, key), "missing field");
  return *it;
}

// Numbers, or strings like "pi", "-pi/2", "2*pi", "0.5pi".
inline double parse_real(const json& j, const std::string& p) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    static const std::regex re(R"(^\s*([-+]?[0-9]*\.?[0-9]*)\s*\*?\s*pi\s*(?:/\s*([0-9]*\.?[0-9]+))?\s*$)");
    std::smatch m;
    const std::string s = j.get<std::string>();
    if (std::regex_match(s, m, re)) {
      double c = 1.0;
      if (m[1].length() > 0) c = (m[1] == "-") ? -1.0 : (m[1] == "+") ? 1.0 : std::stod(m[1]);
      double den = m[2].matched ? std::stod(m[2]) : 1.0;
      return c * M_PI / den;
    }
  }
  throw ConfigError(p, "expected a number");
}

inline int parse_int(const json& j, const std::string& p) {
  if (!j.is_number_integer()) throw ConfigError(p, "expected an integer");
  return j.get<int>();
}

inline cplx parse_complex(const json& j, const std::string& p) {
  if (j.is_array() && j.size() == 2) return {parse_real(j[0], sub(p, 0)), parse_real(j[1], sub(p, 1))};
  return {parse_real(j, p), 0.0};
}

inline Mat parse_matrix(const json& j, const std::string& p) {
  if (!j.is_array() || j.empty()) throw ConfigError(p, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Mat m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    const auto rp = sub(p, static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != rows)
      throw ConfigError(rp, "row has " + std::to_string(row.is_array() ? row.size() : 0) + " entries, expected " +
                                std::to_string(rows));
    for (Eigen::Index c = 0; c < rows; ++c)
      m(r, c) = parse_complex(row[static_cast<std::size_t>(c)], sub(rp, static_cast<std::size_t>(c)));
  }
  return m;
}

// Nested rows of [re, im] pairs, the same shape parse_matrix accepts.
inline json matrix_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline json number_json(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  return x;
}

// ---- local operators and states ------------------------------------------------

inline Mat named_operator(const std::string& name, Eigen::Index n, const Setup& s, const std::string& p) {
  if (name == "id") return identity(n);
  if (n == 2) {
    if (name == "sx") return pauli::x();
    if (name == "sy") return pauli::y();
    if (name == "sz") return pauli::z();
  }
  if (name == "clock") {
    Mat m = Mat::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) m(k, k) = std::exp(2.0 * M_PI * I_UNIT * static_cast<double>(k) / static_cast<double>(n));
    return m;
  }
  if (name == "num") {
    Mat m = Mat::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) m(k, k) = static_cast<double>(k);
    return m;
  }
  static const std::regex shift(R"(^shift(?::([0-9]+))?$)"), proj(R"(^proj:([0-9]+)$)");
  std::smatch m;
  if (std::regex_match(name, m, shift)) {
    const std::size_t k = m[1].matched ? std::stoul(m[1]) : 1;
    if (n == s.N()) {
      if (k >= s.order()) throw ConfigError(p, "group element index " + std::to_string(k) + " out of range");
      return s.U_frame(k);
    }
    Mat u = Mat::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a) u((a + static_cast<Eigen::Index>(k)) % n, a) = 1.0;
    return u;
  }
  if (std::regex_match(name, m, proj)) {
    const auto k = static_cast<Eigen::Index>(std::stol(m[1]));
    if (k >= n) throw ConfigError(p, "projector index out of range for dimension " + std::to_string(n));
    return ket_bra(n, k, k);
  }
  throw ConfigError(p, "unknown operator name \"" + name + "\" for a factor of dimension " + std::to_string(n));
}

// A single-factor name, a per-factor list of names, or a dense matrix.
inline Mat parse_local_operator(const json& j, const std::vector<Eigen::Index>& dims, const Setup& s,
                                const std::string& p) {
  Eigen::Index total = 1;
  for (auto d : dims) total *= d;
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    Mat out = Mat::Ones(1, 1);
    for (auto d : dims) out = kron(out, named_operator(name, d, s, p));
    return out;
  }
  if (j.is_array() && !j.empty() && j[0].is_string()) {
    if (j.size() != dims.size())
      throw ConfigError(p, "lists " + std::to_string(j.size()) + " factors, expected " + std::to_string(dims.size()));
    Mat out = Mat::Ones(1, 1);
    for (std::size_t k = 0; k < dims.size(); ++k) {
      if (!j[k].is_string()) throw ConfigError(sub(p, k), "expected an operator name");
      out = kron(out, named_operator(j[k].get<std::string>(), dims[k], s, sub(p, k)));
    }
    return out;
  }
  const Mat m = parse_matrix(j, p);
  if (m.rows() != total)
    throw ConfigError(p, "matrix dimension " + std::to_string(m.rows()) + " does not match " + std::to_string(total));
  return m;
}

struct StateValue {
  std::optional<Vec> psi;
  Mat rho;
};

inline StateValue pure_value(const Vec& v) { return {v, v * v.adjoint()}; }

struct StateContext {
  std::vector<Eigen::Index> dims;
  std::optional<Mat> hamiltonian;  // for "gibbs:<beta>"
  std::string what;
};

inline StateValue parse_named_state(const std::string& name, const StateContext& ctx, const Setup& s,
                                    const std::string& p) {
  Eigen::Index d = 1;
  for (auto x : ctx.dims) d *= x;
  auto all_dims = [&](Eigen::Index want) {
    return std::all_of(ctx.dims.begin(), ctx.dims.end(), [&](Eigen::Index x) { return x == want; });
  };
  static const std::regex index_re(R"(^[0-9]+$)"), gibbs_re(R"(^gibbs:(.+)$)"), gb_re(R"(^GB:([0-9]+),([0-9]+)$)");
  std::smatch m;
  if (std::regex_match(name, m, index_re)) {
    const auto k = static_cast<Eigen::Index>(std::stol(name));
    if (k >= d) throw ConfigError(p, "basis index " + name + " out of range for dimension " + std::to_string(d));
    return pure_value(basis_vector(d, k));
  }
  if (name == "x+" || name == "x-" || name == "y+" || name == "y-") {
    if (d != 2) throw ConfigError(p, "\"" + name + "\" needs a qubit, got dimension " + std::to_string(d));
    const cplx ph = name == "x+" ? 1.0 : name == "x-" ? -1.0 : name == "y+" ? I_UNIT : -I_UNIT;
    Vec v(2);
    v << 1.0, ph;
    return pure_value(v / std::sqrt(2.0));
  }
  if (name == "uniform") return pure_value(Vec::Ones(d) / std::sqrt(static_cast<double>(d)));
  if (name == "maxmixed") return {std::nullopt, identity(d) / static_cast<double>(d)};
  if (name == "W") {
    if (!all_dims(2)) throw ConfigError(p, "W state needs qubit factors");
    return pure_value(w_state(static_cast<int>(ctx.dims.size())));
  }
  if (name == "GHZ") {
    if (!all_dims(s.N())) throw ConfigError(p, "GHZ state needs factors of the group order");
    return pure_value(ghz_state(s.group(), static_cast<int>(ctx.dims.size())));
  }
  if (std::regex_match(name, m, gb_re)) {
    if (ctx.dims.size() != 2 || !all_dims(s.N()))
      throw ConfigError(p, "generalized Bell state needs two factors of the group order");
    const auto h = std::stoul(m[1]), k = std::stoul(m[2]);
    if (h >= s.order() || k >= s.order()) throw ConfigError(p, "generalized Bell labels out of range");
    return pure_value(gb_state(s.group(), h, k));
  }
  if (std::regex_match(name, m, gibbs_re)) {
    if (!ctx.hamiltonian) throw ConfigError(p, "no local Hamiltonian available for " + ctx.what);
    const std::string b = m[1].str();
    const bool plain = b.find_first_not_of("-+.0123456789eE") == std::string::npos;
    const double beta = plain ? std::stod(b) : parse_real(json(b), p);
    return {std::nullopt, gibbs(*ctx.hamiltonian, beta)};
  }
  throw ConfigError(p, "unknown state name \"" + name + "\"");
}

inline StateValue combine_product(const std::vector<StateValue>& parts) {
  bool pure = std::all_of(parts.begin(), parts.end(), [](const StateValue& v) { return v.psi.has_value(); });
  if (pure) {
    std::vector<Vec> vs;
    for (const auto& v : parts) vs.push_back(*v.psi);
    return pure_value(product_state(vs));
  }
  std::vector<Mat> ms;
  for (const auto& v : parts) ms.push_back(v.rho);
  return {std::nullopt, product_density(ms)};
}

// Product parts are parsed against the frame / system contexts so that local
// Gibbs states see the matching local Hamiltonian.
struct StateParser {
  const Setup& s;
  StateContext whole, frame, system;
  std::vector<StateContext> system_factors;

  StateValue parse(const json& j, const StateContext& ctx, const std::string& p) const {
    Eigen::Index d = 1;
    for (auto x : ctx.dims) d *= x;
    if (j.is_number_integer()) return parse_named_state(std::to_string(j.get<long>()), ctx, s, p);
    if (j.is_string()) return parse_named_state(j.get<std::string>(), ctx, s, p);
    if (!j.is_object()) throw ConfigError(p, "expected a state name or object");
    if (j.contains("amplitudes")) {
      const auto& a = j["amplitudes"];
      const auto ap = sub(p, "amplitudes");
      if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != d)
        throw ConfigError(ap, "expected " + std::to_string(d) + " amplitudes for " + ctx.what);
      Vec v(d);
      for (Eigen::Index k = 0; k < d; ++k) v(k) = parse_complex(a[static_cast<std::size_t>(k)], sub(ap, static_cast<std::size_t>(k)));
      if (v.norm() < 1e-14) throw ConfigError(ap, "zero vector");
      return pure_value(v / v.norm());
    }
    if (j.contains("density")) {
      const Mat m = parse_matrix(j["density"], sub(p, "density"));
      if (m.rows() != d)
        throw ConfigError(sub(p, "density"), "dimension " + std::to_string(m.rows()) + " does not match " + std::to_string(d));
      try {
        require_density(m, "density");
      } catch (const Error& e) {
        throw ConfigError(sub(p, "density"), e.what());
      }
      return {std::nullopt, m};
    }
    if (j.contains("mixture")) {
      const auto& mix = j["mixture"];
      const auto mp = sub(p, "mixture");
      if (!mix.is_array() || mix.empty()) throw ConfigError(mp, "expected a non-empty list");
      Mat acc = Mat::Zero(d, d);
      double total = 0;
      for (std::size_t k = 0; k < mix.size(); ++k) {
        const auto ep = sub(mp, k);
        const double w = parse_real(need(mix[k], "p", ep), sub(ep, "p"));
        if (w < 0) throw ConfigError(sub(ep, "p"), "negative weight");
        acc += w * parse(need(mix[k], "state", ep), ctx, sub(ep, "state")).rho;
        total += w;
      }
      if (std::abs(total - 1.0) > 1e-12) throw ConfigError(mp, "weights sum to " + std::to_string(total) + ", not 1");
      return {std::nullopt, acc};
    }
    if (j.contains("product")) {
      const auto& parts = j["product"];
      const auto pp = sub(p, "product");
      if (!parts.is_array()) throw ConfigError(pp, "expected a list");
      std::vector<const StateContext*> split;
      if (&ctx == &whole && parts.size() == 2) split = {&frame, &system};
      else if (&ctx == &whole && parts.size() == 1 + system_factors.size()) {
        split = {&frame};
        for (const auto& f : system_factors) split.push_back(&f);
      } else if (&ctx == &system && parts.size() == system_factors.size()) {
        for (const auto& f : system_factors) split.push_back(&f);
      } else {
        throw ConfigError(pp, "has " + std::to_string(parts.size()) + " parts, which does not match the factors of " +
                                  ctx.what);
      }
      std::vector<StateValue> vals;
      for (std::size_t k = 0; k < parts.size(); ++k) vals.push_back(parse(parts[k], *split[k], sub(pp, k)));
      return combine_product(vals);
    }
    throw ConfigError(p, "state object needs one of amplitudes, density, mixture, product");
  }
};

// ---- config ------------------------------------------------------------------------

struct Outputs {
  bool entropies = true;
  bool energetics = true;
  bool entropy_balance = true;
  bool subalgebra_flags = true;
  bool witness_search = false;
  bool states = true;  // purity and rho_S per row in JSON output
};

struct LabeledX {
  std::string label;
  BilocalUnitary x;
};

struct ScenarioConfig {
  std::string name;
  std::optional<Setup> setup;
  std::vector<Eigen::Index> s_factors;
  int i = 1;  // perspective the Hamiltonian and rows refer to
  std::size_t g1 = 0, g2 = 0;
  Mat H;  // on (other frame, S) relative to frame i
  StateValue state;
  Prescription prescription = SplitAlpha{0.5};
  std::vector<double> grid;
  std::vector<LabeledX> subalgebras;
  Outputs outputs;
  double tol = tol::membership;
  json echo;

  const Setup& s() const { return *setup; }
  int j() const { return Setup::other(i); }
  std::size_t gi() const { return i == 1 ? g1 : g2; }
  std::size_t gj() const { return i == 1 ? g2 : g1; }
};

inline double default_tolerance() {
  if (const char* env = std::getenv("QRF_LAB_TOL")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && *end == '\0' && v > 0) return v;
    throw ConfigError("QRF_LAB_TOL", std::string("not a positive number: ") + env);
  }
  return tol::membership;
}

inline Group parse_group(const json& j, const std::string& p) {
  std::vector<int> factors;
  const json* src = &j;
  std::string sp = p;
  if (j.is_object()) {
    src = &need(j, "cyclic", p);
    sp = sub(p, "cyclic");
  }
  if (src->is_number_integer()) factors.push_back(src->get<int>());
  else if (src->is_array())
    for (std::size_t k = 0; k < src->size(); ++k) factors.push_back(parse_int((*src)[k], sub(sp, k)));
  else throw ConfigError(sp, "expected a list of cyclic orders");
  try {
    return Group(factors);
  } catch (const Error& e) {
    throw ConfigError(sp, e.what());
  }
}

inline std::size_t parse_element(const Group& g, const json& j, const std::string& p) {
  GroupElement e;
  if (j.is_number_integer() && g.factors().size() == 1) e.residues = {j.get<int>()};
  else if (j.is_array())
    for (std::size_t k = 0; k < j.size(); ++k) e.residues.push_back(parse_int(j[k], sub(p, k)));
  else throw ConfigError(p, "expected a group element (residue list)");
  try {
    return g.index(e);
  } catch (const Error& ex) {
    throw ConfigError(p, ex.what());
  }
}

inline std::vector<double> parse_time(const json& j, const std::string& p) {
  if (j.contains("grid")) {
    const auto& gj = j["grid"];
    std::vector<double> out;
    for (std::size_t k = 0; k < gj.size(); ++k) out.push_back(parse_real(gj[k], sub(sub(p, "grid"), k)));
    if (out.empty()) throw ConfigError(sub(p, "grid"), "needs at least one point");
    for (std::size_t k = 1; k < out.size(); ++k)
      if (!(out[k] > out[k - 1])) throw ConfigError(sub(sub(p, "grid"), k), "time grid must be strictly increasing");
    return out;
  }
  const double a = j.contains("start") ? parse_real(j["start"], sub(p, "start")) : 0.0;
  const double b = j.contains("stop") ? parse_real(j["stop"], sub(p, "stop")) : a;
  const int n = j.contains("points") ? parse_int(j["points"], sub(p, "points")) : 1;
  if (n < 1) throw ConfigError(sub(p, "points"), "points must be >= 1");
  if (n == 1) return {a};
  if (!(b > a)) throw ConfigError(sub(p, "stop"), "stop must exceed start when points > 1");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = a + (b - a) * k / (n - 1);
  return out;
}

inline ScenarioConfig parse_config(const json& in) {
  ScenarioConfig c;
  json echo = in;
  if (!in.is_object()) throw ConfigError("", "config must be a JSON object");
  c.name = in.value("name", std::string("custom"));
  const Group g = parse_group(need(in, "group", ""), "group");

  // representation
  const json rep = in.contains("rep") ? in["rep"] : json("regular");
  try {
    if (rep.is_string() && rep.get<std::string>() == "regular") {
      c.setup = Setup::regular(g);
      c.s_factors = {static_cast<Eigen::Index>(g.order())};
    } else if (rep.is_object() && rep.contains("tensor_power")) {
      const int m = parse_int(rep["tensor_power"], "rep.tensor_power");
      if (m < 1) throw ConfigError("rep.tensor_power", "must be >= 1");
      c.setup = Setup::tensor_power(g, m);
      c.s_factors.assign(static_cast<std::size_t>(m), static_cast<Eigen::Index>(g.order()));
    } else if (rep.is_object() && rep.contains("matrices")) {
      const auto& ms = rep["matrices"];
      std::vector<Mat> mats;
      for (std::size_t k = 0; k < ms.size(); ++k) mats.push_back(parse_matrix(ms[k], sub("rep.matrices", k)));
      if (mats.empty()) throw ConfigError("rep.matrices", "empty");
      c.setup.emplace(g, mats, "explicit");
      c.s_factors = {mats[0].rows()};
    } else {
      throw ConfigError("rep", "expected \"regular\", {\"tensor_power\": m} or {\"matrices\": [...]}");
    }
  } catch (const UnitarityError& e) {
    throw UnitarityError(std::string("rep: ") + e.what());
  }
  const Setup& s = *c.setup;
  echo["rep"] = rep;

  auto perspective = [&](const char* key, int dflt) {
    if (!in.contains(key)) return dflt;
    const auto v = in[key];
    if (v == "R1" || v == 1) return 1;
    if (v == "R2" || v == 2) return 2;
    throw ConfigError(key, "expected \"R1\" or \"R2\"");
  };
  c.i = perspective("perspective", 1);
  const int state_i = perspective("state_perspective", c.i);
  echo["perspective"] = Setup::label(c.i);
  echo["state_perspective"] = Setup::label(state_i);

  if (in.contains("orientations")) {
    const auto& o = in["orientations"];
    if (o.contains("g1")) c.g1 = parse_element(g, o["g1"], "orientations.g1");
    if (o.contains("g2")) c.g2 = parse_element(g, o["g2"], "orientations.g2");
  }
  echo["orientations"] = {{"g1", g.element(c.g1).residues}, {"g2", g.element(c.g2).residues}};

  std::vector<Eigen::Index> all_dims{s.N()};
  all_dims.insert(all_dims.end(), c.s_factors.begin(), c.s_factors.end());
  const Eigen::Index D = s.perspective_dim();

  // Hamiltonian on the perspective space of frame i
  c.H = Mat::Zero(D, D);
  if (in.contains("hamiltonian")) {
    const auto& h = in["hamiltonian"];
    if (h.contains("matrix")) {
      c.H = parse_matrix(h["matrix"], "hamiltonian.matrix");
      if (c.H.rows() != D)
        throw ConfigError("hamiltonian.matrix", "dimension " + std::to_string(c.H.rows()) +
                                                    " does not match perspective dimension " + std::to_string(D));
    }
    if (h.contains("terms")) {
      const auto& ts = h["terms"];
      for (std::size_t k = 0; k < ts.size(); ++k) {
        const auto tp = sub("hamiltonian.terms", k);
        const cplx coeff = ts[k].contains("coeff") ? parse_complex(ts[k]["coeff"], sub(tp, "coeff")) : cplx(1.0);
        const auto& fs = need(ts[k], "factors", tp);
        const auto fp = sub(tp, "factors");
        if (!fs.is_array() || fs.size() != all_dims.size())
          throw ConfigError(fp, "lists " + std::to_string(fs.is_array() ? fs.size() : 0) + " factors, expected " +
                                    std::to_string(all_dims.size()) + " (frame then system factors)");
        Mat term = Mat::Ones(1, 1);
        for (std::size_t f = 0; f < fs.size(); ++f) {
          if (!fs[f].is_string()) throw ConfigError(sub(fp, f), "expected an operator name");
          term = kron(term, named_operator(fs[f].get<std::string>(), all_dims[f], s, sub(fp, f)));
        }
        c.H += coeff * term;
      }
    }
    if (!is_hermitian(c.H, 1e-10 * std::max(1.0, c.H.norm())))
      throw HermiticityError("hamiltonian: not Hermitian (residual " + std::to_string(hermiticity_residual(c.H)) + ")");
    c.H = 0.5 * (c.H + c.H.adjoint());
  }

  // initial state, possibly given relative to the other frame
  const Mat v_state = state_i == c.i ? identity(D) : qrf_transform(s, state_i, c.gj(), c.gi()).matrix;
  const Mat H_state = conjugate(v_state, c.H);
  const auto sp_state = split_hamiltonian(s, H_state);
  StateParser sparse{s, {all_dims, H_state, "the perspective space"}, {{s.N()}, sp_state.h_frame, "the frame"},
                     {c.s_factors, sp_state.h_s, "the system"}, {}};
  for (std::size_t k = 0; k < c.s_factors.size(); ++k)
    sparse.system_factors.push_back({{c.s_factors[k]}, std::nullopt, "system factor " + std::to_string(k)});
  const json st = in.contains("state") ? in["state"] : json("maxmixed");
  StateValue sv = sparse.parse(st, sparse.whole, "state");
  if (state_i != c.i) {
    sv.rho = conjugate(v_state, sv.rho);
    if (sv.psi) sv.psi = Vec(v_state * *sv.psi);
  }
  c.state = sv;

  // prescription
  if (in.contains("prescription")) {
    const auto& pj = in["prescription"];
    const std::string kind = pj.is_string() ? pj.get<std::string>() : need(pj, "prescription", "prescription").get<std::string>();
    if (kind == "split_alpha") {
      SplitAlpha a;
      if (pj.is_object() && pj.contains("alpha_s")) a.alpha_s = parse_real(pj["alpha_s"], "prescription.alpha_s");
      c.prescription = a;
    } else if (kind == "commuting_part") {
      c.prescription = CommutingPart{};
    } else {
      throw ConfigError("prescription", "unknown prescription \"" + kind + "\"");
    }
  }
  if (const auto* a = std::get_if<SplitAlpha>(&c.prescription))
    echo["prescription"] = {{"prescription", "split_alpha"}, {"alpha_s", a->alpha_s}};
  else
    echo["prescription"] = {{"prescription", "commuting_part"}};

  c.grid = parse_time(in.contains("time") ? in["time"] : json::object(), "time");

  if (in.contains("subalgebras")) {
    const auto& xs = in["subalgebras"];
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const auto xp = sub("subalgebras", k);
      const std::string label = xs[k].value("label", "X" + std::to_string(k));
      const Mat y = xs[k].contains("Y") ? parse_local_operator(xs[k]["Y"], {s.N()}, s, sub(xp, "Y")) : identity(s.N());
      const Mat z = xs[k].contains("Z") ? parse_local_operator(xs[k]["Z"], c.s_factors, s, sub(xp, "Z"))
                                        : identity(s.d_S());
      try {
        c.subalgebras.push_back({label, BilocalUnitary(y, z)});
      } catch (const UnitarityError& e) {
        throw UnitarityError(xp + ": " + e.what());
      }
    }
  }

  if (in.contains("outputs")) {
    const auto& o = in["outputs"];
    auto flag = [&](const char* key, bool& dst) {
      if (o.contains(key)) {
        if (!o[key].is_boolean()) throw ConfigError(sub("outputs", key), "expected true or false");
        dst = o[key].get<bool>();
      }
    };
    flag("entropies", c.outputs.entropies);
    flag("energetics", c.outputs.energetics);
    flag("entropy_balance", c.outputs.entropy_balance);
    flag("subalgebra_flags", c.outputs.subalgebra_flags);
    flag("witness_search", c.outputs.witness_search);
    flag("states", c.outputs.states);
  }
  echo["outputs"] = {{"entropies", c.outputs.entropies},
                     {"energetics", c.outputs.energetics},
                     {"entropy_balance", c.outputs.entropy_balance},
                     {"subalgebra_flags", c.outputs.subalgebra_flags},
                     {"witness_search", c.outputs.witness_search},
                     {"states", c.outputs.states}};

  c.tol = in.contains("tol") ? parse_real(in["tol"], "tol") : default_tolerance();
  if (!(c.tol > 0)) throw ConfigError("tol", "must be positive");
  echo["tol"] = c.tol;
  c.echo = echo;
  return c;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

// ---- runner ------------------------------------------------------------------------

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "t",       "E_s_i",     "E_s_j",     "E_frame_i", "E_frame_j", "E_int_i",   "E_int_j",
      "qdot_s_i", "qdot_s_j", "wdot_s_i",  "wdot_s_j",  "estar_s_i", "estar_s_j", "SvN_s_i",
      "SvN_s_j", "sigma_i",   "sigma_j",   "phi_i",     "phi_j",     "in_AX"};
  return cols;
}

struct Row {
  double t = 0;
  std::vector<std::optional<double>> values;  // csv columns 1..18
  std::string in_AX;                          // empty when flags are off
  Mat rho_S_i, rho_S_j;
  double purity_s_i = 0, purity_s_j = 0;
  std::vector<double> membership_residuals;
  std::vector<bool> memberships;
  std::optional<bool> witness_found;
  EomTerms eom_i, eom_j;
};

struct ScenarioResult {
  json metadata;
  json summary;
  std::vector<Row> rows;
};

inline std::vector<Mat> pauli_basis_strings(int n, std::vector<std::string>& labels) {
  std::vector<Mat> out{Mat::Ones(1, 1)};
  labels = {""};
  const char* names[4] = {"id", "sx", "sy", "sz"};
  const Mat ps[4] = {pauli::id(), pauli::x(), pauli::y(), pauli::z()};
  for (int k = 0; k < n; ++k) {
    std::vector<Mat> next;
    std::vector<std::string> nl;
    for (std::size_t a = 0; a < out.size(); ++a)
      for (int b = 0; b < 4; ++b) {
        next.push_back(kron(out[a], ps[b]));
        nl.push_back(labels[a].empty() ? names[b] : labels[a] + "," + names[b]);
      }
    out.swap(next);
    labels.swap(nl);
  }
  return out;
}

// Pauli-string expansion of an all-qubit operator; empty when any factor is not a qubit.
inline json pauli_expansion(const Mat& h, const std::vector<Eigen::Index>& dims) {
  json out = json::array();
  if (dims.size() > 6 || !std::all_of(dims.begin(), dims.end(), [](Eigen::Index d) { return d == 2; })) return out;
  std::vector<std::string> labels;
  const auto basis = pauli_basis_strings(static_cast<int>(dims.size()), labels);
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const cplx c = hs_inner(basis[k], h) / static_cast<double>(h.rows());
    if (std::abs(c) > 1e-12) out.push_back({{"term", labels[k]}, {"coeff", c.real()}});
  }
  return out;
}

inline Row compute_row(const ScenarioConfig& c, const Propagator& prop, const Mat& v, const HamiltonianSplit& sp_i,
                       const HamiltonianSplit& sp_j, const Mat& rho0_j, double t) {
  const Setup& s = c.s();
  const Eigen::Index n = s.N(), d = s.d_S();
  Row r;
  r.t = t;
  r.values.assign(18, std::nullopt);
  Mat rho_i;
  std::optional<Vec> psi_t;
  if (c.state.psi) {
    psi_t = prop.evolve(*c.state.psi, t);
    rho_i = *psi_t * psi_t->adjoint();
  } else {
    rho_i = prop.evolve(c.state.rho, t);
  }
  const Mat rho_j = conjugate(v, rho_i);
  r.rho_S_i = trace_frame(s, rho_i);
  r.rho_S_j = trace_frame(s, rho_j);
  r.purity_s_i = purity(r.rho_S_i);
  r.purity_s_j = purity(r.rho_S_j);
  auto set = [&](int col, double x) { r.values[static_cast<std::size_t>(col - 1)] = x; };
  if (c.outputs.energetics) {
    const Mat rd_i = liouvillian(sp_i.total(), rho_i);
    const Mat rd_j = conjugate(v, rd_i);
    const auto ti = energetics(sp_i, rho_i, rd_i, c.prescription);
    const auto tj = energetics(sp_j, rho_j, rd_j, c.prescription);
    set(1, ti.E_s), set(2, tj.E_s), set(3, ti.E_frame), set(4, tj.E_frame), set(5, ti.E_int), set(6, tj.E_int);
    set(7, ti.qdot_s), set(8, tj.qdot_s), set(9, ti.wdot_s), set(10, tj.wdot_s), set(11, ti.estar_s), set(12, tj.estar_s);
    r.eom_i = subsystem_eom_terms(sp_i, rho_i);
    r.eom_j = subsystem_eom_terms(sp_j, rho_j);
  }
  if (c.outputs.entropies) {
    set(13, von_neumann(r.rho_S_i));
    set(14, von_neumann(r.rho_S_j));
  }
  if (c.outputs.entropy_balance) {
    try {
      const auto b = entropy_production_and_flow(c.state.rho, rho_i, n, d);
      set(15, b.sigma), set(17, b.phi);
    } catch (const NonProductStateError&) {
    }
    try {
      const auto b = entropy_production_and_flow(rho0_j, rho_j, n, d);
      set(16, b.sigma), set(18, b.phi);
    } catch (const NonProductStateError&) {
    }
  }
  if (c.outputs.subalgebra_flags && !c.subalgebras.empty()) {
    std::string hits;
    for (const auto& x : c.subalgebras) {
      const auto m = membership_test(s, rho_i, x.x, c.gi(), c.gj(), c.tol);
      r.membership_residuals.push_back(m.residual);
      r.memberships.push_back(m.is_member);
      if (m.is_member) hits += (hits.empty() ? "" : "|") + x.label;
    }
    r.in_AX = hits.empty() ? "none" : hits;
  }
  if (c.outputs.witness_search) {
    if (psi_t) r.witness_found = pure_state_bilocal_witness(s, *psi_t, c.gi(), c.gj()).witness.has_value();
    else r.witness_found = subsystem_equivalence_witness(r.rho_S_i, r.rho_S_j).Z.has_value();
  }
  return r;
}

inline ScenarioResult run_scenario(const ScenarioConfig& c, int jobs = 1) {
  const Setup& s = c.s();
  const Mat v = qrf_transform(s, c.i, c.gi(), c.gj()).matrix;
  const auto sp_i = split_hamiltonian(s, c.H);
  const Mat H_j = conjugate(v, c.H);
  const auto sp_j = split_hamiltonian(s, H_j);
  const Mat rho0_j = conjugate(v, c.state.rho);
  const Propagator prop(c.H);

  ScenarioResult res;
  res.rows.resize(c.grid.size());
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(c.grid.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(static_cast<std::size_t>(workers));
  auto work = [&](int w) {
    try {
      for (std::size_t k = next++; k < c.grid.size(); k = next++) res.rows[k] = compute_row(c, prop, v, sp_i, sp_j, rho0_j, c.grid[k]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(w)] = e.what();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Error("scenario " + c.name + ": " + e);

  std::vector<Eigen::Index> dims{s.N()};
  dims.insert(dims.end(), c.s_factors.begin(), c.s_factors.end());
  res.metadata = {{"library", "qrf-lab"},
                  {"version", kVersion},
                  {"config", c.echo},
                  {"tolerances",
                   {{"membership", c.tol},
                    {"eigen_one", tol::eigen_one},
                    {"hermitian", tol::hermitian},
                    {"degeneracy_gap", tol::degeneracy_gap}}}};
  json& sm = res.summary;
  sm["scenario"] = c.name;
  sm["perspective_i"] = Setup::label(c.i);
  sm["perspective_j"] = Setup::label(c.j());
  sm["group_order"] = s.order();
  sm["d_S"] = s.d_S();
  sm["points"] = c.grid.size();
  sm["dynamical_type_i"] = to_string(dynamical_type_classifier(s, sp_i));
  sm["dynamical_type_j"] = to_string(dynamical_type_classifier(s, sp_j));
  sm["H_i_pauli"] = pauli_expansion(c.H, dims);
  sm["H_j_pauli"] = pauli_expansion(H_j, dims);
  sm["initial_state_pure"] = c.state.psi.has_value();
  if (!c.subalgebras.empty()) {
    json subs = json::array();
    for (std::size_t k = 0; k < c.subalgebras.size(); ++k) {
      const auto& x = c.subalgebras[k];
      const InvariantProjector px(s, x.x, c.gi(), c.gj());
      const auto hm = membership_test(s, c.H, x.x, c.gi(), c.gj(), c.tol);
      json times = json::array();
      if (c.outputs.subalgebra_flags)
        for (const auto& r : res.rows)
          if (r.memberships[k]) times.push_back(r.t);
      subs.push_back({{"label", x.label},
                      {"dimension", px.dimension()},
                      {"hamiltonian_member", hm.is_member},
                      {"hamiltonian_residual", hm.residual},
                      {"state_member_times", times}});
    }
    sm["subalgebras"] = subs;
  }
  return res;
}

// ---- output ------------------------------------------------------------------------

inline std::string fmt17(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_csv(const ScenarioResult& r, std::ostream& os) {
  const auto& cols = csv_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << '\n';
  for (const auto& row : r.rows) {
    os << fmt17(row.t);
    for (const auto& v : row.values) {
      os << ',';
      if (v) os << fmt17(*v);
    }
    os << ',' << row.in_AX << '\n';
  }
}

inline json to_json(const ScenarioConfig& c, const ScenarioResult& r) {
  json rows = json::array();
  const auto& cols = csv_columns();
  const std::string li = Setup::label(c.i), lj = Setup::label(c.j());
  for (const auto& row : r.rows) {
    json o;
    o["t"] = row.t;
    for (std::size_t k = 0; k < row.values.size(); ++k)
      o[cols[k + 1]] = row.values[k] ? number_json(*row.values[k]) : json(nullptr);
    o["in_AX"] = row.in_AX.empty() ? json(nullptr) : json(row.in_AX);
    if (c.outputs.states) {
      o["purity_s_i"] = row.purity_s_i;
      o["purity_s_j"] = row.purity_s_j;
      o["rho_S_" + li] = matrix_json(row.rho_S_i);
      o["rho_S_" + lj] = matrix_json(row.rho_S_j);
    }
    if (!row.membership_residuals.empty()) o["membership_residuals"] = row.membership_residuals;
    if (row.witness_found) o["witness_found"] = *row.witness_found;
    rows.push_back(o);
  }
  return json{{"metadata", r.metadata}, {"summary", r.summary}, {"rows", rows}};
}

// "# key: value" lines for the CSV side channel.
inline void write_summary_lines(const json& summary, std::ostream& os) {
  for (auto it = summary.begin(); it != summary.end(); ++it) os << "# " << it.key() << ": " << it.value().dump() << '\n';
}

// ---- overrides ------------------------------------------------------------------------

inline json parse_override_value(const std::string& v) {
  try {
    return json::parse(v);
  } catch (const json::parse_error&) {
    return v;
  }
}

// Dotted path with numeric segments indexing arrays.
inline void set_path(json& root, const std::string& dotted, const json& value) {
  json* cur = &root;
  std::stringstream ss(dotted);
  std::string seg;
  std::vector<std::string> segs;
  while (std::getline(ss, seg, '.')) segs.push_back(seg);
  if (segs.empty()) throw ConfigError(dotted, "empty override key");
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const bool last = k + 1 == segs.size();
    const auto& sgm = segs[k];
    const bool numeric = !sgm.empty() && std::all_of(sgm.begin(), sgm.end(), ::isdigit);
    if (numeric && cur->is_array()) {
      const auto idx = std::stoul(sgm);
      if (idx >= cur->size()) throw ConfigError(dotted, "index out of range");
      cur = &(*cur)[idx];
    } else {
      if (!cur->is_object()) {
        if (!cur->is_null()) throw ConfigError(dotted, "cannot descend into a non-object");
        *cur = json::object();
      }
      cur = &(*cur)[sgm];
    }
    if (last) *cur = value;
  }
}

// ---- built-in catalog ------------------------------------------------------------------

struct Builtin {
  std::string name;
  std::string reproduces;
  json params;
  std::function<json(const json&)> build;
  std::function<json(const json&, const ScenarioConfig&, const ScenarioResult&)> checks;
};

namespace detail {

inline json term(double c, std::vector<std::string> fs) { return {{"coeff", c}, {"factors", fs}}; }

inline json subalg(const std::string& label, const json& y, const json& z) { return {{"label", label}, {"Y", y}, {"Z", z}}; }

inline json time_json(const json& start, const json& stop, int points) {
  return {{"start", start}, {"stop", stop}, {"points", points}};
}

inline double p_real(const json& params, const char* key) { return parse_real(need(params, key, "params"), sub("params", key)); }
inline int p_int(const json& params, const char* key) { return parse_int(need(params, key, "params"), sub("params", key)); }

inline double max_over(const ScenarioResult& r, const std::function<double(const Row&)>& f) {
  double m = 0;
  for (const auto& row : r.rows) m = std::max(m, f(row));
  return m;
}

inline Mat sigma_x_all(Eigen::Index m) {
  Mat out = Mat::Ones(1, 1);
  for (Eigen::Index k = 0; k < m; ++k) out = kron(out, pauli::x());
  return out;
}

inline json renyi_block(const ScenarioResult& r, const std::vector<double>& alphas) {
  json out = json::array();
  const auto& row = r.rows.front();
  for (double a : alphas)
    out.push_back({{"alpha", a}, {"S_i", renyi(row.rho_S_i, a)}, {"S_j", renyi(row.rho_S_j, a)}});
  return out;
}

inline json pure_witness_block(const ScenarioConfig& c) {
  if (!c.state.psi) return {{"pure", false}};
  const auto w = pure_state_bilocal_witness(c.s(), *c.state.psi, c.gi(), c.gj());
  json o{{"pure", true}, {"found", w.witness.has_value()}, {"schmidt_gap", w.spectrum_gap}};
  if (w.witness) o["residual"] = w.check.residual;
  return o;
}

inline bool row_has(const Row& row, const std::string& label) {
  std::stringstream ss(row.in_AX);
  std::string part;
  while (std::getline(ss, part, '|'))
    if (part == label) return true;
  return false;
}

// Multiples of `period` inside [a, b].
inline std::vector<double> multiples(double period, double a, double b) {
  std::vector<double> out;
  if (!(std::abs(period) > 0)) return out;
  period = std::abs(period);
  for (long n = static_cast<long>(std::ceil(a / period - 1e-9)); n * period <= b + 1e-9; ++n) out.push_back(n * period);
  return out;
}

inline bool near_any(double t, const std::vector<double>& ts, double eps) {
  return std::any_of(ts.begin(), ts.end(), [&](double x) { return std::abs(x - t) <= eps; });
}

inline json three_qubit_checks(const json& p, const ScenarioConfig& c, const ScenarioResult&) {
  const Setup& s = c.s();
  json out;
  const BilocalUnitary one = BilocalUnitary::identity_on(s);
  const BilocalUnitary zx(pauli::id(), pauli::x());
  const InvariantProjector p1(s, one, 0, 0), p2(s, zx, 0, 0);
  out["dim_A_1"] = p1.dimension();
  out["dim_A_1_cap_A_1sx"] = intersect(p1.superop(), p2.superop()).dimension;
  // membership of H over the four orientations
  json table = json::array();
  for (std::size_t g1 = 0; g1 < 2; ++g1)
    for (std::size_t g2 = 0; g2 < 2; ++g2) {
      json members = json::array(), residuals = json::object();
      for (const auto& x : c.subalgebras) {
        const auto m = membership_test(s, c.H, x.x, g1, g2, c.tol);
        residuals[x.label] = m.residual;
        if (m.is_member) members.push_back(x.label);
      }
      table.push_back({{"g1", g1}, {"g2", g2}, {"members", members}, {"residuals", residuals}});
    }
  out["ising_membership"] = table;
  // exhaustive scan over single-qubit Pauli Y and Z
  const auto ps = pauli_group_mod_phase();
  const char* names[4] = {"id", "sx", "sy", "sz"};
  json hits = json::array();
  double min_res = kInf;
  for (std::size_t g1 = 0; g1 < 2; ++g1)
    for (std::size_t g2 = 0; g2 < 2; ++g2)
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const auto m = membership_test(s, c.H, BilocalUnitary(ps[a], ps[b]), g1, g2, c.tol);
          min_res = std::min(min_res, m.residual);
          if (m.is_member)
            hits.push_back({{"g1", g1}, {"g2", g2}, {"Y", names[a]}, {"Z", names[b]}, {"residual", m.residual}});
        }
  out["pauli_scan"] = {{"A", p_real(p, "A")}, {"B", p_real(p, "B")}, {"C", p_real(p, "C")},
                       {"members", hits}, {"min_residual", min_res}};
  return out;
}

inline json entropy_pair(const ScenarioResult& r) {
  const auto& row = r.rows.front();
  return {{"SvN_s_i", von_neumann(row.rho_S_i)}, {"SvN_s_j", von_neumann(row.rho_S_j)}};
}

}  // namespace detail

inline const std::vector<Builtin>& catalog() {
  using namespace detail;
  static const std::vector<Builtin> cat = [] {
    std::vector<Builtin> v;

    v.push_back({"three-qubit-subalgebras",
                 "three-qubit subalgebra dimensions, Ising membership table and Pauli scan",
                 {{"A", 1.0}, {"B", 1.0}, {"C", 1.0}, {"g1", 0}, {"g2", 0}, {"beta", 1.0}},
                 [](const json& p) {
                   return json{{"name", "three-qubit-subalgebras"},
                               {"group", {{"cyclic", {2}}}},
                               {"orientations", {{"g1", {p_int(p, "g1")}}, {"g2", {p_int(p, "g2")}}}},
                               {"hamiltonian",
                                {{"terms",
                                  {term(p_real(p, "A"), {"sz", "id"}), term(p_real(p, "B"), {"id", "sz"}),
                                   term(p_real(p, "C"), {"sz", "sz"})}}}},
                               {"state", "gibbs:" + fmt17(p_real(p, "beta"))},
                               {"subalgebras",
                                {subalg("1", "id", "id"), subalg("1(x)sx", "id", "sx"), subalg("sx(x)sx", "sx", "sx"),
                                 subalg("sx(x)1", "sx", "id")}}};
                 },
                 three_qubit_checks});

    v.push_back({"w-state",
                 "frame qubit superposed with a W state of the system: entropies in both perspectives",
                 {{"N", 5}, {"a", M_SQRT1_2}, {"b", M_SQRT1_2}},
                 [](const json& p) {
                   const int N = p_int(p, "N");
                   if (N < 3) throw ConfigError("params.N", "needs N >= 3");
                   return json{{"name", "w-state"},
                               {"group", {{"cyclic", {2}}}},
                               {"rep", {{"tensor_power", N - 2}}},
                               {"state", {{"product", {{{"amplitudes", {p_real(p, "a"), p_real(p, "b")}}}, "W"}}}},
                               {"outputs", {{"witness_search", true}}}};
                 },
                 [](const json& p, const ScenarioConfig& c, const ScenarioResult& r) {
                   const double a = std::abs(p_real(p, "a")), b = std::abs(p_real(p, "b"));
                   const double nrm = a * a + b * b;
                   json pred = json::array();
                   for (double al : {0.5, 2.0}) {
                     const double x = std::pow(a * a / nrm, al), y = std::pow(b * b / nrm, al);
                     pred.push_back({{"alpha", al}, {"closed_form_S_j", std::log(x + y) / (1.0 - al)}});
                   }
                   return json{{"entropies", entropy_pair(r)},
                               {"renyi", renyi_block(r, {0.5, 2.0})},
                               {"renyi_closed_form", pred},
                               {"witness", pure_witness_block(c)}};
                 }});

    v.push_back({"gb-states",
                 "generalized Bell states: system-only (local) or frame-plus-system (global)",
                 {{"n", 3}, {"h", 1}, {"k", 1}, {"form", "local"}, {"phi", "0"}},
                 [](const json& p) {
                   const int n = p_int(p, "n");
                   const std::string gb = "GB:" + std::to_string(p_int(p, "h")) + "," + std::to_string(p_int(p, "k"));
                   const std::string form = need(p, "form", "params").get<std::string>();
                   json cfg{{"name", "gb-states"}, {"group", {{"cyclic", {n}}}}, {"outputs", {{"witness_search", true}}}};
                   if (form == "local") {
                     cfg["rep"] = {{"tensor_power", 2}};
                     cfg["state"] = {{"product", {p["phi"], gb}}};
                   } else if (form == "global") {
                     cfg["state"] = gb;
                   } else {
                     throw ConfigError("params.form", "expected \"local\" or \"global\"");
                   }
                   return cfg;
                 },
                 [](const json& p, const ScenarioConfig& c, const ScenarioResult& r) {
                   json out{{"entropies", entropy_pair(r)}, {"renyi", renyi_block(r, {0.5, 2.0})},
                            {"witness", pure_witness_block(c)}};
                   if (p["form"] == "global") {
                     const Eigen::Index n = c.s().N();
                     const auto h = static_cast<Eigen::Index>(p_int(p, "h"));
                     out["rho_S_i_maxmixed_residual"] = max_abs(r.rows.front().rho_S_i - identity(n) / double(n));
                     out["rho_S_j_basis_h_residual"] = max_abs(r.rows.front().rho_S_j - ket_bra(n, h, h));
                   }
                   return out;
                 }});

    v.push_back({"ghz",
                 "GHZ system states, pure (frame times GHZ) or a W/GHZ mixture",
                 {{"N", 5}, {"n", 2}, {"phi", "0"}, {"form", "pure"}, {"p1", 0.5}, {"a", 0.6}, {"b", 0.8}},
                 [](const json& p) {
                   const int N = p_int(p, "N");
                   if (N < 3) throw ConfigError("params.N", "needs N >= 3");
                   const std::string form = need(p, "form", "params").get<std::string>();
                   json cfg{{"name", "ghz"},
                            {"group", {{"cyclic", {p_int(p, "n")}}}},
                            {"rep", {{"tensor_power", N - 2}}},
                            {"outputs", {{"witness_search", true}}}};
                   if (form == "pure") {
                     cfg["state"] = {{"product", {p["phi"], "GHZ"}}};
                   } else if (form == "mixed") {
                     if (p_int(p, "n") != 2) throw ConfigError("params.n", "the mixed form needs qubits");
                     const double p1 = p_real(p, "p1");
                     cfg["state"] = {{"mixture",
                                      {{{"p", p1}, {"state", {{"product", {"1", "W"}}}}},
                                       {{"p", 1.0 - p1},
                                        {"state", {{"product", {{{"amplitudes", {p_real(p, "a"), p_real(p, "b")}}}, "GHZ"}}}}}}}};
                   } else {
                     throw ConfigError("params.form", "expected \"pure\" or \"mixed\"");
                   }
                   return cfg;
                 },
                 [](const json& p, const ScenarioConfig& c, const ScenarioResult& r) {
                   json out{{"entropies", entropy_pair(r)}, {"renyi", renyi_block(r, {0.5, 2.0})}};
                   if (p["form"] == "pure") {
                     out["witness"] = pure_witness_block(c);
                   } else {
                     const auto& row = r.rows.front();
                     const auto w = subsystem_equivalence_witness(c.s(), c.state.rho, row.rho_S_i, row.rho_S_j);
                     out["unitarily_equivalent"] = w.Z.has_value();
                     out["spectrum_gap"] = w.spectrum_gap;
                     const Mat x = sigma_x_all(static_cast<Eigen::Index>(c.s_factors.size()));
                     out["rho_S_j_sigma_x_symmetric_residual"] = max_abs(row.rho_S_j - conjugate(x, row.rho_S_j));
                   }
                   return out;
                 }});

    v.push_back({"zz-oscillation",
                 "trajectory entering two different invariant subalgebras periodically",
                 {{"B", 1.0}, {"J", 1.0}},
                 [](const json& p) {
                   const double B = p_real(p, "B"), J = p_real(p, "J");
                   return json{{"name", "zz-oscillation"},
                               {"group", {{"cyclic", {2}}}},
                               {"hamiltonian", {{"terms", {term(B, {"sz", "id"}), term(B, {"id", "sz"}), term(2 * J, {"sz", "sz"})}}}},
                               {"state", {{"product", {"x+", "x+"}}}},
                               {"time", time_json(0, "2pi", 61)},
                               {"subalgebras", {subalg("1", "id", "id"), subalg("1(x)sx", "id", "sx")}}};
                 },
                 [](const json& p, const ScenarioConfig& c, const ScenarioResult& r) {
                   const double B = p_real(p, "B"), J = p_real(p, "J");
                   const double a = c.grid.front(), b = c.grid.back();
                   const auto pa = 2 * J - B != 0 ? multiples(M_PI / (2 * J - B), a, b) : std::vector<double>{};
                   const auto pb = 2 * J + B != 0 ? multiples(M_PI / (2 * J + B), a, b) : std::vector<double>{};
                   const double h = c.grid.size() > 1 ? 0.5 * (c.grid[1] - c.grid[0]) : 1e-9;
                   bool ok = true;
                   double worst = 0;
                   for (const auto& row : r.rows) {
                     const bool in1 = row_has(row, "1"), in2 = row_has(row, "1(x)sx");
                     ok = ok && in1 == near_any(row.t, pa, h) && in2 == near_any(row.t, pb, h);
                     if (in1 || in2) worst = std::max(worst, std::abs(*row.values[12] - *row.values[13]));
                   }
                   return json{{"predicted_A_1_times", pa},
                               {"predicted_A_1sx_times", pb},
                               {"flags_match_prediction", ok},
                               {"max_entropy_gap_at_member_times", worst}};
                 }});

    v.push_back({"effectively-isolated",
                 "interacting Hamiltonian with effectively isolated system dynamics in both perspectives",
                 {{"B", 1.0}, {"J", 1.0}, {"a", 0.6}, {"b", 0.8}},
                 [](const json& p) {
                   const double B = p_real(p, "B"), J = p_real(p, "J");
                   return json{{"name", "effectively-isolated"},
                               {"group", {{"cyclic", {2}}}},
                               {"hamiltonian", {{"terms", {term(B, {"sz", "id"}), term(B, {"id", "sz"}), term(2 * J, {"sz", "sz"})}}}},
                               {"state", {{"product", {"1", {{"amplitudes", {p_real(p, "a"), p_real(p, "b")}}}}}}},
                               {"time", time_json(0, "2pi", 41)},
                               {"subalgebras", {subalg("1(x)sx", "id", "sx")}}};
                 },
                 [](const json& p, const ScenarioConfig& c, const ScenarioResult& r) {
                   const double B = p_real(p, "B"), J = p_real(p, "J");
                   const Mat z = pauli::z();
                   const auto sp_i = split_hamiltonian(c.s(), c.H);
                   const auto sp_j = split_hamiltonian(c.s(), conjugate(qrf_transform(c.s(), c.i, c.gi(), c.gj()).matrix, c.H));
                   double ht_i = 0, ht_j = 0, eff_i = 0, eff_j = 0, sx_res = 0;
                   bool closed_i = true, closed_j = true;
                   for (const auto& row : r.rows) {
                     ht_i = std::max(ht_i, max_abs(row.eom_i.h_tilde_s + 2 * J * z));
                     ht_j = std::max(ht_j, max_abs(row.eom_j.h_tilde_s + B * z));
                     eff_i = std::max(eff_i, max_abs(sp_i.h_s + row.eom_i.h_tilde_s - (B - 2 * J) * z));
                     eff_j = std::max(eff_j, max_abs(sp_j.h_s + row.eom_j.h_tilde_s + (B - 2 * J) * z));
                     sx_res = std::max(sx_res, max_abs(row.rho_S_j - conjugate(pauli::x(), row.rho_S_i)));
                     closed_i = closed_i && row.eom_i.effectively_closed;
                     closed_j = closed_j && row.eom_j.effectively_closed;
                   }
                   return json{{"h_tilde_s_i_residual", ht_i},       {"h_tilde_s_j_residual", ht_j},
                               {"effective_h_s_i_residual", eff_i},  {"effective_h_s_j_residual", eff_j},
                               {"rho_S_j_sigma_x_residual", sx_res}, {"effectively_closed_i", closed_i},
                               {"effectively_closed_j", closed_j}};
                 }});

    v.push_back({"relative-equilibrium",
                 "system in equilibrium relative to one frame, oscillating between temperatures relative to the other",
                 {{"a", 1.0}, {"b", 1.0}, {"beta", 1.0}},
                 [](const json& p) {
                   return json{{"name", "relative-equilibrium"},
                               {"group", {{"cyclic", {2}}}},
                               {"hamiltonian", {{"terms", {term(p_real(p, "a"), {"sx", "id"}), term(p_real(p, "b"), {"id", "sz"})}}}},
                               {"state", {{"product", {"0", "gibbs:" + fmt17(p_real(p, "beta"))}}}},
                               {"time", time_json(0, "2pi", 50)}};
                 },
                 [](const json& p, const ScenarioConfig&, const ScenarioResult& r) {
                   const double a = p_real(p, "a"), b = p_real(p, "b"), beta = p_real(p, "beta");
                   const Mat hs = b * pauli::z();
                   const Mat gp = gibbs(hs, beta), gm = gibbs(hs, -beta);
                   const double stat = detail::max_over(r, [&](const Row& row) { return max_abs(row.rho_S_i - gp); });
                   const double cf = detail::max_over(r, [&](const Row& row) {
                     const double c2 = std::cos(a * row.t) * std::cos(a * row.t);
                     return max_abs(row.rho_S_j - (c2 * gp + (1 - c2) * gm));
                   });
                   return json{{"rho_S_i_stationary_gibbs_residual", stat}, {"rho_S_j_closed_form_residual", cf}};
                 }});

    v.push_back({"negative-temperature",
                 "positive-to-negative temperature under a frame change",
                 {{"N", 3}, {"mu", 2.0}, {"nu", 1.0}, {"beta", 1.0}, {"frame", "1"}, {"H_S", "sum"}},
                 [](const json& p) {
                   const int N = p_int(p, "N");
                   if (N < 3) throw ConfigError("params.N", "needs N >= 3");
                   const int m = N - 2;
                   const std::string kind = need(p, "H_S", "params").get<std::string>();
                   std::vector<std::vector<std::string>> hs_terms;
                   if (kind == "sum") {
                     for (int l = 0; l < m; ++l) {
                       std::vector<std::string> f(static_cast<std::size_t>(m), "id");
                       f[static_cast<std::size_t>(l)] = "sz";
                       hs_terms.push_back(f);
                     }
                   } else if (kind == "product") {
                     if (m % 2 == 0) throw ConfigError("params.H_S", "the product form needs N - 2 odd");
                     hs_terms.push_back(std::vector<std::string>(static_cast<std::size_t>(m), "sz"));
                   } else {
                     throw ConfigError("params.H_S", "expected \"sum\" or \"product\"");
                   }
                   json terms = json::array();
                   std::vector<std::string> f0{"sz"};
                   f0.resize(static_cast<std::size_t>(m + 1), "id");
                   terms.push_back(term(p_real(p, "nu"), f0));
                   for (const auto& t : hs_terms) {
                     std::vector<std::string> a{"id"}, b{"sz"};
                     a.insert(a.end(), t.begin(), t.end());
                     b.insert(b.end(), t.begin(), t.end());
                     terms.push_back(term(1.0, a));
                     terms.push_back(term(p_real(p, "mu"), b));
                   }
                   return json{{"name", "negative-temperature"},
                               {"group", {{"cyclic", {2}}}},
                               {"rep", {{"tensor_power", m}}},
                               {"hamiltonian", {{"terms", terms}}},
                               {"state", {{"product", {p["frame"], "gibbs:" + fmt17(p_real(p, "beta"))}}}},
                               {"time", time_json(0, 2, 11)}};
                 },
                 [](const json& p, const ScenarioConfig& c, const ScenarioResult& r) {
                   const Setup& s = c.s();
                   const double mu = p_real(p, "mu"), beta = p_real(p, "beta");
                   const auto sp_i = split_hamiltonian(s, c.H);
                   const Mat hs = sp_i.h_s;
                   const auto sp_j = split_hamiltonian(s, conjugate(qrf_transform(s, c.i, c.gi(), c.gj()).matrix, c.H));
                   const Mat rho_frame = trace_system(s, c.state.rho);
                   const auto pred = negative_temperature_predict(s, hs, beta, rho_frame, c.gj());
                   const auto& row = r.rows.front();
                   const Mat x = sigma_x_all(static_cast<Eigen::Index>(c.s_factors.size()));
                   json out{{"G_a", pred.G_a},
                            {"conditions_hold", pred.conditions_hold},
                            {"q_a", pred.q_a},
                            {"prediction_residual", max_abs(row.rho_S_j - pred.predicted)},
                            {"H_S_j_minus_mu_H_S_residual", max_abs(sp_j.h_s - mu * hs)},
                            {"negative_gibbs_residual", max_abs(row.rho_S_j - gibbs(mu * hs, -beta / mu))},
                            {"sigma_x_conjugate_residual",
                             detail::max_over(r, [&](const Row& w) { return max_abs(w.rho_S_j - conjugate(x, w.rho_S_i)); })},
                            {"entropies", entropy_pair(r)}};
                   const auto gc = gibbs_classification(s, sp_i, beta, c.i, c.gi(), c.gj(), 0);
                   out["fitted_mu"] = gc.mu ? json(*gc.mu) : json(nullptr);
                   out["fitted_sign"] = gc.sign;
                   return out;
                 }});

    v.push_back({"isolated-vs-closed",
                 "isolated-to-isolated versus isolated-to-closed: heat and work rates relative to the second frame",
                 {{"case", 2}, {"state", 2}, {"alpha_s", 0.5}},
                 [](const json& p) {
                   const int cs = p_int(p, "case"), st = p_int(p, "state");
                   json terms;
                   if (cs == 1) terms = {term(1, {"sz", "id"}), term(1, {"id", "sx"})};
                   else if (cs == 2) terms = {term(1, {"sx", "id"}), term(1, {"id", "sx"})};
                   else throw ConfigError("params.case", "expected 1 or 2");
                   json state;
                   if (st == 1) state = {{"product", {"x+", "x+"}}};
                   else if (st == 2) state = "GB:0,0";
                   else throw ConfigError("params.state", "expected 1 or 2");
                   return json{{"name", "isolated-vs-closed"},
                               {"group", {{"cyclic", {2}}}},
                               {"hamiltonian", {{"terms", terms}}},
                               {"state_perspective", "R2"},
                               {"state", state},
                               {"prescription", {{"prescription", "split_alpha"}, {"alpha_s", p_real(p, "alpha_s")}}},
                               {"time", time_json(0, "2pi", 50)}};
                 },
                 [](const json& p, const ScenarioConfig&, const ScenarioResult& r) {
                   const double al = p_real(p, "alpha_s");
                   const double qi = detail::max_over(r, [](const Row& w) { return std::max(std::abs(*w.values[6]), std::abs(*w.values[8])); });
                   const double q = detail::max_over(r, [](const Row& w) {
                     const double s1 = std::sin(w.t);
                     return std::abs(*w.values[7] - std::sin(2 * w.t) * (2 - s1 * (1 + 3 * s1 * s1)));
                   });
                   const double wd = detail::max_over(r, [&](const Row& w) {
                     const double s2 = std::sin(2 * w.t);
                     return std::abs(*w.values[9] - std::sin(4 * w.t) * s2 * s2 * (0.5 - al));
                   });
                   return json{{"max_abs_rates_i", qi},
                               {"qdot_s_j_closed_form_residual", q},
                               {"wdot_s_j_closed_form_residual", wd},
                               {"max_abs_qdot_s_j", detail::max_over(r, [](const Row& w) { return std::abs(*w.values[7]); })},
                               {"max_abs_wdot_s_j", detail::max_over(r, [](const Row& w) { return std::abs(*w.values[9]); })}};
                 }});

    v.push_back({"zero-to-nonzero-entropy",
                 "zero entropy production relative to one frame, nonzero relative to the other",
                 {{"beta", 1.0}},
                 [](const json& p) {
                   return json{{"name", "zero-to-nonzero-entropy"},
                               {"group", {{"cyclic", {2}}}},
                               {"hamiltonian", {{"terms", {term(1, {"sz", "id"}), term(1, {"id", "sz"})}}}},
                               {"state", {{"product", {"gibbs:" + fmt17(p_real(p, "beta")), "x+"}}}},
                               {"time", time_json(0, "pi", 41)}};
                 },
                 [](const json& p, const ScenarioConfig&, const ScenarioResult& r) {
                   const double th = std::tanh(p_real(p, "beta"));
                   auto col = [](const Row& w, int k) { return w.values[static_cast<std::size_t>(k)].value_or(kInf); };
                   const double pur = detail::max_over(r, [&](const Row& w) {
                     const double c = std::cos(2 * w.t), s = std::sin(2 * w.t);
                     return std::abs(w.purity_s_j - 0.5 * (1 + c * c + th * th * s * s));
                   });
                   json zeros = json::array();
                   for (const auto& w : r.rows)
                     if (near_any(w.t, multiples(M_PI / 2, r.rows.front().t, r.rows.back().t), 1e-12))
                       zeros.push_back({{"t", w.t}, {"sigma_j", number_json(col(w, 15))}});
                   return json{{"max_abs_sigma_i", detail::max_over(r, [&](const Row& w) { return std::abs(col(w, 14)); })},
                               {"max_abs_phi_i", detail::max_over(r, [&](const Row& w) { return std::abs(col(w, 16)); })},
                               {"max_abs_phi_j", detail::max_over(r, [&](const Row& w) { return std::abs(col(w, 17)); })},
                               {"purity_s_j_closed_form_residual", pur},
                               {"sigma_j_at_half_periods", zeros}};
                 }});

    v.push_back({"entropy-balance-oscillation",
                 "entropy balance agreeing across frames only while the trajectory is in an invariant subalgebra",
                 json::object(),
                 [](const json&) {
                   return json{{"name", "entropy-balance-oscillation"},
                               {"group", {{"cyclic", {2}}}},
                               {"orientations", {{"g1", {0}}, {"g2", {1}}}},
                               {"hamiltonian", {{"terms", {term(1, {"sx", "id"}), term(1, {"id", "sx"})}}}},
                               {"state", {{"product", {"1", "0"}}}},
                               {"time", time_json(0, "2pi", 41)},
                               {"subalgebras", {subalg("X0", "sx", "id"), subalg("X1", "sx", "sx")}}};
                 },
                 [](const json&, const ScenarioConfig&, const ScenarioResult& r) {
                   auto col = [](const Row& w, int k) { return w.values[static_cast<std::size_t>(k)].value_or(kInf); };
                   auto same = [](double a, double b) { return (std::isinf(a) && std::isinf(b)) || std::abs(a - b) <= 1e-8; };
                   json t0 = json::array(), t1 = json::array();
                   bool agree_in = true;
                   int outside = 0, outside_equal = 0;
                   for (const auto& w : r.rows) {
                     const bool in0 = row_has(w, "X0"), in1 = row_has(w, "X1");
                     if (in0) t0.push_back(w.t);
                     if (in1) t1.push_back(w.t);
                     const bool eq = same(col(w, 14), col(w, 15)) && same(col(w, 16), col(w, 17));
                     if (in0 || in1) agree_in = agree_in && eq;
                     else {
                       ++outside;
                       outside_equal += eq ? 1 : 0;
                     }
                   }
                   return json{{"X0_times", t0},
                               {"X1_times", t1},
                               {"balance_agrees_inside", agree_in},
                               {"outside_points", outside},
                               {"outside_points_equal", outside_equal}};
                 }});
    return v;
  }();
  return cat;
}

inline const Builtin* find_builtin(const std::string& name) {
  for (const auto& b : catalog())
    if (b.name == name) return &b;
  return nullptr;
}

inline std::string builtin_names() {
  std::string out;
  for (const auto& b : catalog()) out += (out.empty() ? "" : ", ") + b.name;
  return out;
}

struct Resolved {
  json config;
  json params;  // empty for file configs
  const Builtin* builtin = nullptr;
};

// Time shortcuts so that `--set points=5` works on any scenario.
inline std::string expand_key(const std::string& k) {
  if (k == "points" || k == "start" || k == "stop") return "time." + k;
  return k;
}

inline Resolved resolve(const std::string& name_or_path, const std::vector<std::pair<std::string, std::string>>& sets) {
  Resolved r;
  std::vector<std::pair<std::string, json>> config_sets;
  if (const Builtin* b = find_builtin(name_or_path)) {
    r.builtin = b;
    r.params = b->params;
    for (const auto& [k, v] : sets) {
      if (r.params.contains(k)) r.params[k] = parse_override_value(v);
      else config_sets.emplace_back(expand_key(k), parse_override_value(v));
    }
    r.config = b->build(r.params);
  } else {
    std::ifstream f(name_or_path);
    if (!f) throw UnknownScenario("unknown scenario \"" + name_or_path + "\"; valid names: " + builtin_names());
    std::stringstream ss;
    ss << f.rdbuf();
    try {
      r.config = json::parse(ss.str());
    } catch (const json::parse_error& e) {
      throw ConfigError(name_or_path, std::string("malformed JSON: ") + e.what());
    }
    for (const auto& [k, v] : sets) config_sets.emplace_back(expand_key(k), parse_override_value(v));
  }
  for (const auto& [k, v] : config_sets) set_path(r.config, k, v);
  return r;
}

struct Outcome {
  ScenarioConfig config;
  ScenarioResult result;
};

inline Outcome run_resolved(const Resolved& r, int jobs = 1) {
  Outcome o{parse_config(r.config), {}};
  o.result = run_scenario(o.config, jobs);
  if (r.builtin) {
    o.result.summary["params"] = r.params;
    o.result.summary["checks"] = r.builtin->checks(r.params, o.config, o.result);
  }
  return o;
}

inline Outcome run_named(const std::string& name, const std::vector<std::pair<std::string, std::string>>& sets = {},
                         int jobs = 1) {
  return run_resolved(resolve(name, sets), jobs);
}

}  // namespace qrf::scenario
