#include "kickhj/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "kickhj/green.hpp"
#include "kickhj/lyapunov.hpp"
#include "kickhj/manifolds.hpp"
#include "kickhj/minimizer.hpp"
#include "kickhj/nondeg_mc.hpp"
#include "kickhj/parallel.hpp"

namespace fs = std::filesystem;

namespace kickhj {

const std::vector<std::string> kStageOrder = {"solve", "minimizer", "green", "lyapunov", "manifold", "nondeg"};
const char* const kVersion = "kickhj 1.0.0";

namespace {

const std::map<std::string, std::vector<std::string>> kDeps = {
    {"solve", {}},
    {"minimizer", {"solve"}},
    {"green", {"minimizer"}},
    {"lyapunov", {"green"}},
    {"manifold", {"green"}},
    {"nondeg", {"solve"}},
};

// ---- config parsing ----

template <class T>
T get(const json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + key, "wrong type");
  }
}

void positive(double v, const std::string& field) {
  if (!(v > 0)) throw ConfigError(field, "must be positive");
}

void at_least(int v, int lo, const std::string& field) {
  if (v < lo) throw ConfigError(field, "must be >= " + std::to_string(lo));
}

Vec vec_from(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "must be an array of numbers");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(field, "must be an array of numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

PotentialBasis parse_basis(const json& j, int d, json& canon) {
  if (!j.is_object()) throw ConfigError("basis", "must be an object");
  const std::string type = get<std::string>(j, "type", "basis.", "fourier");
  if (type == "fourier") {
    int modes = get<int>(j, "modes", "basis.", 1);
    at_least(modes, 1, "basis.modes");
    std::vector<FourierFunction> fns;
    for (int k = 1; k <= modes; ++k)
      for (int a = 0; a < d; ++a) {
        std::vector<int> kv(d, 0);
        kv[a] = k;
        fns.emplace_back(d, std::vector<FourierTerm>{{kv, 1.0, 0.0}});
        fns.emplace_back(d, std::vector<FourierTerm>{{kv, 0.0, 1.0}});
      }
    canon = {{"type", type}, {"modes", modes}};
    return PotentialBasis(d, std::move(fns));
  }
  if (type == "constant") {
    canon = {{"type", type}};
    return PotentialBasis(d, {FourierFunction(d, {{std::vector<int>(d, 0), 1.0, 0.0}})});
  }
  if (type == "custom") {
    if (!j.contains("functions") || !j["functions"].is_array() || j["functions"].empty())
      throw ConfigError("basis.functions", "must be a non-empty array");
    std::vector<FourierFunction> fns;
    for (std::size_t f = 0; f < j["functions"].size(); ++f) {
      const json& terms = j["functions"][f];
      const std::string field = "basis.functions[" + std::to_string(f) + "]";
      if (!terms.is_array() || terms.empty()) throw ConfigError(field, "must be a non-empty array of terms");
      std::vector<FourierTerm> ts;
      for (const auto& t : terms) {
        if (!t.contains("k") || !t["k"].is_array() || static_cast<int>(t["k"].size()) != d)
          throw ConfigError(field + ".k", "must be an integer array of length dimension");
        FourierTerm term;
        term.k = t["k"].get<std::vector<int>>();
        term.cos_coef = get<double>(t, "cos", field + ".", 0.0);
        term.sin_coef = get<double>(t, "sin", field + ".", 0.0);
        ts.push_back(term);
      }
      fns.emplace_back(d, std::move(ts));
    }
    canon = {{"type", type}, {"functions", j["functions"]}};
    return PotentialBasis(d, std::move(fns));
  }
  throw ConfigError("basis.type", "unknown basis '" + type + "' (fourier, constant, custom)");
}

DensitySpec parse_density(const json& j, int m, json& canon) {
  if (!j.is_object()) throw ConfigError("density", "must be an object");
  const std::string type = get<std::string>(j, "type", "density.", "isotropic_gaussian");
  if (type == "isotropic_gaussian") {
    double sigma = get<double>(j, "sigma", "density.", 0.1);
    positive(sigma, "density.sigma");
    canon = {{"type", type}, {"sigma", sigma}};
    return DensitySpec::isotropic_gaussian(m, sigma);
  }
  if (type == "gaussian") {
    if (!j.contains("mean")) throw ConfigError("density.mean", "required");
    if (!j.contains("covariance")) throw ConfigError("density.covariance", "required");
    Vec mean = vec_from(j["mean"], "density.mean");
    if (mean.size() != m) throw ConfigError("density.mean", "length must equal the basis size " + std::to_string(m));
    const json& c = j["covariance"];
    if (!c.is_array() || static_cast<int>(c.size()) != m)
      throw ConfigError("density.covariance", "must be a square matrix of the basis size");
    Mat cov(m, m);
    for (int r = 0; r < m; ++r) {
      Vec row = vec_from(c[r], "density.covariance");
      if (row.size() != m) throw ConfigError("density.covariance", "must be a square matrix of the basis size");
      cov.row(r) = row.transpose();
    }
    canon = {{"type", type}, {"mean", j["mean"]}, {"covariance", c}};
    try {
      return DensitySpec::gaussian(mean, cov);
    } catch (const std::exception& e) {
      throw ConfigError("density.covariance", e.what());
    }
  }
  if (type == "product") {
    if (!j.contains("marginals") || !j["marginals"].is_array() || static_cast<int>(j["marginals"].size()) != m)
      throw ConfigError("density.marginals", "must list one marginal per basis function");
    std::vector<Marginal> ms;
    json cm = json::array();
    for (std::size_t i = 0; i < j["marginals"].size(); ++i) {
      const json& q = j["marginals"][i];
      const std::string field = "density.marginals[" + std::to_string(i) + "]";
      Marginal mg;
      std::string kind = get<std::string>(q, "kind", field + ".", "normal");
      if (kind == "normal")
        mg.kind = Marginal::Kind::Normal;
      else if (kind == "uniform")
        mg.kind = Marginal::Kind::Uniform;
      else if (kind == "laplace")
        mg.kind = Marginal::Kind::Laplace;
      else
        throw ConfigError(field + ".kind", "unknown marginal '" + kind + "'");
      mg.p1 = get<double>(q, "p1", field + ".", 0.0);
      mg.p2 = get<double>(q, "p2", field + ".", 1.0);
      if (mg.kind == Marginal::Kind::Uniform ? !(mg.p2 > mg.p1) : !(mg.p2 > 0))
        throw ConfigError(field + ".p2", "invalid scale or range");
      ms.push_back(mg);
      cm.push_back({{"kind", kind}, {"p1", mg.p1}, {"p2", mg.p2}});
    }
    canon = {{"type", type}, {"marginals", cm}};
    return DensitySpec::product(std::move(ms));
  }
  throw ConfigError("density.type", "unknown density '" + type + "' (isotropic_gaussian, gaussian, product)");
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  static const std::set<std::string> known = {"dimension", "basis", "density", "b", "grid", "horizons",
                                              "tolerances", "manifold", "nondeg", "stages", "seed", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError(it.key(), "unknown field");

  ExperimentConfig cfg;
  cfg.dimension = get<int>(j, "dimension", "", 1);
  if (cfg.dimension < 1 || cfg.dimension > 3) throw ConfigError("dimension", "must be 1, 2 or 3");
  const int d = cfg.dimension;
  cfg.basis = parse_basis(j.value("basis", json::object()), d, cfg.basis_json);
  cfg.density = parse_density(j.value("density", json::object()), cfg.basis.count(), cfg.density_json);

  cfg.b = j.contains("b") ? vec_from(j["b"], "b") : Vec::Zero(d);
  if (cfg.b.size() != d) throw ConfigError("b", "length must equal dimension");

  const json grid = j.value("grid", json::object());
  cfg.N = get<int>(grid, "N", "grid.", 256);
  at_least(cfg.N, 8, "grid.N");
  cfg.lift_radius = get<int>(grid, "lift_radius", "grid.", 2);
  at_least(cfg.lift_radius, 1, "grid.lift_radius");
  cfg.window_cells = get<int>(grid, "window_cells", "grid.", 0);
  at_least(cfg.window_cells, 0, "grid.window_cells");

  const json h = j.value("horizons", json::object());
  Horizons& H = cfg.horizons;
  H.pad = get<int>(h, "pad", "horizons.", H.pad);
  H.orbit = get<int>(h, "orbit", "horizons.", H.orbit);
  H.lyapunov_steps = get<int>(h, "lyapunov_steps", "horizons.", H.lyapunov_steps);
  H.green_depth = get<int>(h, "green_depth", "horizons.", H.green_depth);
  H.green_sites = get<int>(h, "green_sites", "horizons.", H.green_sites);
  H.manifold_depth = get<int>(h, "manifold_depth", "horizons.", H.manifold_depth);
  H.barrier_depth = get<int>(h, "barrier_depth", "horizons.", H.barrier_depth);
  H.barrier_orbits = get<int>(h, "barrier_orbits", "horizons.", H.barrier_orbits);
  at_least(H.pad, 10, "horizons.pad");
  at_least(H.orbit, 10, "horizons.orbit");
  at_least(H.lyapunov_steps, 10, "horizons.lyapunov_steps");
  if (H.lyapunov_steps > H.orbit) throw ConfigError("horizons.lyapunov_steps", "must not exceed horizons.orbit");
  at_least(H.green_depth, 2, "horizons.green_depth");
  at_least(H.green_sites, 0, "horizons.green_sites");
  at_least(H.manifold_depth, 1, "horizons.manifold_depth");
  at_least(H.barrier_depth, 1, "horizons.barrier_depth");
  at_least(H.barrier_orbits, 1, "horizons.barrier_orbits");

  const json t = j.value("tolerances", json::object());
  Tolerances& T = cfg.tol;
  static const std::set<std::string> tol_keys = {
      "solve_tol", "initial_depth", "max_depth", "converged", "fixed_point", "semiconcavity_h", "gap_tol",
      "screen_slope", "euler_lagrange", "chain_tol", "transversality_slack", "se_factor", "manifold_h",
      "negative_control_h", "barrier_slack_h", "r_max"};
  for (auto it = t.begin(); it != t.end(); ++it)
    if (!tol_keys.count(it.key())) throw ConfigError("tolerances." + it.key(), "unknown field");
  T.solve_tol = get<double>(t, "solve_tol", "tolerances.", T.solve_tol);
  T.initial_depth = get<int>(t, "initial_depth", "tolerances.", T.initial_depth);
  T.max_depth = get<int>(t, "max_depth", "tolerances.", T.max_depth);
  T.converged = get<double>(t, "converged", "tolerances.", T.converged);
  T.fixed_point = get<double>(t, "fixed_point", "tolerances.", T.fixed_point);
  T.semiconcavity_h = get<double>(t, "semiconcavity_h", "tolerances.", T.semiconcavity_h);
  T.gap_tol = get<double>(t, "gap_tol", "tolerances.", T.gap_tol);
  T.screen_slope = get<double>(t, "screen_slope", "tolerances.", T.screen_slope);
  T.euler_lagrange = get<double>(t, "euler_lagrange", "tolerances.", T.euler_lagrange);
  T.chain_tol = get<double>(t, "chain_tol", "tolerances.", T.chain_tol);
  T.transversality_slack = get<double>(t, "transversality_slack", "tolerances.", T.transversality_slack);
  T.se_factor = get<double>(t, "se_factor", "tolerances.", T.se_factor);
  T.manifold_h = get<double>(t, "manifold_h", "tolerances.", T.manifold_h);
  T.negative_control_h = get<double>(t, "negative_control_h", "tolerances.", T.negative_control_h);
  T.barrier_slack_h = get<double>(t, "barrier_slack_h", "tolerances.", T.barrier_slack_h);
  T.r_max = get<double>(t, "r_max", "tolerances.", T.r_max);
  at_least(T.initial_depth, 1, "tolerances.initial_depth");
  if (T.max_depth < T.initial_depth) throw ConfigError("tolerances.max_depth", "must be >= initial_depth");
  for (auto [v, name] : {std::pair{T.solve_tol, "solve_tol"}, {T.converged, "converged"},
                         {T.fixed_point, "fixed_point"}, {T.screen_slope, "screen_slope"},
                         {T.euler_lagrange, "euler_lagrange"}, {T.se_factor, "se_factor"},
                         {T.manifold_h, "manifold_h"}, {T.negative_control_h, "negative_control_h"},
                         {T.r_max, "r_max"}})
    positive(v, std::string("tolerances.") + name);

  const json m = j.value("manifold", json::object());
  cfg.manifold.rho = get<double>(m, "rho", "manifold.", cfg.manifold.rho);
  cfg.manifold.nodes = get<int>(m, "nodes", "manifold.", cfg.manifold.nodes);
  cfg.manifold.radius = get<double>(m, "radius", "manifold.", cfg.manifold.radius);
  positive(cfg.manifold.rho, "manifold.rho");
  positive(cfg.manifold.radius, "manifold.radius");
  if (cfg.manifold.nodes < 5 || cfg.manifold.nodes % 2 == 0) throw ConfigError("manifold.nodes", "must be odd and >= 5");

  const json n = j.value("nondeg", json::object());
  NondegSettings& S = cfg.nondeg;
  S.samples = get<int>(n, "samples", "nondeg.", S.samples);
  S.cap_a = get<double>(n, "cap_a", "nondeg.", S.cap_a);
  S.cap_b = get<double>(n, "cap_b", "nondeg.", S.cap_b);
  S.valid_fraction = get<double>(n, "valid_fraction", "nondeg.", S.valid_fraction);
  S.cap_tol = get<double>(n, "cap_tol", "nondeg.", S.cap_tol);
  S.tau_max = get<double>(n, "tau_max", "nondeg.", S.tau_max);
  S.envelope_step = get<double>(n, "envelope_step", "nondeg.", S.envelope_step);
  S.envelope_half_width = get<int>(n, "envelope_half_width", "nondeg.", S.envelope_half_width);
  S.duality_pairs = get<int>(n, "duality_pairs", "nondeg.", S.duality_pairs);
  S.control = get<bool>(n, "control", "nondeg.", S.control);
  at_least(S.samples, 2, "nondeg.samples");
  positive(S.cap_a, "nondeg.cap_a");
  positive(S.cap_b, "nondeg.cap_b");
  positive(S.tau_max, "nondeg.tau_max");
  positive(S.envelope_step, "nondeg.envelope_step");
  at_least(S.envelope_half_width, 1, "nondeg.envelope_half_width");
  at_least(S.duality_pairs, 0, "nondeg.duality_pairs");

  if (j.contains("stages")) {
    if (!j["stages"].is_array()) throw ConfigError("stages", "must be an array of stage names");
    for (const auto& s : j["stages"]) {
      if (!s.is_string()) throw ConfigError("stages", "must be an array of stage names");
      std::string name = s.get<std::string>();
      if (!kDeps.count(name)) throw ConfigError("stages", "unknown stage '" + name + "'");
      cfg.stages.push_back(name);
    }
  } else {
    cfg.stages = kStageOrder;
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0)
      throw ConfigError("seed", "must be a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  cfg.threads = get<int>(j, "threads", "", 0);
  at_least(cfg.threads, 0, "threads");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  return parse_config(j);
}

json effective_config(const ExperimentConfig& cfg) {
  const auto& H = cfg.horizons;
  const auto& T = cfg.tol;
  const auto& S = cfg.nondeg;
  json j;
  j["dimension"] = cfg.dimension;
  j["basis"] = cfg.basis_json;
  j["density"] = cfg.density_json;
  j["b"] = vec_json(cfg.b);
  j["grid"] = {{"N", cfg.N}, {"lift_radius", cfg.lift_radius}, {"window_cells", cfg.window_cells}};
  j["horizons"] = {{"pad", H.pad}, {"orbit", H.orbit}, {"lyapunov_steps", H.lyapunov_steps},
                   {"green_depth", H.green_depth}, {"green_sites", H.green_sites},
                   {"manifold_depth", H.manifold_depth}, {"barrier_depth", H.barrier_depth},
                   {"barrier_orbits", H.barrier_orbits}};
  j["tolerances"] = {{"solve_tol", T.solve_tol}, {"initial_depth", T.initial_depth}, {"max_depth", T.max_depth},
                     {"converged", T.converged}, {"fixed_point", T.fixed_point},
                     {"semiconcavity_h", T.semiconcavity_h}, {"gap_tol", T.gap_tol},
                     {"screen_slope", T.screen_slope}, {"euler_lagrange", T.euler_lagrange},
                     {"chain_tol", T.chain_tol}, {"transversality_slack", T.transversality_slack},
                     {"se_factor", T.se_factor}, {"manifold_h", T.manifold_h},
                     {"negative_control_h", T.negative_control_h}, {"barrier_slack_h", T.barrier_slack_h},
                     {"r_max", T.r_max}};
  j["manifold"] = {{"rho", cfg.manifold.rho}, {"nodes", cfg.manifold.nodes}, {"radius", cfg.manifold.radius}};
  j["nondeg"] = {{"samples", S.samples}, {"cap_a", S.cap_a}, {"cap_b", S.cap_b},
                 {"valid_fraction", S.valid_fraction}, {"cap_tol", S.cap_tol}, {"tau_max", S.tau_max},
                 {"envelope_step", S.envelope_step}, {"envelope_half_width", S.envelope_half_width},
                 {"duality_pairs", S.duality_pairs}, {"control", S.control}};
  j["stages"] = cfg.stages;
  j["seed"] = cfg.seed;
  return j;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(effective_config(cfg).dump()).substr(0, 16); }

std::vector<std::string> stage_closure(const std::vector<std::string>& requested) {
  std::set<std::string> want;
  std::vector<std::string> stack(requested.begin(), requested.end());
  while (!stack.empty()) {
    std::string s = stack.back();
    stack.pop_back();
    auto it = kDeps.find(s);
    if (it == kDeps.end()) throw ConfigError("stages", "unknown stage '" + s + "'");
    if (want.insert(s).second)
      for (const auto& d : it->second) stack.push_back(d);
  }
  std::vector<std::string> out;
  for (const auto& s : kStageOrder)
    if (want.count(s)) out.push_back(s);
  return out;
}

bool StageOutcome::passed() const {
  if (status != "ok") return false;
  for (const auto& i : invariants)
    if (!i.at("pass").get<bool>()) return false;
  return true;
}

namespace {

// ---- pipeline ----

double finite_or(double v, double fallback = 1e300) { return std::isfinite(v) ? v : fallback; }

void add_invariant(StageOutcome& st, const std::string& name, bool pass, double value, double threshold) {
  st.invariants.push_back({{"name", name}, {"pass", pass}, {"value", finite_or(value)},
                           {"threshold", finite_or(threshold)}});
}

bool monotone_curve(const ConvergenceReport& r) {
  for (std::size_t k = 1; k < r.curve.size(); ++k) {
    double prev = r.curve[k - 1].second, cur = r.curve[k].second;
    if (cur > prev && cur >= 1e-12) return false;
  }
  return true;
}

struct Pipeline {
  const ExperimentConfig& cfg;
  fs::path dir;
  KickedForce force;
  int P = 0, L = 0;
  LaxOleinikOptions lo;

  std::optional<SolveResult> sm, sp;
  ViscosityHistory hm, hp;
  GlobalMinimizer gm;
  NondegProbe np;
  std::optional<MinimizingOrbit> mo;
  OrbitSegment orbit;
  GreenSweep sweep;

  explicit Pipeline(const ExperimentConfig& c) : cfg(c) {
    const auto& H = cfg.horizons;
    P = H.pad + std::max({H.green_sites + H.green_depth, H.manifold_depth + 5, H.barrier_depth});
    L = H.orbit;
    const int margin = cfg.tol.max_depth + 2;
    force = KickedForce{cfg.basis, sample_kicks(cfg.density, cfg.seed, -P - margin, L + P + margin)};
    lo.lift_radius = cfg.lift_radius;
    lo.window_cells = cfg.window_cells;
  }

  double h() const { return 1.0 / cfg.N; }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  SolveOptions solve_options() const {
    SolveOptions so;
    so.initial_depth = cfg.tol.initial_depth;
    so.max_depth = cfg.tol.max_depth;
    so.tol = cfg.tol.solve_tol;
    so.lo = lo;
    return so;
  }

  void write_field_pair(StageOutcome& st, const GridField& f, const std::string& stem) {
    write_field(f, path(stem));
    st.files.push_back(stem + ".bin");
    st.files.push_back(stem + ".json");
  }

  void stage_solve(StageOutcome& st) {
    const Vec& b = cfg.b;
    const SolveOptions so = solve_options();
    sm = solve_backward(force, b, cfg.N, -P, so);
    sp = solve_forward(force, b, cfg.N, L + P, so);
    hm = propagate_backward(sm->history.at(-P), force, b, L + P, lo);
    hp = propagate_forward(sp->history.at(L + P), force, b, -P, lo);

    // fixed point: an independent solve ending at 0 against the propagated field
    SolveResult direct_m = solve_backward(force, b, cfg.N, 0, so);
    SolveResult direct_p = solve_forward(force, b, cfg.N, 0, so);
    GridField step_m = apply_backward(hm.at(-1), b, force.basis, force.kicks.xi(-1), lo);
    const double fp_m = std::max(quotient_distance(direct_m.history.at(0), hm.at(0)), quotient_distance(step_m, hm.at(0)));
    const double fp_p = quotient_distance(direct_p.history.at(0), hp.at(0));

    const double hh = h();
    const double sc_m = max_second_difference(hm.at(0));
    GridField neg_plus = hp.at(0);
    for (std::size_t i = 0; i < neg_plus.size(); ++i) neg_plus[i] = -neg_plus[i];
    const double sc_p = max_second_difference(neg_plus);
    const double C0 = force.c2(0);

    add_invariant(st, "minus_converged", sm->report.final_distance <= cfg.tol.converged, sm->report.final_distance,
                  cfg.tol.converged);
    add_invariant(st, "plus_converged", sp->report.final_distance <= cfg.tol.converged, sp->report.final_distance,
                  cfg.tol.converged);
    add_invariant(st, "minus_monotone_decay", monotone_curve(sm->report), 0, 0);
    add_invariant(st, "plus_monotone_decay", monotone_curve(sp->report), 0, 0);
    add_invariant(st, "minus_fixed_point", fp_m <= cfg.tol.fixed_point, fp_m, cfg.tol.fixed_point);
    add_invariant(st, "plus_fixed_point", fp_p <= cfg.tol.fixed_point, fp_p, cfg.tol.fixed_point);
    add_invariant(st, "semiconcavity_minus", sc_m <= 1.0 + cfg.tol.semiconcavity_h * hh, sc_m,
                  1.0 + cfg.tol.semiconcavity_h * hh);
    add_invariant(st, "semiconcavity_plus", sc_p <= 1.0 + C0 + cfg.tol.semiconcavity_h * hh, sc_p,
                  1.0 + C0 + cfg.tol.semiconcavity_h * hh);

    json curve = json::object();
    for (auto [name, rep] : {std::pair{"minus", &sm->report}, {"plus", &sp->report}}) {
      json c = json::array();
      for (auto [dep, qd] : rep->curve) c.push_back({dep, qd});
      curve[name] = {{"curve", c}, {"achieved_depth", rep->achieved_depth}, {"converged", rep->converged},
                     {"final_distance", rep->final_distance}, {"geometric_rate", rep->geometric_rate}};
    }
    st.metrics["convergence"] = curve;
    st.metrics["C0"] = C0;
    st.metrics["window"] = {-P, L + P};

    write_field_pair(st, hm.at(0), "psi_minus_t0");
    write_field_pair(st, hp.at(0), "psi_plus_t0");
    write_field_pair(st, barrier(hm.at(0), hp.at(0)), "barrier_t0");
    {
      std::ofstream out(path("convergence.csv"));
      out << "side,depth,quotient_distance\n" << std::setprecision(17);
      for (auto [dep, qd] : sm->report.curve) out << "minus," << dep << ',' << qd << '\n';
      for (auto [dep, qd] : sp->report.curve) out << "plus," << dep << ',' << qd << '\n';
      st.files.push_back("convergence.csv");
    }
    {
      std::ofstream out(path("profiles.csv"));
      out << std::setprecision(17);
      for (int a = 0; a < cfg.dimension; ++a) out << 'x' << a + 1 << ',';
      out << "psi_minus,psi_plus,barrier\n";
      GridField B = barrier(hm.at(0), hp.at(0));
      for (std::size_t i = 0; i < B.size(); ++i) {
        Vec x = B.point(i);
        for (int a = 0; a < x.size(); ++a) out << x(a) << ',';
        out << hm.at(0)[i] << ',' << hp.at(0)[i] << ',' << B[i] << '\n';
      }
      st.files.push_back("profiles.csv");
    }
  }

  void stage_minimizer(StageOutcome& st) {
    const double hh = h();
    GridField B = barrier(hm.at(0), hp.at(0));
    gm = find_global_minimizer(B, 1, cfg.tol.gap_tol);
    np = nondeg_probe(B, gm.x0, cfg.tol.r_max, 1.0 + force.c2(0));

    ExtractOptions eo;
    eo.pad = cfg.horizons.pad;
    eo.screen_slope = cfg.tol.screen_slope;
    eo.gap_tol = cfg.tol.gap_tol;
    eo.lift_radius = cfg.lift_radius;
    OrbitExtraction ex = extract_orbit(gm, hm, hp, force, cfg.b, P - cfg.horizons.pad, eo);
    mo = minimizing_orbit(hm, hp, force, cfg.b, 0, gm.grid_index, -P, L + P, eo.refine_iters, cfg.lift_radius);
    orbit = mo->orbit;
    orbit.ensure_jacobians(force);
    const double step_res = orbit.max_step_residual(force);
    const double shift = torus_distance(orbit.at(0).x.coords(), ex.orbit.at(0).x.coords());

    std::vector<std::size_t> starts;
    const int n_orb = cfg.horizons.barrier_orbits;
    for (int k = 0; k < n_orb; ++k) starts.push_back(static_cast<std::size_t>(k) * B.size() / n_orb);
    BarrierDecayReport bd = barrier_decay(hm, hp, 0, starts, cfg.horizons.barrier_depth, cfg.tol.barrier_slack_h * hh);

    add_invariant(st, "unique_minimizer", gm.unique, gm.gap, cfg.tol.gap_tol);
    add_invariant(st, "differentiable_at_minimizer", ex.gradient_spread <= cfg.tol.screen_slope * hh,
                  ex.gradient_spread, cfg.tol.screen_slope * hh);
    add_invariant(st, "euler_lagrange", mo->euler_lagrange <= cfg.tol.euler_lagrange, mo->euler_lagrange,
                  cfg.tol.euler_lagrange);
    add_invariant(st, "orbit_step_residual", step_res <= cfg.tol.euler_lagrange, step_res, cfg.tol.euler_lagrange);
    add_invariant(st, "orbit_tracks_grid_path", ex.max_validation <= 5.0 * hh, ex.max_validation, 5.0 * hh);
    add_invariant(st, "windows_agree_at_0", shift <= 1e-8, shift, 1e-8);
    add_invariant(st, "quadratic_growth", !np.degenerate && np.b_hat > 0, np.b_hat, 0.0);
    add_invariant(st, "barrier_decay", bd.ok, bd.max_increase, cfg.tol.barrier_slack_h * hh);

    st.metrics["x0"] = vec_json(gm.x0.coords());
    st.metrics["x0_orbit"] = vec_json(orbit.at(0).x.coords());
    st.metrics["v0"] = vec_json(orbit.at(0).v);
    st.metrics["v0_grid"] = vec_json(ex.v0_grid);
    st.metrics["gap"] = finite_or(gm.gap);
    st.metrics["hess_est"] = gm.hess_est(0, 0);
    st.metrics["b_hat"] = np.b_hat;
    st.metrics["r_hat"] = np.r_hat;
    st.metrics["upper_ratio"] = np.upper_ratio;
    st.metrics["newton_iterations"] = mo->newton_iterations;

    {
      std::ofstream out(path("orbit.csv"));
      out << std::setprecision(17) << 'j';
      for (int a = 0; a < cfg.dimension; ++a) out << ",x" << a + 1;
      for (int a = 0; a < cfg.dimension; ++a) out << ",v" << a + 1;
      out << '\n';
      for (int j = orbit.first(); j <= orbit.last(); ++j) {
        out << j;
        const Vec xl = mo->config.at(j);
        for (int a = 0; a < xl.size(); ++a) out << ',' << xl(a);
        for (int a = 0; a < xl.size(); ++a) out << ',' << orbit.at(j).v(a);
        out << '\n';
      }
      st.files.push_back("orbit.csv");
    }
    {
      std::ofstream out(path("barrier_decay.csv"));
      out << std::setprecision(17) << "orbit,j,barrier\n";
      for (std::size_t o = 0; o < bd.gaps.size(); ++o)
        for (std::size_t k = 0; k < bd.gaps[o].size(); ++k) out << o << ',' << -static_cast<int>(k) << ',' << bd.gaps[o][k] << '\n';
      st.files.push_back("barrier_decay.csv");
    }
  }

  void stage_green(StageOutcome& st) {
    sweep = green_sweep(orbit);
    const int K = cfg.horizons.green_depth, W = cfg.horizons.green_sites;
    double worst = std::numeric_limits<double>::infinity();
    int worst_site = 0, unconverged = 0;
    std::ofstream out(path("green_ledger.csv"));
    out << std::setprecision(17) << "site,k,u_step,s_step,gap,increment\n";
    for (int j = -W; j <= W; ++j) {
      GreenBundlesResult g = green_bundles(orbit, K, j, 1e-10, cfg.tol.chain_tol);
      if (g.min_ledger < worst) {
        worst = g.min_ledger;
        worst_site = j;
      }
      if (!g.converged) ++unconverged;
      for (const auto& r : g.ledger)
        out << j << ',' << r.k << ',' << r.u_step << ',' << r.s_step << ',' << r.gap << ',' << r.increment << '\n';
    }
    st.files.push_back("green_ledger.csv");
    const double trans = sweep.gap(0);
    const double need = (1.0 - cfg.tol.transversality_slack) * np.b_hat;
    add_invariant(st, "monotone_chain", worst > -cfg.tol.chain_tol, worst, -cfg.tol.chain_tol);
    add_invariant(st, "transversality_vs_barrier", trans >= need, trans, need);
    st.metrics["worst_site"] = worst_site;
    st.metrics["unconverged_sites"] = unconverged;
    st.metrics["transversality_0"] = trans;
    st.metrics["U0"] = sweep.u(0)(0, 0);
    st.metrics["S0"] = sweep.s(0)(0, 0);

    std::ofstream g(path("green_gap.csv"));
    g << std::setprecision(17) << "j,gap\n";
    for (int j = -W; j <= cfg.horizons.lyapunov_steps; ++j) g << j << ',' << sweep.gap(j) << '\n';
    st.files.push_back("green_gap.csv");
  }

  void stage_lyapunov(StageOutcome& st) {
    const int n = cfg.horizons.lyapunov_steps;
    BootstrapOptions boot;
    boot.seed = splitmix64(cfg.seed ^ 0x6c79617075ULL);
    SpectrumReport qr = lyapunov_spectrum(orbit, force, 0, n, LyapunovMethod::QR, &sweep, boot);
    SpectrumReport cj = lyapunov_spectrum(orbit, force, 0, n, LyapunovMethod::Conjugated, &sweep, boot);
    const int d = cfg.dimension;
    const double k = cfg.tol.se_factor;
    const double top = qr.exponents[d];
    const double need = qr.lower_bound - k * qr.top_minus_bound_se;
    add_invariant(st, "exponent_lower_bound", top >= need, top, need);
    double worst_pair = 0.0, worst_pair_tol = 0.0;
    bool pairs_ok = true;
    for (int i = 0; i < d; ++i) {
      double s = std::abs(qr.exponents[i] + qr.exponents[2 * d - 1 - i]);
      double se = std::max(qr.standard_errors[i], qr.standard_errors[2 * d - 1 - i]);
      if (s >= k * se) pairs_ok = false;
      if (s - k * se >= worst_pair - worst_pair_tol || i == 0) {
        worst_pair = s;
        worst_pair_tol = k * se;
      }
    }
    add_invariant(st, "exponent_pairing", pairs_ok, worst_pair, worst_pair_tol);
    double agree = 0.0, agree_tol = 0.0;
    for (int i = 0; i < 2 * d; ++i) {
      double diff = std::abs(qr.exponents[i] - cj.exponents[i]);
      double tol = k * std::max(qr.standard_errors[i], cj.standard_errors[i]);
      if (diff - tol >= agree - agree_tol || i == 0) {
        agree = diff;
        agree_tol = tol;
      }
    }
    add_invariant(st, "methods_agree", agree < agree_tol, agree, agree_tol);
    add_invariant(st, "conjugated_expansion", qr.min_expansion_margin >= -1e-12, qr.min_expansion_margin, 0.0);

    auto spectrum_json = [](const SpectrumReport& r) {
      return json{{"exponents", r.exponents}, {"standard_errors", r.standard_errors}, {"n_steps", r.n_steps}};
    };
    st.metrics["qr"] = spectrum_json(qr);
    st.metrics["conjugated"] = spectrum_json(cj);
    st.metrics["lower_bound"] = qr.lower_bound;
    st.metrics["lower_bound_se"] = qr.lower_bound_se;
    st.metrics["top_minus_bound_se"] = qr.top_minus_bound_se;
    st.metrics["expansion_margin_literal"] = qr.min_expansion_margin_literal;

    std::ofstream out(path("exponent_convergence.csv"));
    out << std::setprecision(17) << "step";
    for (int i = 0; i < 2 * d; ++i) out << ",lambda" << i + 1;
    out << '\n';
    const std::size_t stride = std::max<std::size_t>(1, qr.running.size() / 500);
    for (std::size_t s = stride - 1; s < qr.running.size(); s += stride) {
      out << s + 1;
      for (double v : qr.running[s]) out << ',' << v;
      out << '\n';
    }
    st.files.push_back("exponent_convergence.csv");
  }

  void stage_manifold(StageOutcome& st) {
    const double hh = h();
    ManifoldOptions mopt;
    mopt.depth = cfg.horizons.manifold_depth;
    mopt.rho = cfg.manifold.rho;
    mopt.nodes_per_axis = cfg.manifold.nodes;
    mopt.rho_floor = 10.0 * hh;
    ManifoldResult mr = unstable_manifold(mo->config, force, sweep, 0, mopt);
    ManifoldOptions deeper = mopt;
    deeper.depth += 5;
    ManifoldResult mr2 = unstable_manifold(mo->config, force, sweep, 0, deeper);
    const double depth_change = mr.ok && mr2.ok ? mr.graph.sup_distance(mr2.graph) : 1e300;

    LocalChart chart(mo->config.at(0), orbit.at(0).v, sweep.u(0), sweep.s(0));
    GradientGraphReport pos =
        compare_gradient_graph(hm.at(0), cfg.b, mr.graph, chart, cfg.manifold.radius, cfg.tol.screen_slope, !gm.unique);
    GradientGraphReport neg =
        compare_gradient_graph(hp.at(0), cfg.b, mr.graph, chart, cfg.manifold.radius, cfg.tol.screen_slope, !gm.unique);

    add_invariant(st, "graph_transform", mr.ok, mr.graph.rho(), mopt.rho_floor);
    add_invariant(st, "graph_depth_converged", depth_change <= 1e-8, depth_change, 1e-8);
    add_invariant(st, "tangent_to_unstable_bundle", mr.tangency <= 1e-6, mr.tangency, 1e-6);
    const bool have = !pos.skipped && pos.points_accepted > 0;
    add_invariant(st, "gradient_graph_distance", have && pos.sup_distance <= cfg.tol.manifold_h * hh,
                  have ? pos.sup_distance : 1e300, cfg.tol.manifold_h * hh);
    add_invariant(st, "negative_control", neg.points_accepted > 0 && neg.sup_distance > cfg.tol.negative_control_h * hh,
                  neg.sup_distance, cfg.tol.negative_control_h * hh);

    json steps = json::array();
    for (const auto& s : mr.steps)
      steps.push_back({{"site", s.site}, {"rho", s.rho}, {"lambda", s.lambda}, {"sigma", s.sigma},
                       {"min_expansion", finite_or(s.min_expansion)}, {"worst_cone", s.worst_cone},
                       {"sigma_condition", s.paper_condition}});
    st.metrics["steps"] = steps;
    st.metrics["failure"] = mr.failure;
    st.metrics["radius"] = mr.graph.rho();
    st.metrics["lipschitz"] = mr.graph.lipschitz();
    st.metrics["h"] = hh;
    auto rep_json = [](const GradientGraphReport& r) {
      return json{{"skipped", r.skipped}, {"points_in_radius", r.points_in_radius},
                  {"points_screened", r.points_screened}, {"points_accepted", r.points_accepted},
                  {"screen_fraction", r.screen_fraction}, {"sup_distance", r.sup_distance},
                  {"sup_distance_all", r.sup_distance_all}, {"max_spread", r.max_spread},
                  {"radius_reached", r.radius_reached}};
    };
    st.metrics["gradient_graph"] = rep_json(pos);
    st.metrics["negative_control"] = rep_json(neg);

    std::ofstream out(path("manifold.csv"));
    out << std::setprecision(17);
    const int d = cfg.dimension;
    for (int a = 0; a < d; ++a) out << (a ? "," : "") << 'u' << a + 1;
    for (int a = 0; a < d; ++a) out << ",s" << a + 1;
    for (int a = 0; a < d; ++a) out << ",x" << a + 1;
    for (int a = 0; a < d; ++a) out << ",v" << a + 1;
    out << '\n';
    for (std::size_t k = 0; k < mr.graph.node_count(); ++k) {
      Vec u = mr.graph.node(k), s = mr.graph.value(k), dx, dv;
      chart.local_to_offsets(u, s, dx, dv);
      Vec x = mo->config.at(0) + dx, v = orbit.at(0).v + dv;
      for (int a = 0; a < d; ++a) out << (a ? "," : "") << u(a);
      for (int a = 0; a < d; ++a) out << ',' << s(a);
      for (int a = 0; a < d; ++a) out << ',' << x(a);
      for (int a = 0; a < d; ++a) out << ',' << v(a);
      out << '\n';
    }
    st.files.push_back("manifold.csv");

    std::ofstream g(path("gradient_graph.csv"));
    g << std::setprecision(17);
    for (int a = 0; a < d; ++a) g << (a ? "," : "") << 'x' << a + 1;
    for (int a = 0; a < d; ++a) g << ",p" << a + 1;
    g << ",spread\n";
    const GridField& psi = hm.at(0);
    const Vec x0 = reduce(mo->config.at(0));
    for (std::size_t i = 0; i < psi.size(); ++i) {
      Vec x = psi.point(i);
      if (torus_distance(x, x0) > cfg.manifold.radius) continue;
      Vec p = psi.central_gradient(i) + cfg.b;
      for (int a = 0; a < d; ++a) g << (a ? "," : "") << x(a);
      for (int a = 0; a < d; ++a) g << ',' << p(a);
      g << ',' << psi.one_sided_spread(i) << '\n';
    }
    st.files.push_back("gradient_graph.csv");
  }

  void stage_nondeg(StageOutcome& st) {
    GridField psi = barrier_base(hm.at(0), hp.at(1), cfg.b, force.basis, lo);
    const auto& S = cfg.nondeg;
    FamilyOptions fo;
    fo.n_samples = S.samples;
    fo.seed = cfg.seed;
    fo.gap_tol = cfg.tol.gap_tol;
    fo.r_max = cfg.tol.r_max;
    fo.tau_max = S.tau_max;
    fo.screen_slope = cfg.tol.screen_slope;
    fo.cap_a = S.cap_a;
    fo.cap_b = S.cap_b;
    fo.valid_fraction = S.valid_fraction;
    fo.cap_tol = S.cap_tol;
    FamilyReport fam = barrier_family_experiment(psi, force.basis, cfg.density, fo);

    const Vec c0 = force.kicks.xi(0);
    Vec dir = Vec::Zero(force.basis.count());
    dir(0) = 1.0;
    EnvelopeReport env = subderivative_set_probe(psi, force.basis, c0, dir, S.envelope_step, S.envelope_half_width);
    DualityReport dual = duality_spot_check(psi, force.basis, c0, S.duality_pairs, cfg.seed);
    int growth_fail = 0;
    for (const auto& r : fam.rows)
      if (!r.growth_ok) ++growth_fail;

    add_invariant(st, "valid_fraction", !fam.assumption_failure, fam.fraction_valid, S.valid_fraction);
    add_invariant(st, "inv_a_cap_stable", fam.inv_a.cap_change < S.cap_tol, fam.inv_a.cap_change, S.cap_tol);
    add_invariant(st, "inv_sqrt_b_cap_stable", fam.inv_sqrt_b.cap_change < S.cap_tol, fam.inv_sqrt_b.cap_change,
                  S.cap_tol);
    add_invariant(st, "quadratic_growth_refined", growth_fail == 0, growth_fail, 0);
    if (env.gap0 > cfg.tol.gap_tol)
      add_invariant(st, "envelope_identity", env.envelope_ok, env.envelope_error, 2.0 * env.step);
    add_invariant(st, "G_concave", env.concave, env.max_second_difference, 1e-6);
    add_invariant(st, "duality", dual.violations == 0, dual.checked ? dual.min_slack : 0.0, -1e-10);

    if (S.control) {
      // constants-only basis: the force vanishes and uniqueness must fail
      PotentialBasis cb(cfg.dimension, {FourierFunction(cfg.dimension, {{std::vector<int>(cfg.dimension, 0), 1.0, 0.0}})});
      DensitySpec cd = DensitySpec::isotropic_gaussian(1, 1.0);
      KickedForce cf{cb, sample_kicks(cd, cfg.seed, -cfg.tol.max_depth - 4, cfg.tol.max_depth + 4)};
      SolveOptions so = solve_options();
      SolveResult cm = solve_backward(cf, cfg.b, cfg.N, 0, so);
      SolveResult cp = solve_forward(cf, cfg.b, cfg.N, 1, so);
      GridField cpsi = barrier_base(cm.history.at(0), cp.history.at(1), cfg.b, cb, lo);
      FamilyOptions co = fo;
      co.n_samples = std::min(S.samples, 100);
      FamilyReport ctrl = barrier_family_experiment(cpsi, cb, cd, co);
      add_invariant(st, "control_flags_failure", ctrl.assumption_failure, ctrl.fraction_valid, S.valid_fraction);
      st.metrics["control_fraction_valid"] = ctrl.fraction_valid;
    }

    auto tm = [](const TruncatedMean& t) {
      return json{{"cap", t.cap}, {"mean", t.mean}, {"mean_cap2", t.mean_cap2}, {"cap_change", t.cap_change},
                  {"mean_half", t.mean_half}, {"sample_change", t.sample_change}};
    };
    st.metrics["fraction_valid"] = fam.fraction_valid;
    st.metrics["fraction_se"] = fam.fraction_se;
    st.metrics["inv_a"] = tm(fam.inv_a);
    st.metrics["inv_sqrt_b"] = tm(fam.inv_sqrt_b);
    st.metrics["envelope"] = {{"dG", env.dG}, {"expected", env.expected_dG}, {"error", env.envelope_error},
                              {"gap0", finite_or(env.gap0)}, {"kinks", env.kinks}};
    st.metrics["duality"] = {{"checked", dual.checked}, {"violations", dual.violations}};

    std::ofstream out(path("nondeg_rows.csv"));
    out << std::setprecision(17) << "row";
    for (int i = 0; i < force.basis.count(); ++i) out << ",c" << i + 1;
    for (int a = 0; a < cfg.dimension; ++a) out << ",x" << a + 1;
    out << ",gap,a_hat,b_hat,r_hat,status\n";
    for (const auto& r : fam.rows) {
      out << r.row;
      for (int i = 0; i < r.c.size(); ++i) out << ',' << r.c(i);
      for (int a = 0; a < r.x.size(); ++a) out << ',' << r.x(a);
      out << ',' << finite_or(r.gap) << ',' << r.a_hat << ',' << r.b_hat << ',' << r.r_hat << ',' << r.status << '\n';
    }
    st.files.push_back("nondeg_rows.csv");
  }

  void run_stage(const std::string& name, StageOutcome& st) {
    if (name == "solve") stage_solve(st);
    else if (name == "minimizer") stage_minimizer(st);
    else if (name == "green") stage_green(st);
    else if (name == "lyapunov") stage_lyapunov(st);
    else if (name == "manifold") stage_manifold(st);
    else if (name == "nondeg") stage_nondeg(st);
  }
};

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(2) << '\n';
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_root, std::ostream* log) {
  set_thread_count(cfg.threads);
  RunResult res;
  const std::string hash = config_hash(cfg);
  fs::path dir = fs::path(out_root) / hash;
  fs::create_directories(dir);
  res.dir = dir.string();

  Pipeline pl(cfg);
  pl.dir = dir;
  std::set<std::string> failed;
  for (const auto& name : stage_closure(cfg.stages)) {
    StageOutcome st;
    st.name = name;
    bool blocked = false;
    for (const auto& dep : kDeps.at(name))
      if (failed.count(dep)) blocked = true;
    if (blocked) {
      st.status = "skipped";
      st.error = "a dependency failed";
      failed.insert(name);
    } else {
      if (log) *log << "[" << name << "] running\n";
      try {
        pl.run_stage(name, st);
        st.status = "ok";
      } catch (const std::exception& e) {
        st.status = "failed";
        st.error = e.what();
        failed.insert(name);
      }
    }
    json sj = {{"stage", name}, {"status", st.status}, {"error", st.error}, {"invariants", st.invariants},
               {"metrics", st.metrics}};
    write_json(dir / ("stage_" + name + ".json"), sj);
    st.files.insert(st.files.begin(), "stage_" + name + ".json");
    if (log) {
      *log << "[" << name << "] " << st.status;
      if (!st.error.empty()) *log << ": " << st.error;
      *log << '\n';
      for (const auto& i : st.invariants)
        *log << "    " << (i["pass"].get<bool>() ? "PASS " : "FAIL ") << i["name"].get<std::string>()
             << " value=" << i["value"].get<double>() << " threshold=" << i["threshold"].get<double>() << '\n';
    }
    if (!st.passed()) res.all_pass = false;
    res.stages.push_back(std::move(st));
  }

  json manifest;
  manifest["version"] = kVersion;
  manifest["config_hash"] = hash;
  manifest["seed"] = cfg.seed;
  manifest["config"] = effective_config(cfg);
  manifest["stages"] = json::array();
  for (const auto& st : res.stages) {
    json files = json::array();
    for (const auto& f : st.files) {
      fs::path p = dir / f;
      files.push_back({{"path", f}, {"sha256", fs::exists(p) ? file_sha256(p.string()) : ""}});
    }
    manifest["stages"].push_back({{"name", st.name}, {"status", st.status}, {"files", files}});
  }
  write_json(dir / "manifest.json", manifest);
  return res;
}

int report(const std::string& dir_s, std::ostream& out) {
  fs::path dir(dir_s);
  fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) {
    out << "missing artifact: " << mpath.string() << '\n';
    return 2;
  }
  json manifest;
  {
    std::ifstream in(mpath);
    in >> manifest;
  }
  out << manifest.value("version", "") << "  run " << manifest.value("config_hash", "") << "  seed "
      << manifest["seed"] << '\n';
  std::vector<std::string> missing;
  bool all_pass = true;
  std::map<std::string, json> stage;
  for (const auto& s : manifest["stages"]) {
    for (const auto& f : s["files"]) {
      fs::path p = dir / f["path"].get<std::string>();
      if (!fs::exists(p))
        missing.push_back(p.string());
      else if (file_sha256(p.string()) != f["sha256"].get<std::string>())
        missing.push_back(p.string() + " (checksum mismatch)");
    }
    fs::path sp = dir / ("stage_" + s["name"].get<std::string>() + ".json");
    if (fs::exists(sp)) {
      std::ifstream in(sp);
      json j;
      in >> j;
      stage[s["name"].get<std::string>()] = j;
    }
  }
  out << std::setprecision(6);
  for (const auto& name : kStageOrder) {
    if (!stage.count(name)) continue;
    const json& j = stage[name];
    out << "\n== " << name << ": " << j["status"].get<std::string>();
    if (!j["error"].get<std::string>().empty()) out << " (" << j["error"].get<std::string>() << ")";
    out << '\n';
    if (j["status"] != "ok") all_pass = false;
    for (const auto& i : j["invariants"]) {
      bool pass = i["pass"].get<bool>();
      if (!pass) all_pass = false;
      out << "  " << (pass ? "PASS " : "FAIL ") << std::left << std::setw(30) << i["name"].get<std::string>()
          << std::right << " value " << i["value"].get<double>() << "  threshold " << i["threshold"].get<double>()
          << '\n';
    }
    const json& m = j["metrics"];
    if (name == "solve" && m.contains("convergence")) {
      for (const char* side : {"minus", "plus"}) {
        out << "  convergence " << side << ":";
        for (const auto& p : m["convergence"][side]["curve"]) out << "  D=" << p[0] << " " << p[1].get<double>();
        out << '\n';
      }
    }
    if (name == "lyapunov" && m.contains("qr")) {
      out << "  exponents      QR                    conjugated\n";
      const auto& q = m["qr"];
      const auto& c = m["conjugated"];
      for (std::size_t i = 0; i < q["exponents"].size(); ++i)
        out << "    lambda" << i + 1 << "  " << std::setw(10) << q["exponents"][i].get<double>() << " +- "
            << std::setw(8) << q["standard_errors"][i].get<double>() << "   " << std::setw(10)
            << c["exponents"][i].get<double>() << " +- " << c["standard_errors"][i].get<double>() << '\n';
      const std::size_t d = q["exponents"].size() / 2;
      out << "  bound: lambda_" << d + 1 << " = " << q["exponents"][d].get<double>() << " +- "
          << q["standard_errors"][d].get<double>() << "  vs  0.5 E log(1 + m(U-S)/(1+C)) = "
          << m["lower_bound"].get<double>() << " +- " << m["lower_bound_se"].get<double>() << "  (paired SE "
          << m["top_minus_bound_se"].get<double>() << ")\n";
    }
    if (name == "manifold" && m.contains("gradient_graph")) {
      out << "  manifold distance " << m["gradient_graph"]["sup_distance"].get<double>() << " over "
          << m["gradient_graph"]["points_accepted"] << " points (h = " << m["h"].get<double>()
          << "), negative control " << m["negative_control"]["sup_distance"].get<double>() << '\n';
    }
    if (name == "nondeg" && m.contains("fraction_valid")) {
      out << "  valid fraction " << m["fraction_valid"].get<double>() << " +- " << m["fraction_se"].get<double>()
          << "; mean min(1/a, cap) " << m["inv_a"]["mean"].get<double>() << " -> "
          << m["inv_a"]["mean_cap2"].get<double>() << "; mean min(b^-1/2, cap) "
          << m["inv_sqrt_b"]["mean"].get<double>() << " -> " << m["inv_sqrt_b"]["mean_cap2"].get<double>() << '\n';
    }
  }
  out << "\nplot data:";
  for (const auto& s : manifest["stages"])
    for (const auto& f : s["files"]) {
      std::string p = f["path"].get<std::string>();
      if (p.size() > 4 && p.substr(p.size() - 4) == ".csv") out << ' ' << p;
    }
  out << '\n';
  if (!missing.empty()) {
    out << "\nmissing or altered artifacts:\n";
    for (const auto& m : missing) out << "  " << m << '\n';
    return 2;
  }
  out << (all_pass ? "\nall invariants pass\n" : "\nsome invariants FAIL\n");
  return all_pass ? 0 : 1;
}

}  // namespace kickhj
