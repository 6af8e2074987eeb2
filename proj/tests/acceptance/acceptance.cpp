// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "kickhj/experiment.hpp"
#include "kickhj/manifolds.hpp"
#include "kickhj/nondeg_mc.hpp"
#include "../fixtures.hpp"

using namespace kickhj;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// successive-depth distances decrease until they reach the rounding floor
bool monotone(const ConvergenceReport& r) {
  for (std::size_t k = 1; k < r.curve.size(); ++k) {
    double prev = r.curve[k - 1].second, cur = r.curve[k].second;
    if (prev < 1e-12 && cur < 1e-12) continue;
    if (cur > prev) return false;
  }
  return true;
}

Outcome c1_symplectic() {
  auto t0 = Clock::now();
  double worst = 0.0;
  int count = 0;
  for (int d = 1; d <= 3; ++d) {
    auto f = fixture::kicked(d, 1.0, 100 + d, 0, 333);
    CounterStream s(7, d);
    for (int j = 0; j <= 333 && count < 1000; ++j, ++count) {
      Vec x(d);
      for (int a = 0; a < d; ++a) x(a) = s.uniform();
      auto J = jacobian(x, f.basis, f.kicks.xi(j));
      worst = std::max({worst, J.symplectic_residual(), J.block_identity_residual()});
    }
  }
  double t = seconds_since(t0);
  return {worst < 1e-10 && t < 1.0 && count == 1000,
          fmt("%d Jacobians (d = 1..3), max residual %.2e < 1e-10, %.3f s < 1 s", count, worst, t)};
}

Outcome c2_free_map() {
  auto t0 = Clock::now();
  auto f = fixture::zero_force(1, -200, 10200);
  PhasePoint p{TorusPoint(Vec::Constant(1, 0.1)), Vec::Constant(1, 0.3)};
  OrbitSegment o = flow(p, f, -150, 10050);
  o.ensure_jacobians(f);
  auto g = green_bundles(o, 100, 0);
  double rel = 0.0;
  for (const auto& s : g.states) {
    rel = std::max(rel, std::abs(s.U(0, 0) * s.k - 1.0));
    rel = std::max(rel, std::abs(s.S(0, 0) * s.k + 1.0));
  }
  auto sp = lyapunov_spectrum(o, f, 0, 10000, LyapunovMethod::QR);
  double lam = 0.0;
  for (double l : sp.exponents) lam = std::max(lam, std::abs(l));
  double t = seconds_since(t0);
  return {rel < 1e-12 && lam < 1e-3 && t < 1.0,
          fmt("max rel err of U_k, S_k (k <= 100) %.2e < 1e-12, max |lambda| after 1e4 steps %.2e < 1e-3, %.3f s < 1 s",
              rel, lam, t)};
}

Outcome c3_brute_force() {
  auto t0 = Clock::now();
  int cases = 0, mismatches = 0;
  GridField g(1, 32);
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    auto f = fixture::kicked(1, 0.4, seed, -2, 5);
    const Vec b = Vec::Constant(1, 0.05 * seed);
    for (auto [x0, x1] : {std::pair{0.13, 0.71}, {0.5, 0.5}, {0.96875, 0.03125}}) {
      TorusPoint x(Vec::Constant(1, x0)), xp(Vec::Constant(1, x1));
      auto A = [&](const Vec& a, const Vec& c, int j) {
        return action_one_step(a, c, b, f.basis, f.kicks.xi(j)).value;
      };
      for (int len = 1; len <= 3; ++len) {
        double best = std::numeric_limits<double>::infinity();
        if (len == 1) best = A(x.coords(), xp.coords(), 0);
        if (len == 2)
          for (std::size_t i = 0; i < g.size(); ++i)
            best = std::min(best, A(x.coords(), g.point(i), 0) + A(g.point(i), xp.coords(), 1));
        if (len == 3)
          for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t k = 0; k < g.size(); ++k)
              best = std::min(best, (A(x.coords(), g.point(i), 0) + A(g.point(i), g.point(k), 1)) +
                                        A(g.point(k), xp.coords(), 2));
        Configuration c = action(0, len, x, xp, b, f, 32, 0);
        ++cases;
        if (c.grid_action != best) ++mismatches;
      }
    }
    // one Lax-Oleinik step against the double loop
    GridField phi(1, 32);
    CounterStream s(seed, 0);
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = s.normal();
    GridField kb = apply_backward(phi, b, f.basis, f.kicks.xi(0));
    GridField kf = apply_forward(phi, b, f.basis, f.kicks.xi(0));
    for (std::size_t x = 0; x < phi.size(); ++x) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t y = 0; y < phi.size(); ++y) {
        lo = std::min(lo, phi[y] + action_one_step(phi.point(y), phi.point(x), b, f.basis, f.kicks.xi(0)).value);
        hi = std::max(hi, phi[y] - action_one_step(phi.point(x), phi.point(y), b, f.basis, f.kicks.xi(0)).value);
      }
      cases += 2;
      if (kb[x] != lo) ++mismatches;
      if (kf[x] != hi) ++mismatches;
    }
  }
  double t = seconds_since(t0);
  return {mismatches == 0 && t < 10.0,
          fmt("%d DP / Lax-Oleinik values vs exhaustive search, %d not bitwise equal, %.3f s < 10 s", cases,
              mismatches, t)};
}

Outcome c4_contraction() {
  auto t0 = Clock::now();
  auto f = fixture::kicked(1, 0.1, 1, -600, 600);
  const Vec b = Vec::Zero(1);
  SolveOptions so;
  so.max_depth = 256;
  auto r0 = solve_backward(f, b, 256, 0, so);
  auto r1 = solve_backward(f, b, 256, -1, so);
  GridField stepped = apply_backward(r1.history.at(-1), b, f.basis, f.kicks.xi(-1));
  double fp = quotient_distance(stepped, r0.history.at(0));
  bool mono = monotone(r0.report) && monotone(r1.report);
  double t = seconds_since(t0);
  return {mono && r0.report.final_distance < 1e-6 && fp < 1e-6 && r0.report.achieved_depth <= 256 && t < 120.0,
          fmt("N = 256: monotone %s, depth %d, final distance %.2e < 1e-6, fixed point %.2e < 1e-6, %.2f s < 120 s",
              mono ? "yes" : "no", r0.report.achieved_depth, r0.report.final_distance, fp, t)};
}

std::vector<fixture::Run>& seeded_runs() {
  static std::vector<fixture::Run> runs = [] {
    std::vector<fixture::Run> v;
    for (std::uint64_t s = 1; s <= 5; ++s) v.push_back(fixture::make_run(s, 256, 60, 120));
    return v;
  }();
  return runs;
}

Outcome c5_semiconcavity() {
  const double h = 1.0 / 256;
  double worst_m = -1e300, worst_p = -1e300;
  bool ok = true;
  for (auto& r : seeded_runs()) {
    const GridField& m = r.minus.at(0);
    GridField p = r.plus.at(0);
    for (auto& v : p.values()) v = -v;
    double sm = max_second_difference(m), sp = max_second_difference(p);
    double C0 = r.force.c2(0);
    ok = ok && sm <= 1.0 + 20 * h && sp <= 1.0 + C0 + 20 * h;
    worst_m = std::max(worst_m, sm - (1.0 + 20 * h));
    worst_p = std::max(worst_p, sp - (1.0 + C0 + 20 * h));
  }
  return {ok, fmt("5 runs: max D2 psi- minus bound %.3f <= 0, max D2 (-psi+) minus bound %.3f <= 0", worst_m,
                  worst_p)};
}

Outcome c6_green_chain() {
  double worst = 1e300;
  int checked = 0;
  for (auto& r : seeded_runs())
    for (int j = -20; j <= 20; ++j) {
      auto g = green_bundles(r.orbit, 50, j);
      worst = std::min(worst, g.min_ledger);
      ++checked;
    }
  return {worst > -1e-8, fmt("5 runs x 41 sites, k <= 50: min ledger eigenvalue %.3e > -1e-8", worst)};
}

Outcome c7_transversality() {
  double worst = 1e300;
  bool ok = true;
  for (auto& r : seeded_runs()) {
    auto p = nondeg_probe(r.barrier0, r.gm.x0, 0.2);
    double tr = r.sweep.gap(0);
    ok = ok && !p.degenerate && tr >= 0.9 * p.b_hat;
    worst = std::min(worst, p.b_hat > 0 ? tr / p.b_hat : 0.0);
  }
  return {ok, fmt("5 runs: min transversality / b_hat %.3f >= 0.9", worst)};
}

Outcome c8_exponents() {
  auto t0 = Clock::now();
  const int steps = 10000, burn = 200;
  bool ok = true;
  double worst_margin = 1e300, worst_pair = 1e300;
  std::string table;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto r = fixture::make_run(seed, 256, steps + 2 * burn, burn);
    auto sp = lyapunov_spectrum(r.orbit, r.force, 0, steps, LyapunovMethod::QR, &r.sweep);
    double lam = sp.exponents[1];
    double se = std::max(sp.standard_errors[0], sp.standard_errors[1]);
    double margin = (lam - sp.lower_bound) / sp.top_minus_bound_se;
    double pair = std::abs(sp.exponents[0] + sp.exponents[1]);
    ok = ok && lam >= sp.lower_bound - 3 * sp.top_minus_bound_se && pair < 3 * se;
    worst_margin = std::min(worst_margin, margin);
    worst_pair = std::min(worst_pair, 3 * se - pair);
    table += fmt("      seed %2d: lambda2 %.5f (SE %.4f)  bound %.5f (SE %.4f, paired %.4f)  lambda1+lambda2 %.1e\n",
                 int(seed), lam, se, sp.lower_bound, sp.lower_bound_se, sp.top_minus_bound_se, pair);
  }
  double t = seconds_since(t0);
  ok = ok && t < 300.0;
  std::string d = fmt("10 seeds, QR over 1e4 steps: min (lambda2 - bound)/SE %.1f >= -3, pairing within 3 SE, %.1f s < 300 s\n",
                      worst_margin, t);
  d += table;
  d.pop_back();
  return {ok, d};
}

struct ManifoldDistances {
  double pos = 0.0, neg = 0.0;
  bool ok = false;
};

ManifoldDistances manifold_distance(std::uint64_t seed, int N) {
  auto r = fixture::make_run(seed, N, 40, 120);
  ManifoldOptions mo;
  mo.depth = 30;
  mo.rho = 0.5;
  mo.nodes_per_axis = 129;
  mo.rho_floor = 10.0 / N;
  auto W = unstable_manifold(r.mo.config, r.force, r.sweep, 0, mo);
  LocalChart c0(r.mo.config.at(0), r.orbit.at(0).v, r.sweep.u(0), r.sweep.s(0));
  auto pos = compare_gradient_graph(r.minus.at(0), r.b, W.graph, c0, 0.15, 100.0, !r.gm.unique);
  auto neg = compare_gradient_graph(r.plus.at(0), r.b, W.graph, c0, 0.15, 100.0, !r.gm.unique);
  ManifoldDistances d;
  d.ok = W.ok && !pos.skipped && pos.points_accepted > 0 && neg.points_accepted > 0;
  d.pos = pos.sup_distance;
  d.neg = neg.sup_distance;
  return d;
}

Outcome c9_manifold() {
  auto t0 = Clock::now();
  bool ok = true;
  std::string table;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto a = manifold_distance(seed, 512);
    auto b = manifold_distance(seed, 1024);
    double ratio = a.pos / b.pos;
    bool pass = a.ok && b.ok && a.pos <= 10.0 / 512 && ratio >= 1.5 && ratio <= 3.0 && a.neg > 100.0 / 512;
    ok = ok && pass;
    table += fmt("      seed %d: N=512 %.2e (10h = %.2e)  N=1024 %.2e  ratio %.2f  control %.3f (100h = %.3f)\n",
                 int(seed), a.pos, 10.0 / 512, b.pos, ratio, a.neg, 100.0 / 512);
  }
  double t = seconds_since(t0);
  ok = ok && t < 600.0;
  std::string d = fmt("3 seeds: distance <= 10h at N = 512, ratio in [1.5, 3], control > 100h, %.1f s < 600 s\n", t);
  d += table;
  d.pop_back();
  return {ok, d};
}

Outcome c10_barrier_decay() {
  const double h = 1.0 / 256;
  double worst = -1e300;
  bool ok = true;
  for (auto& r : seeded_runs()) {
    std::vector<std::size_t> starts;
    for (int k = 0; k < 20; ++k) starts.push_back(static_cast<std::size_t>(k * 256 / 20));
    auto rep = barrier_decay(r.minus, r.plus, 0, starts, 15, 10 * h);
    ok = ok && rep.ok;
    worst = std::max(worst, rep.max_increase);
  }
  return {ok, fmt("5 runs x 20 backward orbits to j = -15: max step increase %.2e <= 10h = %.2e", worst, 10 * h)};
}

Outcome c11_nondeg() {
  auto t0 = Clock::now();
  auto& r = seeded_runs().front();
  GridField psi = barrier_base(r.minus.at(0), r.plus.at(1), r.b, r.force.basis);
  FamilyOptions fo;
  fo.n_samples = 500;
  fo.seed = 1;
  auto fam = barrier_family_experiment(psi, r.force.basis, *r.force.kicks.density(), fo);

  // constants-only basis: no force at all
  PotentialBasis cb(1, {FourierFunction(1, {{{0}, 1.0, 0.0}})});
  DensitySpec cd = DensitySpec::isotropic_gaussian(1, 1.0);
  KickedForce cf{cb, sample_kicks(cd, 1, -300, 300)};
  auto cm = solve_backward(cf, r.b, 256, 0);
  auto cp = solve_forward(cf, r.b, 256, 1);
  GridField cpsi = barrier_base(cm.history.at(0), cp.history.at(1), r.b, cb);
  FamilyOptions co = fo;
  co.n_samples = 100;
  auto ctrl = barrier_family_experiment(cpsi, cb, cd, co);
  double t = seconds_since(t0);
  bool ok = fam.fraction_valid >= 0.95 && fam.inv_a.cap_change < 0.1 && fam.inv_sqrt_b.cap_change < 0.1 &&
            ctrl.assumption_failure && t < 900.0;
  return {ok, fmt("valid %.3f (SE %.3f) >= 0.95, cap change a^-1 %.3f / b^-1/2 %.3f < 0.1, control valid %.2f "
                  "flagged %s, %.2f s < 900 s",
                  fam.fraction_valid, fam.fraction_se, fam.inv_a.cap_change, fam.inv_sqrt_b.cap_change,
                  ctrl.fraction_valid, ctrl.assumption_failure ? "yes" : "no", t)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome c12_determinism() {
  auto cfg = load_config(std::string(KICKHJ_SOURCE_DIR) + "/configs/default.json");
  fs::path root = fs::temp_directory_path() / "kickhj_acceptance";
  fs::remove_all(root);
  auto a = run_experiment(cfg, (root / "a").string());
  cfg.threads = 3;
  auto b = run_experiment(cfg, (root / "b").string());
  int files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(a.dir)) {
    ++files;
    fs::path other = fs::path(b.dir) / e.path().filename();
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differ;
  }
  int files_b = static_cast<int>(std::distance(fs::directory_iterator(b.dir), fs::directory_iterator()));
  fs::remove_all(root);
  return {differ == 0 && files == files_b && files > 0 && a.all_pass,
          fmt("full pipeline twice (1 and 3 threads): %d artifacts, %d differ, invariants %s", files, differ,
              a.all_pass ? "all pass" : "FAIL")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"symplecticity", c1_symplectic},      {"free-map oracle", c2_free_map},
      {"brute-force equivalence", c3_brute_force}, {"Lax-Oleinik contraction", c4_contraction},
      {"semiconcavity", c5_semiconcavity},   {"Green monotone chain", c6_green_chain},
      {"transversality vs barrier", c7_transversality}, {"exponent lower bound", c8_exponents},
      {"manifold coincidence", c9_manifold}, {"barrier decay", c10_barrier_decay},
      {"nondegeneracy Monte-Carlo", c11_nondeg}, {"determinism", c12_determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
