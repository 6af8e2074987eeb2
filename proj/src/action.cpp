#include "kickhj/action.hpp"

#include <cmath>
#include <limits>

#include "kickhj/grid_field.hpp"
#include "kickhj/parallel.hpp"

namespace kickhj {

AxisKinetic axis_kinetic(double x, double xp, double b, int lift_radius) {
  AxisKinetic best{std::numeric_limits<double>::infinity(), 0};
  for (int k = -lift_radius; k <= lift_radius; ++k) {
    double t = xp - x + k;
    double v = 0.5 * t * t - b * t;
    if (v < best.value) best = {v, k};
  }
  return best;
}

OneStepAction action_one_step(const Vec& x, const Vec& xp, const Vec& b, const PotentialBasis& basis,
                              const Vec& xi, int lift_radius) {
  if (lift_radius < 1) throw std::invalid_argument("lift_radius must be at least 1");
  int d = basis.dim();
  require_dim(x, d, "action_one_step x");
  require_dim(xp, d, "action_one_step x'");
  require_dim(b, d, "rotation vector b");
  OneStepAction out;
  out.lift.resize(d);
  double s = 0.0;
  for (int a = 0; a < d; ++a) {
    AxisKinetic k = axis_kinetic(x(a), xp(a), b(a), lift_radius);
    s += k.value;
    out.lift(a) = k.lift;
  }
  out.value = s - kick_value(basis, xi, x);
  return out;
}

OneStepAction action_one_step(const TorusPoint& x, const TorusPoint& xp, const Vec& b,
                              const PotentialBasis& basis, const Vec& xi, int lift_radius) {
  return action_one_step(x.coords(), xp.coords(), b, basis, xi, lift_radius);
}

GridKinetic::GridKinetic(int dim, int n, const Vec& b, int lift_radius) : dim_(dim), n_(n) {
  require_dim(b, dim, "rotation vector b");
  if (lift_radius < 1) throw std::invalid_argument("lift_radius must be at least 1");
  val_.assign(dim, std::vector<double>(static_cast<std::size_t>(n) * n));
  val_src_.assign(dim, std::vector<double>(static_cast<std::size_t>(n) * n));
  lift_.assign(dim, std::vector<int>(static_cast<std::size_t>(n) * n));
  for (int a = 0; a < dim; ++a)
    for (int ix = 0; ix < n; ++ix)
      for (int iy = 0; iy < n; ++iy) {
        AxisKinetic k = axis_kinetic(static_cast<double>(iy) / n, static_cast<double>(ix) / n, b(a), lift_radius);
        val_[a][static_cast<std::size_t>(ix) * n + iy] = k.value;
        val_src_[a][static_cast<std::size_t>(iy) * n + ix] = k.value;
        lift_[a][static_cast<std::size_t>(ix) * n + iy] = k.lift;
      }
}

double GridKinetic::kinetic(std::size_t y, std::size_t x) const {
  double s = 0.0;
  for (int a = 0; a < dim_; ++a) {
    s += val_[a][(x % n_) * n_ + (y % n_)];
    x /= n_;
    y /= n_;
  }
  return s;
}

Vec GridKinetic::displacement(std::size_t y, std::size_t x) const {
  Vec dsp(dim_);
  for (int a = 0; a < dim_; ++a) {
    int ix = static_cast<int>(x % n_), iy = static_cast<int>(y % n_);
    dsp(a) = static_cast<double>(ix) / n_ - static_cast<double>(iy) / n_ + lift_[a][static_cast<std::size_t>(ix) * n_ + iy];
    x /= n_;
    y /= n_;
  }
  return dsp;
}

Vec Configuration::velocity(int j, const KickedForce& force) const {
  if (j < n) return at(j + 1) - at(j) + force.gradient(j, at(j));
  return at(n) - at(n - 1);
}

OrbitSegment Configuration::orbit(const KickedForce& force) const {
  std::vector<PhasePoint> pts;
  pts.reserve(lifted.size());
  for (int j = m; j <= n; ++j) pts.push_back({TorusPoint(at(j)), velocity(j, force)});
  OrbitSegment seg(m, std::move(pts));
  seg.action = action;
  return seg;
}

double configuration_action(const std::vector<Vec>& lifted, int m, const Vec& b, const KickedForce& force) {
  double kin = 0.0, pot = 0.0;
  int n = m + static_cast<int>(lifted.size()) - 1;
  for (int j = m; j < n; ++j) {
    kin += 0.5 * (lifted[j + 1 - m] - lifted[j - m]).squaredNorm();
    pot += force.value(j, lifted[j - m]);
  }
  return kin - b.dot(lifted.back() - lifted.front()) - pot;
}

namespace {

// objective without the telescoping b term
double interior_objective(const std::vector<Vec>& x, int m, const KickedForce& force) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    s += 0.5 * (x[i + 1] - x[i]).squaredNorm() - force.value(m + static_cast<int>(i), x[i]);
  return s;
}

}  // namespace

double euler_lagrange_residual(const std::vector<Vec>& x, int m, const KickedForce& force) {
  double r = 0.0;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    Vec g = (x[i] - x[i - 1]) - (x[i + 1] - x[i]) - force.gradient(m + static_cast<int>(i), x[i]);
    r = std::max(r, g.cwiseAbs().maxCoeff());
  }
  return r;
}

RefineResult refine_configuration(std::vector<Vec>& x, int m, const KickedForce& force, int max_iters,
                                  double tol) {
  RefineResult res;
  const std::size_t K = x.size() >= 2 ? x.size() - 2 : 0;
  if (K == 0) return res;
  const int d = static_cast<int>(x[0].size());
  std::vector<Vec> g(K);
  std::vector<Mat> H(K);
  std::vector<Eigen::PartialPivLU<Mat>> lu(K);
  std::vector<Vec> rp(K), delta(K);
  double f0 = interior_objective(x, m, force);
  for (int it = 0; it < max_iters; ++it) {
    double gmax = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      KickValue kv = force.eval(m + static_cast<int>(i) + 1, x[i + 1]);
      g[i] = (x[i + 1] - x[i]) - (x[i + 2] - x[i + 1]) - kv.gradient;
      H[i] = 2.0 * Mat::Identity(d, d) - kv.hessian;
      gmax = std::max(gmax, g[i].cwiseAbs().maxCoeff());
    }
    res.gradient_norm = gmax;
    if (gmax < tol) break;
    // block tridiagonal solve, off-diagonal blocks -I
    lu[0].compute(H[0]);
    rp[0] = -g[0];
    for (std::size_t i = 1; i < K; ++i) {
      Mat dinv = lu[i - 1].inverse();
      lu[i].compute(H[i] - dinv);
      rp[i] = -g[i] + dinv * rp[i - 1];
    }
    delta[K - 1] = lu[K - 1].solve(rp[K - 1]);
    for (std::size_t i = K - 1; i-- > 0;) delta[i] = lu[i].solve(rp[i] + delta[i + 1]);
    double slope = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < K; ++i) {
      slope += g[i].dot(delta[i]);
      finite = finite && delta[i].allFinite();
    }
    if (!finite || slope >= 0.0)
      for (std::size_t i = 0; i < K; ++i) delta[i] = -0.1 * g[i];
    double t = 1.0;
    bool accepted = false;
    std::vector<Vec> trial = x;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t i = 0; i < K; ++i) trial[i + 1] = x[i + 1] + t * delta[i];
      double f1 = interior_objective(trial, m, force);
      if (f1 <= f0 + 1e-14 * (1.0 + std::abs(f0))) {
        x.swap(trial);
        f0 = f1;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    ++res.iterations;
    if (!accepted) break;
  }
  return res;
}

Configuration action(int m, int n, const TorusPoint& x, const TorusPoint& xp, const Vec& b,
                     const KickedForce& force, int grid_n, int refine_iters, int lift_radius) {
  if (n <= m) throw std::invalid_argument("action requires n > m");
  if (grid_n < 8) throw std::invalid_argument("action grid_n must be at least 8");
  const int d = force.dim();
  require_dim(x.coords(), d, "action endpoint");
  require_dim(xp.coords(), d, "action endpoint");
  require_dim(b, d, "rotation vector b");

  Configuration cfg;
  cfg.m = m;
  cfg.n = n;
  cfg.b = b;
  std::vector<Vec> torus_pts;  // x_m, grid interior, x_n
  std::vector<Eigen::VectorXi> lifts;

  if (n == m + 1) {
    OneStepAction a = action_one_step(x, xp, b, force.basis, force.kicks.xi(m), lift_radius);
    cfg.grid_action = a.value;
    torus_pts = {x.coords(), xp.coords()};
    lifts = {a.lift};
  } else {
    GridField geom(d, grid_n);
    const std::size_t G = geom.size();
    const int K = n - m - 1;
    GridKinetic kin(d, grid_n, b, lift_radius);
    std::vector<Vec> pts(G);
    for (std::size_t y = 0; y < G; ++y) pts[y] = geom.point(y);

    std::vector<double> V(G), Vn(G);
    std::vector<std::vector<std::uint32_t>> back(K);
    for (std::size_t y = 0; y < G; ++y)
      V[y] = action_one_step(x.coords(), pts[y], b, force.basis, force.kicks.xi(m), lift_radius).value;
    for (int layer = 1; layer < K; ++layer) {
      int j = m + layer;
      std::vector<double> Fy(G);
      for (std::size_t y = 0; y < G; ++y) Fy[y] = force.value(j, pts[y]);
      back[layer].resize(G);
      parallel_for(G, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
          double best = std::numeric_limits<double>::infinity();
          std::uint32_t arg = 0;
          for (std::size_t y = 0; y < G; ++y) {
            double c = V[y] + (kin.kinetic(y, t) - Fy[y]);
            if (c < best) {
              best = c;
              arg = static_cast<std::uint32_t>(y);
            }
          }
          Vn[t] = best;
          back[layer][t] = arg;
        }
      });
      V.swap(Vn);
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t y = 0; y < G; ++y) {
      double c = V[y] + action_one_step(pts[y], xp.coords(), b, force.basis, force.kicks.xi(n - 1), lift_radius).value;
      if (c < best) {
        best = c;
        arg = y;
      }
    }
    cfg.grid_action = best;
    std::vector<std::size_t> path(K);
    path[K - 1] = arg;
    for (int layer = K - 1; layer >= 1; --layer) path[layer - 1] = back[layer][path[layer]];
    torus_pts.push_back(x.coords());
    for (int k = 0; k < K; ++k) torus_pts.push_back(pts[path[k]]);
    torus_pts.push_back(xp.coords());
    for (std::size_t k = 0; k + 1 < torus_pts.size(); ++k)
      lifts.push_back(action_one_step(torus_pts[k], torus_pts[k + 1], b, force.basis,
                                      force.kicks.xi(m + static_cast<int>(k)), lift_radius).lift);
  }

  cfg.lifted.resize(torus_pts.size());
  cfg.lifted[0] = torus_pts[0];
  for (std::size_t k = 0; k + 1 < torus_pts.size(); ++k)
    cfg.lifted[k + 1] = cfg.lifted[k] + (torus_pts[k + 1] - torus_pts[k]) + lifts[k].cast<double>();
  if (refine_iters > 0) refine_configuration(cfg.lifted, m, force, refine_iters);
  cfg.action = (n == m + 1 || refine_iters == 0) ? cfg.grid_action
                                                 : configuration_action(cfg.lifted, m, b, force);
  return cfg;
}

MinimizerIdentityReport verify_minimizer_identities(const Configuration& cfg, const KickedForce& force,
                                                    int lift_radius, double fd_step, double tol) {
  MinimizerIdentityReport rep;
  const int d = cfg.dim();
  double sum = 0.0;
  for (int j = cfg.m; j < cfg.n; ++j)
    sum += action_one_step(reduce(cfg.at(j)), reduce(cfg.at(j + 1)), cfg.b, force.basis,
                           force.kicks.xi(j), lift_radius).value;
  rep.additivity_residual = std::abs(configuration_action(cfg.lifted, cfg.m, cfg.b, force) - sum);
  rep.euler_lagrange = euler_lagrange_residual(cfg.lifted, cfg.m, force);

  // A_{m,k}(x_m, x_k + t e_a) with the interior re-optimised
  auto perturbed = [&](int k, int a, double t) {
    std::vector<Vec> sub(cfg.lifted.begin(), cfg.lifted.begin() + (k - cfg.m + 1));
    sub.back()(a) += t;
    refine_configuration(sub, cfg.m, force, 50);
    return configuration_action(sub, cfg.m, cfg.b, force);
  };
  for (int k = cfg.m + 1; k <= cfg.n; ++k) {
    Vec vk = cfg.at(k) - cfg.at(k - 1);
    for (int a = 0; a < d; ++a) {
      double fd = (perturbed(k, a, fd_step) - perturbed(k, a, -fd_step)) / (2.0 * fd_step);
      rep.derivative_residual = std::max(rep.derivative_residual, std::abs(fd - (vk(a) - cfg.b(a))));
    }
  }
  rep.max_second_difference = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < d; ++a) {
    double a0 = perturbed(cfg.n, a, 0.0);
    double sd = (perturbed(cfg.n, a, fd_step) - 2.0 * a0 + perturbed(cfg.n, a, -fd_step)) / (fd_step * fd_step);
    rep.max_second_difference = std::max(rep.max_second_difference, sd);
  }
  rep.semiconcave = rep.max_second_difference <= 1.0 + tol;
  return rep;
}

}  // namespace kickhj
