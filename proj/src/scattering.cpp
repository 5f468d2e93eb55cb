#include "resonet/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace resonet {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

double wrap(double x) {
  x = std::fmod(x, kTwoPi);
  return x < 0 ? x + kTwoPi : x;
}

Vec wrap(Vec x) {
  for (auto& v : x) v = wrap(v);
  return x;
}

double torus_dist(const Vec& a, const Vec& b) {
  double r = 0;
  for (int i = 0; i < a.size(); ++i) r = std::max(r, std::abs(std::remainder(a[i] - b[i], kTwoPi)));
  return r;
}

}  // namespace

// Grid of n^d points on [0, 2pi)^d, first angle fastest.
std::vector<Vec> torus_grid(int d, int n) {
  std::vector<Vec> out;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = kTwoPi * idx[i] / n;
    out.push_back(x);
    int i = 0;
    while (i < d && ++idx[i] == n) idx[i++] = 0;
    if (i == d) break;
  }
  return out;
}

namespace {

// fn(x, r, J) fills the residual and Jacobian; returns false outside the domain.
template <class Fn>
bool newton(Fn&& fn, Vec& x, double tol, int max_iter, double* res, Mat* Jout) {
  const int d = static_cast<int>(x.size());
  Vec r(d);
  Mat J(d, d);
  for (int it = 0; it <= max_iter; ++it) {
    if (!fn(x, r, J)) return false;
    if (!r.allFinite() || !J.allFinite()) return false;
    *res = r.lpNorm<Eigen::Infinity>();
    *Jout = J;
    if (*res <= tol) return true;
    if (it == max_iter) break;
    Eigen::FullPivLU<Mat> lu(J);
    if (!lu.isInvertible()) return false;
    Vec dx = lu.solve(r);
    const double n = dx.lpNorm<Eigen::Infinity>();
    if (n > 0.5) dx *= 0.5 / n;
    x -= dx;
    if (n < 1e-15) {
      if (!fn(x, r, J)) return false;
      *res = r.lpNorm<Eigen::Infinity>();
      *Jout = J;
      return true;
    }
  }
  return true;
}

void add_unique(std::vector<HeteroclinicSolution>& out, HeteroclinicSolution s, double dedup) {
  for (const auto& o : out)
    if (o.branch == s.branch && torus_dist(o.theta, s.theta) < dedup) return;
  out.push_back(std::move(s));
}

}  // namespace

ScatterPoint scattering_map(const Melnikov& M, double eps, const Vec& I, const Vec& theta) {
  ScatterPoint out;
  if (eps == 0.0) {
    out.ok = true;
    out.I = I;
    out.theta = theta;
    return out;
  }
  auto r = M.reduced(I, theta);
  if (!r.ok) {
    out.failure = r.failure;
    return out;
  }
  out.ok = true;
  out.I = I + eps * r.grad_theta;
  out.theta = theta - eps * r.grad_I;
  return out;
}

std::vector<HeteroclinicSolution> heteroclinic_solve(const Melnikov& M, const Vec& E, const Vec& E2, double eps,
                                                     const HeteroclinicOptions& opt) {
  const int d = static_cast<int>(E.size());
  const Vec delta = (E2 - E) / eps;
  const double sc = std::max(1.0, M.at(E)->scale());
  auto fn = [&](const Vec& th, Vec& r, Mat& J) {
    auto R = M.reduced(E, th);
    if (!R.ok) return false;
    r = R.grad_theta - delta;
    J = R.hess_theta;
    return true;
  };
  std::vector<HeteroclinicSolution> out;
  for (Vec x : opt.starts.empty() ? torus_grid(d, opt.seeds) : opt.starts) {
    double res = 0;
    Mat J;
    if (!newton(fn, x, opt.tol * sc, opt.max_iter, &res, &J)) continue;
    if (res > opt.accept) continue;
    add_unique(out, {wrap(x), res, J.determinant(), 0}, opt.dedup);
  }
  return out;
}

CriticalScan critical_points_scan(const Melnikov& M, const Vec& I, int grid,
                                  const std::vector<ReducedPoincare>* values) {
  const int d = static_cast<int>(I.size());
  const auto pts = torus_grid(d, grid);
  std::vector<ReducedPoincare> own;
  if (!values) {
    own.resize(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) own[k] = M.reduced(I, pts[k]);
    values = &own;
  }
  const auto& vals = *values;
  std::vector<double> g2(pts.size(), std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (vals[k].ok) g2[k] = vals[k].grad_theta.squaredNorm();
  std::vector<int> stride(d, 1);
  for (int i = 1; i < d; ++i) stride[i] = stride[i - 1] * grid;
  auto at_offset = [&](std::size_t k, const std::vector<int>& off) {
    std::size_t j = 0;
    for (int i = 0; i < d; ++i) {
      const int c = static_cast<int>(k / stride[i]) % grid;
      j += static_cast<std::size_t>(((c + off[i] + grid) % grid) * stride[i]);
    }
    return j;
  };
  struct Seed {
    Vec theta, tau;
  };
  std::vector<Seed> seeds;
  // seeds: local minima of |grad L*| over the 3^d - 1 neighbours, and cells whose 2^d corners
  // see every gradient component change sign
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (!std::isfinite(g2[k])) continue;
    bool is_min = true;
    std::vector<int> off(d, -1);
    while (is_min) {
      if (!std::all_of(off.begin(), off.end(), [](int o) { return o == 0; }) && g2[at_offset(k, off)] < g2[k])
        is_min = false;
      int i = 0;
      while (i < d && ++off[i] == 2) off[i++] = -1;
      if (i == d) break;
    }
    if (is_min) seeds.push_back({pts[k], vals[k].tau});
    std::vector<int> lo(d, 0);
    Vec mn = Vec::Constant(d, std::numeric_limits<double>::infinity()), mx = -mn;
    bool all_ok = true;
    for (int c = 0; c < (1 << d) && all_ok; ++c) {
      for (int i = 0; i < d; ++i) lo[i] = (c >> i) & 1;
      const auto& v = vals[at_offset(k, lo)];
      if (!v.ok) {
        all_ok = false;
        break;
      }
      mn = mn.cwiseMin(v.grad_theta);
      mx = mx.cwiseMax(v.grad_theta);
    }
    if (all_ok && (mn.array() <= 0).all() && (mx.array() >= 0).all())
      for (int c = 0; c < (1 << d); ++c) {
        for (int i = 0; i < d; ++i) lo[i] = (c >> i) & 1;
        const std::size_t j = at_offset(k, lo);
        seeds.push_back({pts[j], vals[j].tau});
      }
  }
  // Newton on the joint system dL/dtheta = 0, dL/dtau = 0, which stays smooth where the first crest folds;
  // a root counts when its tau is the first crest of its theta
  auto P = M.at(I);
  const int n = P->n();
  const double sc = std::max(1.0, P->scale());
  CriticalScan out;
  for (const Seed& sd : seeds) {
    Vec x(d + n);
    x << sd.theta, sd.tau;
    bool conv = false, singular = false;
    for (int it = 0; it < 40; ++it) {
      auto D = P->derivs(x.tail(n), x.head(d), 0.0, false);
      Vec g(d + n);
      g << D.theta, D.tau;
      Mat H(d + n, d + n);
      H << D.thetatheta, D.tautheta.transpose(), D.tautheta, D.tautau;
      if (g.lpNorm<Eigen::Infinity>() <= 1e-12 * sc) {
        conv = true;
        break;
      }
      Eigen::FullPivLU<Mat> lu(H);
      if (lu.rank() < d + n || std::abs(H.determinant()) <= 1e-14 * std::pow(sc, d + n)) {
        singular = g.norm() <= 1e-8 * sc;
        break;
      }
      Vec dx = lu.solve(g);
      const double nn = dx.lpNorm<Eigen::Infinity>();
      if (nn > 0.5) dx *= 0.5 / nn;
      x -= dx;
    }
    if (singular) out.degenerate.push_back(wrap(x.head(d)));
    if (!conv) continue;
    const Vec th = wrap(x.head(d));
    auto R = M.reduced(I, th);
    if (!R.ok || (R.tau - x.tail(n)).norm() > 1e-6 * (1 + R.tau.norm())) continue;
    add_unique(out.points, {th, R.grad_theta.lpNorm<Eigen::Infinity>(), R.hess_theta.determinant(), 0}, 1e-6);
  }
  return out;
}

// ---------------------------------------------------------------- resonant chart

Vec ResonantAngles::phi(const Vec& Th) const {
  const int d = static_cast<int>(nf->k0.size());
  Vec p(d);
  double acc = Th[d - 1];
  for (int i = 0, j = 0; i < d; ++i) {
    if (i == nf->slot) continue;
    p[i] = Th[j++];
    acc -= nf->k0[i] * p[i];
  }
  p[nf->slot] = acc / nf->k0[nf->slot];
  return p;
}

Vec ResonantAngles::Theta(const Vec& p) const {
  const int d = static_cast<int>(nf->k0.size());
  Vec Th(d);
  for (int i = 0, j = 0; i < d; ++i)
    if (i != nf->slot) Th[j++] = p[i];
  Th[d - 1] = nf->k0.dot(p);
  return Th;
}

Mat ResonantAngles::T() const {
  const int d = static_cast<int>(nf->k0.size());
  const double km = nf->k0[nf->slot];
  Mat T = Mat::Zero(d, d);
  for (int i = 0, j = 0; i < d; ++i) {
    if (i == nf->slot) continue;
    T(i, j) = 1;
    T(nf->slot, j) = -nf->k0[i] / km;
    ++j;
  }
  T(nf->slot, d - 1) = 1 / km;
  return T;
}

ResonantReduced resonant_reduced(const Melnikov& M, const NormalForm& nf, const Vec& Theta) {
  ResonantReduced out;
  ResonantAngles A{&nf};
  auto r = M.reduced(nf.Bstar, A.phi(Theta));
  if (!r.ok) {
    out.failure = r.failure;
    return out;
  }
  const Mat T = A.T();
  out.ok = true;
  out.value = r.value;
  out.grad = T.transpose() * r.grad_theta;
  out.hess = T.transpose() * r.hess_theta * T;
  return out;
}

double resonant_condition(const NormalForm& nf, const ResonantReduced& R, double theta_m, double em) {
  const int d = static_cast<int>(R.grad.size());
  Mat B = R.hess;
  const double w = 2 * (em - nf.U_at(theta_m));
  B.row(d - 1) *= w;
  B(d - 1, d - 1) -= nf.dU(theta_m) * R.grad[d - 1];
  return B.determinant();
}

Vec resonant_residual(const Melnikov& M, const NormalForm& nf, const ResonantTorus& from, const ResonantTorus& to,
                      double eps, const Vec& phi, int sigma) {
  ResonantAngles A{&nf};
  const Vec Th = A.Theta(phi);
  const int d = static_cast<int>(Th.size());
  auto R = resonant_reduced(M, nf, Th);
  Vec r = Vec::Constant(d, std::numeric_limits<double>::quiet_NaN());
  if (!R.ok) return r;
  const double ej = std::pow(eps, nf.order);
  const double lb = nf.ell_bar(Th[d - 1], from.Em / ej);
  r.head(d - 1) = R.grad.head(d - 1) - (to.Ehat - from.Ehat) / eps;
  r[d - 1] = sigma * nf.a * lb * R.grad[d - 1] - (to.Em - from.Em) / (eps * std::sqrt(ej));
  return r;
}

std::vector<HeteroclinicSolution> heteroclinic_solve_resonant(const Melnikov& M, const NormalForm& nf,
                                                              const ResonantTorus& from, const ResonantTorus& to,
                                                              double eps, double rho,
                                                              const HeteroclinicOptions& opt) {
  const int d = static_cast<int>(nf.k0.size());
  const double ej = std::pow(eps, nf.order);
  const double em = from.Em / ej;
  const Vec dhat = (to.Ehat - from.Ehat) / eps;
  const double dm = (to.Em - from.Em) / (eps * std::sqrt(ej));
  const double sc = std::max(1.0, M.at(nf.Bstar)->scale());
  ResonantAngles A{&nf};
  auto outside = [&](double tm) { return std::abs(std::remainder(tm - nf.saddle, kTwoPi)) >= rho; };
  std::vector<HeteroclinicSolution> out;
  std::vector<int> signs = from.branch == 0 ? std::vector<int>{1, -1} : std::vector<int>{from.branch};
  for (int sigma : signs) {
    auto fn = [&](const Vec& Th, Vec& r, Mat& J) {
      const double tm = Th[d - 1];
      const double lb = nf.ell_bar(tm, em);
      if (!std::isfinite(lb) || lb == 0.0) return false;
      auto R = resonant_reduced(M, nf, Th);
      if (!R.ok) return false;
      r.resize(d);
      r.head(d - 1) = R.grad.head(d - 1) - dhat;
      r[d - 1] = sigma * nf.a * lb * R.grad[d - 1] - dm;
      J = R.hess;
      const double dlb = -nf.dU(tm) / (nf.a * lb);
      J.row(d - 1) *= sigma * nf.a * lb;
      J(d - 1, d - 1) += sigma * nf.a * dlb * R.grad[d - 1];
      return true;
    };
    std::vector<Vec> starts = torus_grid(d, opt.seeds);
    if (!opt.starts.empty()) {
      starts.clear();
      for (const Vec& p : opt.starts) starts.push_back(A.Theta(p));
    }
    for (Vec x : starts) {
      if (!outside(x[d - 1])) continue;
      double res = 0;
      Mat J;
      if (!newton(fn, x, opt.tol * sc, opt.max_iter, &res, &J)) continue;
      if (res > opt.accept || !outside(x[d - 1])) continue;
      add_unique(out, {wrap(A.phi(x)), res, J.determinant(), sigma}, opt.dedup);
    }
  }
  return out;
}

}  // namespace resonet
