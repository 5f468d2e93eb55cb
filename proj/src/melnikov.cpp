#include "resonet/melnikov.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace resonet {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kCacheLimit = 4096;

double trig(Basis b, double x) { return b == Basis::Cos ? std::cos(x) : std::sin(x); }
double dtrig(Basis b, double x) { return b == Basis::Cos ? -std::sin(x) : std::cos(x); }

struct Panel {
  double a, b;
  std::vector<double> K;
  double err;
};

}  // namespace

std::vector<double> integrate_gk15(const std::function<void(double, double*)>& f, int dim, double a, double b,
                                   double max_panel, double tol, double* err, int max_panels) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G7 = boost::math::quadrature::gauss<double, 7>;
  const auto& xk = GK::abscissa();
  const auto& wk = GK::weights();
  const auto& wg = G7::weights();
  std::vector<double> total(dim, 0.0);
  if (err) *err = 0;
  if (!(b > a)) return total;
  std::vector<double> fx(dim), fy(dim), K(dim), Gs(dim);
  auto panel = [&](double lo, double hi) {
    const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
    std::fill(K.begin(), K.end(), 0.0);
    std::fill(Gs.begin(), Gs.end(), 0.0);
    f(c, fx.data());
    for (int j = 0; j < dim; ++j) {
      K[j] += wk[0] * fx[j];
      Gs[j] += wg[0] * fx[j];
    }
    for (std::size_t i = 1; i < xk.size(); ++i) {
      f(c - r * xk[i], fx.data());
      f(c + r * xk[i], fy.data());
      for (int j = 0; j < dim; ++j) {
        const double s = fx[j] + fy[j];
        K[j] += wk[i] * s;
        if (i % 2 == 0) Gs[j] += wg[i / 2] * s;
      }
    }
    Panel p{lo, hi, std::vector<double>(dim), 0.0};
    for (int j = 0; j < dim; ++j) {
      p.K[j] = r * K[j];
      p.err = std::max(p.err, std::abs(r * (K[j] - Gs[j])));
    }
    return p;
  };
  const double len = b - a;
  int n0 = std::max(1, static_cast<int>(std::ceil(len / max_panel)));
  std::vector<Panel> todo;
  for (int i = n0 - 1; i >= 0; --i) todo.push_back(panel(a + len * i / n0, a + len * (i + 1) / n0));
  int used = n0;
  double etot = 0;
  while (!todo.empty()) {
    Panel p = std::move(todo.back());
    todo.pop_back();
    const double w = p.b - p.a;
    double mag = 0;
    for (double v : p.K) mag = std::max(mag, std::abs(v));
    if (p.err <= std::max(tol * w / len, 64 * std::numeric_limits<double>::epsilon() * mag) ||
        w < 1e-9 * len) {
      for (int j = 0; j < dim; ++j) total[j] += p.K[j];
      etot += p.err;
      continue;
    }
    if (used + 2 > max_panels) throw QuadratureError("quadrature did not converge");
    const double m = 0.5 * (p.a + p.b);
    todo.push_back(panel(m, p.b));
    todo.push_back(panel(p.a, m));
    used += 2;
  }
  if (err) *err = etot;
  return total;
}

// ---------------------------------------------------------------- harmonic representation

HarmonicPoincare::HarmonicPoincare(int d, std::vector<HarmonicTerm> terms, double error)
    : d_(d), terms_(std::move(terms)), err_(error) {}

double HarmonicPoincare::value(const Vec& tau, const Vec& theta, double s) const {
  double L = 0;
  for (const auto& t : terms_) {
    double psi = t.kl[d_] * s - t.nu * tau[0];
    for (int i = 0; i < d_; ++i) psi += t.kl[i] * theta[i];
    L += (t.W * std::polar(1.0, psi)).real();
  }
  return L;
}

PoincareDerivs HarmonicPoincare::derivs(const Vec& tau, const Vec& theta, double s, bool with_I) const {
  PoincareDerivs r;
  r.tau = Vec::Zero(1);
  r.tautau = Mat::Zero(1, 1);
  r.theta = Vec::Zero(d_);
  r.thetatheta = Mat::Zero(d_, d_);
  r.tautheta = Mat::Zero(1, d_);
  r.I = Vec::Zero(d_);
  for (const auto& t : terms_) {
    double psi = t.kl[d_] * s - t.nu * tau[0];
    for (int i = 0; i < d_; ++i) psi += t.kl[i] * theta[i];
    const cplx e = t.W * std::polar(1.0, psi);
    const cplx ie = cplx(0, 1) * e;
    r.L += e.real();
    r.tau[0] += -t.nu * ie.real();
    r.tautau(0, 0) += -t.nu * t.nu * e.real();
    for (int i = 0; i < d_; ++i) {
      if (!t.kl[i]) continue;
      r.theta[i] += t.kl[i] * ie.real();
      r.tautheta(0, i) += t.nu * t.kl[i] * e.real();
      for (int j = 0; j < d_; ++j) r.thetatheta(i, j) -= t.kl[i] * t.kl[j] * e.real();
    }
    if (with_I) {
      const cplx ph = std::polar(1.0, psi);
      for (int i = 0; i < d_; ++i) r.I[i] += ((t.dW[i] - cplx(0, 1) * t.W * t.dnu[i] * tau[0]) * ph).real();
    }
  }
  return r;
}

double HarmonicPoincare::max_frequency() const {
  double m = 0;
  for (const auto& t : terms_)
    if (std::abs(t.W) > 0) m = std::max(m, std::abs(t.nu));
  return m;
}

double HarmonicPoincare::min_frequency() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& t : terms_)
    if (std::abs(t.W) > 0 && std::abs(t.nu) > 1e-12) m = std::min(m, std::abs(t.nu));
  return std::isfinite(m) ? m : 0.0;
}

double HarmonicPoincare::scale() const {
  double s = 0;
  for (const auto& t : terms_) s += std::abs(t.W);
  return s;
}

// ---------------------------------------------------------------- quadrature representation (n >= 2)

namespace {

class QuadraturePoincare : public PoincareFunction {
 public:
  QuadraturePoincare(const Melnikov* M, Vec I) : M_(M), I_(std::move(I)) {
    const Model& m = M_->model();
    Vec om = m.frequency(I_);
    for (const auto& t : m.terms()) {
      if (t.order != 1) continue;
      double nu = t.kl[m.d()];
      for (int i = 0; i < m.d(); ++i) nu += om[i] * t.kl[i];
      numax_ = std::max(numax_, std::abs(nu));
      if (std::abs(nu) > 1e-12) numin_ = std::min(numin_, std::abs(nu));
    }
    scale_ = 0;
    Vec z = Vec::Zero(m.n()), ph = Vec::Zero(m.d());
    for (int k = 0; k < 4; ++k) {
      ph.setConstant(0.7 * k);
      scale_ = std::max(scale_, std::abs(M_->L(z, I_, ph, 0.3 * k)));
    }
    scale_ = std::max(scale_, 1e-300);
  }
  int n() const override { return M_->model().n(); }
  double value(const Vec& tau, const Vec& theta, double s) const override { return M_->L(tau, I_, theta, s); }
  PoincareDerivs derivs(const Vec& tau, const Vec& theta, double s, bool with_I) const override {
    const int n = tau.size(), d = theta.size();
    const double h = M_->options().fd_step;
    PoincareDerivs r;
    r.L = value(tau, theta, s);
    r.theta = M_->L_phi(tau, I_, theta, s);
    r.tau = Vec(n);
    r.tautau = Mat(n, n);
    r.tautheta = Mat(n, d);
    r.thetatheta = Mat(d, d);
    auto shift = [](Vec v, int i, double dh) {
      v[i] += dh;
      return v;
    };
    // Richardson-extrapolated central differences
    auto rich = [&](auto&& f, double step) {
      const double d1 = (f(step) - f(-step)) / (2 * step);
      const double d2 = (f(step / 2) - f(-step / 2)) / step;
      return (4 * d2 - d1) / 3;
    };
    for (int a = 0; a < n; ++a) {
      r.tau[a] = rich([&](double e) { return value(shift(tau, a, e), theta, s); }, h);
      for (int b = 0; b < n; ++b)
        r.tautau(a, b) = rich(
            [&](double e) {
              Vec t2 = shift(tau, b, e);
              return (value(shift(t2, a, h), theta, s) - value(shift(t2, a, -h), theta, s)) / (2 * h);
            },
            h);
      Vec gp = M_->L_phi(shift(tau, a, h), I_, theta, s), gm = M_->L_phi(shift(tau, a, -h), I_, theta, s);
      r.tautheta.row(a) = ((gp - gm) / (2 * h)).transpose();
    }
    for (int i = 0; i < d; ++i) {
      Vec gp = M_->L_phi(tau, I_, shift(theta, i, h), s), gm = M_->L_phi(tau, I_, shift(theta, i, -h), s);
      r.thetatheta.col(i) = (gp - gm) / (2 * h);
    }
    r.thetatheta = 0.5 * (r.thetatheta + r.thetatheta.transpose()).eval();
    r.I = Vec::Zero(d);
    if (with_I)
      for (int i = 0; i < d; ++i)
        r.I[i] = rich([&](double e) { return M_->L(tau, shift(I_, i, e), theta, s); }, 1e-4);
    return r;
  }
  double max_frequency() const override { return numax_; }
  double min_frequency() const override { return std::isfinite(numin_) ? numin_ : 0.0; }
  double scale() const override { return scale_; }

 private:
  const Melnikov* M_;
  Vec I_;
  double numax_ = 0, numin_ = std::numeric_limits<double>::infinity(), scale_ = 1;
};

}  // namespace

// ---------------------------------------------------------------- Melnikov

Melnikov::Melnikov(const Model& m, MelnikovOptions opt) : m_(&m), opt_(opt), sep_(m) {
  const auto& terms = m.terms();
  for (std::size_t t = 0; t < terms.size(); ++t) {
    if (terms[t].order != 1) continue;
    bool dep = false;
    for (const auto& v : terms[t].coeff.variables())
      if (v[0] == 'p' || v[0] == 'q') dep = true;
    if (dep) active_.push_back(static_cast<int>(t));
  }
  T_ = sep_.T_cut(opt_.tail_tol);
}

void Melnikov::window(const Vec& tau, double* lo, double* hi) const {
  *lo = -tau.maxCoeff() - T_;
  *hi = -tau.minCoeff() + T_;
}

double Melnikov::L(const Vec& tau, const Vec& I, const Vec& phi, double s, double* err) const {
  if (err) *err = 0;
  if (active_.empty()) return 0.0;
  const int d = m_->d(), n = m_->n();
  const Vec om = m_->frequency(I);
  std::vector<double> x0(d + 2 * n, 0.0);
  for (int i = 0; i < d; ++i) x0[i] = I[i];
  double numax = 1.0;
  std::vector<double> c0;
  for (int t : active_) {
    const auto& ft = m_->terms()[t];
    double nu = ft.kl[d];
    for (int i = 0; i < d; ++i) nu += om[i] * ft.kl[i];
    numax = std::max(numax, std::abs(nu));
    c0.push_back(m_->coeff(t, x0.data()));
  }
  double lo, hi;
  window(tau, &lo, &hi);
  std::vector<double> tt(n), pp(n), qq(n);
  auto f = [&](double sig, double* out) {
    std::vector<double> x = x0;
    for (int j = 0; j < n; ++j) tt[j] = tau[j] + sig;
    sep_.eval(tt.data(), pp.data(), qq.data());
    for (int j = 0; j < n; ++j) {
      x[d + j] = pp[j];
      x[d + n + j] = qq[j];
    }
    double acc = 0;
    for (std::size_t a = 0; a < active_.size(); ++a) {
      const auto& ft = m_->terms()[active_[a]];
      double th = ft.kl[d] * (s + sig);
      for (int i = 0; i < d; ++i) th += ft.kl[i] * (phi[i] + om[i] * sig);
      acc += (m_->coeff(active_[a], x.data()) - c0[a]) * trig(ft.basis, th);
    }
    out[0] = -acc;
  };
  double e = 0;
  auto r = integrate_gk15(f, 1, lo, hi, kPi / (4 * numax), opt_.abs_tol * 1e-2, &e);
  if (err) *err = e;
  return r[0];
}

Vec Melnikov::L_phi(const Vec& tau, const Vec& I, const Vec& phi, double s) const {
  const int d = m_->d(), n = m_->n();
  if (active_.empty()) return Vec::Zero(d);
  const Vec om = m_->frequency(I);
  std::vector<double> x0(d + 2 * n, 0.0);
  for (int i = 0; i < d; ++i) x0[i] = I[i];
  double numax = 1.0;
  std::vector<double> c0;
  for (int t : active_) {
    const auto& ft = m_->terms()[t];
    double nu = ft.kl[d];
    for (int i = 0; i < d; ++i) nu += om[i] * ft.kl[i];
    numax = std::max(numax, std::abs(nu));
    c0.push_back(m_->coeff(t, x0.data()));
  }
  double lo, hi;
  window(tau, &lo, &hi);
  std::vector<double> tt(n), pp(n), qq(n);
  auto f = [&](double sig, double* out) {
    std::vector<double> x = x0;
    for (int j = 0; j < n; ++j) tt[j] = tau[j] + sig;
    sep_.eval(tt.data(), pp.data(), qq.data());
    for (int j = 0; j < n; ++j) {
      x[d + j] = pp[j];
      x[d + n + j] = qq[j];
    }
    for (int i = 0; i < d; ++i) out[i] = 0;
    for (std::size_t a = 0; a < active_.size(); ++a) {
      const auto& ft = m_->terms()[active_[a]];
      double th = ft.kl[d] * (s + sig);
      for (int i = 0; i < d; ++i) th += ft.kl[i] * (phi[i] + om[i] * sig);
      const double w = -(m_->coeff(active_[a], x.data()) - c0[a]) * dtrig(ft.basis, th);
      for (int i = 0; i < d; ++i) out[i] += w * ft.kl[i];
    }
  };
  auto r = integrate_gk15(f, d, lo, hi, kPi / (4 * numax), opt_.abs_tol * 1e-2);
  return Eigen::Map<Vec>(r.data(), d);
}

std::shared_ptr<const PoincareFunction> Melnikov::build(const Vec& I) const {
  const int d = m_->d();
  if (m_->n() != 1) return std::make_shared<QuadraturePoincare>(this, I);
  const Vec om = m_->frequency(I);
  const Mat H = m_->hessian_h(I);
  std::vector<double> x0(d + 2, 0.0);
  for (int i = 0; i < d; ++i) x0[i] = I[i];
  struct Work {
    int t;
    double nu, c0;
    Vec dnu;
    std::vector<int> dIs;
    std::vector<double> dc0;
    int off;
  };
  std::vector<Work> ws;
  int dim = 0;
  double numax = 1.0;
  for (int t : active_) {
    const auto& ft = m_->terms()[t];
    Work w;
    w.t = t;
    Vec k(d);
    for (int i = 0; i < d; ++i) k[i] = ft.kl[i];
    w.nu = om.dot(k) + ft.kl[d];
    w.dnu = H * k;
    w.c0 = m_->coeff(t, x0.data());
    for (int i = 0; i < d; ++i)
      if (m_->coeff_has_dI(t, i)) {
        w.dIs.push_back(i);
        w.dc0.push_back(m_->coeff_dI(t, i, x0.data()));
      }
    w.off = dim;
    dim += 4 + 2 * static_cast<int>(w.dIs.size());
    numax = std::max(numax, std::abs(w.nu));
    ws.push_back(std::move(w));
  }
  std::vector<HarmonicTerm> terms;
  double e = 0;
  if (dim > 0) {
    const Homoclinic& hc = sep_[0];
    auto f = [&](double u, double* out) {
      auto [p, q] = hc(u);
      std::vector<double> x = x0;
      x[d] = p;
      x[d + 1] = q;
      for (const auto& w : ws) {
        const double D = m_->coeff(w.t, x.data()) - w.c0;
        const double c = std::cos(w.nu * u), s = std::sin(w.nu * u);
        double* o = out + w.off;
        o[0] = D * c;
        o[1] = D * s;
        o[2] = u * D * c;
        o[3] = u * D * s;
        for (std::size_t a = 0; a < w.dIs.size(); ++a) {
          const double dD = m_->coeff_dI(w.t, w.dIs[a], x.data()) - w.dc0[a];
          o[4 + 2 * a] = dD * c;
          o[5 + 2 * a] = dD * s;
        }
      }
    };
    auto r = integrate_gk15(f, dim, -T_, T_, kPi / (4 * numax), opt_.abs_tol * 1e-2, &e);
    for (const auto& w : ws) {
      const auto& ft = m_->terms()[w.t];
      const double* o = r.data() + w.off;
      const cplx F(o[0], o[1]), Gu(o[2], o[3]);
      std::vector<cplx> dF(d, cplx(0));
      for (int i = 0; i < d; ++i) dF[i] = cplx(0, 1) * w.dnu[i] * Gu;
      for (std::size_t a = 0; a < w.dIs.size(); ++a) dF[w.dIs[a]] += cplx(o[4 + 2 * a], o[5 + 2 * a]);
      const cplx fac = ft.basis == Basis::Cos ? cplx(-1) : cplx(0, 1);
      HarmonicTerm h;
      h.kl = ft.kl;
      h.nu = w.nu;
      h.W = fac * F;
      h.dnu = w.dnu;
      for (int i = 0; i < d; ++i) h.dW.push_back(fac * dF[i]);
      terms.push_back(std::move(h));
    }
  }
  return std::make_shared<HarmonicPoincare>(d, std::move(terms), e);
}

std::shared_ptr<const PoincareFunction> Melnikov::at(const Vec& I) const {
  std::vector<double> key(I.data(), I.data() + I.size());
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  auto P = build(I);
  std::lock_guard<std::mutex> lk(mu_);
  if (cache_.size() > kCacheLimit) cache_.clear();
  cache_[key] = P;
  return P;
}

CriticalTau newton_tau(const PoincareFunction& P, const Vec& theta, double s, const Vec& guess) {
  CriticalTau c;
  c.tau = guess;
  const double sc = std::max(P.scale(), 1e-300);
  for (int it = 0; it < 60; ++it) {
    auto D = P.derivs(c.tau, theta, s, false);
    c.iterations = it + 1;
    c.residual = D.tau.norm();
    c.hessian = D.tautau;
    if (c.residual <= 1e-13 * sc) break;
    Eigen::FullPivLU<Mat> lu(D.tautau);
    if (!lu.isInvertible()) {
      c.failure = "singular tau Hessian";
      return c;
    }
    Vec step = lu.solve(D.tau);
    const double cap = P.max_frequency() > 0 ? 0.5 / P.max_frequency() : 0.5;
    if (step.norm() > cap) step *= cap / step.norm();
    c.tau -= step;
    if (step.norm() < 1e-15 * (1 + c.tau.norm())) {
      auto D2 = P.derivs(c.tau, theta, s, false);
      c.residual = D2.tau.norm();
      c.hessian = D2.tautau;
      break;
    }
  }
  Eigen::JacobiSVD<Mat> svd(c.hessian);
  const auto& sv = svd.singularValues();
  c.condition = sv.minCoeff() > 0 ? sv.maxCoeff() / sv.minCoeff() : std::numeric_limits<double>::infinity();
  c.ok = c.residual <= 1e-9 * sc && std::isfinite(c.condition);
  if (!c.ok && c.failure.empty()) c.failure = "Newton on dL/dtau did not converge";
  return c;
}

CriticalTau first_crest(const PoincareFunction& P, const Vec& theta, double s, const MelnikovOptions& opt) {
  CriticalTau best;
  const double numax = P.max_frequency();
  if (numax <= 0) {
    best.failure = "L does not depend on tau";
    return best;
  }
  const double sc = P.scale();
  const double curv_tol = opt.degenerate_tol * sc * numax * numax;
  if (P.n() != 1) {
    std::vector<Vec> starts{Vec::Zero(P.n())};
    for (int a = 0; a < P.n(); ++a)
      for (double sg : {-1.0, 1.0}) {
        Vec g = Vec::Zero(P.n());
        g[a] = sg * 0.5;
        starts.push_back(g);
      }
    double bestd = std::numeric_limits<double>::infinity();
    bool best_max = false;
    for (const auto& g : starts) {
      CriticalTau c = newton_tau(P, theta, s, g);
      if (!c.ok) continue;
      Eigen::SelfAdjointEigenSolver<Mat> es(c.hessian);
      if (es.eigenvalues().cwiseAbs().minCoeff() < curv_tol) continue;
      const bool is_max = es.eigenvalues().maxCoeff() < 0;
      const double dist = c.tau.norm();
      if ((is_max && !best_max) || (is_max == best_max && dist < bestd)) {
        best = c;
        bestd = dist;
        best_max = is_max;
      }
    }
    if (!best.ok) best.failure = "no nondegenerate critical tau";
    return best;
  }
  const double h = std::min(0.05, kPi / (8 * numax));
  double R = opt.tau_range;
  if (R <= 0) {
    const double numin = P.min_frequency();
    R = std::min(1e3, 4 * kPi / std::max(numin, 1e-3) + 4 * kPi / numax);
  }
  auto g = [&](double t) {
    Vec tv(1);
    tv << t;
    return P.derivs(tv, theta, s, false).tau[0];
  };
  auto refine = [&](double a, double b, double ga) {
    // bisection safeguarded Newton on g, g(a) > 0 >= g(b)
    double t = 0.5 * (a + b);
    for (int it = 0; it < 100; ++it) {
      Vec tv(1);
      tv << t;
      auto D = P.derivs(tv, theta, s, false);
      const double gt = D.tau[0];
      if ((gt > 0) == (ga > 0))
        a = t;
      else
        b = t;
      double tn = D.tautau(0, 0) != 0 ? t - gt / D.tautau(0, 0) : 0.5 * (a + b);
      if (!(tn > a && tn < b)) tn = 0.5 * (a + b);
      if (std::abs(tn - t) < 1e-15 * (1 + std::abs(t)) || b - a < 1e-15 * (1 + std::abs(t))) {
        t = tn;
        break;
      }
      t = tn;
    }
    return t;
  };
  double gl_prev = g(0.0), gr_prev = gl_prev;
  for (int k = 1; k * h <= R; ++k) {
    std::vector<double> cands;
    const double br = k * h, bl = -k * h;
    const double gr = g(br), gl = g(bl);
    if (gr_prev > 0 && gr <= 0) cands.push_back(refine((k - 1) * h, br, gr_prev));
    if (gl > 0 && gl_prev <= 0) cands.push_back(refine(bl, -(k - 1) * h, gl));
    gr_prev = gr;
    gl_prev = gl;
    std::sort(cands.begin(), cands.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    for (double t : cands) {
      Vec tv(1);
      tv << t;
      auto D = P.derivs(tv, theta, s, false);
      if (D.tautau(0, 0) < -curv_tol) {
        best.ok = true;
        best.tau = tv;
        best.hessian = D.tautau;
        best.residual = std::abs(D.tau[0]);
        best.condition = 1.0;
        best.iterations = k;
        return best;
      }
    }
  }
  best.failure = "no nondegenerate maximum of L in tau within the search range";
  return best;
}

CriticalTau Melnikov::critical_tau(const Vec& I, const Vec& phi, double s, const Vec& guess) const {
  return newton_tau(*at(I), phi, s, guess);
}

CriticalTau Melnikov::first_crest(const Vec& I, const Vec& phi, double s) const {
  return resonet::first_crest(*at(I), phi, s, opt_);
}

ReducedPoincare Melnikov::reduced(const Vec& I, const Vec& theta) const {
  ReducedPoincare r;
  auto P = at(I);
  CriticalTau c = resonet::first_crest(*P, theta, 0.0, opt_);
  if (!c.ok) {
    r.failure = c.failure;
    return r;
  }
  auto D = P->derivs(c.tau, theta, 0.0, true);
  r.ok = true;
  r.value = D.L;
  r.grad_theta = D.theta;
  r.grad_I = D.I;
  r.tau = c.tau;
  r.tau_hessian = D.tautau;
  r.hess_theta = D.thetatheta - D.tautheta.transpose() * D.tautau.ldlt().solve(D.tautheta);
  return r;
}

// ---------------------------------------------------------------- residue family

std::optional<std::vector<double>> residue_family(const Model& m) {
  if (m.n() != 1 || !is_standard_pendulum(m.V_expr(0)) || m.pendulum_sign(0) != 1) return std::nullopt;
  const int d = m.d();
  std::vector<double> a(m.terms().size(), 0.0);
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (std::size_t t = 0; t < m.terms().size(); ++t) {
    if (m.terms()[t].order != 1) continue;
    std::vector<double> x(d + 2, 0.0);
    for (int i = 0; i < d; ++i) x[i] = m.box().lo[i];
    const double c0 = m.coeff(static_cast<int>(t), x.data());
    x[d + 1] = kPi;
    a[t] = -(m.coeff(static_cast<int>(t), x.data()) - c0) / 2;
    for (int k = 0; k < 6; ++k) {
      for (int i = 0; i < d; ++i) x[i] = m.box().lo[i] + std::abs(u(rng));
      x[d + 1] = 0;
      x[d] = 0;
      const double base = m.coeff(static_cast<int>(t), x.data());
      x[d] = u(rng);
      x[d + 1] = 2 * u(rng);
      const double want = base + a[t] * (std::cos(x[d + 1]) - 1);
      if (std::abs(m.coeff(static_cast<int>(t), x.data()) - want) > 1e-12 * (1 + std::abs(want)))
        return std::nullopt;
    }
  }
  return a;
}

double residue_amplitude(double nu, double a) {
  if (nu == 0) return 4 * a;
  const double x = kPi * nu / 2;
  if (std::abs(x) > 700) return 0.0;
  return 2 * kPi * nu * a / std::sinh(x);
}

double residue_L(const Model& m, const std::vector<double>& a, double tau, const Vec& I, const Vec& phi, double s) {
  const int d = m.d();
  const Vec om = m.frequency(I);
  double L = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t] == 0) continue;
    const auto& ft = m.terms()[t];
    double nu = ft.kl[d], psi = ft.kl[d] * s;
    for (int i = 0; i < d; ++i) {
      nu += om[i] * ft.kl[i];
      psi += ft.kl[i] * phi[i];
    }
    L += residue_amplitude(nu, a[t]) * trig(ft.basis, psi - nu * tau);
  }
  return L;
}

std::vector<CrestPoint> crest(const Model& m, const Vec& I, double s, int slices) {
  if (m.d() != 2) throw std::invalid_argument("crest sets are computed for d = 2");
  auto fam = residue_family(m);
  if (!fam) throw std::invalid_argument("model is not of the residue family");
  const Vec om = m.frequency(I);
  struct T {
    Basis b;
    int k1, k2, l;
    double nu, A;
  };
  std::vector<T> ts;
  double sc = 0;
  for (std::size_t t = 0; t < fam->size(); ++t) {
    if ((*fam)[t] == 0) continue;
    const auto& ft = m.terms()[t];
    double nu = om[0] * ft.kl[0] + om[1] * ft.kl[1] + ft.kl[2];
    ts.push_back({ft.basis, ft.kl[0], ft.kl[1], ft.kl[2], nu, residue_amplitude(nu, (*fam)[t])});
    sc += std::abs(ts.back().A) * nu * nu;
  }
  // g = dL/dtau at tau = 0, c = d2L/dtau2 at tau = 0
  auto g = [&](double p1, double p2) {
    double r = 0;
    for (const auto& t : ts) {
      const double psi = t.k1 * p1 + t.k2 * p2 + t.l * s;
      r += t.A * t.nu * (t.b == Basis::Cos ? std::sin(psi) : -std::cos(psi));
    }
    return r;
  };
  auto curv = [&](double p1, double p2) {
    double r = 0;
    for (const auto& t : ts) {
      const double psi = t.k1 * p1 + t.k2 * p2 + t.l * s;
      r -= t.A * t.nu * t.nu * trig(t.b, psi);
    }
    return r;
  };
  std::vector<CrestPoint> out;
  const int M = 512;
  std::vector<double> gs(M + 1);
  for (int i = 0; i < slices; ++i) {
    const double p1 = 2 * kPi * i / slices;
    double gmax = 0;
    for (int j = 0; j <= M; ++j) {
      gs[j] = g(p1, 2 * kPi * j / M);
      gmax = std::max(gmax, std::abs(gs[j]));
    }
    auto emit = [&](double p2) {
      CrestPoint c;
      c.phi = Vec(2);
      c.phi << p1, p2;
      c.residual = std::abs(g(p1, p2));
      c.curvature = curv(p1, p2);
      if (std::abs(c.curvature) < 1e-10 * sc) throw std::domain_error("tangential crest crossing");
      c.max_crest = c.curvature < 0;
      out.push_back(c);
    };
    if (gmax <= 1e-12 * sc) {
      // the whole slice lies on the crest
      for (int j = 0; j < M; ++j) emit(2 * kPi * j / M);
      continue;
    }
    for (int j = 1; j <= M; ++j) {
      const double a = 2 * kPi * (j - 1) / M, b = 2 * kPi * j / M;
      if (gs[j - 1] == 0) {
        emit(a);
        continue;
      }
      if ((gs[j - 1] > 0) == (gs[j] > 0) || gs[j] == 0) continue;
      double lo = a, hi = b, glo = gs[j - 1];
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi), gm = g(p1, mid);
        if (gm == 0) {
          lo = hi = mid;
          break;
        }
        if ((gm > 0) == (glo > 0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      emit(std::abs(g(p1, lo)) < std::abs(g(p1, hi)) ? lo : hi);
    }
  }
  return out;
}

}  // namespace resonet
