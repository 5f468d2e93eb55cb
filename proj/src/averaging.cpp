#include "resonet/averaging.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace resonet {

namespace {

constexpr std::size_t kMemoLimit = 50000;

double step_fn(double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; }

std::vector<std::vector<FourierTerm>> inner_by_order(const Model& m, int top) {
  std::vector<std::vector<FourierTerm>> out(top + 1);
  for (const auto& t : m.inner_terms(0))
    if (t.order <= top) out[t.order].push_back(t);
  return out;
}

}  // namespace

double bump(double x) {
  x = std::abs(x);
  if (x <= 1.0) return 1.0;
  if (x >= 2.0) return 0.0;
  double a = step_fn(2.0 - x), b = step_fn(x - 1.0);
  return a / (a + b);
}

RJet bump(const RJet& x) {
  const auto& sp = x.space();
  double x0 = x.c0();
  RJet u = x0 < 0 ? -x : x;
  x0 = std::abs(x0);
  if (x0 <= 1.0) return RJet(sp, 1.0);
  if (x0 >= 2.0) return RJet(sp, 0.0);
  RJet a = exp(-1.0 * reciprocal(2.0 - u));
  RJet b = exp(-1.0 * reciprocal(u - 1.0));
  return a / (a + b);
}

CJet divide_vanishing(const CJet& N, const RJet& D, CJet* remainder) {
  const auto& sp = D.space();
  const int nv = sp->nv();
  int p = 0;
  for (int v = 1; v < nv; ++v)
    if (std::abs(D.linear(v)) > std::abs(D.linear(p))) p = v;
  const double c = D.linear(p);
  if (c == 0.0) throw std::domain_error("divisor has no linear part");
  const RJet Dn = D.nilpotent();
  // x(y): x_j = y_j (j != p), D(x) - D0 = y_p
  std::vector<RJet> X;
  for (int v = 0; v < nv; ++v) X.push_back(RJet::variable(sp, v, 0.0));
  const RJet Yp = X[p];
  X[p] = Yp / c;
  for (int it = 0; it <= sp->deg(); ++it) X[p] += (Yp - Dn.compose(X)) / c;
  CJet Ny = N.compose(X);
  CJet remy;
  CJet Qy = Ny.divide_linear(p, cplx(D.c0()), &remy);
  std::vector<RJet> Y;
  for (int v = 0; v < nv; ++v) Y.push_back(RJet::variable(sp, v, 0.0));
  Y[p] = Dn;
  if (remainder) *remainder = remy.compose(Y);
  return Qy.compose(Y);
}

Averager::Averager(const Model& m, AveragingOptions opt) : m_(&m), opt_(std::move(opt)) {
  if (opt_.m0 < 1) throw std::invalid_argument("averaging order must be >= 1");
  if (opt_.jet_degree < 1) throw std::invalid_argument("jet degree must be >= 1");
  sp_ = JetSpace::get(m.d(), opt_.jet_degree);
  inner_ = inner_by_order(m, top());
}

std::vector<LocalField> Averager::initial(const Vec& I0) const {
  std::vector<LocalField> K(top() + 1, LocalField(m_->d(), sp_, I0));
  for (int o = 1; o <= top(); ++o)
    if (!inner_[o].empty()) K[o] = field_from_terms(*m_, inner_[o], I0, sp_);
  return K;
}

std::vector<RJet> Averager::projection_jet(const Vec& I0, const Mode& kl) const {
  const int d = m_->d();
  const int D = sp_->deg();
  Mode prim = mode_canonical_sign(mode_primitive(kl));
  auto I = action_variables(sp_, I0);
  auto divisor = [&](const std::vector<RJet>& x) {
    RJet f(sp_, static_cast<double>(kl[d]));
    for (int i = 0; i < d; ++i)
      if (kl[i]) f += m_->omega_of(i, x) * static_cast<double>(kl[i]);
    return f;
  };
  if (opt_.secular.count(prim)) {
    Projection P = project_k(*m_, I0, kl);
    Vec k(d);
    for (int i = 0; i < d; ++i) k[i] = kl[i];
    const double s0 = k.dot(m_->hessian_h(P.point) * k);
    RJet t(sp_, P.t);
    std::vector<RJet> x(d);
    for (int it = 0; it <= D + 1; ++it) {
      for (int i = 0; i < d; ++i) x[i] = I[i] + t * static_cast<double>(kl[i]);
      t -= divisor(x) / s0;
    }
    for (int i = 0; i < d; ++i) x[i] = I[i] + t * static_cast<double>(kl[i]);
    return x;
  }
  // orthogonal: X - I + lambda g(X) = 0, f(X) = 0 with g = D^2h(X) k
  Projection P = project_orth(*m_, I0, kl);
  Vec g0 = resonance_gradient(*m_, kl, P.point);
  const double lam0 = (I0 - P.point).dot(g0) / g0.squaredNorm();
  auto sp1 = JetSpace::get(d, 1);
  auto X1 = action_variables(sp1, P.point);
  Mat J = Mat::Zero(d + 1, d + 1);
  for (int i = 0; i < d; ++i) {
    RJet gi(sp1, 0.0);
    for (int mm = 0; mm < d; ++mm)
      if (kl[mm]) gi += m_->hess_of(i, mm, X1) * static_cast<double>(kl[mm]);
    for (int j = 0; j < d; ++j) J(i, j) = (i == j ? 1.0 : 0.0) + lam0 * gi.linear(j);
    J(i, d) = g0[i];
    J(d, i) = g0[i];
  }
  Eigen::PartialPivLU<Mat> lu(J);
  std::vector<RJet> X;
  for (int i = 0; i < d; ++i) X.push_back(RJet(sp_, P.point[i]));
  RJet lam(sp_, lam0);
  const int nc = sp_->size();
  for (int it = 0; it <= D + 1; ++it) {
    std::vector<RJet> F;
    for (int i = 0; i < d; ++i) {
      RJet gi(sp_, 0.0);
      for (int mm = 0; mm < d; ++mm)
        if (kl[mm]) gi += m_->hess_of(i, mm, X) * static_cast<double>(kl[mm]);
      F.push_back(X[i] - I[i] + lam * gi);
    }
    F.push_back(divisor(X));
    Mat rhs(d + 1, nc);
    for (int r = 0; r <= d; ++r)
      for (int c = 0; c < nc; ++c) rhs(r, c) = F[r][c];
    Mat del = lu.solve(rhs);
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < nc; ++c) X[i][c] -= del(i, c);
    for (int c = 0; c < nc; ++c) lam[c] -= del(d, c);
  }
  return X;
}

RJet Averager::distance_jet(const Vec& I0, const Mode& kl) const {
  const int d = m_->d();
  auto I = action_variables(sp_, I0);
  RJet f(sp_, static_cast<double>(kl[d]));
  for (int i = 0; i < d; ++i)
    if (kl[i]) f += m_->omega_of(i, I) * static_cast<double>(kl[i]);
  RJet n2(sp_, 0.0);
  for (int i = 0; i < d; ++i) {
    RJet gi(sp_, 0.0);
    for (int mm = 0; mm < d; ++mm)
      if (kl[mm]) gi += m_->hess_of(i, mm, I) * static_cast<double>(kl[mm]);
    n2 += gi * gi;
  }
  RJet r = f / sqrt(n2);
  return r.c0() < 0 ? -r : r;
}

HomologicalSolution Averager::solve_homological(const LocalField& K, int N) const {
  const int d = m_->d();
  const Vec& I0 = K.base();
  HomologicalSolution sol{LocalField(d, sp_, I0), LocalField(d, sp_, I0)};
  auto omega = omega_jets(*m_, I0, sp_);
  const double L = opt_.L;
  for (const auto& [m, c] : K.modes()) {
    if (mode_is_zero(m)) {
      sol.Kbar.add(m, c);
      continue;
    }
    if (k_is_zero(m)) {
      sol.G.set(m, c * cplx(0, -1.0 / m[d]));
      continue;
    }
    CJet Dc = divisor_jet(omega, m);
    const double D0 = Dc.c0().real();
    double d0 = std::numeric_limits<double>::infinity();
    if (L > 0) d0 = resonance_distance(*m_, m, I0);
    if (d0 >= 2 * L) {
      if (D0 == 0.0) throw std::domain_error("exact resonance " + mode_str(m) + " without a tube");
      sol.G.set(m, (c * reciprocal(Dc)) * cplx(0, -1));
      continue;
    }
    // inside the tube: Kbar = K(Gamma(I)) psi(dist/L)
    sol.resonant.insert(m);
    std::vector<RJet> gam = projection_jet(I0, m);
    Vec g0(d);
    for (int i = 0; i < d; ++i) g0[i] = gam[i].c0();
    CJet at_gamma;
    if (N == 1) {
      auto K1 = initial(g0);
      at_gamma = K1[1].coeff(m);
    } else {
      auto ap = average(g0, N - 1);
      at_gamma = ap->K[N].coeff(m);
    }
    std::vector<RJet> sub;
    for (int i = 0; i < d; ++i) sub.push_back(gam[i] - g0[i]);
    CJet composed = at_gamma.compose(sub);
    RJet psi = bump(distance_jet(I0, m) * (1.0 / L));
    CJet kb = composed * CJet::from(psi);
    sol.Kbar.set(m, kb);
    CJet num = c - kb;
    if (d0 < L) {
      RJet Dr(sp_);
      for (int i = 0; i < sp_->size(); ++i) Dr[i] = Dc[i].real();
      sol.G.set(m, divide_vanishing(num, Dr) * cplx(0, -1));
    } else {
      sol.G.set(m, (num * reciprocal(Dc)) * cplx(0, -1));
    }
  }
  LocalField R = sol.Kbar;
  R -= K;
  R -= htilde_bracket(omega, sol.G);
  sol.residual = R.max_abs_value();
  sol.residual_jet = R.max_abs();
  return sol;
}

std::vector<LocalField> Averager::lie_step(const std::vector<LocalField>& K, const std::vector<CJet>& omega,
                                           const LocalField& G, int N) const {
  const int M = top();
  std::vector<LocalField> out = K;
  if (G.empty()) return out;
  {
    LocalField T = htilde_bracket(omega, G);
    double fact = 1.0;
    for (int j = 1; j * N <= M; ++j) {
      if (j > 1) {
        T = bracket(T, G);
        fact *= j;
      }
      out[j * N] += T.scaled(1.0 / fact);
    }
  }
  for (int r = 1; r <= M; ++r) {
    if (K[r].empty()) continue;
    LocalField T = K[r];
    double fact = 1.0;
    for (int j = 1; r + j * N <= M; ++j) {
      T = bracket(T, G);
      fact *= j;
      out[r + j * N] += T.scaled(1.0 / fact);
    }
  }
  return out;
}

std::shared_ptr<const AveragedPoint> Averager::average(const Vec& I0, int steps) const {
  if (steps < 0 || steps > opt_.m0) throw std::invalid_argument("averaging steps out of range");
  std::vector<double> key(I0.data(), I0.data() + I0.size());
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = memo_.find({key, steps});
    if (it != memo_.end()) return it->second;
  }
  auto ap = std::make_shared<AveragedPoint>();
  ap->I0 = I0;
  ap->steps = steps;
  if (steps == 0) {
    ap->K = initial(I0);
  } else {
    auto prev = average(I0, steps - 1);
    const int N = steps;
    ap->K_before = prev->K_before;
    ap->step = prev->step;
    ap->K_before.push_back(prev->K[N]);
    HomologicalSolution sol = solve_homological(prev->K[N], N);
    auto omega = omega_jets(*m_, I0, sp_);
    ap->K = lie_step(prev->K, omega, sol.G, N);
    ap->step.push_back(std::move(sol));
  }
  std::lock_guard<std::mutex> lk(mu_);
  if (memo_.size() > kMemoLimit) memo_.clear();
  memo_[{key, steps}] = ap;
  return ap;
}

Vec FirstIntegral::operator()(const Vec& I, const Vec& phi, double s, double eps) const {
  auto ap = avg->average(I, 1);
  const LocalField& G = ap->step[0].G;
  Vec F = I;
  for (int i = 0; i < I.size(); ++i) F[i] += eps * G.dphi(i).eval(phi, s);
  return F;
}

double AveragedHamiltonian::U_at(double theta) const {
  cplx acc = 0;
  for (const auto& [p, c] : U) acc += c * std::polar(1.0, p * theta);
  return acc.real();
}

AveragedHamiltonian average_to_order(const Averager& avg, const ResonanceWeb& web, const Vec& I, int order) {
  const Model& m = avg.model();
  const double L = avg.options().L;
  AveragedHamiltonian out;
  out.I = I;
  bool near = false;
  for (const auto& r : web.secular()) {
    double dist = resonance_distance(m, r.kl, I);
    if (dist < 2 * L && dist >= L) {
      out.region = RegionCase::Annulus;
      out.resonance = r.kl;
      throw std::domain_error("point lies in the L-2L annulus of " + mode_str(r.kl) + "; shrink L");
    }
    if (dist < L) {
      if (near) throw std::domain_error("point lies in two secular tubes; it is outside the reduced domain");
      near = true;
      out.resonance = r.kl;
      out.order = r.order;
    }
  }
  auto ap = avg.average(I, order);
  const Mode zero(m.d() + 1, 0);
  out.K00 = ap->K[1].value(zero).real();
  if (out.resonance.empty()) {
    out.region = RegionCase::NonResonant;
    return out;
  }
  out.region = RegionCase::Resonant;
  Projection P = project_k(m, I, out.resonance);
  out.gamma = P.point;
  const int j = out.order;
  if (j > order) throw std::domain_error("averaging order below the activation order of the resonance");
  for (const auto& [mm, c] : ap->step[j - 1].Kbar.modes()) {
    if (k_is_zero(mm)) continue;
    // multiples of the resonance index
    int p = 0;
    bool multiple = true;
    for (std::size_t i = 0; i < mm.size(); ++i) {
      if (out.resonance[i] == 0) {
        if (mm[i] != 0) multiple = false;
        continue;
      }
      if (mm[i] % out.resonance[i] != 0) {
        multiple = false;
        break;
      }
      int q = mm[i] / out.resonance[i];
      if (p == 0) p = q;
      if (q != p) multiple = false;
    }
    if (multiple && p != 0) out.U[p] += c.c0();
  }
  return out;
}

}  // namespace resonet
