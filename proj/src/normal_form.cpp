#include "resonet/normal_form.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace resonet {

namespace {

// p with mm = p * kl, or 0
int multiple_of(const Mode& mm, const Mode& kl) {
  int p = 0;
  for (std::size_t i = 0; i < mm.size(); ++i) {
    if (kl[i] == 0) {
      if (mm[i] != 0) return 0;
      continue;
    }
    if (mm[i] % kl[i] != 0) return 0;
    int q = mm[i] / kl[i];
    if (p == 0) p = q;
    if (q != p || q == 0) return 0;
  }
  return p;
}

}  // namespace

double NormalForm::U_at(double theta) const {
  cplx acc = 0;
  for (const auto& [p, c] : U) acc += c * std::polar(1.0, p * theta);
  return acc.real();
}

double NormalForm::dU(double theta) const {
  cplx acc = 0;
  for (const auto& [p, c] : U) acc += c * cplx(0, p) * std::polar(1.0, p * theta);
  return acc.real();
}

double NormalForm::ddU(double theta) const {
  cplx acc = 0;
  for (const auto& [p, c] : U) acc -= c * static_cast<double>(p * p) * std::polar(1.0, p * theta);
  return acc.real();
}

double NormalForm::E_star(double eps) const { return std::pow(eps, order) * U_saddle; }

double NormalForm::ell(double theta, double Em, double eps) const {
  double r = 2.0 / a * (Em - std::pow(eps, order) * U_at(theta));
  return r < 0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(r);
}

double NormalForm::ell_bar(double theta, double em) const {
  double r = 2.0 / a * (em - U_at(theta));
  return r < 0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(r);
}

double NormalForm::level(double y, double theta, double eps) const {
  return 0.5 * a * y * y + std::pow(eps, order) * U_at(theta);
}

double NormalForm::y_of(const Vec& I) const { return (I[slot] - Bstar[slot]) / k0[slot]; }

int resonant_slot(const Mode& kl) {
  int best = -1;
  for (std::size_t i = 0; i + 1 < kl.size(); ++i) {
    if (kl[i] == 0) continue;
    if (best < 0 || std::abs(kl[i]) < std::abs(kl[best])) best = static_cast<int>(i);
  }
  if (best < 0) throw std::invalid_argument("resonance index has k = 0");
  return best;
}

Vec resonant_hat(const Mode& kl, int slot, const Vec& I) {
  const int d = static_cast<int>(I.size());
  Vec E(d - 1);
  const double r = I[slot] / kl[slot];
  for (int i = 0, j = 0; i < d; ++i)
    if (i != slot) E[j++] = I[i] - r * kl[i];
  return E;
}

Vec resonant_embed(const Mode& kl, int slot, const Vec& Ehat) {
  const int d = static_cast<int>(kl.size()) - 1;
  Vec I = Vec::Zero(d);
  for (int i = 0, j = 0; i < d; ++i)
    if (i != slot) I[i] = Ehat[j++];
  return I;
}

double quasiconvexity(const Model& m, const Mode& kl, const Vec& I) {
  const int d = m.d();
  Vec k(d);
  for (int i = 0; i < d; ++i) k[i] = kl[i];
  return k.dot(m.hessian_h(I) * k);
}

NormalForm resonant_normal_form(const Averager& avg, const Resonance& r, const Vec& Ehat,
                                const NormalFormOptions& opt) {
  const Model& m = avg.model();
  const int d = m.d();
  NormalForm nf;
  nf.kl = r.kl;
  nf.order = r.order;
  nf.slot = resonant_slot(r.kl);
  nf.k0 = Vec(d);
  for (int i = 0; i < d; ++i) nf.k0[i] = r.kl[i];
  nf.Ehat = Ehat;
  const Vec base = resonant_embed(r.kl, nf.slot, Ehat);
  try {
    nf.Bstar = project_k(m, base, r.kl).point;
  } catch (const ProjectionError& e) {
    std::ostringstream os;
    os << "resonance " << mode_str(r.kl) << " is tangent to k0 (a = " << quasiconvexity(m, r.kl, base)
       << "): " << e.what();
    throw ModelError("H5", os.str());
  }
  nf.a = quasiconvexity(m, r.kl, nf.Bstar);
  if (std::abs(nf.a) < 1e-12) {
    std::ostringstream os;
    os << "a = " << nf.a << " at " << nf.Bstar.transpose() << " on " << mode_str(r.kl);
    throw ModelError("H5", os.str());
  }
  if (nf.order > avg.options().m0) throw std::invalid_argument("averaging order below the resonance order");
  auto ap = avg.average(nf.Bstar, nf.order);
  for (const auto& [mm, c] : ap->step[nf.order - 1].Kbar.modes()) {
    int p = multiple_of(mm, r.kl);
    if (p != 0) nf.U[p] += c.c0();
  }
  // saddle: maximum of sign(a) U*
  const double sg = nf.a > 0 ? 1.0 : -1.0;
  const int N = opt.scan;
  const double h = 2 * std::numbers::pi / N;
  std::vector<double> v(N);
  for (int i = 0; i < N; ++i) v[i] = sg * nf.U_at(i * h);
  double vmax = -std::numeric_limits<double>::infinity(), vmin = -vmax;
  int imax = 0;
  for (int i = 0; i < N; ++i) {
    if (v[i] > vmax) vmax = v[i], imax = i;
    vmin = std::min(vmin, v[i]);
  }
  const double flat = 1e-14 * std::max(1.0, std::abs(vmax));
  nf.maxima = 0;
  if (vmax - vmin > flat)
    for (int i = 0; i < N; ++i)
      if (v[i] > v[(i + N - 1) % N] && v[i] >= v[(i + 1) % N]) ++nf.maxima;
  double th = imax * h;
  for (int it = 0; it < 50; ++it) {
    double dd = nf.ddU(th);
    if (dd == 0) break;
    double step = nf.dU(th) / dd;
    th -= step;
    if (std::abs(step) < 1e-15) break;
  }
  th = std::remainder(th, 2 * std::numbers::pi);
  if (th < 0) th += 2 * std::numbers::pi;
  if (th >= 2 * std::numbers::pi) th = 0;
  nf.saddle = th;
  nf.U_saddle = nf.U_at(th);
  nf.U2_saddle = nf.ddU(th);
  if (nf.maxima != 1) {
    std::ostringstream os;
    os << mode_str(r.kl) << " at Ehat = " << Ehat.transpose() << ": " << nf.maxima
       << " local maxima of the resonant potential";
    throw ModelError("H6", os.str());
  }
  if (std::abs(nf.U2_saddle) < opt.beta_min || sg * nf.U2_saddle > 0) {
    std::ostringstream os;
    os << mode_str(r.kl) << " at Ehat = " << Ehat.transpose() << ": U*'' = " << nf.U2_saddle
       << " at the saddle";
    throw ModelError("H6", os.str());
  }
  return nf;
}

ResonantLevel resonant_chart(const Averager& avg, const Resonance& r, const Vec& I, double theta, double eps) {
  ResonantLevel out;
  const int slot = resonant_slot(r.kl);
  out.Ehat = resonant_hat(r.kl, slot, I);
  NormalForm nf = resonant_normal_form(avg, r, out.Ehat);
  out.y = nf.y_of(I);
  out.Em = nf.level(out.y, theta, eps);
  return out;
}

}  // namespace resonet
