#include "resonet/field.hpp"

#include <cmath>

namespace resonet {

void LocalField::add(const Mode& m, const CJet& c) {
  auto it = modes_.find(m);
  if (it == modes_.end())
    modes_.emplace(m, c);
  else
    it->second += c;
}

CJet LocalField::coeff(const Mode& m) const {
  auto it = modes_.find(m);
  return it == modes_.end() ? CJet(sp_) : it->second;
}

cplx LocalField::value(const Mode& m) const {
  auto it = modes_.find(m);
  return it == modes_.end() ? cplx(0) : it->second.c0();
}

LocalField& LocalField::operator+=(const LocalField& o) {
  for (const auto& [m, c] : o.modes_) add(m, c);
  return *this;
}

LocalField& LocalField::operator-=(const LocalField& o) {
  for (const auto& [m, c] : o.modes_) add(m, -c);
  return *this;
}

LocalField LocalField::scaled(cplx s) const {
  LocalField r = *this;
  for (auto& [m, c] : r.modes_) c *= s;
  return r;
}

double LocalField::eval(const Vec& phi, double s) const {
  cplx acc = 0;
  for (const auto& [m, c] : modes_) {
    double th = m[d_] * s;
    for (int i = 0; i < d_; ++i) th += m[i] * phi[i];
    acc += c.c0() * std::polar(1.0, th);
  }
  return acc.real();
}

double LocalField::eval_at(const Vec& dI, const Vec& phi, double s) const {
  cplx acc = 0;
  for (const auto& [m, c] : modes_) {
    double th = m[d_] * s;
    for (int i = 0; i < d_; ++i) th += m[i] * phi[i];
    acc += c.eval_offset(dI) * std::polar(1.0, th);
  }
  return acc.real();
}

LocalField LocalField::dphi(int i) const {
  LocalField r(d_, sp_, base_);
  for (const auto& [m, c] : modes_)
    if (m[i]) r.modes_.emplace(m, c * cplx(0, m[i]));
  return r;
}

LocalField LocalField::dI(int i) const {
  LocalField r(d_, sp_, base_);
  for (const auto& [m, c] : modes_) r.modes_.emplace(m, c.derivative(i));
  return r;
}

void LocalField::prune(double tol) {
  for (auto it = modes_.begin(); it != modes_.end();) {
    if (it->second.max_abs() <= tol)
      it = modes_.erase(it);
    else
      ++it;
  }
}

double LocalField::max_abs_value() const {
  double r = 0;
  for (const auto& [m, c] : modes_) r = std::max(r, std::abs(c.c0()));
  return r;
}

double LocalField::max_abs() const {
  double r = 0;
  for (const auto& [m, c] : modes_) r = std::max(r, c.max_abs());
  return r;
}

double LocalField::reality_defect() const {
  double r = 0;
  for (const auto& [m, c] : modes_) {
    CJet o = coeff(mode_neg(m));
    for (int i = 0; i < sp_->size(); ++i) r = std::max(r, std::abs(c[i] - std::conj(o[i])));
  }
  return r;
}

LocalField bracket(const LocalField& A, const LocalField& B) {
  const int d = A.d();
  LocalField r(d, A.space(), A.base());
  if (A.empty() || B.empty()) return r;
  // precompute I-derivatives
  std::map<Mode, std::vector<CJet>> dA, dB;
  for (const auto& [m, c] : A.modes()) {
    auto& v = dA[m];
    for (int i = 0; i < d; ++i) v.push_back(c.derivative(i));
  }
  for (const auto& [m, c] : B.modes()) {
    auto& v = dB[m];
    for (int i = 0; i < d; ++i) v.push_back(c.derivative(i));
  }
  for (const auto& [ma, ca] : A.modes()) {
    const auto& da = dA[ma];
    for (const auto& [mb, cb] : B.modes()) {
      const auto& db = dB[mb];
      // i k_a A * dB/dI - dA/dI * i k_b B
      CJet term(A.space());
      bool any = false;
      for (int i = 0; i < d; ++i) {
        if (ma[i]) {
          term += (ca * db[i]) * cplx(0, ma[i]);
          any = true;
        }
        if (mb[i]) {
          term -= (da[i] * cb) * cplx(0, mb[i]);
          any = true;
        }
      }
      if (any) r.add(mode_add(ma, mb), term);
    }
  }
  return r;
}

std::vector<RJet> action_variables(const SpacePtr& sp, const Vec& base) {
  std::vector<RJet> I;
  for (int i = 0; i < base.size(); ++i) I.push_back(RJet::variable(sp, i, base[i]));
  return I;
}

std::vector<CJet> omega_jets(const Model& m, const Vec& base, const SpacePtr& sp) {
  auto I = action_variables(sp, base);
  std::vector<CJet> w;
  for (int i = 0; i < m.d(); ++i) w.push_back(CJet::from(m.omega_of(i, I)));
  return w;
}

CJet divisor_jet(const std::vector<CJet>& omega, const Mode& m) {
  const int d = static_cast<int>(omega.size());
  CJet D(omega[0].space(), cplx(m[d]));
  for (int i = 0; i < d; ++i)
    if (m[i]) D += omega[i] * cplx(m[i]);
  return D;
}

LocalField htilde_bracket(const std::vector<CJet>& omega, const LocalField& G) {
  LocalField r(G.d(), G.space(), G.base());
  for (const auto& [m, c] : G.modes()) {
    if (mode_is_zero(m)) continue;
    r.set(m, (divisor_jet(omega, m) * c) * cplx(0, -1));
  }
  return r;
}

LocalField field_from_terms(const Model& m, const std::vector<FourierTerm>& terms, const Vec& base,
                            const SpacePtr& sp) {
  const int d = m.d();
  LocalField f(d, sp, base);
  std::vector<std::string> slots;
  for (int i = 1; i <= d; ++i) slots.push_back("I" + std::to_string(i));
  auto I = action_variables(sp, base);
  for (const auto& t : terms) {
    Compiled c(t.coeff, slots);
    CJet cj = CJet::from(c(I.data()));
    if (mode_is_zero(t.kl)) {
      if (t.basis == Basis::Cos) f.add(t.kl, cj);
      continue;
    }
    if (t.basis == Basis::Cos) {
      f.add(t.kl, cj * cplx(0.5));
      f.add(mode_neg(t.kl), cj * cplx(0.5));
    } else {
      f.add(t.kl, cj * cplx(0, -0.5));
      f.add(mode_neg(t.kl), cj * cplx(0, 0.5));
    }
  }
  return f;
}

}  // namespace resonet
