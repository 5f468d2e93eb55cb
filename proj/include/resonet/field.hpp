#pragma once

#include <complex>
#include <map>
#include <vector>

#include "resonet/jet.hpp"
#include "resonet/mode.hpp"
#include "resonet/model.hpp"

namespace resonet {

using cplx = std::complex<double>;

// Trigonometric polynomial sum_m c_m(I) e^{i(k.phi + l s)} with coefficients as Taylor jets in I
// about a base point. Real fields carry both m and -m with conjugate coefficients.
class LocalField {
 public:
  LocalField() = default;
  LocalField(int d, SpacePtr sp, Vec base) : d_(d), sp_(std::move(sp)), base_(std::move(base)) {}

  int d() const { return d_; }
  const SpacePtr& space() const { return sp_; }
  const Vec& base() const { return base_; }
  const std::map<Mode, CJet>& modes() const { return modes_; }
  bool empty() const { return modes_.empty(); }

  void add(const Mode& m, const CJet& c);
  void set(const Mode& m, const CJet& c) { modes_[m] = c; }
  void erase(const Mode& m) { modes_.erase(m); }
  CJet coeff(const Mode& m) const;
  cplx value(const Mode& m) const;  // coefficient at the base point
  bool has(const Mode& m) const { return modes_.count(m) > 0; }

  LocalField& operator+=(const LocalField& o);
  LocalField& operator-=(const LocalField& o);
  LocalField scaled(cplx s) const;

  // Real value sum_m c_m(base + dI) e^{i(k.phi + l s)}.
  double eval(const Vec& phi, double s) const;
  double eval_at(const Vec& dI, const Vec& phi, double s) const;
  // d/dphi_i as a field.
  LocalField dphi(int i) const;
  // d/dI_i as a field (loses top jet degree).
  LocalField dI(int i) const;
  void prune(double tol);
  double max_abs_value() const;  // max |c_m(base)|
  double max_abs() const;        // max over all jet coefficients
  // max |c_m - conj(c_{-m})| over modes: zero for real fields
  double reality_defect() const;

 private:
  int d_ = 0;
  SpacePtr sp_;
  Vec base_;
  std::map<Mode, CJet> modes_;
};

// {A,B} = sum_i dA/dphi_i dB/dI_i - dA/dI_i dB/dphi_i (fields carry no E dependence).
LocalField bracket(const LocalField& A, const LocalField& B);

// Jets of omega_i(I) about the field base.
std::vector<CJet> omega_jets(const Model& m, const Vec& base, const SpacePtr& sp);
// {h~, G} with h~ = E + h(I): mode m gets -i(omega.k + l) G_m.
LocalField htilde_bracket(const std::vector<CJet>& omega, const LocalField& G);
// Jet of omega.k + l.
CJet divisor_jet(const std::vector<CJet>& omega, const Mode& m);

// Terms with coefficients in I only (p = q = 0 already substituted).
LocalField field_from_terms(const Model& m, const std::vector<FourierTerm>& terms, const Vec& base,
                            const SpacePtr& sp);

std::vector<RJet> action_variables(const SpacePtr& sp, const Vec& base);

}  // namespace resonet
