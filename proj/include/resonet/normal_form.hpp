#pragma once

#include <map>
#include <vector>

#include "resonet/averaging.hpp"
#include "resonet/resonance.hpp"

namespace resonet {

struct NormalFormOptions {
  int scan = 1024;
  double beta_min = 1e-8;  // smallest accepted |U*''| at the saddle
};

// Pendulum-like normal form a y^2/2 + eps^j U*(theta) at a secular resonance, theta = k0.phi + l0 s.
struct NormalForm {
  Mode kl;
  int order = 1;
  int slot = 0;  // m: component of k0 eliminated by the hat coordinates
  Vec k0;
  Vec Ehat;      // d-1 entries
  Vec Bstar;     // point of the resonance on the line (Ehat, 0) + t k0
  double a = 0.0;
  std::map<int, cplx> U;  // Fourier coefficients of U*
  double saddle = 0.0;
  double U_saddle = 0.0;
  double U2_saddle = 0.0;
  int maxima = 0;  // local maxima of a*U* found by the scan

  double U_at(double theta) const;
  double dU(double theta) const;
  double ddU(double theta) const;
  double E_star(double eps) const;
  // sqrt((2/a)(E_m - eps^j U*(theta))); NaN where the root is imaginary
  double ell(double theta, double Em, double eps) const;
  // scaled version with E_m = eps^j e_m
  double ell_bar(double theta, double em) const;
  // leading-order level function a y^2/2 + eps^j U*(theta)
  double level(double y, double theta, double eps) const;
  double y_of(const Vec& I) const;
  Vec point(double y) const { return Bstar + y * k0; }
};

int resonant_slot(const Mode& kl);
// Ehat = Ihat - (I_m / k0_m) k0hat
Vec resonant_hat(const Mode& kl, int slot, const Vec& I);
Vec resonant_embed(const Mode& kl, int slot, const Vec& Ehat);  // (Ehat with 0 in slot m)
// k0^T D^2h k0 at I
double quasiconvexity(const Model& m, const Mode& kl, const Vec& I);

// Throws ModelError("H5") when a vanishes or the projection is tangent, ModelError("H6") when the
// saddle is not a unique nondegenerate extremum.
NormalForm resonant_normal_form(const Averager& avg, const Resonance& r, const Vec& Ehat,
                                const NormalFormOptions& opt = {});

// Leading-order resonant chart F = (Ehat, E_m) at (I, theta) with theta = k0.phi + l0 s.
struct ResonantLevel {
  Vec Ehat;
  double Em = 0.0;
  double y = 0.0;
};
ResonantLevel resonant_chart(const Averager& avg, const Resonance& r, const Vec& I, double theta, double eps);

}  // namespace resonet
