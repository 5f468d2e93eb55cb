#pragma once

#include <string>
#include <vector>

#include "resonet/melnikov.hpp"
#include "resonet/normal_form.hpp"

namespace resonet {

struct ScatterPoint {
  bool ok = false;
  Vec I, theta;
  std::string failure;
};

// I' = I + eps dL*/dtheta, theta' = theta - eps dL*/dI at s = 0.
ScatterPoint scattering_map(const Melnikov& M, double eps, const Vec& I, const Vec& theta);

struct HeteroclinicOptions {
  int seeds = 16;        // per angle
  int max_iter = 60;
  double tol = 1e-13;    // Newton stop, relative to the scale of L
  double accept = 1e-8;  // largest residual of a returned solution
  double dedup = 1e-6;
  std::vector<Vec> starts;  // Newton starts (phi); empty for the seeds^d grid
};

struct HeteroclinicSolution {
  Vec theta;        // phi at s = 0
  double residual = 0.0;
  double det = 0.0;  // Jacobian determinant of the intersection equations
  int branch = 0;    // sign of y at the intersection (resonant chart)
};

// Solutions of dL*/dtheta (E, theta) = (E' - E) / eps.
std::vector<HeteroclinicSolution> heteroclinic_solve(const Melnikov& M, const Vec& E, const Vec& E2, double eps,
                                                     const HeteroclinicOptions& opt = {});

// Critical points of theta -> L*(I, theta): Newton from grid minima of |grad L*| and from grid cells where
// every gradient component changes sign. values, when given, holds L* on the grid (first angle fastest).
struct CriticalScan {
  std::vector<HeteroclinicSolution> points;
  std::vector<Vec> degenerate;  // seeds where grad L* vanishes with a singular Hessian
};
CriticalScan critical_points_scan(const Melnikov& M, const Vec& I, int grid = 32,
                                  const std::vector<ReducedPoincare>* values = nullptr);
std::vector<Vec> torus_grid(int d, int n);

// Angles (thetahat, theta_m) with theta_m = k0.phi (s = 0), thetahat = phi without slot m.
struct ResonantAngles {
  const NormalForm* nf;
  Vec phi(const Vec& Theta) const;
  Vec Theta(const Vec& phi) const;
  Mat T() const;  // dphi / dTheta
};

// L*_{k0,l0}(Theta) = L*(B*(Ehat), phi(Theta)) and derivatives in Theta.
struct ResonantReduced {
  bool ok = false;
  double value = 0.0;
  Vec grad;  // d entries, theta_m last
  Mat hess;
  std::string failure;
};
ResonantReduced resonant_reduced(const Melnikov& M, const NormalForm& nf, const Vec& Theta);

// 2 (e_m - U) det(block) - ...: the resonant nondegeneracy quantity, in the d-dimensional form whose d = 2 case is
// 2(e_m - U)[L_hh L_mm - L_hm^2] - L_hh L_m U'.
double resonant_condition(const NormalForm& nf, const ResonantReduced& R, double theta_m, double em);

// Level in the resonant chart: E_m = a y^2 / 2 + eps^j U*(theta_m); branch = sign y on rotational tori,
// 0 on librational ones.
struct ResonantTorus {
  Vec Ehat;
  double Em = 0.0;
  int branch = 0;
};

// Solutions of
//   d/dthetahat L*_{k0,l0} = (Ehat' - Ehat) / eps
//   sigma a ellbar d/dtheta_m L*_{k0,l0} = (E_m' - E_m) / eps^{1 + j/2}
// with ellbar from E_m = eps^j e_m, |theta_m - saddle| >= rho.  Returned theta is phi.
std::vector<HeteroclinicSolution> heteroclinic_solve_resonant(const Melnikov& M, const NormalForm& nf,
                                                              const ResonantTorus& from, const ResonantTorus& to,
                                                              double eps, double rho = 0.2,
                                                              const HeteroclinicOptions& opt = {});

// Scaled residual of the resonant system at phi for a given branch sign.
Vec resonant_residual(const Melnikov& M, const NormalForm& nf, const ResonantTorus& from, const ResonantTorus& to,
                      double eps, const Vec& phi, int sigma);

}  // namespace resonet
