#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "resonet/field.hpp"
#include "resonet/model.hpp"
#include "resonet/separatrix.hpp"

namespace resonet {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Adaptive Gauss-Kronrod 15 on [a, b] for a vector integrand f(x, out[dim]).
// Panels start no wider than max_panel; returns the error estimate (max component) in *err.
std::vector<double> integrate_gk15(const std::function<void(double, double*)>& f, int dim, double a, double b,
                                   double max_panel, double tol, double* err = nullptr, int max_panels = 200000);

struct MelnikovOptions {
  double tail_tol = 1e-12;  // truncate where every |p*_j| falls below this
  double abs_tol = 1e-10;
  double fd_step = 1e-4;    // tau and angle differences for n >= 2
  double degenerate_tol = 1e-9;  // |d2L/dtau2| relative to its scale
  double tau_range = 0.0;        // first-crest search half-width; 0 picks one from the frequencies
};

// Value and derivatives of tau -> L(tau, I, theta, s) at fixed I.
struct PoincareDerivs {
  double L = 0.0;
  Vec tau;        // dL/dtau
  Mat tautau;     // n x n
  Vec theta;      // dL/dphi
  Mat thetatheta; // d x d
  Mat tautheta;   // n x d
  Vec I;          // dL/dI (explicit)
};

class PoincareFunction {
 public:
  virtual ~PoincareFunction() = default;
  virtual int n() const = 0;
  virtual double value(const Vec& tau, const Vec& theta, double s) const = 0;
  virtual PoincareDerivs derivs(const Vec& tau, const Vec& theta, double s, bool with_I = true) const = 0;
  // largest |d/dtau| frequency present; 0 if L does not depend on tau
  virtual double max_frequency() const = 0;
  virtual double min_frequency() const = 0;
  // scale of L (sum of term amplitudes)
  virtual double scale() const = 0;
};

// One pendulum: L = Re sum_t W_t e^{i(k.phi + l s - nu_t tau)} with W_t from two quadratures per term.
struct HarmonicTerm {
  Mode kl;
  double nu = 0.0;
  cplx W;
  Vec dnu;               // d nu / dI
  std::vector<cplx> dW;  // dW / dI
};

class HarmonicPoincare : public PoincareFunction {
 public:
  HarmonicPoincare(int d, std::vector<HarmonicTerm> terms, double error);
  int n() const override { return 1; }
  double value(const Vec& tau, const Vec& theta, double s) const override;
  PoincareDerivs derivs(const Vec& tau, const Vec& theta, double s, bool with_I = true) const override;
  double max_frequency() const override;
  double min_frequency() const override;
  double scale() const override;
  const std::vector<HarmonicTerm>& terms() const { return terms_; }
  double error() const { return err_; }

 private:
  int d_;
  std::vector<HarmonicTerm> terms_;
  double err_;
};

struct CriticalTau {
  bool ok = false;
  Vec tau;
  Mat hessian;
  double residual = 0.0;
  double condition = 0.0;
  int iterations = 0;
  std::string failure;
};

struct ReducedPoincare {
  bool ok = false;
  double value = 0.0;
  Vec grad_theta, grad_I;
  Mat hess_theta;
  Vec tau;
  Mat tau_hessian;
  std::string failure;
};

class Melnikov {
 public:
  explicit Melnikov(const Model& m, MelnikovOptions opt = {});

  const Model& model() const { return *m_; }
  const ProductSeparatrix& separatrix() const { return sep_; }
  const MelnikovOptions& options() const { return opt_; }
  bool degenerate() const { return active_.empty(); }  // Q does not feel the pendulum

  // -int [Q(I, phi + omega sigma, p*(tau+sigma), q*(tau+sigma), s + sigma) - Q(..., 0, 0, ...)] dsigma
  double L(const Vec& tau, const Vec& I, const Vec& phi, double s, double* err = nullptr) const;
  // Gradient in phi by quadrature of the phi-derivative of the integrand.
  Vec L_phi(const Vec& tau, const Vec& I, const Vec& phi, double s) const;

  // Representation at fixed I (harmonic for n = 1, quadrature otherwise); cached.
  std::shared_ptr<const PoincareFunction> at(const Vec& I) const;

  CriticalTau critical_tau(const Vec& I, const Vec& phi, double s, const Vec& guess) const;
  // Nondegenerate local maximum of tau -> L nearest to tau = 0.
  CriticalTau first_crest(const Vec& I, const Vec& phi, double s) const;
  ReducedPoincare reduced(const Vec& I, const Vec& theta) const;

 private:
  std::shared_ptr<const PoincareFunction> build(const Vec& I) const;
  void window(const Vec& tau, double* lo, double* hi) const;

  const Model* m_;
  MelnikovOptions opt_;
  ProductSeparatrix sep_;
  std::vector<int> active_;  // order-1 terms whose coefficient depends on p or q
  double T_;
  mutable std::mutex mu_;
  mutable std::map<std::vector<double>, std::shared_ptr<const PoincareFunction>> cache_;
};

CriticalTau first_crest(const PoincareFunction& P, const Vec& theta, double s, const MelnikovOptions& opt);
CriticalTau newton_tau(const PoincareFunction& P, const Vec& theta, double s, const Vec& guess);

// Models whose order-1 terms are a_t cos(q1) trig(k.phi + l s) with V = cos q - 1: amplitudes a_t.
std::optional<std::vector<double>> residue_family(const Model& m);
// Closed form L = sum_t A_t trig(k.(phi - omega tau) + l (s - tau)), A = 2 pi nu a / sinh(pi nu / 2).
double residue_L(const Model& m, const std::vector<double>& a, double tau, const Vec& I, const Vec& phi, double s);
double residue_amplitude(double nu, double a);

struct CrestPoint {
  Vec phi;
  bool max_crest = true;  // omega^T D^2 L omega < 0
  double curvature = 0.0;
  double residual = 0.0;
};

// Roots of sum_t nu_t A_t sin(k.phi + l s) = 0 over phi1 slices (d = 2, residue family).
std::vector<CrestPoint> crest(const Model& m, const Vec& I, double s, int slices = 256);

}  // namespace resonet
