#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "resonet/expr.hpp"
#include "resonet/jet.hpp"
#include "resonet/mode.hpp"

namespace resonet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class ModelError : public std::runtime_error {
 public:
  ModelError(std::string hypothesis, const std::string& what)
      : std::runtime_error(hypothesis.empty() ? what : hypothesis + ": " + what), hyp_(std::move(hypothesis)) {}
  const std::string& hypothesis() const { return hyp_; }

 private:
  std::string hyp_;
};

enum class Basis { Cos, Sin };

struct FourierTerm {
  Mode kl;  // k_1..k_d, l
  Basis basis = Basis::Cos;
  Expr coeff;  // in I*, p*, q*
  int order = 1;
};

struct PendulumSpec {
  std::string V;
  int sign = +1;
};

struct TermSpec {
  std::vector<int> k;
  int l = 0;
  std::string basis = "cos";
  std::string coeff;
  int order = 1;
  int line = 0;
};

struct ActionBox {
  std::vector<double> lo, hi;
  bool contains(const Vec& I, double pad = 0.0) const;
};

struct ModelConfig {
  int d = 0;
  std::string h;
  std::vector<PendulumSpec> pendula;
  std::vector<TermSpec> terms;
  std::map<std::string, double> params;
  ActionBox box;
  int grid = 33;
};

struct ExtendedState {
  Vec I, phi, p, q;
  double s = 0.0;
  void normalize();
};

struct StateDerivative {
  Vec I, phi, p, q;
  double s = 1.0;
};

// Canonical sign and merging of like terms; sin terms with flipped index change sign.
std::vector<FourierTerm> canonicalize(const std::vector<FourierTerm>& terms);
// Same Q after canonicalization (coefficients compared at fixed sample points).
bool equivalent(const std::vector<FourierTerm>& a, const std::vector<FourierTerm>& b, int d, int n);

class Model {
 public:
  int d() const { return d_; }
  int n() const { return n_; }
  const ActionBox& box() const { return box_; }
  int grid() const { return grid_; }
  const std::map<std::string, double>& params() const { return params_; }
  const std::vector<FourierTerm>& terms() const { return terms_; }
  const Expr& h_expr() const { return h_; }
  const Expr& V_expr(int j) const { return V_[j]; }
  int pendulum_sign(int j) const { return sign_[j]; }
  bool lambda_invariant() const { return lambda_invariant_; }
  bool h_quadratic() const { return h_quadratic_; }
  bool q_depends_on_actions() const { return q_dep_I_; }
  bool q_depends_on_momenta() const { return q_dep_p_; }
  int max_order() const;

  double h(const Vec& I) const;
  Vec frequency(const Vec& I) const;
  Mat hessian_h(const Vec& I) const;
  template <class T>
  T h_of(const std::vector<T>& I) const {
    return h_c_(I.data());
  }
  template <class T>
  T omega_of(int i, const std::vector<T>& I) const {
    return grad_c_[i](I.data());
  }
  template <class T>
  T hess_of(int i, int j, const std::vector<T>& I) const {
    return hess_c_[i * d_ + j](I.data());
  }

  double V(int j, double q) const;
  double dV(int j, double q) const;
  double ddV(int j, double q) const;
  double pendulum_energy(int j, double p, double q) const;  // sign*(p^2/2+V)

  // Coefficient of term t and its partial derivatives; x = (I, p, q) packed.
  double coeff(int t, const double* x) const { return tc_[t].c(x); }
  double coeff_dI(int t, int i, const double* x) const { return tc_[t].dI[i](x); }
  double coeff_dp(int t, int j, const double* x) const { return tc_[t].dp[j](x); }
  double coeff_dq(int t, int j, const double* x) const { return tc_[t].dq[j](x); }
  bool coeff_has_dI(int t, int i) const { return !tc_[t].dI[i].is_constant() || tc_[t].dI[i].constant_value() != 0; }
  template <class T>
  T coeff_of(int t, const std::vector<T>& x) const {
    return tc_[t].c(x.data());
  }
  const Expr& coeff_dI_expr(int t, int i) const { return tc_[t].dI_e[i]; }

  // Q(I,phi,p,q,s) summed with eps^order weights.
  double Q(const ExtendedState& x, double eps) const;
  double hamiltonian(const ExtendedState& x, double eps) const;
  StateDerivative vector_field(const ExtendedState& x, double eps) const;
  // flat y = [I(d), phi(d), p(n), q(n), E]; s is supplied separately.
  void rhs(const double* y, double s, double eps, double* dy) const;
  int flat_size() const { return 2 * d_ + 2 * n_ + 1; }

  // Terms of Q restricted to p=q=0 (coefficients are functions of I only).
  std::vector<FourierTerm> inner_terms(int order = 1) const;
  double inner_hamiltonian_k1(const Vec& I, const Vec& phi, double s) const;

  std::string describe() const;

  friend Model build_model(const ModelConfig& cfg);

 private:
  struct TermCode {
    Compiled c;
    std::vector<Compiled> dI, dp, dq;
    std::vector<Expr> dI_e;
    bool has_p = false, has_q = false;
  };
  int d_ = 0, n_ = 0;
  Expr h_;
  std::vector<Expr> grad_, hess_;
  Compiled h_c_;
  std::vector<Compiled> grad_c_, hess_c_;
  std::vector<Expr> V_;
  std::vector<Compiled> V_c_, dV_c_, ddV_c_;
  std::vector<int> sign_;
  std::vector<FourierTerm> terms_;
  std::vector<TermCode> tc_;
  std::map<std::string, double> params_;
  ActionBox box_;
  int grid_ = 33;
  bool lambda_invariant_ = true;
  bool h_quadratic_ = false;
  bool q_dep_I_ = false;
  bool q_dep_p_ = false;
};

Model build_model(const ModelConfig& cfg);

// Model file: [rotator] [pendulum.j] [perturbation] [params] [domain].
class ModelFileError : public std::runtime_error {
 public:
  ModelFileError(const std::string& what, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

ModelConfig parse_model_text(const std::string& text);
ModelConfig load_model_file(const std::string& path);
std::string model_config_text(const ModelConfig& cfg);

// Rotator pair h = Omega1 I1^2/2 + Omega2 I2^2/2, pendulum cos q - 1,
// Q = cos q (a1 cos phi1 + a2 cos phi2 + a3 cos(phi1 + phi2 - t)).
ModelConfig three_mode_config(double Omega1 = 1, double Omega2 = 1, double a1 = 1, double a2 = 1, double a3 = 1);

std::vector<std::string> slot_names(int d, int n);

}  // namespace resonet
