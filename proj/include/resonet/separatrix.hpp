#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "resonet/expr.hpp"
#include "resonet/model.hpp"

namespace resonet {

class SeparatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// (p0, q0) of p^2/2 + cos q - 1 = 0; branch +1 runs q: 0 -> 2pi, branch -1 runs q: 0 -> -2pi.
std::pair<double, double> standard_separatrix(double tau, int branch = +1);

// Homoclinic orbit of q' = sign p, p' = -sign V'(q), anchored at tau = 0 on the symmetry point
// (maximum of |p| for orbits joining two saddles, the turning point for loops).
class Homoclinic {
 public:
  int branch() const { return branch_; }
  int pendulum_sign() const { return sign_; }
  double alpha() const { return alpha_; }
  double alpha_forward() const { return alpha1_; }
  double q_minus() const { return 0.0; }
  double q_plus() const { return q_plus_; }
  bool analytic() const { return analytic_; }
  bool is_loop() const { return loop_; }
  // Half-width beyond which |p*| < tol.
  double T_cut(double tol) const;
  std::pair<double, double> operator()(double tau) const;  // (p, q)
  double p(double tau) const { return (*this)(tau).first; }
  double q(double tau) const { return (*this)(tau).second; }
  // Mismatch between the two integrated halves at tau = 0.
  double junction_error() const { return junction_err_; }

  static Homoclinic standard(int branch = +1, int sign = +1);
  friend Homoclinic numeric_homoclinic(const Expr& V, int branch, double tol, int sign);

 private:
  struct Segment {
    double t0 = 0, h = 0;
    std::vector<double> q, p, dq, dp, ddq, ddp;
    bool covers(double t) const { return t >= t0 && t <= t0 + h * static_cast<double>(q.size() - 1); }
    std::pair<double, double> eval(double t) const;
  };
  std::pair<double, double> base(double tau) const;

  int branch_ = 1, sign_ = 1;
  double alpha_ = 1, alpha1_ = 1;
  double q_plus_ = 2 * 3.14159265358979323846;
  bool analytic_ = true, loop_ = false;
  double scale_ = 1.0;  // tau scaling for standard shape
  Segment left_, right_;
  double tail_l_q_ = 0, tail_l_p_ = 0, tail_l_t_ = 0;
  double tail_r_q_ = 0, tail_r_p_ = 0, tail_r_t_ = 0;
  double junction_err_ = 0;
};

Homoclinic numeric_homoclinic(const Expr& V, int branch = +1, double tol = 1e-12, int sign = +1);

// One homoclinic per pendulum of a model; the analytic form is used when V = cos q - 1.
class ProductSeparatrix {
 public:
  explicit ProductSeparatrix(const Model& m, bool force_numeric = false);
  int n() const { return static_cast<int>(h_.size()); }
  const Homoclinic& operator[](int j) const { return h_[j]; }
  void eval(const double* tau, double* p, double* q) const;
  std::pair<Vec, Vec> operator()(const Vec& tau) const;
  double T_cut(double tol) const;
  double min_alpha() const;

 private:
  std::vector<Homoclinic> h_;
};

bool is_standard_pendulum(const Expr& V);

}  // namespace resonet
