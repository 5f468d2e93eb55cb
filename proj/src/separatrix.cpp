#include "resonet/separatrix.hpp"
#include <algorithm>
#include <functional>

#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <numbers>

namespace resonet {

namespace odeint = boost::numeric::odeint;

std::pair<double, double> standard_separatrix(double tau, int branch) {
  double p = 2.0 / std::cosh(tau);
  double q = 4.0 * std::atan(std::exp(tau));
  return branch >= 0 ? std::make_pair(p, q) : std::make_pair(-p, -q);
}

bool is_standard_pendulum(const Expr& V) {
  Compiled c(V, {"q1"});
  for (int i = -7; i <= 7; ++i) {
    double q = 0.913 * i + 0.1;
    if (std::abs(c(&q) - (std::cos(q) - 1.0)) > 1e-14) return false;
  }
  return true;
}

Homoclinic Homoclinic::standard(int branch, int sign) {
  Homoclinic h;
  h.branch_ = branch >= 0 ? 1 : -1;
  h.sign_ = sign >= 0 ? 1 : -1;
  h.alpha_ = h.alpha1_ = 1.0;
  h.q_plus_ = h.branch_ * 2 * std::numbers::pi;
  h.analytic_ = true;
  return h;
}

std::pair<double, double> Homoclinic::Segment::eval(double t) const {
  const int n = static_cast<int>(q.size());
  double x = (t - t0) / h;
  int i = static_cast<int>(std::floor(x));
  if (i < 0) i = 0;
  if (i > n - 2) i = n - 2;
  double u = x - i;
  double u2 = u * u, u3 = u2 * u, u4 = u3 * u, u5 = u4 * u;
  double H0 = 1 - 10 * u3 + 15 * u4 - 6 * u5;
  double H1 = u - 6 * u3 + 8 * u4 - 3 * u5;
  double H2 = 0.5 * (u2 - 3 * u3 + 3 * u4 - u5);
  double H3 = 0.5 * (u3 - 2 * u4 + u5);
  double H4 = -4 * u3 + 7 * u4 - 3 * u5;
  double H5 = 10 * u3 - 15 * u4 + 6 * u5;
  double hh = h * h;
  double qq = H0 * q[i] + H1 * h * dq[i] + H2 * hh * ddq[i] + H3 * hh * ddq[i + 1] + H4 * h * dq[i + 1] + H5 * q[i + 1];
  double pp = H0 * p[i] + H1 * h * dp[i] + H2 * hh * ddp[i] + H3 * hh * ddp[i + 1] + H4 * h * dp[i + 1] + H5 * p[i + 1];
  return {pp, qq};
}

std::pair<double, double> Homoclinic::base(double tau) const {
  if (analytic_) {
    return standard_separatrix(tau, branch_);
  }
  if (loop_ && tau > 0) {
    auto [p, q] = base(-tau);
    return {-p, q};
  }
  if (tau < left_.t0) {
    double f = std::exp(alpha_ * (tau - tail_l_t_));
    return {tail_l_p_ * f, tail_l_q_ * f};
  }
  if (tau <= 0 || loop_) return left_.eval(tau);
  double tend = right_.t0 + right_.h * static_cast<double>(right_.q.size() - 1);
  if (tau > tend) {
    double f = std::exp(-alpha1_ * (tau - tail_r_t_));
    return {tail_r_p_ * f, q_plus_ + (tail_r_q_ - q_plus_) * f};
  }
  return right_.eval(tau);
}

std::pair<double, double> Homoclinic::operator()(double tau) const {
  auto [p, q] = base(tau);
  return {sign_ * p, q};
}

double Homoclinic::T_cut(double tol) const {
  if (analytic_) return std::acosh(std::max(1.0, 2.0 / tol));
  double tl = tail_l_t_ + std::log(tol / std::abs(tail_l_p_)) / alpha_;
  double tr;
  if (loop_)
    tr = -tl;
  else
    tr = tail_r_t_ - std::log(tol / std::abs(tail_r_p_)) / alpha1_;
  return std::max({std::abs(tl), std::abs(tr), 1.0});
}

namespace {

using State = std::array<double, 2>;  // (q, p)

struct PendulumField {
  const Compiled* dV;
  void operator()(const State& y, State& dy, double) const {
    double q = y[0];
    dy[0] = y[1];
    dy[1] = -(*dV)(&q);
  }
};

struct Sampler {
  const Compiled* dV;
  const Compiled* ddV;
  double h;
  std::vector<double> t, q, p;

  void push(double tt, const State& y) {
    t.push_back(tt);
    q.push_back(y[0]);
    p.push_back(y[1]);
  }
};

void fill_derivs(const Compiled& dV, const Compiled& ddV, const std::vector<double>& q, const std::vector<double>& p,
                 std::vector<double>& dq, std::vector<double>& dp, std::vector<double>& ddq, std::vector<double>& ddp) {
  const std::size_t n = q.size();
  dq.resize(n);
  dp.resize(n);
  ddq.resize(n);
  ddp.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double qi = q[i];
    double v1 = dV(&qi), v2 = ddV(&qi);
    dq[i] = p[i];
    dp[i] = -v1;
    ddq[i] = -v1;
    ddp[i] = -v2 * p[i];
  }
}

// Integrates from y0 in steps of dt (sign gives direction) until stop(prev, cur) or max_steps.
template <class Stop>
void march(const Compiled& dV, State y, double dt, int max_steps, Sampler& s, Stop stop) {
  auto stepper = odeint::make_controlled(1e-16, 1e-13, odeint::runge_kutta_fehlberg78<State>());
  PendulumField f{&dV};
  double t = 0;
  s.push(t, y);
  for (int k = 0; k < max_steps; ++k) {
    State prev = y;
    odeint::integrate_adaptive(stepper, f, y, t, t + dt, dt);
    t += dt;
    s.push(t, y);
    if (stop(prev, y)) {
      // two more samples so interpolation brackets the event
      for (int e = 0; e < 2; ++e) {
        odeint::integrate_adaptive(stepper, f, y, t, t + dt, dt);
        t += dt;
        s.push(t, y);
      }
      return;
    }
  }
  throw SeparatrixError("no return to p = 0 within the search window (orbit not homoclinic at this level)");
}

}  // namespace

Homoclinic numeric_homoclinic(const Expr& V, int branch, double /*tol*/, int sign) {
  Compiled Vc(V, {"q1"}), dVc(diff(V, "q1"), {"q1"}), ddVc(diff(diff(V, "q1"), "q1"), {"q1"});
  const int b = branch >= 0 ? 1 : -1;
  double z = 0;
  const double V0 = Vc(&z);
  const double v2 = ddVc(&z);
  if (!(v2 < 0)) throw SeparatrixError("saddle degenerate: V''(0) >= 0");
  if (std::abs(dVc(&z)) > 1e-12) throw SeparatrixError("V'(0) != 0");
  Homoclinic H;
  H.analytic_ = false;
  H.branch_ = b;
  H.sign_ = sign >= 0 ? 1 : -1;
  H.alpha_ = std::sqrt(-v2);

  // locate the far end of the level set {p^2/2 + V = V(0)} along direction b
  auto g = [&](double u) {
    double q = b * u;
    return V0 - Vc(&q);
  };
  double gmax = 0;
  const double du = 1e-3;
  double u_end = -1;
  bool saddle = false;
  double gprev = g(du), gcur = g(2 * du);
  for (double u = 3 * du; u < 200.0; u += du) {
    double gn = g(u);
    gmax = std::max(gmax, gn);
    if (gn < 0) {
      double a = u - du, c = u;
      for (int it = 0; it < 200; ++it) {
        double m = 0.5 * (a + c);
        (g(m) > 0 ? a : c) = m;
      }
      u_end = 0.5 * (a + c);
      break;
    }
    if (gcur <= gprev && gcur <= gn && gcur < 1e-6 * std::max(gmax, 1e-300)) {
      // near-tangency: refine the critical point of V
      double a = u - 2 * du, c = u;
      auto dv = [&](double uu) {
        double q = b * uu;
        return b * dVc(&q);
      };
      for (int it = 0; it < 200; ++it) {
        double m = 0.5 * (a + c);
        (dv(a) * dv(m) <= 0 ? c : a) = m;
      }
      double us = 0.5 * (a + c);
      if (std::abs(g(us)) < 1e-11 * std::max(1.0, gmax)) {
        u_end = us;
        saddle = true;
        break;
      }
    }
    gprev = gcur;
    gcur = gn;
  }
  if (u_end < 0) throw SeparatrixError("no return to p = 0 within the search window (orbit not homoclinic at this level)");
  const double q1 = b * u_end;
  H.loop_ = !saddle;
  H.q_plus_ = saddle ? q1 : 0.0;
  if (saddle) {
    double v2b = ddVc(&q1);
    if (!(v2b < 0)) throw SeparatrixError("far saddle degenerate");
    H.alpha1_ = std::sqrt(-v2b);
  } else {
    H.alpha1_ = H.alpha_;
  }

  const double delta0 = 1e-8;
  const double h = 0.01;
  const int max_steps = 400000;

  auto refine = [&](const Sampler& s, const std::function<double(double, double)>& F) {
    // event time inside the last bracket using cubic-in-time Hermite of (q, p)
    std::size_t n = s.t.size();
    for (std::size_t i = 1; i < n; ++i) {
      double f0 = F(s.q[i - 1], s.p[i - 1]), f1 = F(s.q[i], s.p[i]);
      if (f0 == 0) return s.t[i - 1];
      if (f0 * f1 < 0) {
        Homoclinic::Segment seg;
        seg.t0 = s.t[i - 1];
        seg.h = s.t[i] - s.t[i - 1];
        seg.q = {s.q[i - 1], s.q[i]};
        seg.p = {s.p[i - 1], s.p[i]};
        fill_derivs(dVc, ddVc, seg.q, seg.p, seg.dq, seg.dp, seg.ddq, seg.ddp);
        double a = s.t[i - 1], c = s.t[i];
        for (int it = 0; it < 200; ++it) {
          double m = 0.5 * (a + c);
          auto [pm, qm] = seg.eval(m);
          double fm = F(qm, pm);
          if ((fm < 0) == (f0 < 0))
            a = m;
          else
            c = m;
        }
        return 0.5 * (a + c);
      }
    }
    throw SeparatrixError("event not bracketed");
  };

  auto make_segment = [&](const Sampler& s, double shift, bool reverse) {
    Homoclinic::Segment seg;
    std::vector<double> t = s.t, q = s.q, p = s.p;
    if (reverse) {
      std::reverse(t.begin(), t.end());
      std::reverse(q.begin(), q.end());
      std::reverse(p.begin(), p.end());
    }
    seg.t0 = t.front() - shift;
    seg.h = t[1] - t[0];
    seg.q = q;
    seg.p = p;
    fill_derivs(dVc, ddVc, seg.q, seg.p, seg.dq, seg.dp, seg.ddq, seg.ddp);
    return seg;
  };

  // unstable branch out of the origin
  Sampler fw{&dVc, &ddVc, h, {}, {}, {}};
  State y0{b * delta0, b * H.alpha_ * delta0};
  double tm;
  if (saddle) {
    march(dVc, y0, h, max_steps, fw, [&](const State& a, const State& c) {
      double qa = a[0], qc = c[0];
      return dVc(&qa) * b < 0 && dVc(&qc) * b >= 0;
    });
    tm = refine(fw, [&](double q, double) { return dVc(&q) * b; });
  } else {
    march(dVc, y0, h, max_steps, fw, [&](const State& a, const State& c) { return a[1] * c[1] <= 0; });
    tm = refine(fw, [&](double, double p) { return p; });
  }
  H.left_ = make_segment(fw, tm, false);
  H.tail_l_t_ = H.left_.t0;
  H.tail_l_q_ = H.left_.q.front();
  H.tail_l_p_ = H.left_.p.front();

  if (saddle) {
    Sampler bw{&dVc, &ddVc, -h, {}, {}, {}};
    State y1{q1 - b * delta0, b * H.alpha1_ * delta0};
    march(dVc, y1, -h, max_steps, bw, [&](const State& a, const State& c) {
      double qa = a[0], qc = c[0];
      return dVc(&qa) * b > 0 && dVc(&qc) * b <= 0;
    });
    // times are negative and decreasing; flip to increasing order
    Sampler inc = bw;
    std::reverse(inc.t.begin(), inc.t.end());
    std::reverse(inc.q.begin(), inc.q.end());
    std::reverse(inc.p.begin(), inc.p.end());
    double tm2 = refine(inc, [&](double q, double) { return dVc(&q) * b; });
    H.right_ = make_segment(inc, tm2, false);
    H.tail_r_t_ = H.right_.t0 + H.right_.h * static_cast<double>(H.right_.q.size() - 1);
    H.tail_r_q_ = H.right_.q.back();
    H.tail_r_p_ = H.right_.p.back();
    auto l0 = H.left_.eval(0.0);
    auto r0 = H.right_.eval(0.0);
    H.junction_err_ = std::max(std::abs(l0.first - r0.first), std::abs(l0.second - r0.second));
  }
  return H;
}

ProductSeparatrix::ProductSeparatrix(const Model& m, bool force_numeric) {
  for (int j = 0; j < m.n(); ++j) {
    Expr V = m.V_expr(j);
    Expr Vq1 = substitute(V, std::map<std::string, Expr>{{"q" + std::to_string(j + 1), Expr::var("q1")}});
    int sg = m.pendulum_sign(j);
    if (!force_numeric && is_standard_pendulum(Vq1))
      h_.push_back(Homoclinic::standard(+1, sg));
    else
      h_.push_back(numeric_homoclinic(Vq1, +1, 1e-12, sg));
  }
}

void ProductSeparatrix::eval(const double* tau, double* p, double* q) const {
  for (std::size_t j = 0; j < h_.size(); ++j) {
    auto [pp, qq] = h_[j](tau[j]);
    p[j] = pp;
    q[j] = qq;
  }
}

std::pair<Vec, Vec> ProductSeparatrix::operator()(const Vec& tau) const {
  Vec p(n()), q(n());
  eval(tau.data(), p.data(), q.data());
  return {p, q};
}

double ProductSeparatrix::T_cut(double tol) const {
  double t = 0;
  for (const auto& h : h_) t = std::max(t, h.T_cut(tol));
  return t;
}

double ProductSeparatrix::min_alpha() const {
  double a = 1e300;
  for (const auto& h : h_) a = std::min({a, h.alpha(), h.alpha_forward()});
  return a;
}

}  // namespace resonet
