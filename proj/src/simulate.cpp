#include "resonet/simulate.hpp"

#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "resonet/scattering.hpp"

namespace resonet {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::vector<double>;
using Stepper = odeint::runge_kutta_fehlberg78<State>;

constexpr double kTwoPi = 2 * std::numbers::pi;

State pack(const Model& m, const ExtendedState& x, double E) {
  const int d = m.d(), n = m.n();
  State y(m.flat_size());
  for (int i = 0; i < d; ++i) {
    y[i] = x.I[i];
    y[d + i] = x.phi[i];
  }
  for (int j = 0; j < n; ++j) {
    y[2 * d + j] = x.p[j];
    y[2 * d + n + j] = x.q[j];
  }
  y[2 * d + 2 * n] = E;
  return y;
}

ExtendedState unpack(const Model& m, const State& y, double s) {
  const int d = m.d(), n = m.n();
  ExtendedState x;
  x.I.resize(d);
  x.phi.resize(d);
  x.p.resize(n);
  x.q.resize(n);
  for (int i = 0; i < d; ++i) {
    x.I[i] = y[i];
    x.phi[i] = y[d + i];
  }
  for (int j = 0; j < n; ++j) {
    x.p[j] = y[2 * d + j];
    x.q[j] = y[2 * d + n + j];
  }
  x.s = s;
  return x;
}

double wrap_s(double s) {
  double r = std::fmod(s, kTwoPi);
  return r < 0 ? r + kTwoPi : r;
}

// One Yoshida-4 step of the kinetic flow (h(I) + sum sign p^2/2 + E) and kicks (sum sign V + eps Q).
class Splitter {
 public:
  Splitter(const Model& m, double eps) : m_(m), eps_(eps), dy_(m.flat_size()) {
    const double c = std::cbrt(2.0);
    w1_ = 1 / (2 - c);
    w0_ = -c * w1_;
  }

  void step(State& y, double& s, double h) {
    drift(y, s, 0.5 * w1_ * h);
    kick(y, s, w1_ * h);
    drift(y, s, 0.5 * (w0_ + w1_) * h);
    kick(y, s, w0_ * h);
    drift(y, s, 0.5 * (w0_ + w1_) * h);
    kick(y, s, w1_ * h);
    drift(y, s, 0.5 * w1_ * h);
  }

 private:
  void drift(State& y, double& s, double h) {
    const int d = m_.d(), n = m_.n();
    Vec I(d);
    for (int i = 0; i < d; ++i) I[i] = y[i];
    const Vec w = m_.frequency(I);
    for (int i = 0; i < d; ++i) y[d + i] += h * w[i];
    for (int j = 0; j < n; ++j) y[2 * d + n + j] += h * m_.pendulum_sign(j) * y[2 * d + j];
    s += h;
  }
  void kick(State& y, double s, double h) {
    // with Q free of I and p, the rhs entries for I, p and E depend only on (phi, q, s)
    const int d = m_.d(), n = m_.n();
    m_.rhs(y.data(), s, eps_, dy_.data());
    for (int i = 0; i < d; ++i) y[i] += h * dy_[i];
    for (int j = 0; j < n; ++j) y[2 * d + j] += h * dy_[2 * d + j];
    y[2 * d + 2 * n] += h * dy_[2 * d + 2 * n];
  }

  const Model& m_;
  double eps_;
  double w0_ = 0, w1_ = 0;
  State dy_;
};

void check_split(const Model& m) {
  if (m.q_depends_on_momenta())
    throw SimulationError("scheme/model mismatch: splitting needs Q independent of p");
  if (m.q_depends_on_actions())
    throw SimulationError("scheme/model mismatch: splitting needs Q independent of I");
}

// Advances y from time t0 by T (any sign), calling obs(t, y) at the sample times.
template <class Obs>
int advance(const Model& m, State& y, double s0, double eps, double T, const IntegrateOptions& opt, double dt_out,
            Obs&& obs) {
  int steps = 0;
  if (T == 0) return 0;
  const double dir = T > 0 ? 1.0 : -1.0;
  const int nout = dt_out > 0 ? std::max(1, static_cast<int>(std::ceil(std::abs(T) / dt_out - 1e-9))) : 1;
  if (opt.scheme == Scheme::RK8) {
    auto sys = [&](const State& x, State& dx, double t) { m.rhs(x.data(), s0 + t, eps, dx.data()); };
    auto stepper = odeint::make_controlled(opt.tol, opt.tol, Stepper());
    double t = 0;
    for (int k = 1; k <= nout; ++k) {
      const double t1 = k == nout ? T : dir * k * dt_out;
      steps += static_cast<int>(
          odeint::integrate_adaptive(stepper, sys, y, t, t1, dir * std::min(opt.step, std::abs(t1 - t))));
      t = t1;
      obs(t, y);
    }
    return steps;
  }
  check_split(m);
  Splitter sp(m, eps);
  const long total = std::max(1L, static_cast<long>(std::llround(std::abs(T) / opt.step)));
  const double h = T / static_cast<double>(total);
  long next_out = 1;
  for (long k = 1; k <= total; ++k) {
    double s = s0 + (k - 1) * h;
    sp.step(y, s, h);
    ++steps;
    const double t = k * h;
    if (k == total || std::abs(t) >= next_out * dt_out - 1e-12) {
      obs(k == total ? T : t, y);
      while (next_out * dt_out <= std::abs(t) + 1e-12) ++next_out;
    }
  }
  return steps;
}

}  // namespace

Scheme parse_scheme(const std::string& name) {
  if (name == "split" || name == "splitting") return Scheme::Split;
  if (name == "rk8") return Scheme::RK8;
  throw std::invalid_argument("unknown scheme '" + name + "' (split or rk8)");
}

const char* scheme_name(Scheme s) { return s == Scheme::Split ? "split" : "rk8"; }

Trajectory integrate(const Model& m, const ExtendedState& x0, double eps, double T, const IntegrateOptions& opt) {
  Trajectory tr;
  tr.scheme = opt.scheme;
  tr.step = opt.step;
  tr.eps = eps;
  if (opt.scheme == Scheme::Split) check_split(m);
  State y = pack(m, x0, 0.0);
  const double dt_out = opt.sample > 0 ? opt.sample : std::abs(T) / 1000;
  const double H0 = m.hamiltonian(x0, eps);
  auto record = [&](double t, const State& yy) {
    ExtendedState x = unpack(m, yy, wrap_s(x0.s + t));
    tr.t.push_back(t);
    tr.E.push_back(yy.back());
    tr.energy_drift = std::max(tr.energy_drift, std::abs(m.hamiltonian(x, eps) + yy.back() - H0));
    tr.x.push_back(std::move(x));
  };
  record(0.0, y);
  tr.steps = advance(m, y, x0.s, eps, T, opt, dt_out, record);
  return tr;
}

ExtendedState flow(const Model& m, const ExtendedState& x0, double eps, double T, const IntegrateOptions& opt,
                   double* E) {
  State y = pack(m, x0, E ? *E : 0.0);
  advance(m, y, x0.s, eps, T, opt, 0.0, [](double, const State&) {});
  if (E) *E = y.back();
  ExtendedState x = unpack(m, y, x0.s + T);
  return x;
}

// ---------------------------------------------------------------- scattering measurement

ScatteringMeasurement measure_scattering(const Melnikov& M, double eps, const Vec& I, const Vec& theta,
                                         const ScatteringOptions& opt) {
  const Model& m = M.model();
  if (m.n() != 1) throw SimulationError("measure_scattering shoots on a single pendulum");
  if (!m.lambda_invariant()) throw SimulationError("Lambda is not invariant for this model");
  const Homoclinic& hom = M.separatrix()[0];
  if (hom.is_loop()) throw SimulationError("measure_scattering needs a heteroclinic-to-2pi separatrix");
  auto R = M.reduced(I, theta);
  if (!R.ok) throw SimulationError("(I, theta) outside the scattering domain: " + R.failure);
  ScatteringMeasurement out;
  out.tau = R.tau;
  out.predicted = eps * R.grad_theta;
  const double tau = R.tau[0];
  const double p0 = hom.p(tau), q0 = hom.q(tau);
  const double pdir = p0 > 0 ? 1.0 : -1.0;
  const double v = m.pendulum_sign(0) * pdir;  // direction of q along the separatrix
  IntegrateOptions io;
  io.tol = opt.tol;

  auto launch = [&](double p) {
    ExtendedState x;
    x.I = I;
    x.phi = theta;
    x.p = Vec::Constant(1, p);
    x.q = Vec::Constant(1, q0);
    x.s = 0;
    return x;
  };
  // +1: passes the saddle, -1: falls back, 0: undecided within the horizon
  auto classify = [&](double p, double dir) {
    const double target = dir > 0 ? hom.q_plus() : hom.q_minus();
    State y = pack(m, launch(p), 0.0);
    auto sys = [&](const State& x, State& dx, double t) { m.rhs(x.data(), t, eps, dx.data()); };
    auto stepper = odeint::make_controlled(opt.tol, opt.tol, Stepper());
    const int d = m.d();
    double t = 0;
    while (std::abs(t) < opt.horizon) {
      const double t1 = t + dir * 0.25;
      odeint::integrate_adaptive(stepper, sys, y, t, t1, dir * 0.05);
      t = t1;
      const double pp = y[2 * d], qq = y[2 * d + 1];
      if (pp * pdir < 0) return -1;
      if ((qq - target) * v * dir > 1.0) return 1;
    }
    return 0;
  };
  auto shoot = [&](double dir) {
    double w = 50 * eps * (1 + std::abs(p0)) + 1e-6;
    double lo = p0 - pdir * w, hi = p0 + pdir * w;
    bool lo_ok = false, hi_ok = false;
    for (int k = 0; k < 20 && !(lo_ok = classify(lo, dir) == -1); ++k) lo = p0 - pdir * (w *= 2);
    for (int k = 0; k < 20 && !(hi_ok = classify(hi, dir) == 1); ++k) hi = p0 + pdir * (w *= 2);
    if (!lo_ok || !hi_ok) throw SimulationError("excursion does not re-approach Lambda within the horizon");
    for (int it = 0; it < 200 && std::abs(hi - lo) > 4e-16 * std::abs(p0); ++it) {
      const double mid = 0.5 * (lo + hi);
      const int c = classify(mid, dir);
      if (c == 0) return mid;
      (c > 0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
  };
  // follow the fibre, drop onto Lambda, come back along Lambda
  auto base_point = [&](double p, double dir) {
    const double T = dir * (opt.window + std::max(0.0, -dir * tau));
    ExtendedState xT = flow(m, launch(p), eps, T, io);
    xT.p.setZero();
    xT.q.setZero();
    return flow(m, xT, eps, -T, io).I;
  };
  if (eps == 0.0) {
    out.p_stable = out.p_unstable = p0;
    out.I_minus = out.I_plus = I;
  } else {
    out.p_stable = shoot(1.0);
    out.p_unstable = shoot(-1.0);
    out.I_plus = base_point(out.p_stable, 1.0);
    out.I_minus = base_point(out.p_unstable, -1.0);
  }
  out.measured = out.I_plus - out.I_minus;
  out.discrepancy = (out.measured - out.predicted).norm();
  return out;
}

// ---------------------------------------------------------------- first integrals

DriftResult first_integral_drift(const Trajectory& traj, const std::function<Vec(const ExtendedState&)>& F,
                                 const std::function<bool(const ExtendedState&)>& region) {
  DriftResult out;
  if (traj.x.empty()) return out;
  const Vec F0 = F(traj.x.front());
  out.sup = Vec::Zero(F0.size());
  for (std::size_t k = 0; k < traj.x.size(); ++k) {
    if (region && !region(traj.x[k])) {
      out.exited = true;
      out.exit_time = traj.t[k];
      break;
    }
    out.sup = out.sup.cwiseMax((F(traj.x[k]) - F0).cwiseAbs());
  }
  return out;
}

// ---------------------------------------------------------------- pseudo-orbit

DriftLog drift_demo(const Model& m, const Chain& chain, double eps, const DriftOptions& opt) {
  if (chain.levels.empty()) throw SimulationError("empty chain");
  Melnikov M(m);
  const int d = m.d(), n = m.n();
  DriftLog log;
  IntegrateOptions io;
  io.sample = opt.dwell / std::max(1, opt.samples_per_dwell);
  double t = 0;
  auto note = [&](const Vec& I, int level, bool jump) {
    DriftSample s;
    s.t = t;
    s.level = level;
    s.I = I;
    path_arclength(chain.path, I, &s.distance);
    s.jump = jump;
    log.max_distance = std::max(log.max_distance, s.distance);
    log.samples.push_back(std::move(s));
  };
  auto dwell = [&](const Vec& I, const Vec& phi, int level) {
    ExtendedState x;
    x.I = I;
    x.phi = phi;
    x.p = Vec::Zero(n);
    x.q = Vec::Zero(n);
    x.s = 0;
    Trajectory tr = integrate(m, x, eps, opt.dwell, io);
    for (std::size_t k = 1; k < tr.x.size(); ++k) {
      t += tr.t[k] - tr.t[k - 1];
      note(tr.x[k].I, level, false);
    }
  };
  note(chain.levels.front().I, 0, false);
  if (chain.links.empty()) {
    dwell(chain.levels.front().I, Vec::Zero(d), 0);
    return log;
  }
  int scattered = 0;
  for (std::size_t i = 0; i < chain.links.size(); ++i) {
    const ChainLink& L = chain.links[i];
    if (L.relabel) continue;
    auto sm = scattering_map(M, eps, L.I, L.theta);
    if (!sm.ok) {
      log.flagged.push_back(static_cast<int>(i));
      continue;
    }
    note(L.I, static_cast<int>(i), false);
    note(sm.I, static_cast<int>(i + 1), true);
    if (chain.levels[i].chart == Chart::NonResonant && chain.levels[i + 1].chart == Chart::NonResonant) {
      const double mis = (sm.I - chain.levels[i + 1].E).norm();
      log.max_link_mismatch = std::max(log.max_link_mismatch, mis);
      if (mis > opt.link_tol) log.flagged.push_back(static_cast<int>(i));
    }
    if (opt.direct_stride > 0 && scattered % opt.direct_stride == 0) {
      log.direct.push_back(measure_scattering(M, eps, L.I, L.theta));
      if (log.direct.back().discrepancy > opt.direct_tol * log.direct.back().predicted.norm())
        log.flagged.push_back(static_cast<int>(i));
    }
    ++scattered;
    dwell(sm.I, sm.theta, static_cast<int>(i + 1));
  }
  return log;
}

}  // namespace resonet
