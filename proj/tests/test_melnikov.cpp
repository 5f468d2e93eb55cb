#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "resonet/melnikov.hpp"

using namespace resonet;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec v1(double a) {
  Vec x(1);
  x << a;
  return x;
}

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

// 2 pi nu a / sinh(pi nu / 2), the residue value of -int a (cos q* - 1) e^{i nu u} du
double amp(double nu, double a) { return nu == 0 ? 4 * a : 2 * kPi * nu * a / std::sinh(kPi * nu / 2); }

// sum_i A_i cos(phi_i - omega_i tau) with phi_3 = phi_1 + phi_2 - s and omega_3 = omega_1 + omega_2 - 1
double three_mode_L(const Vec& om, const double* a, double tau, const Vec& phi, double s) {
  const double w[3] = {om[0], om[1], om[0] + om[1] - 1};
  const double ph[3] = {phi[0], phi[1], phi[0] + phi[1] - s};
  double L = 0;
  for (int i = 0; i < 3; ++i) L += amp(w[i], a[i]) * std::cos(ph[i] - w[i] * tau);
  return L;
}

ModelConfig custom(int d, int n, std::vector<TermSpec> terms) {
  ModelConfig c;
  c.d = d;
  c.h = d == 1 ? "0.5*I1^2" : "0.5*I1^2 + 0.5*I2^2";
  for (int j = 0; j < n; ++j) c.pendula.push_back({"cos(q" + std::to_string(j + 1) + ") - 1", 1});
  c.terms = std::move(terms);
  c.box.lo.assign(d, 0.0);
  c.box.hi.assign(d, 2.0);
  return c;
}

}  // namespace

TEST(Quadrature, GaussKronrodVector) {
  double err = 0;
  auto r = integrate_gk15(
      [](double x, double* o) {
        o[0] = std::sin(x);
        o[1] = std::exp(-x * x);
      },
      2, 0.0, kPi, 0.5, 1e-14, &err);
  EXPECT_NEAR(r[0], 2.0, 1e-13);
  EXPECT_NEAR(r[1], std::sqrt(kPi) / 2 * std::erf(kPi), 1e-13);
  EXPECT_LE(err, 1e-13);
}

TEST(Quadrature, SechSquaredFourierTransform) {
  for (double nu : {0.0, 0.3, 1.0, 2.5, 4.0}) {
    auto r = integrate_gk15(
        [nu](double u, double* o) {
          const double c = 1 / std::cosh(u);
          o[0] = c * c * std::cos(nu * u);
        },
        1, -40, 40, kPi / (4 * std::max(nu, 1.0)), 1e-13);
    const double exact = nu == 0 ? 2.0 : kPi * nu / std::sinh(kPi * nu / 2);
    EXPECT_NEAR(r[0], exact, 1e-12) << nu;
  }
}

TEST(Melnikov, SingleModeAmplitude) {
  Model m = build_model(three_mode_config(1, 1, 1, 0, 0));
  Melnikov M(m);
  const Vec I = v2(1.0, 0.6);
  for (double phi1 : {0.0, 0.9, 2.4})
    for (double tau : {-0.7, 0.0, 1.3}) {
      const double L = M.L(v1(tau), I, v2(phi1, 0.4), 0.2);
      EXPECT_NEAR(L, 2.7302778013234311 * std::cos(phi1 - tau), 1e-10);
    }
}

TEST(Melnikov, QuadratureMatchesResidueOnFrequencyGrid) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> ua(-1.5, 1.5), uphi(0, 2 * kPi), uom(0.1, 4.0), ut(-2, 2);
  double worst = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const double a[3] = {ua(rng), ua(rng), ua(rng)};
    // omega = (Omega1 I1, Omega2 I2) with I = (1, 1); keep omega_3 in range too
    double w1 = uom(rng), w2 = uom(rng);
    if (w1 + w2 - 1 < 0.1 || w1 + w2 - 1 > 4) continue;
    Model m = build_model(three_mode_config(w1, w2, a[0], a[1], a[2]));
    Melnikov M(m);
    const Vec I = v2(1, 1), om = m.frequency(I);
    double scale = std::abs(amp(om[0], a[0])) + std::abs(amp(om[1], a[1])) + std::abs(amp(om[0] + om[1] - 1, a[2]));
    for (int k = 0; k < 4; ++k) {
      const Vec phi = v2(uphi(rng), uphi(rng));
      const double s = uphi(rng), tau = ut(rng);
      const double exact = three_mode_L(om, a, tau, phi, s);
      worst = std::max(worst, std::abs(M.L(v1(tau), I, phi, s) - exact) / scale);
      worst = std::max(worst, std::abs(M.at(I)->value(v1(tau), phi, s) - exact) / scale);
    }
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(Melnikov, NoPendulumDependenceGivesZero) {
  auto cfg = custom(2, 1, {{{1, 0}, 0, "cos", "1 + I1", 1, 0}});
  Model m = build_model(cfg);
  Melnikov M(m);
  EXPECT_TRUE(M.degenerate());
  EXPECT_EQ(M.L(v1(0.3), v2(0.5, 0.7), v2(0.1, 0.2), 0.0), 0.0);
  EXPECT_FALSE(M.reduced(v2(0.5, 0.7), v2(0.1, 0.2)).ok);
}

TEST(Melnikov, SmallFrequencyLimit) {
  Model m = build_model(three_mode_config(1, 1, 0.8, 0, 0));
  Melnikov M(m);
  const double L = M.L(v1(0.0), v2(1e-3, 0.5), v2(0.0, 0.0), 0.0);
  EXPECT_NEAR(L, 4 * 0.8, 1e-4);
  EXPECT_NEAR(L, 0.8 * 3.99999835506640667, 1e-10);
}

TEST(Melnikov, ShiftCovariance) {
  Model m = build_model(three_mode_config(1, 1, 0.4, 1.1, -0.7));
  Melnikov M(m);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.2, 1.8), ang(0, 2 * kPi), c(-3, 3);
  for (int k = 0; k < 10; ++k) {
    const Vec I = v2(u(rng), u(rng)), phi = v2(ang(rng), ang(rng));
    const double s = ang(rng), tau = c(rng), sh = c(rng);
    const Vec om = m.frequency(I);
    EXPECT_NEAR(M.L(v1(tau + sh), I, phi + om * sh, s + sh), M.L(v1(tau), I, phi, s), 1e-10);
  }
}

TEST(Melnikov, TruncationWindowIsConverged) {
  Model m = build_model(three_mode_config(1, 1, 0.4, 1.1, -0.7));
  Melnikov M(m);
  MelnikovOptions wide;
  wide.tail_tol = 1e-24;
  Melnikov W(m, wide);
  const Vec I = v2(0.7, 1.3), phi = v2(0.4, 2.0);
  EXPECT_NEAR(M.L(v1(0.3), I, phi, 1.0), W.L(v1(0.3), I, phi, 1.0), M.options().abs_tol);
}

TEST(Melnikov, HarmonicRouteMatchesQuadratureForGeneralCoefficients) {
  auto cfg = custom(2, 1,
                    {{{1, 0}, 0, "sin", "(1 + 0.3*I1)*p1*sin(q1)", 1, 0},
                     {{1, -1}, 1, "cos", "I2*(1 - cos(q1)) + 0.5*p1^2", 1, 0},
                     {{0, 1}, 0, "cos", "cos(q1)", 1, 0}});
  Model m = build_model(cfg);
  Melnikov M(m);
  const Vec I = v2(0.8, 1.3);
  auto P = M.at(I);
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> ang(0, 2 * kPi), t(-1.5, 1.5);
  for (int k = 0; k < 6; ++k) {
    const Vec phi = v2(ang(rng), ang(rng));
    const double s = ang(rng), tau = t(rng);
    auto D = P->derivs(v1(tau), phi, s);
    EXPECT_NEAR(D.L, M.L(v1(tau), I, phi, s), 1e-10);
    EXPECT_NEAR((D.theta - M.L_phi(v1(tau), I, phi, s)).norm(), 0, 1e-10);
    const double h = 1e-5;
    EXPECT_NEAR(D.tau[0], (M.L(v1(tau + h), I, phi, s) - M.L(v1(tau - h), I, phi, s)) / (2 * h), 1e-7);
    for (int i = 0; i < 2; ++i) {
      Vec Ip = I, Im = I;
      Ip[i] += h;
      Im[i] -= h;
      EXPECT_NEAR(D.I[i], (M.L(v1(tau), Ip, phi, s) - M.L(v1(tau), Im, phi, s)) / (2 * h), 1e-7) << i;
    }
  }
}

TEST(CriticalTau, SingleModeClosedForm) {
  Model m = build_model(three_mode_config(1, 1, 1, 0, 0));
  Melnikov M(m);
  const Vec I = v2(0.7, 1.0);  // omega_1 = 0.7
  for (double phi1 : {0.3, 1.9, 4.0, 6.0}) {
    auto c = M.critical_tau(I, v2(phi1, 0.5), 0.0, v1(phi1 / 0.7 + 0.2));
    ASSERT_TRUE(c.ok);
    // phi1 - 0.7 tau in pi Z
    const double r = std::remainder(phi1 - 0.7 * c.tau[0], kPi);
    EXPECT_NEAR(r, 0, 1e-12);
    auto f = M.first_crest(I, v2(phi1, 0.5), 0.0);
    ASSERT_TRUE(f.ok);
    const double want = std::remainder(phi1, 2 * kPi) / 0.7;
    EXPECT_NEAR(f.tau[0], want, 1e-10);
    EXPECT_LT(f.hessian(0, 0), 0);
  }
}

TEST(CriticalTau, SymmetricPointAndMaxCrest) {
  Model m = build_model(three_mode_config(1, 1, 1, 1, 1));
  Melnikov M(m);
  const Vec I = v2(1, 1);
  auto c = M.first_crest(I, v2(0, 0), 0.0);
  ASSERT_TRUE(c.ok);
  EXPECT_NEAR(c.tau[0], 0.0, 1e-14);
  auto pts = crest(m, I, 0.0, 32);
  int on_max = 0;
  for (const auto& p : pts) {
    if (!p.max_crest) continue;
    auto f = M.first_crest(I, p.phi, 0.0);
    ASSERT_TRUE(f.ok);
    EXPECT_NEAR(f.tau[0], 0.0, 1e-9);
    ++on_max;
  }
  EXPECT_GT(on_max, 10);
}

TEST(CriticalTau, TwoPendulaByQuadrature) {
  auto cfg = custom(2, 2, {{{1, 0}, 0, "cos", "cos(q1)", 1, 0}, {{0, 1}, 0, "cos", "0.5*cos(q2)", 1, 0}});
  Model m = build_model(cfg);
  Melnikov M(m);
  const Vec I = v2(0.9, 1.4), phi = v2(0.5, -0.8);
  Vec tau(2);
  tau << 0.2, -0.3;
  const double exact = amp(0.9, 1) * std::cos(0.5 - 0.9 * 0.2) + amp(1.4, 0.5) * std::cos(-0.8 + 1.4 * 0.3);
  EXPECT_NEAR(M.L(tau, I, phi, 0.0), exact, 1e-10);
  auto c = M.first_crest(I, phi, 0.0);
  ASSERT_TRUE(c.ok);
  EXPECT_NEAR(c.tau[0], 0.5 / 0.9, 1e-6);
  EXPECT_NEAR(c.tau[1], -0.8 / 1.4, 1e-6);
}

TEST(Reduced, SingleModeIsConstant) {
  Model m = build_model(three_mode_config(1, 1, 1, 0, 0));
  Melnikov M(m);
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.3, 1.8), ang(0, 2 * kPi);
  for (int k = 0; k < 10; ++k) {
    const Vec I = v2(u(rng), u(rng));
    auto r = M.reduced(I, v2(ang(rng), ang(rng)));
    ASSERT_TRUE(r.ok);
    EXPECT_NEAR(r.value, amp(I[0], 1.0), 1e-10);
    EXPECT_NEAR(r.grad_theta.norm(), 0, 1e-10);
  }
}

TEST(Reduced, EnvelopeIdentityAgainstFiniteDifferences) {
  Model m = build_model(three_mode_config(1, 1, 1, 1, 1));
  Melnikov M(m);
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(0.3, 1.8), ang(0, 2 * kPi);
  int checked = 0, switched = 0;
  const double h = 1e-5;
  for (int k = 0; k < 50; ++k) {
    const Vec I = v2(u(rng), u(rng)), th = v2(ang(rng), ang(rng));
    auto r = M.reduced(I, th);
    ASSERT_TRUE(r.ok);
    bool jump = false;
    Vec fd(2), fdI(2);
    Mat fdH(2, 2);
    for (int i = 0; i < 2; ++i) {
      Vec tp = th, tm = th, Ip = I, Im = I;
      tp[i] += h;
      tm[i] -= h;
      Ip[i] += h;
      Im[i] -= h;
      auto a = M.reduced(I, tp), b = M.reduced(I, tm), c = M.reduced(Ip, th), e = M.reduced(Im, th);
      for (const auto* x : {&a, &b, &c, &e})
        if (!x->ok || std::abs(x->tau[0] - r.tau[0]) > 0.01) jump = true;
      if (jump) break;
      fd[i] = (a.value - b.value) / (2 * h);
      fdI[i] = (c.value - e.value) / (2 * h);
      fdH.col(i) = (a.grad_theta - b.grad_theta) / (2 * h);
    }
    if (jump) {
      ++switched;
      continue;
    }
    ++checked;
    const double sc = 1 + r.grad_theta.norm();
    EXPECT_LE((fd - r.grad_theta).norm() / sc, 1e-6);
    EXPECT_LE((fdI - r.grad_I).norm() / (1 + r.grad_I.norm()), 1e-6);
    EXPECT_LE((fdH - r.hess_theta).norm() / (1 + r.hess_theta.norm()), 1e-5);
  }
  EXPECT_LE(switched, 3);
  EXPECT_GE(checked, 47);
}

TEST(Reduced, EqualsPotentialOnTheMaxCrest) {
  Model m = build_model(three_mode_config(1, 1, 1, 1, 1));
  Melnikov M(m);
  const double a[3] = {1, 1, 1};
  const Vec I = v2(1.3, 0.8), om = m.frequency(I);
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> ang(0, 2 * kPi);
  for (int k = 0; k < 20; ++k) {
    const Vec th = v2(ang(rng), ang(rng));
    auto r = M.reduced(I, th);
    ASSERT_TRUE(r.ok);
    // the crest point on the line theta - omega tau (with s = -tau)
    const double t = r.tau[0];
    const Vec p = th - om * t;
    EXPECT_NEAR(r.value, three_mode_L(om, a, 0.0, p, -t), 1e-9);
    const double w3 = om[0] + om[1] - 1;
    const double g = om[0] * amp(om[0], 1) * std::sin(p[0]) + om[1] * amp(om[1], 1) * std::sin(p[1]) +
                     w3 * amp(w3, 1) * std::sin(p[0] + p[1] + t);
    EXPECT_NEAR(g, 0, 1e-9);
  }
}

TEST(Crest, SingleModeGivesVerticalLines) {
  Model m = build_model(three_mode_config(1, 1, 1, 0, 0));
  auto pts = crest(m, v2(1, 1), 0.0, 64);
  ASSERT_FALSE(pts.empty());
  bool zero = false, pi = false;
  for (const auto& p : pts) {
    const double r = std::remainder(p.phi[0], kPi);
    EXPECT_NEAR(r, 0, 1e-12);
    if (std::abs(p.phi[0]) < 1e-12) {
      zero = true;
      EXPECT_TRUE(p.max_crest);
    } else {
      pi = true;
      EXPECT_FALSE(p.max_crest);
    }
  }
  EXPECT_TRUE(zero && pi);
}

TEST(Crest, ResidualsAndOrigin) {
  Model m = build_model(three_mode_config(1, 1, 1, 1, 1));
  auto pts = crest(m, v2(1, 1), 0.0, 64);
  bool origin = false;
  for (const auto& p : pts) {
    EXPECT_LE(p.residual, 1e-10);
    if (p.phi.norm() < 1e-12 || (p.phi - v2(0, 2 * kPi)).norm() < 1e-12) origin = true;
  }
  EXPECT_TRUE(origin);
}
