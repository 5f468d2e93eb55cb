#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "resonet/jet.hpp"

using namespace resonet;

TEST(JetSpace, GradedLayout) {
  auto sp = JetSpace::get(2, 3);
  EXPECT_EQ(sp->size(), 10);
  EXPECT_EQ(sp->index({0, 0}), 0);
  EXPECT_EQ(sp->index({1, 0}), 1);
  EXPECT_EQ(sp->index({0, 1}), 2);
  EXPECT_EQ(sp->degree(sp->index({2, 1})), 3);
  EXPECT_EQ(JetSpace::get(2, 3).get(), sp.get());
}

TEST(Jet, ProductAndReciprocal) {
  auto sp = JetSpace::get(1, 6);
  RJet x = RJet::variable(sp, 0, 0.5);
  RJet r = reciprocal(1.0 + x);  // 1/(1.5 + dx)
  for (int k = 0; k <= 6; ++k) EXPECT_NEAR(r[k], std::pow(-1.0, k) / std::pow(1.5, k + 1), 1e-14);
  RJet one = r * (1.0 + x);
  EXPECT_NEAR(one[0], 1.0, 1e-15);
  for (int k = 1; k <= 6; ++k) EXPECT_NEAR(one[k], 0.0, 1e-14);
}

TEST(Jet, ElementaryFunctions) {
  auto sp = JetSpace::get(1, 5);
  RJet x = RJet::variable(sp, 0, 0.3);
  RJet s = sin(x), c = cos(x), e = exp(x), q = sqrt(x);
  double f = 1;
  for (int k = 0; k <= 5; ++k) {
    if (k) f *= k;
    const double ds[4] = {std::sin(0.3), std::cos(0.3), -std::sin(0.3), -std::cos(0.3)};
    EXPECT_NEAR(s[k], ds[k % 4] / f, 1e-15);
    EXPECT_NEAR(c[k], ds[(k + 1) % 4] / f, 1e-15);
    EXPECT_NEAR(e[k], std::exp(0.3) / f, 1e-15);
  }
  RJet qq = q * q;
  EXPECT_NEAR(qq[0], 0.3, 1e-15);
  EXPECT_NEAR(qq[1], 1.0, 1e-14);
  for (int k = 2; k <= 5; ++k) EXPECT_NEAR(qq[k], 0.0, 1e-12);
}

TEST(Jet, DerivativeAndEvalOffset) {
  auto sp = JetSpace::get(2, 4);
  RJet x = RJet::variable(sp, 0, 1.0), y = RJet::variable(sp, 1, 2.0);
  RJet f = x * x * y + 3.0 * y;  // exact polynomial
  std::vector<double> dx = {0.1, -0.2};
  EXPECT_NEAR(f.eval_offset(dx), 1.1 * 1.1 * 1.8 + 3 * 1.8, 1e-14);
  RJet fx = f.derivative(0);
  EXPECT_NEAR(fx.eval_offset(dx), 2 * 1.1 * 1.8, 1e-14);
}

TEST(Jet, CompositionMatchesDirectEvaluation) {
  auto sp = JetSpace::get(2, 5);
  RJet x = RJet::variable(sp, 0, 0.2), y = RJet::variable(sp, 1, -0.1);
  RJet f = sin(x) * exp(y);
  // substitute x - 0.2 -> u + u v, y + 0.1 -> v^2 (nilpotent in a second space)
  RJet u = RJet::variable(sp, 0, 0.0), v = RJet::variable(sp, 1, 0.0);
  RJet g = f.compose(std::vector<RJet>{u + u * v, v * v});
  RJet direct = sin(0.2 + u + u * v) * exp(-0.1 + v * v);
  for (int i = 0; i < sp->size(); ++i) EXPECT_NEAR(g[i], direct[i], 1e-14);
}

// Property: synthetic division by (x_v + a) reconstructs the jet.
TEST(JetProperty, DivideLinearReconstructs) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  auto sp = JetSpace::get(3, 4);
  for (int trial = 0; trial < 50; ++trial) {
    RJet f(sp);
    for (int i = 0; i < sp->size(); ++i) f[i] = u(rng);
    int v = static_cast<int>(rng() % 3);
    double a = u(rng);
    RJet rem;
    RJet q = f.divide_linear(v, a, &rem);
    RJet back = (RJet::variable(sp, v, a)) * q + rem;
    // truncation drops the top-degree part of x_v * q
    for (int i = 0; i < sp->size(); ++i) EXPECT_NEAR(back[i], f[i], 1e-13);
    for (int i = 0; i < sp->size(); ++i)
      if (sp->exps(i)[v] > 0) EXPECT_EQ(rem[i], 0.0);
  }
}

TEST(Jet, ComplexCoefficients) {
  auto sp = JetSpace::get(1, 3);
  CJet z = CJet::from(RJet::variable(sp, 0, 1.0));
  CJet w = z * std::complex<double>(0, 1);
  CJet p = w * w;
  EXPECT_NEAR(p[0].real(), -1.0, 1e-15);
  EXPECT_NEAR(p[1].real(), -2.0, 1e-15);
}
