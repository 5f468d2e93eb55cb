#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "resonet/expr.hpp"
#include "resonet/jet.hpp"

using namespace resonet;

namespace {

const std::vector<std::string> kParams = {"Omega1", "Omega2", "a"};

// Random expression over I1, q1 built from the grammar, avoiding division.
Expr random_expr(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth > 0 ? 8 : 2);
  std::uniform_real_distribution<double> c(-2, 2);
  switch (pick(rng)) {
    case 0:
      return Expr(std::round(c(rng) * 100) / 100);
    case 1:
      return Expr::var("I1");
    case 2:
      return Expr::var("q1");
    case 3:
      return random_expr(rng, depth - 1) + random_expr(rng, depth - 1);
    case 4:
      return random_expr(rng, depth - 1) - random_expr(rng, depth - 1);
    case 5:
      return random_expr(rng, depth - 1) * random_expr(rng, depth - 1);
    case 6:
      return sin(random_expr(rng, depth - 1));
    case 7:
      return cos(random_expr(rng, depth - 1));
    default:
      return pow(random_expr(rng, depth - 1), 1 + static_cast<int>(rng() % 3));
  }
}

}  // namespace

TEST(Parse, QuadraticRotator) {
  Expr h = parse("0.5*Omega1*I1^2 + 0.5*Omega2*I2^2", kParams);
  EXPECT_EQ(h.kind(), Expr::Kind::Add);
  EXPECT_TRUE(h.depends_on("I1"));
  EXPECT_TRUE(h.depends_on("I2"));
  EXPECT_DOUBLE_EQ(eval(h, {{"Omega1", 1}, {"Omega2", 1}, {"I1", 1}, {"I2", 2}}), 2.5);
}

TEST(Parse, Constant) {
  Expr z = parse("0");
  ASSERT_TRUE(z.is_const());
  EXPECT_EQ(z.value(), 0.0);
}

TEST(Parse, PendulumPotential) {
  Expr V = parse("cos(q1) - 1");
  ASSERT_EQ(V.kind(), Expr::Kind::Sub);
  EXPECT_EQ(V.child(0).kind(), Expr::Kind::Cos);
  EXPECT_EQ(V.child(0).child(0).name(), "q1");
  EXPECT_TRUE(V.child(1).is_const(1.0));
}

TEST(Parse, SyntaxErrorCarriesOffset) {
  try {
    parse("1 + * I1");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  EXPECT_THROW(parse("sin(I1"), ParseError);
  EXPECT_THROW(parse("I1 2"), ParseError);
}

TEST(Parse, UnknownIdentifier) {
  EXPECT_THROW(parse("Omega3*I1"), ParseError);
  EXPECT_THROW(parse("cosh(I1)"), ParseError);
  EXPECT_NO_THROW(parse("phi2 + t + p3 + q1"));
}

TEST(Parse, PrintParseIdempotent) {
  for (const char* s : {"0.5*Omega1*I1^2 + 0.5*Omega2*I2^2", "cos(q1) - 1", "-(I1 - I2)^3/(1 + exp(-2*t))",
                        "a*cos(q1)*sin(phi1 - phi2)", "I1^-2 - -3", "1e-3*I1"}) {
    std::string p1 = parse(s, kParams).str();
    std::string p2 = parse(p1, kParams).str();
    EXPECT_EQ(p1, p2) << s;
  }
}

TEST(Diff, PolynomialRule) { EXPECT_EQ(diff(parse("0.5*I1^2"), "I1").str(), "I1"); }

TEST(Diff, Cosine) { EXPECT_EQ(diff(parse("cos(q1)"), "q1").str(), "-sin(q1)"); }

TEST(Diff, RotatorFrequencyMatchesFiniteDifference) {
  Expr h = substitute(parse("0.5*Omega1*I1^2 + 0.5*Omega2*I2^2", kParams), {{"Omega1", 1.0}, {"Omega2", 1.0}});
  double w = eval(diff(h, "I1"), {{"I1", 1}, {"I2", 2}});
  const double s = 1e-5;
  double fd = (eval(h, {{"I1", 1 + s}, {"I2", 2}}) - eval(h, {{"I1", 1 - s}, {"I2", 2}})) / (2 * s);
  EXPECT_NEAR(fd, 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(w, 1.0);
}

TEST(Eval, Basics) {
  EXPECT_DOUBLE_EQ(eval(parse("0.5*I1^2"), {{"I1", 2}}), 2.0);
  // 2/cosh(t) through exp
  Expr sech2 = parse("4*exp(t)/(1 + exp(2*t))");
  EXPECT_NEAR(eval(sech2, {{"t", 1.0}}), 2.0 / std::cosh(1.0), 1e-15);
  EXPECT_THROW(eval(parse("I1 + I2"), {{"I1", 1}}), EvalError);
  EXPECT_THROW(eval(parse("1/(I1 - 1)"), {{"I1", 1}}), EvalError);
}

TEST(Compiled, MatchesTreeEvaluation) {
  Expr e = parse("a*cos(q1)*sin(2*phi1 - t) + I1^3/(2 + I1^2)", kParams);
  e = substitute(e, {{"a", 0.7}});
  Compiled c(e, {"I1", "q1", "phi1", "t"});
  double x[4] = {0.3, 1.1, -0.4, 2.0};
  EXPECT_NEAR(c(x), eval(e, {{"I1", 0.3}, {"q1", 1.1}, {"phi1", -0.4}, {"t", 2.0}}), 1e-15);
}

TEST(Compiled, JetEvaluationGivesDerivatives) {
  Expr e = parse("sin(I1)*I2^2 + exp(I1*I2)");
  Compiled c(e, {"I1", "I2"});
  auto sp = JetSpace::get(2, 3);
  std::vector<RJet> x = {RJet::variable(sp, 0, 0.4), RJet::variable(sp, 1, -0.7)};
  RJet j = c(x.data());
  std::map<std::string, double> at = {{"I1", 0.4}, {"I2", -0.7}};
  EXPECT_NEAR(j.c0(), eval(e, at), 1e-14);
  EXPECT_NEAR(j.linear(0), eval(diff(e, "I1"), at), 1e-13);
  EXPECT_NEAR(j.linear(1), eval(diff(e, "I2"), at), 1e-13);
  EXPECT_NEAR(j[sp->index({1, 1})], eval(diff(diff(e, "I1"), "I2"), at), 1e-13);
  EXPECT_NEAR(j[sp->index({0, 2})], 0.5 * eval(diff(diff(e, "I2"), "I2"), at), 1e-13);
}

// Property: symbolic derivative agrees with central differences.
TEST(DiffProperty, GradientCheck) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Expr e = random_expr(rng, 4);
    for (const char* v : {"I1", "q1"}) {
      Expr de = diff(e, v);
      std::map<std::string, double> at = {{"I1", u(rng)}, {"q1", u(rng)}};
      const double s = 1e-5;
      auto ap = at, am = at;
      ap[v] += s;
      am[v] -= s;
      double fd = (eval(e, ap) - eval(e, am)) / (2 * s);
      double ex = eval(de, at);
      EXPECT_NEAR(ex, fd, 1e-6 * std::max(1.0, std::abs(ex))) << e.str() << " d/d" << v;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 200);
}

// Property: diff(a e1 + b e2) equals a diff(e1) + b diff(e2) at random bindings.
TEST(DiffProperty, Linearity) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 100; ++trial) {
    Expr e1 = random_expr(rng, 3), e2 = random_expr(rng, 3);
    double a = u(rng), b = u(rng);
    Expr lhs = diff(Expr(a) * e1 + Expr(b) * e2, "I1");
    std::map<std::string, double> at = {{"I1", u(rng)}, {"q1", u(rng)}};
    double l = eval(lhs, at);
    double r = a * eval(diff(e1, "I1"), at) + b * eval(diff(e2, "I1"), at);
    EXPECT_NEAR(l, r, 1e-12 * std::max(1.0, std::abs(r)));
  }
}

TEST(StateVariables, Names) {
  EXPECT_TRUE(is_state_variable("I1"));
  EXPECT_TRUE(is_state_variable("phi12"));
  EXPECT_TRUE(is_state_variable("t"));
  EXPECT_FALSE(is_state_variable("I0"));
  EXPECT_FALSE(is_state_variable("x1"));
  EXPECT_FALSE(is_state_variable("Omega1"));
}
