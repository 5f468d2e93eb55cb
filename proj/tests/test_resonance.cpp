#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "resonet/resonance.hpp"

using namespace resonet;

namespace {

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

const Model& fixture() {
  static const Model m = build_model(three_mode_config());
  return m;
}

const ResonanceWeb& fixture_web() {
  static const ResonanceWeb w = [] {
    WebOptions o;
    o.max_order = 3;
    return build_web(fixture(), o);
  }();
  return w;
}

}  // namespace

TEST(ActivatedIndices, OrderOneSupport) {
  auto n1 = activated_indices(fixture(), 1);
  EXPECT_EQ(n1, (std::set<Mode>{{1, 0, 0}, {0, 1, 0}, {1, 1, -1}}));
}

TEST(ActivatedIndices, OrderTwoAddsFourLines) {
  const auto& w = fixture_web();
  std::set<Mode> lines;
  for (const auto& r : w.of_order(2)) lines.insert(r.kl);
  EXPECT_EQ(lines, (std::set<Mode>{{1, 0, -1}, {0, 1, -1}, {2, 1, -1}, {1, 2, -1}}));
  EXPECT_EQ(w.secular().size(), 7u);
  EXPECT_EQ(w.secular_modes().size(), 7u);
}

TEST(ActivatedIndices, CombinatorialClosureIsSuperset) {
  auto comb = combinatorial_indices(fixture(), 2);
  for (const auto& x : fixture_web().indices(2)) EXPECT_TRUE(comb.count(x)) << mode_str(x);
  EXPECT_TRUE(comb.count({1, 1, 0}));
  EXPECT_TRUE(comb.count({1, -1, 0}));
  EXPECT_FALSE(fixture_web().indices(2).count({1, 1, 0}));
}

TEST(ActivatedIndices, SingleTermSumset) {
  auto cfg = three_mode_config();
  cfg.terms = {{{2, 1}, -1, "cos", "cos(q1)", 1, 0}};
  Model m = build_model(cfg);
  EXPECT_EQ(combinatorial_indices(m, 1), (std::set<Mode>{{2, 1, -1}}));
  auto n2 = combinatorial_indices(m, 2);
  EXPECT_TRUE(n2.count({4, 2, -2}));
  EXPECT_FALSE(n2.count({0, 0, 0}));
  WebOptions o;
  o.support = SupportMode::Combinatorial;
  auto w = build_web(m, o);
  ASSERT_EQ(w.resonances().size(), 1u);
  EXPECT_EQ(w.resonances()[0].kl, (Mode{2, 1, -1}));
  EXPECT_EQ(w.resonances()[0].order, 1);
}

TEST(Resonance, AffineEquations) {
  const auto& w = fixture_web();
  EXPECT_EQ(w.find({1, 1, -1})->equation(), "I1 + I2 - 1 = 0");
  EXPECT_EQ(w.find({2, 2, -2})->equation(), "I1 + I2 - 1 = 0");
  EXPECT_EQ(w.find({1, 0, 0})->equation(), "I1 = 0");
  EXPECT_EQ(w.find({1, 2, -1})->equation(), "I1 + 2*I2 - 1 = 0");
  Model m = build_model(three_mode_config(2, 3));
  auto w2 = build_web(m);
  EXPECT_EQ(w2.find({1, 1, -1})->equation(), "2*I1 + 3*I2 - 1 = 0");
}

TEST(Resonance, DistanceIsEuclideanForLines) {
  EXPECT_NEAR(resonance_distance(fixture(), {1, 1, -1}, v2(1, 1)), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(resonance_distance(fixture(), {1, 0, 0}, v2(0.3, 7)), 0.3, 1e-15);
}

TEST(Multiplicity, FixturePoints) {
  const auto& w = fixture_web();
  Vec ext(3);
  ext << 0.5, 0.5, 1.0;
  EXPECT_EQ(active_indices(ext, 1, w), (std::vector<Mode>{{1, 1, -1}}));
  EXPECT_EQ(multiplicity(ext, 1, w), 1);
  ext << 0, 0, 1;
  EXPECT_EQ(multiplicity(ext, 1, w), 2);
  ext << 0.37, 1.41, 1;
  EXPECT_EQ(multiplicity(ext, 2, w), 0);
}

// Property: integer rank equals floating rank on random small integer sets.
TEST(Multiplicity, IntegerRankMatchesFloatRank) {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    int rows = 1 + static_cast<int>(rng() % 5), cols = 2 + static_cast<int>(rng() % 3);
    std::vector<Mode> a;
    for (int r = 0; r < rows; ++r) {
      Mode x(cols);
      for (auto& e : x) e = static_cast<int>(rng() % 7) - 3;
      a.push_back(x);
    }
    if (trial % 3 == 0 && rows > 1) a.back() = mode_add(a[0], mode_neg(a[1]));
    ASSERT_EQ(integer_rank(a), float_rank(a)) << trial;
  }
}

// Property: multiplicity is invariant under scaling the active indices.
TEST(Multiplicity, InvariantUnderScaling) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Mode> a;
    for (int r = 0; r < 3; ++r) a.push_back({static_cast<int>(rng() % 5) - 2, static_cast<int>(rng() % 5) - 2,
                                             static_cast<int>(rng() % 3) - 1});
    int base = integer_rank(a);
    for (auto& x : a) {
      int s = static_cast<int>(rng() % 5) - 2;
      if (s == 0) s = 3;
      for (auto& e : x) e *= s;
    }
    EXPECT_EQ(integer_rank(a), base);
  }
  EXPECT_EQ(integer_rank({}), 0);
}

TEST(ProjectK, DiagonalPoint) {
  auto P = project_k(fixture(), v2(0.8, 0.8), {1, 1, -1});
  EXPECT_NEAR((P.point - v2(0.5, 0.5)).norm(), 0.0, 1e-14);
  EXPECT_NEAR(P.t, -0.3, 1e-14);
  EXPECT_LE(P.residual, 1e-12);
  EXPECT_GE(P.comparability, 1.0);
}

TEST(ProjectK, FixedPointOnSurface) {
  auto P = project_k(fixture(), v2(0.25, 0.75), {1, 1, -1});
  EXPECT_NEAR((P.point - v2(0.25, 0.75)).norm(), 0.0, 1e-15);
}

TEST(ProjectK, TangencyForProductRotator) {
  auto cfg = three_mode_config();
  cfg.h = "I1*I2";
  cfg.box.lo = {-1, -1};
  cfg.box.hi = {1, 1};
  Model m = build_model(cfg);
  EXPECT_THROW(project_k(m, v2(0.3, 0.4), {1, 0, 0}), ProjectionError);
  EXPECT_THROW(project_k(m, v2(-0.7, 0.1), {1, 0, -1}), ProjectionError);
}

TEST(ProjectK, NonlinearFrequencyMap) {
  auto cfg = three_mode_config();
  cfg.h = "I1^2/2 + I2^2/2 + I1^3/6";
  Model m = build_model(cfg);
  auto P = project_k(m, v2(0.9, 0.6), {1, 1, -1});
  EXPECT_LE(std::abs(resonance_function(m, {1, 1, -1}, P.point)), 1e-12);
  EXPECT_NEAR(P.point[0] - 0.9, P.point[1] - 0.6, 1e-14);
}

// Property: orthogonal projection lands on the surface with the residual along the normal.
TEST(ProjectOrth, NormalResidualOnCurvedSurface) {
  auto cfg = three_mode_config();
  cfg.h = "I1^2/2 + I2^2/2 + I1^3/6";
  Model m = build_model(cfg);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.2, 1.2);
  for (int trial = 0; trial < 50; ++trial) {
    Vec I = v2(u(rng), u(rng));
    auto P = project_orth(m, I, {1, 1, -1});
    Vec g = resonance_gradient(m, {1, 1, -1}, P.point);
    Vec r = I - P.point;
    EXPECT_LE(P.residual, 1e-10);
    EXPECT_NEAR(r[0] * g[1] - r[1] * g[0], 0.0, 1e-10);
  }
}

TEST(ReducedDomain, CodimTwoPointsOfFixture) {
  auto D = build_reduced_domain(fixture_web(), 0.05, 3);
  auto has = [&](Vec p) {
    for (const auto& c : D.components())
      for (const auto& q : c.points)
        if ((q - p).norm() < 1e-12) return true;
    return false;
  };
  EXPECT_TRUE(has(v2(0, 0)));
  EXPECT_TRUE(has(v2(0, 1)));
  EXPECT_TRUE(has(v2(1, 0)));
  EXPECT_TRUE(has(v2(1.0 / 3, 1.0 / 3)));
  EXPECT_TRUE(has(v2(0, 0.5)));
  for (const auto& c : D.components()) EXPECT_NE(c.kind, "degenerate");
}

TEST(ReducedDomain, ProductRotatorHasDegenerateSurfaces) {
  auto cfg = three_mode_config();
  cfg.h = "I1*I2";
  cfg.box.lo = {-1, -1};
  cfg.box.hi = {1, 1};
  Model m = build_model(cfg);
  WebOptions o;
  o.support = SupportMode::Combinatorial;
  auto w = build_web(m, o);
  auto D = build_reduced_domain(w, 0.05, 2);
  int degenerate = 0;
  for (const auto& c : D.components())
    if (c.kind == "degenerate") {
      ++degenerate;
      EXPECT_TRUE(c.whole_surface);
    }
  EXPECT_GE(degenerate, 2);
  EXPECT_LE(D.clearance(v2(0.0, 0.3)), 1e-12);
}

TEST(ReducedDomain, PathAtHalfCrossesCodimTwoPoint) {
  auto D = build_reduced_domain(fixture_web(), 0.05, 3);
  auto pc = D.check_path({v2(-1, 0.5), v2(2, 0.5)});
  EXPECT_FALSE(pc.accepted);
  EXPECT_NEAR((pc.witness - v2(0, 0.5)).norm(), 0.0, 1e-12);
  EXPECT_LE(pc.min_clearance, 1e-12);
}

TEST(ReducedDomain, PathThroughOriginRejected) {
  auto D = build_reduced_domain(fixture_web(), 0.05, 3);
  auto pc = D.check_path({v2(0.5, -0.5), v2(-0.5, 0.5)});
  EXPECT_FALSE(pc.accepted);
  EXPECT_NEAR(pc.witness.norm(), 0.0, 1e-12);
}

TEST(ReducedDomain, ClearPathAccepted) {
  auto D = build_reduced_domain(fixture_web(), 0.05, 3);
  auto pc = D.check_path({v2(1.6, 0.2), v2(0.2, 1.6)});
  EXPECT_TRUE(pc.accepted);
  EXPECT_GT(pc.min_clearance, 0.05);
  EXPECT_TRUE(D.contains(v2(1.6, 0.2)));
  EXPECT_FALSE(D.contains(v2(0.01, 0.01)));
}

// Property: clearance is 1-Lipschitz.
TEST(ReducedDomain, ClearanceLipschitz) {
  auto D = build_reduced_domain(fixture_web(), 0.05, 3);
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0, 2), e(-0.01, 0.01);
  for (int trial = 0; trial < 200; ++trial) {
    Vec a = v2(u(rng), u(rng)), b = a + v2(e(rng), e(rng));
    EXPECT_LE(std::abs(D.clearance(a) - D.clearance(b)), (a - b).norm() + 1e-12);
  }
}

TEST(ReducedDomain, AutomaticTubeRadius) {
  auto D = build_reduced_domain(fixture_web(), 0.05, 3);
  // transverse secular lines at angle asin(1/sqrt(10)) separate by delta*sin at the ball boundary
  const double sep = 0.05 / std::sqrt(10.0);
  EXPECT_NEAR(D.secular_separation(), sep, 1e-12);
  EXPECT_NEAR(D.L(), sep / 2, 1e-12);
  EXPECT_TRUE(D.check_tube(D.L()).ok);
  EXPECT_FALSE(D.check_tube(sep).ok);
}

TEST(ReducedDomain, RequiresSecularOrder) {
  WebOptions o;
  o.max_order = 1;
  auto w = build_web(fixture(), o);
  EXPECT_THROW(build_reduced_domain(w, 0.05, 3), std::invalid_argument);
  EXPECT_THROW(build_reduced_domain(fixture_web(), 0.0, 3), std::invalid_argument);
}
