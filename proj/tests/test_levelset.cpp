#include <gtest/gtest.h>

#include <numbers>

#include "generators.hpp"
#include "oracles.hpp"

#include "levelcg/levelset.hpp"

using namespace levelcg;

namespace {

const Potential kDw = Potential::double_well();
const LevelGraph kG = build_graph(kDw);
const Potential kHarm = Potential::harmonic();
const LevelGraph kG1 = build_single_well_graph(kHarm);

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

}  // namespace

TEST(LevelGraph, DoubleWellTopology) {
  ASSERT_EQ(kG.edges.size(), 3u);
  ASSERT_TRUE(kG.has_vertex());
  EXPECT_NEAR(kG.h_star(), 0.25, 1e-14);
  ASSERT_EQ(kG.leaves.size(), 2u);
  EXPECT_NEAR(kG.leaves[0].h, 0.0, 1e-14);
  EXPECT_NEAR(kG.leaves[1].h, 0.0, 1e-14);
  EXPECT_EQ(kG.edge(kLeftEdge).side, EdgeSide::left_well);
  EXPECT_EQ(kG.edge(kRightEdge).side, EdgeSide::right_well);
  EXPECT_EQ(kG.edge(kAboveEdge).side, EdgeSide::above_saddle);
  EXPECT_EQ(kG.orientation(kLeftEdge), 1);
  EXPECT_EQ(kG.orientation(kAboveEdge), -1);
}

TEST(LevelGraph, HarmonicHasNoInteriorVertex) {
  EXPECT_EQ(code_of([] { build_graph(Potential::harmonic()); }), ErrorCode::UnsupportedTopology);
  EXPECT_EQ(kG1.edges.size(), 1u);
  EXPECT_FALSE(kG1.has_vertex());
}

TEST(LevelGraph, EnergyShift) {
  const auto g = build_graph(kDw.shifted(1.0));
  ASSERT_EQ(g.edges.size(), 3u);
  EXPECT_NEAR(g.h_star(), 1.25, 1e-14);
  EXPECT_NEAR(g.leaves[0].h, 1.0, 1e-14);
  EXPECT_NEAR(g.leaves[1].h, 1.0, 1e-14);
}

TEST(Projection, Examples) {
  EXPECT_EQ(project(kG, kDw, {1.0, 0.0}), (GraphPoint{kRightEdge, 0.0}));
  EXPECT_EQ(project(kG, kDw, {0.0, 1.0}), (GraphPoint{kAboveEdge, 0.75}));
  EXPECT_EQ(project(kG, kDw, {-0.5, 0.0}), (GraphPoint{kLeftEdge, 0.140625}));
  EXPECT_EQ(project(kG, kDw, {0.0, 0.0}).edge, kAboveEdge);
  EXPECT_TRUE(is_at_saddle(kG, kDw, {0.0, 0.0}));
}

TEST(Projection, PreservesEnergyProperty) {
  gen::Source src(21);
  for (int i = 0; i < 100000; ++i) {
    const auto x = gen::phase_point(src, 2.5, 2.0);
    const auto y = project(kG, kDw, x);
    ASSERT_EQ(y.h, hamiltonian(kDw, x));
    const auto& e = kG.edge(y.edge);
    ASSERT_GE(y.h, e.h_lo);
    ASSERT_LE(y.h, e.h_hi);
    if (y.edge != kAboveEdge) ASSERT_EQ(y.edge == kRightEdge, x.q > 0.0);
  }
}

TEST(TurningPoints, Examples) {
  const auto r = turning_points(kDw, kG, kRightEdge, 0.25);
  EXPECT_NEAR(r.q_minus, 0.0, 1e-12);
  EXPECT_NEAR(r.q_plus, std::sqrt(2.0), 1e-12);
  const auto a = turning_points(kDw, kG, kAboveEdge, 1.0);
  EXPECT_NEAR(a.q_minus, -std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(a.q_plus, std::sqrt(3.0), 1e-12);
  for (double h : {0.01, 0.5, 2.0}) {
    const auto t = turning_points(kHarm, kG1, kSingleEdge, h);
    EXPECT_NEAR(t.q_minus, -std::sqrt(2.0 * h), 1e-12);
    EXPECT_NEAR(t.q_plus, std::sqrt(2.0 * h), 1e-12);
  }
}

TEST(TurningPoints, OutsideEdgeIsAnError) {
  EXPECT_EQ(code_of([] { turning_points(kDw, kG, kRightEdge, 0.3); }), ErrorCode::OutOfRange);
  EXPECT_EQ(code_of([] { turning_points(kDw, kG, kAboveEdge, 0.2); }), ErrorCode::OutOfRange);
}

TEST(Action, HarmonicCircleArea) {
  for (double h : {1e-3, 0.1, 0.5, 1.0, 3.0}) EXPECT_NEAR(action(kHarm, kG1, kSingleEdge, h), 2.0 * std::numbers::pi * h, 1e-8);
}

TEST(Action, RightWellAtSaddle) { EXPECT_NEAR(action(kDw, kG, kRightEdge, 0.25), 4.0 / 3.0, 1e-10); }

TEST(Action, VanishesAtTheMinimum) {
  EXPECT_EQ(action(kDw, kG, kRightEdge, 0.0), 0.0);
  EXPECT_LT(action(kDw, kG, kRightEdge, 1e-8), 1e-7);
}

TEST(Action, MatchesIndependentQuadrature) {
  for (int edge : {kLeftEdge, kRightEdge}) {
    for (double h : {1e-4, 0.01, 0.1, 0.2, 0.2499}) {
      EXPECT_NEAR(action(kDw, kG, edge, h), oracle::dw_action(edge, h), 1e-10) << edge << " " << h;
    }
  }
  for (double h : {0.2501, 0.3, 1.0, 4.0, 10.0}) {
    EXPECT_NEAR(action(kDw, kG, kAboveEdge, h), oracle::dw_action(kAboveEdge, h), 1e-9 * std::max(1.0, h)) << h;
  }
}

TEST(Period, HarmonicIsochronous) {
  for (double h : {1e-3, 0.1, 1.0, 5.0}) EXPECT_NEAR(period(kHarm, kG1, kSingleEdge, h), 2.0 * std::numbers::pi, 1e-6);
}

TEST(Period, HarmonicLimitAtTheMinimum) {
  const double t = period(kDw, kG, kRightEdge, 1e-6);
  EXPECT_NEAR(t, 2.0 * std::numbers::pi / std::sqrt(2.0), 1e-4);
}

TEST(Period, DerivativeOfAction) {
  const double d = 1e-5;
  for (int edge : {kLeftEdge, kRightEdge}) {
    for (double h : {0.01, 0.1, 0.2, 0.24}) {
      const double fd = (action(kDw, kG, edge, h + d) - action(kDw, kG, edge, h - d)) / (2.0 * d);
      EXPECT_NEAR(period(kDw, kG, edge, h), fd, 1e-3 * fd);
    }
  }
  for (double h : {0.26, 0.5, 2.0, 8.0}) {
    const double fd = (action(kDw, kG, kAboveEdge, h + d) - action(kDw, kG, kAboveEdge, h - d)) / (2.0 * d);
    EXPECT_NEAR(period(kDw, kG, kAboveEdge, h), fd, 1e-3 * fd);
  }
}

TEST(Period, MatchesIndependentQuadrature) {
  for (double h : {0.05, 0.2}) EXPECT_NEAR(period(kDw, kG, kRightEdge, h), oracle::dw_period(kRightEdge, h), 1e-7);
  for (double h : {0.5, 3.0}) EXPECT_NEAR(period(kDw, kG, kAboveEdge, h), oracle::dw_period(kAboveEdge, h), 1e-7);
}

TEST(Period, RejectsTheSaddleBand) {
  EXPECT_EQ(code_of([] { period(kDw, kG, kRightEdge, 0.25 - 1e-5); }), ErrorCode::NearSaddle);
  EXPECT_EQ(code_of([] { period(kDw, kG, kAboveEdge, 0.25 + 1e-5); }), ErrorCode::NearSaddle);
}

TEST(Coefficients, HarmonicEquipartition) {
  CoefficientSpec spec;
  spec.points = 64;
  spec.h_max = 4.0;
  const auto c = build_coefficients(kHarm, kG1, spec);
  for (double h : {1e-3, 0.05, 0.5, 1.0, 3.5}) EXPECT_NEAR(c.edge(kSingleEdge).p2_avg(h), h, 1e-6 * std::max(1.0, h));
}

class DoubleWellTables : public ::testing::Test {
 protected:
  static const CoefficientSet& set() {
    static const CoefficientSet c = [] {
      return build_coefficients(kDw, kG);
    }();
    return c;
  }
};

TEST_F(DoubleWellTables, HarmonicLimitNearTheLeaf) {
  const double h = 1e-4;
  const double p2 = oracle::dw_action(kRightEdge, h) / period(kDw, kG, kRightEdge, h);
  EXPECT_NEAR(p2, h, 0.01 * h);
  EXPECT_NEAR(set().edge(kRightEdge).p2_avg(h), h, 0.01 * h);
}

TEST(VertexAreas, ExactAdditivityAtTheSaddle) {
  const double hs = kG.h_star();
  EXPECT_NEAR(action(kDw, kG, kAboveEdge, hs), action(kDw, kG, kLeftEdge, hs) + action(kDw, kG, kRightEdge, hs), 1e-10);
}

// Near the saddle T_i(h) = -a_i log|h - h*| + b_i with a = 1, 1, 2 (V''(0) = -1),
// so integrating T across the band gives a mismatch delta * (sum T_i + sum a_i).
TEST(VertexAreas, MismatchAcrossTheSaddleBand) {
  const double hs = kG.h_star();
  for (double ds : {1e-4, 1e-5, 1e-6}) {
    const double above = action(kDw, kG, kAboveEdge, hs + ds);
    const double wells = action(kDw, kG, kLeftEdge, hs - ds) + action(kDw, kG, kRightEdge, hs - ds);
    const double periods = period(kDw, kG, kAboveEdge, hs + ds, ds) + period(kDw, kG, kLeftEdge, hs - ds, ds) +
                           period(kDw, kG, kRightEdge, hs - ds, ds);
    EXPECT_NEAR(above - wells, ds * (periods + 4.0), 0.02 * (above - wells)) << ds;
  }
  const double tight = 1e-6;
  EXPECT_NEAR(action(kDw, kG, kAboveEdge, hs + tight),
              action(kDw, kG, kLeftEdge, hs - tight) + action(kDw, kG, kRightEdge, hs - tight), 1e-3);
}

TEST_F(DoubleWellTables, SymmetricWells) {
  const auto& l = set().edge(kLeftEdge);
  const auto& r = set().edge(kRightEdge);
  ASSERT_EQ(l.grid().size(), r.grid().size());
  for (std::size_t i = 0; i < l.grid().size(); ++i) {
    EXPECT_NEAR(l.action_values()[i], r.action_values()[i], 1e-12);
    EXPECT_NEAR(l.period_values()[i], r.period_values()[i], 1e-9 * r.period_values()[i]);
  }
}

TEST_F(DoubleWellTables, ActionIncreasesAndInterpolantIsMonotone) {
  for (const auto& e : set().edges) {
    const auto& s = e.action_values();
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GT(s[i], s[i - 1]);
    const double lo = e.grid().front();
    const double hi = e.grid().back();
    double prev = e.action(lo);
    for (int k = 1; k <= 2000; ++k) {
      const double x = e.action(lo + (hi - lo) * k / 2000.0);
      EXPECT_GE(x, prev);
      prev = x;
    }
  }
}

TEST_F(DoubleWellTables, InterpolantMatchesDirectQuadrature) {
  gen::Source src(22);
  for (int i = 0; i < 60; ++i) {
    const int edge = src.integer(0, 2);
    const auto& e = set().edge(edge);
    const double h = src.uniform(e.grid().front(), std::min(e.grid().back(), 4.0));
    const double s = action(kDw, kG, edge, h);
    EXPECT_NEAR(e.action(h), s, 1e-5 * std::max(1.0, s)) << edge << " " << h;
    const double p2 = s / period(kDw, kG, edge, h);
    EXPECT_NEAR(e.p2_avg(h), p2, 1e-4 * std::max(0.1, p2)) << edge << " " << h;
  }
}
