#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"

#include "levelcg/hamiltonian.hpp"

using namespace levelcg;

namespace {

const Potential kDw = Potential::double_well();

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

TEST(Hamiltonian, PotentialValues) {
  EXPECT_DOUBLE_EQ(eval_potential(kDw, 0.0), 0.25);
  EXPECT_DOUBLE_EQ(eval_potential(kDw, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(eval_potential(kDw, 2.0), 2.25);
}

TEST(Hamiltonian, GradientValues) {
  EXPECT_DOUBLE_EQ(grad_potential(kDw, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(grad_potential(kDw, 2.0), 6.0);
}

TEST(Hamiltonian, GradientMatchesFiniteDifference) {
  gen::Source src(11);
  const std::vector<Potential> pots{kDw, Potential::harmonic(3.0), Potential({0.1, -0.3, -1.0, 0.2, 0.5, 0.0, 0.05})};
  for (const auto& v : pots) {
    for (int i = 0; i < 500; ++i) {
      const double q = src.uniform(-3.0, 3.0);
      const double fd = oracle::d1([&](double x) { return v.value(x); }, q, 1e-5);
      EXPECT_NEAR(v.gradient(q), fd, 1e-8 * std::max(1.0, std::abs(fd))) << v.describe() << " q=" << q;
      const double fd2 = oracle::d1([&](double x) { return v.gradient(x); }, q, 1e-5);
      EXPECT_NEAR(v.curvature(q), fd2, 1e-8 * std::max(1.0, std::abs(fd2)));
    }
  }
}

TEST(Hamiltonian, EnergyValues) {
  EXPECT_DOUBLE_EQ(hamiltonian(kDw, {0.0, 1.0}), 0.75);
  EXPECT_DOUBLE_EQ(hamiltonian(kDw, {1.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(hamiltonian(kDw, {-0.5, 0.0}), 0.140625);
}

TEST(Hamiltonian, CriticalPointsDoubleWell) {
  const auto cps = critical_points(kDw);
  ASSERT_EQ(cps.size(), 3u);
  EXPECT_NEAR(cps[0].q, -1.0, 1e-12);
  EXPECT_NEAR(cps[0].value, 0.0, 1e-14);
  EXPECT_EQ(cps[0].kind, CriticalKind::minimum);
  EXPECT_NEAR(cps[1].q, 0.0, 1e-12);
  EXPECT_NEAR(cps[1].value, 0.25, 1e-14);
  EXPECT_EQ(cps[1].kind, CriticalKind::maximum);
  EXPECT_NEAR(cps[2].q, 1.0, 1e-12);
  EXPECT_EQ(cps[2].kind, CriticalKind::minimum);
}

TEST(Hamiltonian, CriticalPointsHarmonic) {
  const auto cps = critical_points(Potential::harmonic());
  ASSERT_EQ(cps.size(), 1u);
  EXPECT_NEAR(cps[0].q, 0.0, 1e-12);
  EXPECT_EQ(cps[0].kind, CriticalKind::minimum);
}

TEST(Hamiltonian, NoRealRootOfGradient) {
  // V' = q^2 + 1
  const auto v = Potential::unchecked({0.0, 1.0, 0.0, 1.0 / 3.0});
  EXPECT_EQ(code_of([&] { critical_points(v); }), ErrorCode::NoRoots);
}

TEST(Hamiltonian, DegenerateCriticalPoint) {
  EXPECT_EQ(code_of([] { critical_points(Potential({0.0, 0.0, 0.0, 0.0, 1.0})); }), ErrorCode::DegenerateCritical);
}

TEST(Hamiltonian, RejectsNonConfiningPotentials) {
  EXPECT_EQ(code_of([] { Potential({0.0, 1.0, 0.0, 1.0}); }), ErrorCode::InvalidPotential);
  EXPECT_EQ(code_of([] { Potential({0.0, 0.0, -1.0}); }), ErrorCode::InvalidPotential);
  EXPECT_EQ(code_of([] { Potential({0.0, std::nan(""), 1.0}); }), ErrorCode::InvalidPotential);
}

TEST(Hamiltonian, MirrorSymmetryProperty) {
  gen::Source src(12);
  for (int i = 0; i < 1000000; ++i) {
    const double q = src.uniform(-3.0, 3.0);
    const double p = src.uniform(-3.0, 3.0);
    ASSERT_EQ(hamiltonian(kDw, {q, p}), hamiltonian(kDw, {-q, p}));
    ASSERT_EQ(hamiltonian(kDw, {q, p}), hamiltonian(kDw, {q, -p}));
  }
}

TEST(Hamiltonian, NonNegativeForDoubleWell) {
  gen::Source src(13);
  for (int i = 0; i < 100000; ++i) EXPECT_GE(hamiltonian(kDw, gen::phase_point(src, 5.0, 5.0)), 0.0);
}
