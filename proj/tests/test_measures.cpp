#include <gtest/gtest.h>

#include <numbers>

#include "generators.hpp"
#include "oracles.hpp"

#include "levelcg/acceptance.hpp"
#include "levelcg/measures.hpp"

using namespace levelcg;

namespace {

const Potential kDw = Potential::double_well();
const LevelGraph kG = build_graph(kDw);

EnsemblePath fixed_ensemble(std::vector<std::vector<PhasePoint>> states, std::vector<double> times) {
  EnsemblePath e;
  e.times = std::move(times);
  e.states = std::move(states);
  return e;
}

double weighted_lp(const GraphMeasure& mu, const GraphMeasure& nu) {
  std::vector<double> a;
  std::vector<double> b;
  for (const auto& x : mu.atoms) a.push_back(x.weight);
  for (const auto& x : nu.atoms) b.push_back(x.weight);
  return acceptance::transport_cost(a, b, [&](std::size_t i, std::size_t j) {
    return oracle::dw_distance(mu.atoms[i].point, nu.atoms[j].point, 0.25);
  });
}

}  // namespace

TEST(Pushforward, IdenticalPointsGiveADirac) {
  const auto ens = fixed_ensemble({std::vector<PhasePoint>(10, {1.0, 0.0})}, {0.0});
  const auto path = pushforward(ens, kG, kDw);
  const auto hist = histogram(path.slices[0], default_bins(kG, 3.0));
  EXPECT_NEAR(hist.mass[kRightEdge][0], 1.0, 1e-12);
  EXPECT_NEAR(path.slices[0].edge_mass(kRightEdge), 1.0, 1e-12);
  EXPECT_EQ(path.slices[0].mean_energy(), 0.0);
}

TEST(Pushforward, CommutesWithSubsampling) {
  gen::Source src(41);
  std::vector<PhasePoint> atoms;
  for (int i = 0; i < 200; ++i) atoms.push_back(gen::phase_point(src));
  const auto all = project_all(atoms, kG, kDw);
  std::vector<PhasePoint> sub;
  std::vector<GraphPoint> picked;
  for (std::size_t i = 0; i < atoms.size(); i += 3) {
    sub.push_back(atoms[i]);
    picked.push_back(all[i]);
  }
  EXPECT_EQ(project_all(sub, kG, kDw), picked);
}

TEST(Pushforward, PreservesMassAndMeanEnergy) {
  gen::Source src(42);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PhasePoint> atoms;
    const int n = src.integer(1, 300);
    double mean_h = 0.0;
    for (int i = 0; i < n; ++i) {
      atoms.push_back(gen::phase_point(src));
      mean_h += hamiltonian(kDw, atoms.back());
    }
    mean_h /= n;
    const auto path = pushforward(fixed_ensemble({atoms}, {0.0}), kG, kDw);
    EXPECT_NEAR(path.slices[0].total_mass(), 1.0, 1e-12);
    EXPECT_NEAR(path.slices[0].mean_energy(), mean_h, 1e-12 * std::max(1.0, mean_h));
    EXPECT_NO_THROW(path.slices[0].validate(kG));
  }
}

TEST(Pushforward, StartSliceOfTheDefaultInitialDatum) {
  const auto path = pushforward(fixed_ensemble({std::vector<PhasePoint>(5, {1.2, 0.0})}, {0.0}), kG, kDw);
  for (const auto& a : path.slices[0].atoms) EXPECT_EQ(a.point, (GraphPoint{kRightEdge, 0.25 * 0.44 * 0.44}));
}

TEST(W1Tree, SameEdge) {
  EXPECT_NEAR(w1_tree(GraphMeasure::dirac({kRightEdge, 0.1}), GraphMeasure::dirac({kRightEdge, 0.2}), kG), 0.1, 1e-15);
}

TEST(W1Tree, ThroughTheVertex) {
  EXPECT_NEAR(w1_tree(GraphMeasure::dirac({kLeftEdge, 0.1}), GraphMeasure::dirac({kRightEdge, 0.1}), kG), 0.3, 1e-15);
  EXPECT_NEAR(w1_tree(GraphMeasure::dirac({kLeftEdge, 0.1}), GraphMeasure::dirac({kAboveEdge, 1.0}), kG), 0.9, 1e-15);
}

TEST(W1Tree, MassBeyondTheTruncation) {
  try {
    w1_tree(GraphMeasure::dirac({kAboveEdge, 5.0}), GraphMeasure::dirac({kAboveEdge, 1.0}), kG, 3.0);
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnboundedSupport);
  }
}

TEST(TransportOracle, TwoByTwoClosedForm) {
  gen::Source src(43);
  for (int i = 0; i < 200; ++i) {
    const double a1 = src.uniform(0.05, 0.95);
    const double b1 = src.uniform(0.05, 0.95);
    std::vector<std::vector<double>> c{{src.uniform(0, 2), src.uniform(0, 2)}, {src.uniform(0, 2), src.uniform(0, 2)}};
    const double lp = acceptance::transport_cost({a1, 1 - a1}, {b1, 1 - b1}, [&](std::size_t r, std::size_t s) { return c[r][s]; });
    EXPECT_NEAR(lp, oracle::transport_2x2(a1, 1 - a1, b1, 1 - b1, c), 1e-12);
  }
}

TEST(TransportOracle, AgreesWithPermutationSearch) {
  gen::Source src(44);
  for (int i = 0; i < 50; ++i) {
    const int k = src.integer(1, 6);
    const auto mu = gen::uniform_measure(src, kG, k);
    const auto nu = gen::uniform_measure(src, kG, k);
    std::vector<GraphPoint> x;
    std::vector<GraphPoint> y;
    for (const auto& a : mu.atoms) x.push_back(a.point);
    for (const auto& a : nu.atoms) y.push_back(a.point);
    EXPECT_NEAR(weighted_lp(mu, nu), oracle::assignment_w1(x, y, 0.25), 1e-12);
  }
}

TEST(W1Tree, MatchesAssignmentOracle) {
  gen::Source src(45);
  for (int i = 0; i < 100; ++i) {
    const int k = src.integer(1, 6);
    const auto mu = gen::uniform_measure(src, kG, k);
    const auto nu = gen::uniform_measure(src, kG, k);
    std::vector<GraphPoint> x;
    std::vector<GraphPoint> y;
    for (const auto& a : mu.atoms) x.push_back(a.point);
    for (const auto& a : nu.atoms) y.push_back(a.point);
    EXPECT_NEAR(w1_tree(mu, nu, kG), oracle::assignment_w1(x, y, 0.25), 1e-10);
  }
}

TEST(W1Tree, MatchesTransportLinearProgram) {
  gen::Source src(46);
  for (int i = 0; i < 100; ++i) {
    const auto mu = gen::measure(src, kG);
    const auto nu = gen::measure(src, kG);
    EXPECT_NEAR(w1_tree(mu, nu, kG), weighted_lp(mu, nu), 1e-10);
  }
}

TEST(W1Tree, MetricProperties) {
  gen::Source src(47);
  for (int i = 0; i < 500; ++i) {
    const auto a = gen::measure(src, kG);
    const auto b = gen::measure(src, kG);
    const auto c = gen::measure(src, kG);
    const double ab = w1_tree(a, b, kG);
    EXPECT_NEAR(ab, w1_tree(b, a, kG), 1e-12);
    EXPECT_LE(w1_tree(a, c, kG), ab + w1_tree(b, c, kG) + 1e-12);
    EXPECT_EQ(w1_tree(a, a, kG), 0.0);
    EXPECT_GE(ab, 0.0);
  }
}

TEST(W1Tree, EqualHistogramsHaveZeroDistance) {
  gen::Source src(48);
  const auto bins = default_bins(kG, 3.0, 16, 32);
  for (int i = 0; i < 50; ++i) {
    const auto h = histogram(gen::measure(src, kG, 6, 3.0), bins);
    EXPECT_EQ(w1_tree(h.to_measure(), h.to_measure(), kG), 0.0);
  }
}

namespace {

GraphMeasurePath constant_path(const GraphMeasure& m, std::size_t count) {
  GraphMeasurePath p;
  for (std::size_t k = 0; k < count; ++k) {
    p.times.push_back(0.1 * static_cast<double>(k));
    p.slices.push_back(m);
  }
  return p;
}

}  // namespace

TEST(SupW1, IdenticalPaths) {
  gen::Source src(49);
  const auto p = constant_path(gen::measure(src, kG), 5);
  EXPECT_EQ(sup_w1_over_time(p, p, kG), 0.0);
}

TEST(SupW1, OneShiftedSnapshot) {
  const auto a = constant_path(GraphMeasure::dirac({kAboveEdge, 1.0}), 6);
  auto b = a;
  b.slices[3] = GraphMeasure::dirac({kAboveEdge, 1.05});
  EXPECT_NEAR(sup_w1_over_time(a, b, kG), 0.05, 1e-12);
}

TEST(SupW1, MonotoneUnderSnapshotSubsets) {
  gen::Source src(50);
  for (int trial = 0; trial < 30; ++trial) {
    GraphMeasurePath a;
    GraphMeasurePath b;
    for (int k = 0; k < 8; ++k) {
      a.times.push_back(k);
      b.times.push_back(k);
      a.slices.push_back(gen::measure(src, kG));
      b.slices.push_back(gen::measure(src, kG));
    }
    GraphMeasurePath sa;
    GraphMeasurePath sb;
    for (int k = 0; k < 8; k += 1 + trial % 3) {
      sa.times.push_back(k);
      sb.times.push_back(k);
      sa.slices.push_back(a.slices[k]);
      sb.slices.push_back(b.slices[k]);
    }
    EXPECT_LE(sup_w1_over_time(sa, sb, kG), sup_w1_over_time(a, b, kG));
  }
}

TEST(SupW1, TimeGridMismatch) {
  const auto a = constant_path(GraphMeasure::dirac({kAboveEdge, 1.0}), 4);
  auto b = a;
  b.times[2] += 0.01;
  auto c = constant_path(GraphMeasure::dirac({kAboveEdge, 1.0}), 5);
  for (const auto* other : {&b, &c}) {
    try {
      sup_w1_over_time(a, *other, kG);
      FAIL() << "no error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::TimeGridMismatch);
    }
  }
}

TEST(Histogram, MassIsPreserved) {
  gen::Source src(51);
  const auto bins = default_bins(kG, 3.0);
  for (int i = 0; i < 200; ++i) {
    const auto m = gen::measure(src, kG, 50, 3.0);
    EXPECT_NEAR(histogram(m, bins).total_mass(), 1.0, 1e-12);
  }
}

TEST(Histogram, RebinningIsTheIdentity) {
  gen::Source src(52);
  const auto bins = default_bins(kG, 3.0, 32, 64);
  for (int i = 0; i < 50; ++i) {
    const auto h = histogram(gen::measure(src, kG, 20, 3.0), bins);
    const auto again = histogram(h.to_measure(), bins);
    for (std::size_t e = 0; e < h.mass.size(); ++e) {
      for (std::size_t k = 0; k < h.mass[e].size(); ++k) EXPECT_EQ(again.mass[e][k], h.mass[e][k]);
    }
  }
}

TEST(Histogram, BoundaryGoesToTheLowerBin) {
  const auto bins = default_bins(kG, 3.0, 16, 32);
  for (int edge : {kLeftEdge, kRightEdge, kAboveEdge}) {
    const auto& b = bins.boundaries[edge];
    for (std::size_t k = 1; k + 1 < b.size(); ++k) {
      const auto h = histogram(GraphMeasure::dirac({edge, b[k]}), bins);
      EXPECT_EQ(h.mass[edge][k - 1], 1.0) << edge << " " << k;
    }
    EXPECT_EQ(bins.locate(edge, b.front()), 0u);
    EXPECT_EQ(bins.locate(edge, b.back()), b.size() - 2);
  }
}

TEST(Histogram, DefaultBinsCoverEdgesAndRefineAtTheSaddle) {
  const auto bins = default_bins(kG, 3.0);
  EXPECT_EQ(bins.bin_count(kLeftEdge), 128u);
  EXPECT_EQ(bins.bin_count(kAboveEdge), 256u);
  const auto& r = bins.boundaries[kRightEdge];
  EXPECT_EQ(r.front(), 0.0);
  EXPECT_EQ(r.back(), 0.25);
  EXPECT_LT(r[r.size() - 1] - r[r.size() - 2], r[1] - r[0]);
  const auto& u = bins.boundaries[kAboveEdge];
  EXPECT_EQ(u.back(), 3.0);
  EXPECT_LT(u[1] - u[0], u[u.size() - 1] - u[u.size() - 2]);
}

TEST(ConditionalP2, TurningPointsHaveNoMomentum) {
  std::vector<PhasePoint> atoms;
  for (double q : {1.1, 1.2, 1.3, -1.25, 1.8}) atoms.push_back({q, 0.0});
  const auto bins = default_bins(kG, 3.0, 8, 8);
  std::size_t total = 0;
  for (const auto& b : conditional_p2(atoms, kG, kDw, bins)) {
    EXPECT_EQ(b.mean_p2, 0.0);
    total += b.count;
  }
  EXPECT_EQ(total, atoms.size());
}

// Harmonic orbit sampled uniformly in time: <p^2> = S/T = h.
TEST(ConditionalP2, HarmonicEquipartition) {
  const auto v = Potential::harmonic();
  const auto g = build_single_well_graph(v);
  BinSpec bins{{{0.0, 0.5, 1.0}}};
  const double h = 0.7;
  double last = 1.0;
  for (int n : {7, 70, 700}) {
    std::vector<PhasePoint> atoms;
    for (int i = 0; i < n; ++i) {
      const double th = 2.0 * std::numbers::pi * (i + 0.3) / n;
      atoms.push_back({std::sqrt(2.0 * h) * std::sin(th), std::sqrt(2.0 * h) * std::cos(th)});
    }
    const auto res = conditional_p2(atoms, g, v, bins);
    EXPECT_EQ(res[1].count, static_cast<std::size_t>(n));
    const double err = std::abs(res[1].mean_p2 - h);
    EXPECT_LE(err, last + 1e-12);
    last = err;
  }
  EXPECT_LT(last, 1e-10);
}

TEST(ConditionalP2, CountWeightedMeansGiveTheEnsembleMean) {
  gen::Source src(53);
  const auto bins = default_bins(kG, 3.0, 16, 32);
  std::vector<PhasePoint> atoms;
  double p2 = 0.0;
  while (atoms.size() < 5000) {
    const auto x = gen::phase_point(src, 1.6, 1.5);
    if (hamiltonian(kDw, x) > 3.0) continue;
    atoms.push_back(x);
    p2 += x.p * x.p;
  }
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& b : conditional_p2(atoms, kG, kDw, bins)) {
    acc += b.mean_p2 * static_cast<double>(b.count);
    count += b.count;
  }
  EXPECT_EQ(count, atoms.size());
  EXPECT_NEAR(acc / static_cast<double>(count), p2 / static_cast<double>(atoms.size()), 1e-12);
}
