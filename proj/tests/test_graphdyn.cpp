#include <gtest/gtest.h>

#include "levelcg/graphdyn.hpp"

using namespace levelcg;

namespace {

const Potential kDw = Potential::double_well();
const LevelGraph kG = build_graph(kDw);

const CoefficientSet& tables() {
  static const CoefficientSet c = build_coefficients(kDw, kG);
  return c;
}

/// One unbounded edge with S = 0, hence a = 0: pure transport at speed 1.
CoefficientSet transport_only() {
  LevelGraph g;
  g.edges = {Edge{kSingleEdge, 0.0, kInf, EdgeSide::single_well, -kInf, kInf}};
  g.leaves = {LeafVertex{kSingleEdge, 0.0, 0.0}};
  std::vector<double> grid;
  for (int k = 0; k <= 16; ++k) grid.push_back(k);
  CoefficientSpec spec;
  spec.h_max = 16.0;
  return CoefficientSet{g, spec, {EdgeCoefficients::from_table(kSingleEdge, grid, std::vector<double>(grid.size(), 0.0),
                                                               std::vector<double>(grid.size(), 1.0))}};
}

double edge_fraction(const std::vector<GraphPoint>& atoms, int edge) {
  double s = 0.0;
  for (const auto& y : atoms) s += y.edge == edge;
  return s / static_cast<double>(atoms.size());
}

}  // namespace

TEST(Gluing, SymmetricWeights) {
  const auto w = gluing_weights(tables());
  EXPECT_EQ(w.beta[kLeftEdge], w.beta[kRightEdge]);
  EXPECT_EQ(w.prob[kLeftEdge], w.prob[kRightEdge]);
  EXPECT_NEAR(w.prob[kAboveEdge], 0.5, 1e-3);
  EXPECT_NEAR(w.prob[kLeftEdge], 0.25, 1e-3);
  EXPECT_NEAR(w.prob[0] + w.prob[1] + w.prob[2], 1.0, 1e-15);
}

TEST(Gluing, ShellEmissionTendsToTheGluingWeights) {
  const auto w = gluing_weights(tables());
  double last = 1.0;
  for (double shell : {0.04, 0.01, 0.0025}) {
    const auto q = shell_emission_probabilities(tables(), shell);
    double dist = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) dist = std::max(dist, std::abs(q[i] - w.prob[i]));
    EXPECT_LT(dist, last);
    last = dist;
  }
  EXPECT_LT(last, 0.01);
}

TEST(GraphMonteCarlo, TransportWithoutDiffusion) {
  const auto c = transport_only();
  GraphSdeConfig cfg;
  cfg.coefficients = &c;
  cfg.dt = 1e-3;
  cfg.start = {kSingleEdge, 0.5};
  cfg.n = 8;
  cfg.t_final = 1.0;
  const auto path = simulate_graph_ensemble(cfg, {0.0, 0.25, 1.0});
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    for (const auto& y : path.states[k]) EXPECT_NEAR(y.h, 0.5 + path.times[k], 1e-12);
  }
}

TEST(GraphMonteCarlo, ConfigValidation) {
  GraphSdeConfig cfg;
  cfg.coefficients = &tables();
  cfg.vertex_shell = 0.5 * tables().spec.delta_sing;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.vertex_shell = 0.01;
  cfg.dt = 1e-3;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.dt = 0.0;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_LT(std::sqrt(cfg.shell_diffusion_max() * cfg.step()), cfg.vertex_shell / 4.0);
}

TEST(GraphMonteCarlo, ThreadIndependent) {
  GraphSdeConfig cfg;
  cfg.coefficients = &tables();
  cfg.n = 200;
  cfg.t_final = 0.1;
  cfg.threads = 1;
  const auto a = simulate_graph_ensemble(cfg, {0.0, 0.1});
  cfg.threads = 4;
  const auto b = simulate_graph_ensemble(cfg, {0.0, 0.1});
  EXPECT_EQ(a.states, b.states);
}

TEST(GraphMonteCarlo, EnergyDriftAwayFromTheVertex) {
  GraphSdeConfig cfg;
  cfg.coefficients = &tables();
  cfg.vertex_shell = 0.05;
  cfg.start = {kAboveEdge, 5.0};
  cfg.n = 20000;
  cfg.t_final = 0.1;
  const auto path = simulate_graph_ensemble(cfg, {0.0, 0.1});
  double s = 0.0;
  double s2 = 0.0;
  for (const auto& y : path.states[1]) {
    ASSERT_EQ(y.edge, kAboveEdge);
    ASSERT_GT(y.h, 0.25 + cfg.vertex_shell);
    s += y.h - 5.0;
    s2 += (y.h - 5.0) * (y.h - 5.0);
  }
  const double n = static_cast<double>(cfg.n);
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, 0.1, 3.0 * se);
}

TEST(GraphMonteCarlo, SymmetricOccupations) {
  GraphSdeConfig cfg;
  cfg.coefficients = &tables();
  cfg.vertex_shell = 0.02;
  cfg.start = {kAboveEdge, 0.5};
  cfg.n = 4000;
  cfg.t_final = 1.0;
  const auto path = simulate_graph_ensemble(cfg, {1.0});
  const double l = edge_fraction(path.states[0], kLeftEdge);
  const double r = edge_fraction(path.states[0], kRightEdge);
  const double se = std::sqrt((l + r) / static_cast<double>(cfg.n));
  EXPECT_NEAR(l, r, 3.0 * se);
}

TEST(GraphMonteCarlo, ShellWidthRobustness) {
  std::vector<std::array<double, 3>> occ;
  const std::size_t n = 2000;
  for (double shell : {0.02, 0.01}) {
    GraphSdeConfig cfg;
    cfg.coefficients = &tables();
    cfg.vertex_shell = shell;
    cfg.n = n;
    cfg.t_final = 1.0;
    const auto path = simulate_graph_ensemble(cfg, {1.0});
    occ.push_back({edge_fraction(path.states[0], 0), edge_fraction(path.states[0], 1), edge_fraction(path.states[0], 2)});
  }
  for (int e = 0; e < 3; ++e) {
    const double p = 0.5 * (occ[0][e] + occ[1][e]);
    const double ci = 3.0 * std::sqrt(2.0 * p * (1.0 - p) / static_cast<double>(n));
    EXPECT_NEAR(occ[0][e], occ[1][e], ci) << "edge " << e;
  }
}

TEST(FokkerPlanck, TransportOfABox) {
  const auto c = transport_only();
  FpOptions opt;
  opt.cells_per_edge = 512;
  const auto grid = make_fp_grid(c, opt.cells_per_edge);
  std::vector<std::vector<double>> init{std::vector<double>(grid.edges[0].cells(), 0.0)};
  double total = 0.0;
  for (std::size_t i = 0; i < grid.edges[0].cells(); ++i) {
    const double x = grid.edges[0].centre(i);
    if (x > 1.0 && x < 1.5) {
      init[0][i] = 1.0;
      total += 1.0;
    }
  }
  for (double& m : init[0]) m /= total;
  const auto sol = solve_graph_fp(c, init, {0.0, 0.1}, opt);
  auto centre_of_mass = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i < sol.grid.edges[0].cells(); ++i) s += sol.masses[k][0][i] * sol.grid.edges[0].centre(i);
    return s;
  };
  const double moved = centre_of_mass(1) - centre_of_mass(0);
  EXPECT_NEAR(moved, 0.1, 1e-3);
}

TEST(FokkerPlanck, MassAndPositivity) {
  const auto sol = solve_graph_fp(tables(), GraphMeasure::dirac({kRightEdge, 0.0484}), snapshot_grid(1.0, 0.05),
                                  FpOptions{.cells_per_edge = 256});
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    EXPECT_NEAR(sol.total_mass(k), 1.0, 1e-6);
    for (const auto& e : sol.masses[k]) {
      for (double m : e) ASSERT_GE(m, 0.0);
    }
  }
  EXPECT_GT(sol.slice_measure(sol.times.size() - 1).edge_mass(kLeftEdge), 0.01);
  EXPECT_EQ(sol.beta.size(), 3u);
}

TEST(FokkerPlanck, MirrorSymmetricProfiles) {
  const auto sol = solve_graph_fp(tables(), GraphMeasure::dirac({kAboveEdge, 0.5}), {0.0, 0.5, 1.0},
                                  FpOptions{.cells_per_edge = 256});
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    const auto& l = sol.masses[k][kLeftEdge];
    const auto& r = sol.masses[k][kRightEdge];
    for (std::size_t i = 0; i < l.size(); ++i) ASSERT_NEAR(l[i], r[i], 1e-10);
  }
}

TEST(FokkerPlanck, RejectsBadInput) {
  const auto grid = make_fp_grid(tables(), 64);
  std::vector<std::vector<double>> half;
  for (const auto& e : grid.edges) half.emplace_back(e.cells(), 0.0);
  half[0][3] = 0.5;
  try {
    solve_graph_fp(tables(), half, {0.0, 0.1}, FpOptions{.cells_per_edge = 64});
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MassLoss);
  }
  FpOptions big;
  big.cells_per_edge = 64;
  big.dt = 1.0;
  try {
    solve_graph_fp(tables(), GraphMeasure::dirac({kAboveEdge, 1.0}), {0.0, 1.0}, big);
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CFLViolation);
  }
}
