#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "levelcg/config.hpp"
#include "levelcg/duality.hpp"
#include "levelcg/graphdyn.hpp"
#include "levelcg/io.hpp"
#include "levelcg/levelset.hpp"
#include "levelcg/measures.hpp"
#include "levelcg/sde.hpp"

namespace levelcg {

namespace fs = std::filesystem;

/// Graph and coefficient tables for a configuration.
struct Model {
  Potential potential;
  LevelGraph graph;
  CoefficientSet coefficients;

  explicit Model(const RunConfig& cfg)
      : potential(cfg.make_potential()),
        graph(build_graph(potential)),
        coefficients(build_coefficients(potential, graph, cfg.tables)) {}
};

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateResult {
  std::vector<FigureRow> rows;
};

/// Single trajectory at simulate.epsilon: trajectory.csv (t, q, p, h, edge)
/// and projection.csv (t, edge_id, h).
inline SimulateResult cmd_simulate(const RunConfig& cfg, const fs::path& out) {
  const auto v = cfg.make_potential();
  const auto g = build_graph(v);
  const auto traj = integrate_path(v, cfg.sde(cfg.simulate_epsilon, 1), 0);
  SimulateResult res{emit_figure_data(traj, g, v)};
  CsvWriter tw(out / "trajectory.csv", "trajectory", cfg.text, {"t", "q", "p", "h", "edge"});
  CsvWriter pw(out / "projection.csv", "projection", cfg.text, {"t", "edge_id", "h"});
  for (const auto& r : res.rows) {
    tw.row({r.t, r.q, r.p, r.h, std::int64_t{r.edge}});
    pw.row({r.t, std::int64_t{r.edge}, r.h});
  }
  tw.close();
  pw.close();
  return res;
}

// ---------------------------------------------------------------------------
// converge
// ---------------------------------------------------------------------------

struct Occupation {
  double left = 0.0;
  double right = 0.0;
  double above = 0.0;
};

inline Occupation occupation(const GraphMeasure& m) {
  return {m.edge_mass(kLeftEdge), m.edge_mass(kRightEdge), m.edge_mass(kAboveEdge)};
}

struct ConvergeRow {
  double epsilon = 0.0;
  double sup_w1 = 0.0;
  double terminal_w1 = 0.0;
  Occupation terminal;
  std::vector<double> w1;
};

struct ConvergeResult {
  std::vector<double> times;
  std::vector<ConvergeRow> rows;
  Occupation limit;
  double far_boundary_mass = 0.0;
};

/// Limit density from the projected initial point on the snapshot grid.
inline GraphDensityPath limit_density(const Model& m, const RunConfig& cfg, const std::vector<double>& times,
                                      std::size_t cells) {
  FpOptions opt;
  opt.cells_per_edge = cells;
  opt.safety = cfg.fp_safety;
  return solve_graph_fp(m.coefficients, GraphMeasure::dirac(project(m.graph, m.potential, cfg.x0)), times, opt);
}

/// W1 between the projected ensemble and the limit density for every epsilon.
/// Files: converge.csv, converge_w1.csv, limit_fp.csv.
inline ConvergeResult cmd_converge(const RunConfig& cfg, const fs::path& out, bool write = true) {
  const Model m(cfg);
  const auto times = cfg.snapshots();
  const auto fp = limit_density(m, cfg, times, cfg.fp_cells);
  const auto limit = fp.to_measure_path();
  ConvergeResult res;
  res.times = times;
  res.limit = occupation(limit.slices.back());
  for (double x : fp.far_boundary_mass) res.far_boundary_mass = std::max(res.far_boundary_mass, x);
  for (double eps : cfg.converge_epsilons) {
    const auto ens = simulate_ensemble(m.potential, cfg.sde(eps, cfg.converge_n), times);
    const auto pushed = pushforward(ens, m.graph, m.potential);
    ConvergeRow row;
    row.epsilon = eps;
    row.w1 = w1_over_time(pushed, limit, m.graph, cfg.tables.h_max);
    row.sup_w1 = *std::max_element(row.w1.begin(), row.w1.end());
    row.terminal_w1 = row.w1.back();
    row.terminal = occupation(pushed.slices.back());
    res.rows.push_back(std::move(row));
  }
  if (!write) return res;
  CsvWriter sw(out / "converge.csv", "converge", cfg.text,
               {"epsilon", "sup_w1", "terminal_w1", "left", "right", "above"});
  for (const auto& r : res.rows) {
    sw.row({r.epsilon, r.sup_w1, r.terminal_w1, r.terminal.left, r.terminal.right, r.terminal.above});
  }
  sw.row({0.0, 0.0, 0.0, res.limit.left, res.limit.right, res.limit.above});
  sw.close();
  CsvWriter ww(out / "converge_w1.csv", "converge_w1", cfg.text, {"epsilon", "t", "w1"});
  for (const auto& r : res.rows) {
    for (std::size_t k = 0; k < times.size(); ++k) ww.row({r.epsilon, times[k], r.w1[k]});
  }
  ww.close();
  CsvWriter fw(out / "limit_fp.csv", "fp_snapshots", cfg.text, {"t", "edge_id", "h_cell_center", "mass"});
  for (std::size_t k = 0; k < fp.times.size(); ++k) {
    for (std::size_t e = 0; e < fp.grid.edges.size(); ++e) {
      const auto& ge = fp.grid.edges[e];
      for (std::size_t i = 0; i < ge.cells(); ++i) {
        fw.row({fp.times[k], static_cast<std::int64_t>(e), ge.centre(i), fp.masses[k][e][i]});
      }
    }
  }
  fw.close();
  return res;
}

// ---------------------------------------------------------------------------
// duality
// ---------------------------------------------------------------------------

/// Every other snapshot of a path whose interval count is even; empty
/// otherwise.
template <class Path>
inline Path coarsen_time(const Path& p) {
  Path out;
  if (p.times.size() < 3 || (p.times.size() - 1) % 2 != 0) return out;
  out = p;
  out.times.clear();
  if constexpr (requires { p.states; }) {
    out.states.clear();
  } else {
    out.slices.clear();
  }
  for (std::size_t k = 0; k < p.times.size(); k += 2) {
    out.times.push_back(p.times[k]);
    if constexpr (requires { p.states; }) {
      out.states.push_back(p.states[k]);
    } else {
      out.slices.push_back(p.slices[k]);
    }
  }
  return out;
}

struct LimitRow {
  std::string label;
  DualValue fine;
  double budget = 0.0;
};

struct DualityRun {
  DualityReport report;
  /// Per epsilon and member, |J(dt) - J(2 dt)| on the snapshot grid.
  std::vector<std::vector<double>> full_delta;
  std::vector<std::vector<double>> hat_eps_delta;
  /// Per epsilon, the delta of the member attaining the supremum.
  std::vector<double> full_budget;
  std::vector<double> hat_eps_budget;
  std::vector<LimitRow> limit_rows;
  /// Refinement delta of the member attaining sup J_hat_zero.
  double limit_sup_budget = 0.0;
  /// Largest refinement delta over the family.
  double limit_budget = 0.0;
  double shift = 0.0;
  double sup_shifted = -kInf;
  bool shift_detected = false;
};

inline DualityRun run_duality(const RunConfig& cfg) {
  const Model m(cfg);
  const auto& c = m.coefficients;
  auto spec = cfg.family;
  spec.h_max = cfg.tables.h_max;
  const auto family = make_test_family(m.graph, spec);
  DualityRun run;

  // Limit path with its refinement deltas.
  const auto fine_times = snapshot_grid(cfg.t_final, cfg.limit_snapshot_spacing);
  const auto limit = limit_density(m, cfg, fine_times, cfg.fp_cells).to_measure_path();
  const auto coarse = limit_density(m, cfg, fine_times, std::max<std::size_t>(cfg.fp_cells / 2, 8)).to_measure_path();
  const auto limit_2dt = coarsen_time(limit);
  for (const auto& f : family) {
    LimitRow row{member_label(f), j_hat_zero(limit, c, f), 0.0};
    row.budget = std::abs(row.fine.value - j_hat_zero(coarse, c, f).value);
    if (!limit_2dt.times.empty()) row.budget += std::abs(row.fine.value - j_hat_zero(limit_2dt, c, f).value);
    run.limit_budget = std::max(run.limit_budget, row.budget);
    run.limit_rows.push_back(std::move(row));
  }
  {
    double best = -kInf;
    for (const auto& r : run.limit_rows) {
      if (r.fine.value > best) {
        best = r.fine.value;
        run.limit_sup_budget = r.budget;
      }
    }
  }

  std::vector<EnsemblePath> ensembles;
  ensembles.reserve(cfg.duality_epsilons.size());
  for (double eps : cfg.duality_epsilons) {
    ensembles.push_back(simulate_ensemble(m.potential, cfg.sde(eps, cfg.duality_n), cfg.snapshots()));
  }
  std::vector<ChainInput> inputs;
  for (std::size_t i = 0; i < ensembles.size(); ++i) inputs.push_back({cfg.duality_epsilons[i], &ensembles[i]});
  run.report = inequality_chain_report(inputs, limit, c, m.potential, family, run.limit_budget);

  for (std::size_t i = 0; i < ensembles.size(); ++i) {
    const auto half = coarsen_time(ensembles[i]);
    const auto& rows = run.report.sweeps[i].rows;
    std::vector<double> df(family.size(), 0.0);
    std::vector<double> dh(family.size(), 0.0);
    if (!half.times.empty()) {
      const auto pushed_half = pushforward(half, m.graph, m.potential);
      for (std::size_t k = 0; k < family.size(); ++k) {
        df[k] = std::abs(rows[k].full.value - j_full(half, m.graph, m.potential, family[k], inputs[i].epsilon).value);
        dh[k] = std::abs(rows[k].hat_eps.value - j_hat_eps(pushed_half, c, family[k]).value);
      }
    }
    double bf = 0.0;
    double bh = 0.0;
    double best_f = -kInf;
    double best_h = -kInf;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k].full.value > best_f) {
        best_f = rows[k].full.value;
        bf = df[k];
      }
      if (rows[k].hat_eps.value > best_h) {
        best_h = rows[k].hat_eps.value;
        bh = dh[k];
      }
    }
    run.full_delta.push_back(std::move(df));
    run.hat_eps_delta.push_back(std::move(dh));
    run.full_budget.push_back(bf);
    run.hat_eps_budget.push_back(bh);
  }

  run.shift = cfg.shift;
  const auto shifted = shift_energy(limit, m.graph, cfg.shift);
  for (const auto& f : family) run.sup_shifted = std::max(run.sup_shifted, j_hat_zero(shifted, c, f).value);
  run.shift_detected = !family.empty() && run.sup_shifted > run.limit_budget;
  return run;
}

inline nlohmann::ordered_json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json duality_json(const DualityRun& run) {
  using J = nlohmann::ordered_json;
  J body;
  J sweeps = J::array();
  for (std::size_t i = 0; i < run.report.sweeps.size(); ++i) {
    const auto& sw = run.report.sweeps[i];
    J s;
    s["epsilon"] = sw.epsilon;
    s["sup_j_full"] = number_or_null(sw.sup_full);
    s["sup_j_full_std_error"] = sw.sup_full_std_error;
    s["sup_j_hat_eps"] = number_or_null(sw.sup_hat_eps);
    s["sup_j_hat_eps_std_error"] = sw.sup_hat_eps_std_error;
    s["max_substitution_error"] = sw.max_substitution_error;
    s["j_full_quadrature_budget"] = i < run.full_budget.size() ? run.full_budget[i] : 0.0;
    s["j_hat_eps_quadrature_budget"] = i < run.hat_eps_budget.size() ? run.hat_eps_budget[i] : 0.0;
    s["chain_holds"] = sw.chain_holds;
    J rows = J::array();
    for (const auto& r : sw.rows) {
      J row;
      row["g"] = r.label;
      row["j_full"] = r.full.value;
      row["j_full_std_error"] = r.full.std_error;
      row["j_full_quadratic"] = r.full.quadratic;
      row["j_hat_eps"] = r.hat_eps.value;
      row["j_hat_eps_std_error"] = r.hat_eps.std_error;
      row["substitution_error"] = r.substitution_error;
      const std::size_t k = rows.size();
      if (i < run.full_delta.size() && k < run.full_delta[i].size()) {
        row["j_full_quadrature_delta"] = run.full_delta[i][k];
        row["j_hat_eps_quadrature_delta"] = run.hat_eps_delta[i][k];
      }
      rows.push_back(row);
    }
    s["rows"] = rows;
    sweeps.push_back(s);
  }
  body["epsilons"] = sweeps;
  J limit;
  limit["sup_j_hat_zero"] = number_or_null(run.report.sup_hat_zero);
  limit["sup_discretization_budget"] = run.limit_sup_budget;
  limit["max_discretization_budget"] = run.limit_budget;
  J rows = J::array();
  for (const auto& r : run.limit_rows) {
    J row;
    row["g"] = r.label;
    row["j_hat_zero"] = r.fine.value;
    row["linear"] = r.fine.linear;
    row["quadratic"] = r.fine.quadratic;
    row["discretization_budget"] = r.budget;
    rows.push_back(row);
  }
  limit["rows"] = rows;
  body["limit"] = limit;
  body["liminf_holds"] = run.report.liminf_holds;
  J shifted;
  shifted["shift"] = run.shift;
  shifted["sup_j_hat_zero"] = number_or_null(run.sup_shifted);
  shifted["off_solution_detected"] = run.shift_detected;
  body["shifted"] = shifted;
  body["warnings"] = run.report.warnings;
  return body;
}

/// duality.json
inline DualityRun cmd_duality(const RunConfig& cfg, const fs::path& out) {
  auto run = run_duality(cfg);
  write_json(out / "duality.json", "duality", cfg.text, duality_json(run));
  return run;
}

// ---------------------------------------------------------------------------
// coefficients
// ---------------------------------------------------------------------------

/// coefficients.csv (edge_id, h, action, period, p2_avg, diffusion) on the
/// table grids, and gluing.csv (edge_id, beta, prob).
inline GluingWeights cmd_coefficients(const RunConfig& cfg, const fs::path& out) {
  const Model m(cfg);
  CsvWriter cw(out / "coefficients.csv", "coefficients", cfg.text,
               {"edge_id", "h", "action", "period", "p2_avg", "diffusion"});
  for (const auto& ec : m.coefficients.edges) {
    const auto& hs = ec.grid();
    const auto& s = ec.action_values();
    const auto& t = ec.period_values();
    for (std::size_t k = 0; k < hs.size(); ++k) {
      cw.row({std::int64_t{ec.edge_id()}, hs[k], s[k], t[k], s[k] / t[k], 2.0 * s[k] / t[k]});
    }
  }
  cw.close();
  const auto gw = gluing_weights(m.coefficients);
  CsvWriter gwr(out / "gluing.csv", "gluing", cfg.text, {"edge_id", "beta", "prob"});
  for (std::size_t i = 0; i < gw.beta.size(); ++i) gwr.row({static_cast<std::int64_t>(i), gw.beta[i], gw.prob[i]});
  gwr.close();
  return gw;
}

}  // namespace levelcg
