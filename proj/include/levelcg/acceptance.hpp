#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "levelcg/commands.hpp"
#include "levelcg/config.hpp"
#include "levelcg/duality.hpp"
#include "levelcg/graphdyn.hpp"
#include "levelcg/levelset.hpp"
#include "levelcg/measures.hpp"
#include "levelcg/rng.hpp"
#include "levelcg/sde.hpp"

namespace levelcg {

struct CriterionResult {
  std::string id;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

namespace acceptance {

// Tolerances and run sizes. Changing any of these changes what is accepted.
inline constexpr double kA1ActionTol = 1e-8;
inline constexpr double kA1PeriodTol = 1e-6;
inline constexpr double kA2SaddleTol = 1e-3;
inline constexpr double kA2LimitTol = 1e-6;
inline constexpr std::size_t kA3N = 10000;
inline constexpr double kA3Sigmas = 3.0;
inline constexpr std::size_t kA4N = 10000;
inline constexpr double kA5RelTol = 0.05;
inline constexpr std::size_t kA5N = 10000;
inline constexpr std::size_t kA5MinCount = 200;
inline constexpr std::size_t kA5DualityN = 2000;
inline constexpr std::size_t kA6SdeN = 3000;
inline constexpr std::size_t kA6GraphN = 4000;
inline constexpr std::uint64_t kA6MinEvents = 10000;
inline constexpr double kA6Sigmas = 3.0;
inline constexpr std::size_t kA7N = 10000;
inline constexpr double kA7MassTol = 1e-6;
inline constexpr std::size_t kA8N = 10000;
inline constexpr double kA8Sigmas = 3.0;
inline constexpr std::size_t kA9Instances = 100;
inline constexpr double kA9Tol = 1e-10;
inline constexpr double kA10Band = 0.05;
inline constexpr double kA10MinRange = 0.25;

inline std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Transport LP oracle
// ---------------------------------------------------------------------------

/// Minimum-cost transport between two discrete measures of equal mass with
/// ground cost `cost(i, j)`, by successive shortest paths (Bellman-Ford on the
/// residual network).
inline double transport_cost(const std::vector<double>& a, const std::vector<double>& b,
                             const std::function<double(std::size_t, std::size_t)>& cost) {
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  const std::size_t src = m + n;
  const std::size_t snk = m + n + 1;
  struct Arc {
    std::size_t to;
    double cap;
    double cost;
    std::size_t rev;
  };
  std::vector<std::vector<Arc>> adj(m + n + 2);
  auto add = [&](std::size_t u, std::size_t v, double cap, double c) {
    adj[u].push_back({v, cap, c, adj[v].size()});
    adj[v].push_back({u, 0.0, -c, adj[u].size() - 1});
  };
  const double big = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) add(src, i, a[i], 0.0);
  for (std::size_t j = 0; j < n; ++j) add(m + j, snk, b[j], 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) add(i, m + j, big, cost(i, j));
  }
  double total = 0.0;
  constexpr double kEps = 1e-15;
  for (;;) {
    std::vector<double> dist(adj.size(), big);
    std::vector<std::size_t> prev_node(adj.size(), 0);
    std::vector<std::size_t> prev_arc(adj.size(), 0);
    dist[src] = 0.0;
    for (std::size_t it = 0; it < adj.size(); ++it) {
      bool changed = false;
      for (std::size_t u = 0; u < adj.size(); ++u) {
        if (dist[u] == big) continue;
        for (std::size_t k = 0; k < adj[u].size(); ++k) {
          const auto& e = adj[u][k];
          if (e.cap > kEps && dist[u] + e.cost < dist[e.to] - 1e-15) {
            dist[e.to] = dist[u] + e.cost;
            prev_node[e.to] = u;
            prev_arc[e.to] = k;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[snk] == big) break;
    double push = big;
    for (std::size_t v = snk; v != src; v = prev_node[v]) push = std::min(push, adj[prev_node[v]][prev_arc[v]].cap);
    for (std::size_t v = snk; v != src; v = prev_node[v]) {
      auto& e = adj[prev_node[v]][prev_arc[v]];
      e.cap -= push;
      adj[v][e.rev].cap += push;
    }
    total += push * dist[snk];
  }
  return total;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

inline CriterionResult a1() {
  const auto v = Potential::harmonic();
  const auto g = build_single_well_graph(v);
  double worst_s = 0.0;
  double worst_t = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double h = 0.05 * k;
    worst_s = std::max(worst_s, std::abs(action(v, g, 0, h) - 2.0 * std::numbers::pi * h));
    worst_t = std::max(worst_t, std::abs(period(v, g, 0, h) - 2.0 * std::numbers::pi));
  }
  const bool pass = worst_s <= kA1ActionTol && worst_t <= kA1PeriodTol;
  return {"A1", pass, fmt("max|S-2pi h| = %.2e (tol %.0e), max|T-2pi| = %.2e (tol %.0e)", worst_s, kA1ActionTol, worst_t, kA1PeriodTol)};
}

inline CriterionResult a2() {
  const auto v = Potential::double_well();
  const auto g = build_graph(v);
  const double hs = g.h_star();
  const double target = 4.0 / 3.0;
  const double at_band = action(v, g, kRightEdge, hs - 1e-4);
  // S(h* - d) = S* - d (A log(1/d) + B) + o(d): three-point fit for S*.
  const std::array<double, 3> d{1e-4, 1e-5, 1e-6};
  std::array<std::array<double, 3>, 3> m{};
  std::array<double, 3> rhs{};
  for (std::size_t i = 0; i < 3; ++i) {
    m[i] = {1.0, d[i] * std::log(d[i]), d[i]};
    rhs[i] = action(v, g, kRightEdge, hs - d[i]);
  }
  auto det3 = [](const std::array<std::array<double, 3>, 3>& a) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  auto m0 = m;
  for (std::size_t i = 0; i < 3; ++i) m0[i][0] = rhs[i];
  const double extrapolated = det3(m0) / det3(m);
  const double e1 = std::abs(at_band - target);
  const double e2 = std::abs(extrapolated - target);
  return {"A2", e1 <= kA2SaddleTol && e2 <= kA2LimitTol,
          fmt("|S(h*-1e-4) - 4/3| = %.2e (tol %.0e), extrapolated |S* - 4/3| = %.2e (tol %.0e)", e1, kA2SaddleTol, e2, kA2LimitTol)};
}

inline CriterionResult a3(unsigned threads) {
  const auto v = Potential::double_well();
  SdeConfig cfg;
  cfg.epsilon = 0.1;
  cfg.n = kA3N;
  cfg.t_final = 1.0;
  cfg.threads = threads;
  const auto times = snapshot_grid(1.0, 0.1);
  const auto ens = simulate_ensemble(v, cfg, times);
  const double h0 = hamiltonian(v, cfg.x0);
  auto zscore = [&](std::size_t k0, std::size_t k1) {
    const double dt = times[k1] - times[k0];
    double s = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const double x = hamiltonian(v, ens.states[k1][i]) - (k0 == 0 ? h0 : hamiltonian(v, ens.states[k0][i])) - dt;
      s += x;
      s2 += x * x;
    }
    const double n = static_cast<double>(ens.size());
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / (n - 1.0));
    return mean / se;
  };
  const double z_total = zscore(0, times.size() - 1);
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) worst = std::max(worst, std::abs(zscore(k, k + 1)));
  const bool pass = std::abs(z_total) <= kA3Sigmas && worst <= kA3Sigmas;
  return {"A3", pass, fmt("z(H_T - H_0 - T) = %+.2f, max |z| over 10 increments = %.2f (limit %.0f)", z_total, worst, kA3Sigmas)};
}

inline CriterionResult a4(unsigned threads) {
  RunConfig cfg;
  cfg.converge_n = kA4N;
  cfg.threads = threads;
  cfg.validate();
  const auto res = cmd_converge(cfg, {}, false);
  bool pass = true;
  std::ostringstream os;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    os << fmt("eps %.2f: sup %.4f terminal %.4f; ", r.epsilon, r.sup_w1, r.terminal_w1);
    if (i > 0 && (r.sup_w1 >= res.rows[i - 1].sup_w1 || r.terminal_w1 >= res.rows[i - 1].terminal_w1)) pass = false;
  }
  const auto& first = res.rows.front();
  const auto& last = res.rows.back();
  if (!(last.sup_w1 < 0.5 * first.sup_w1 && last.terminal_w1 < 0.5 * first.terminal_w1)) pass = false;
  os << "decreasing with final < first/2";
  return {"A4", pass, os.str()};
}

/// Mean relative error of the conditional p^2 against S/T over populated bins,
/// atoms pooled over snapshots t >= 0.1.
inline double local_equilibrium_error(const Model& m, double eps, unsigned threads, std::size_t* bins_used) {
  SdeConfig cfg;
  cfg.epsilon = eps;
  cfg.n = kA5N;
  cfg.threads = threads;
  const auto ens = simulate_ensemble(m.potential, cfg, snapshot_grid(1.0, 0.01));
  std::vector<PhasePoint> pool;
  for (std::size_t k = 10; k < ens.times.size(); ++k) pool.insert(pool.end(), ens.states[k].begin(), ens.states[k].end());
  const auto bins = default_bins(m.graph, m.coefficients.spec.h_max, 32, 64);
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& b : conditional_p2(pool, m.graph, m.potential, bins)) {
    if (b.count < kA5MinCount) continue;
    const double ref = m.coefficients.edge(b.edge).p2_avg(b.mean_h);
    sum += std::abs(b.mean_p2 - ref) / ref;
    ++used;
  }
  if (bins_used) *bins_used = used;
  return used ? sum / static_cast<double>(used) : kInf;
}

inline CriterionResult a5(unsigned threads) {
  RunConfig rc;
  const Model m(rc);
  std::size_t used_fine = 0;
  std::size_t used_coarse = 0;
  const double err_fine = local_equilibrium_error(m, 0.05, threads, &used_fine);
  const double err_coarse = local_equilibrium_error(m, 0.2, threads, &used_coarse);
  const auto family = make_test_family(m.graph);
  std::vector<double> gaps;
  for (double eps : {0.5, 0.2, 0.1, 0.05}) {
    SdeConfig cfg;
    cfg.epsilon = eps;
    cfg.n = kA5DualityN;
    cfg.threads = threads;
    const auto ens = simulate_ensemble(m.potential, cfg, snapshot_grid(1.0, 0.01));
    const auto pushed = pushforward(ens, m.graph, m.potential);
    double gap = 0.0;
    for (const auto& f : family) {
      gap = std::max(gap, std::abs(j_full(ens, m.graph, m.potential, f, eps).value - j_hat_eps(pushed, m.coefficients, f).value));
    }
    gaps.push_back(gap);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < gaps.size(); ++i) decreasing = decreasing && gaps[i] < gaps[i - 1];
  const bool pass = err_fine < kA5RelTol && err_fine < err_coarse && decreasing;
  return {"A5", pass,
          fmt("mean rel err eps 0.05: %.4f (%zu bins, tol %.2f), eps 0.2: %.4f (%zu bins); max gap |J-J_hat| "
              "eps 0.5/0.2/0.1/0.05: %.3f/%.3f/%.3f/%.3f",
              err_fine, used_fine, kA5RelTol, err_coarse, used_coarse, gaps[0], gaps[1], gaps[2], gaps[3])};
}

inline bool within_binomial(const EntryEstimate& e, const std::vector<double>& target, double sigmas, double* worst_z) {
  bool ok = true;
  double wz = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double z = std::abs(e.prob[i] - target[i]) / e.std_error[i];
    wz = std::max(wz, z);
    ok = ok && z <= sigmas;
  }
  if (worst_z) *worst_z = wz;
  return ok;
}

inline CriterionResult a6(unsigned threads) {
  RunConfig rc;
  const Model m(rc);
  const BranchBands bands{};
  const std::vector<double> target{0.25, 0.25, 0.5};
  std::vector<BranchEvent> events;
  for (double p0 : {0.5, -0.5}) {
    SdeConfig cfg;
    cfg.epsilon = 0.05;
    cfg.n = kA6SdeN;
    cfg.t_final = 2.0;
    cfg.x0 = {0.0, p0};
    cfg.threads = threads;
    const auto e = sde_branch_events(m.potential, m.graph, cfg, bands);
    events.insert(events.end(), e.begin(), e.end());
  }
  const auto sde = estimate_entry_probabilities(events, m.coefficients, bands);
  GraphSdeConfig gc;
  gc.coefficients = &m.coefficients;
  gc.n = kA6GraphN;
  gc.t_final = 2.0;
  gc.start = {kAboveEdge, 0.5};
  gc.threads = threads;
  gc.branch_bands = bands;
  const auto gens = simulate_graph_ensemble(gc, {0.0, 2.0});
  const auto graph = estimate_entry_probabilities(gens.branch_events, m.coefficients, bands);
  double z_sde = 0.0;
  double z_graph = 0.0;
  const bool ok_sde = within_binomial(sde, target, kA6Sigmas, &z_sde) && sde.events >= kA6MinEvents;
  const bool ok_graph = within_binomial(graph, target, kA6Sigmas, &z_graph) && graph.events >= kA6MinEvents;
  return {"A6", ok_sde && ok_graph,
          fmt("SDE eps 0.05: p = (%.4f, %.4f, %.4f) +- %.4f, %llu events, max z %.1f; graph MC: p = (%.4f, %.4f, "
              "%.4f) +- %.4f, %llu events, max z %.1f (limit %.0f)",
              sde.prob[0], sde.prob[1], sde.prob[2], sde.std_error[2], static_cast<unsigned long long>(sde.events), z_sde,
              graph.prob[0], graph.prob[1], graph.prob[2], graph.std_error[2],
              static_cast<unsigned long long>(graph.events), z_graph, kA6Sigmas)};
}

inline CriterionResult a7(unsigned threads) {
  RunConfig rc;
  const Model m(rc);
  const auto start = project(m.graph, m.potential, rc.x0);
  const auto times = snapshot_grid(1.0, 0.01);
  GraphSdeConfig gc;
  gc.coefficients = &m.coefficients;
  gc.n = kA7N;
  gc.t_final = 1.0;
  gc.start = start;
  gc.threads = threads;
  const auto mc = simulate_graph_ensemble(gc, {0.0, 1.0});
  const auto& atoms = mc.states.back();
  const auto full = GraphMeasure::uniform(atoms);
  const std::vector<GraphPoint> half_a(atoms.begin(), atoms.begin() + static_cast<std::ptrdiff_t>(atoms.size() / 2));
  const std::vector<GraphPoint> half_b(atoms.begin() + static_cast<std::ptrdiff_t>(atoms.size() / 2), atoms.end());
  const double h_max = m.coefficients.spec.h_max;
  const double split = w1_tree(GraphMeasure::uniform(half_a), GraphMeasure::uniform(half_b), m.graph, h_max);
  const double mc_ci = 1.5 * split;
  FpOptions fine;
  FpOptions coarse;
  coarse.cells_per_edge = fine.cells_per_edge / 2;
  const auto fp = solve_graph_fp(m.coefficients, GraphMeasure::dirac(start), times, fine);
  const auto fp2 = solve_graph_fp(m.coefficients, GraphMeasure::dirac(start), times, coarse);
  const auto mu = fp.slice_measure(fp.times.size() - 1);
  const double grid_delta = w1_tree(mu, fp2.slice_measure(fp2.times.size() - 1), m.graph, h_max);
  const double w1 = w1_tree(full, mu, m.graph, h_max);
  double mass_dev = 0.0;
  for (std::size_t k = 0; k < fp.times.size(); ++k) mass_dev = std::max(mass_dev, std::abs(fp.total_mass(k) - 1.0));
  const double tol = mc_ci + 2.0 * grid_delta;
  return {"A7", w1 < tol && mass_dev <= kA7MassTol,
          fmt("W1(MC, FP) at t=1 = %.4f < %.4f (MC CI %.4f + 2 x grid delta %.4f); max |mass - 1| = %.1e (tol %.0e)", w1,
              tol, mc_ci, grid_delta, mass_dev, kA7MassTol)};
}

inline CriterionResult a8(unsigned threads) {
  RunConfig cfg;
  cfg.duality_epsilons = {0.05};
  cfg.duality_n = kA8N;
  cfg.threads = threads;
  cfg.validate();
  const auto run = run_duality(cfg);
  const auto& sw = run.report.sweeps.front();
  const double tol_full = kA8Sigmas * sw.sup_full_std_error + run.full_budget.front();
  const double tol_hat = kA8Sigmas * sw.sup_hat_eps_std_error + run.hat_eps_budget.front();
  const double tol_zero = run.limit_sup_budget;
  const bool ok_full = std::abs(sw.sup_full) <= tol_full;
  const bool ok_hat = std::abs(sw.sup_hat_eps) <= tol_hat;
  const bool ok_zero = std::abs(run.report.sup_hat_zero) <= tol_zero + 1e-12;
  const bool ok_shift = run.shift_detected;
  return {"A8", ok_full && ok_hat && ok_zero && ok_shift,
          fmt("eps 0.05: sup J = %.2e (tol %.2e), sup J_hat_eps = %.2e (tol %.2e); limit sup J_hat_0 = %.2e (tol "
              "%.2e); shifted sup J_hat_0 = %.3f > %.3e",
              sw.sup_full, tol_full, sw.sup_hat_eps, tol_hat, run.report.sup_hat_zero, tol_zero, run.sup_shifted,
              run.limit_budget)};
}

inline CriterionResult a9() {
  const auto v = Potential::double_well();
  const auto g = build_graph(v);
  double worst = 0.0;
  for (std::size_t inst = 0; inst < kA9Instances; ++inst) {
    RandomStream rng(99, inst, StreamDomain::test);
    auto draw = [&](std::size_t count) {
      GraphMeasure m;
      double total = 0.0;
      for (std::size_t k = 0; k < count; ++k) {
        const int edge = static_cast<int>(rng() % 3);
        const double h = edge == kAboveEdge ? 0.25 + 2.75 * rng.uniform() : 0.25 * rng.uniform();
        const double w = rng.uniform();
        m.atoms.push_back({{edge, h}, w});
        total += w;
      }
      for (auto& a : m.atoms) a.weight /= total;
      return m;
    };
    const auto mu = draw(1 + rng() % 6);
    const auto nu = draw(1 + rng() % 6);
    std::vector<double> a;
    std::vector<double> b;
    for (const auto& x : mu.atoms) a.push_back(x.weight);
    for (const auto& x : nu.atoms) b.push_back(x.weight);
    const double lp = transport_cost(a, b, [&](std::size_t i, std::size_t j) {
      return graph_distance(g, mu.atoms[i].point, nu.atoms[j].point);
    });
    worst = std::max(worst, std::abs(lp - w1_tree(mu, nu, g)));
  }
  return {"A9", worst <= kA9Tol, fmt("max |W1_tree - W1_LP| over %zu instances = %.2e (tol %.0e)", kA9Instances, worst, kA9Tol)};
}

inline CriterionResult a10(const fs::path& scratch) {
  RunConfig cfg;
  cfg.simulate_epsilon = 0.05;
  const auto res = cmd_simulate(cfg, scratch / "a10");
  const auto& rows = res.rows;
  const double window = cfg.simulate_epsilon;
  double worst = 0.0;
  double lo = kInf;
  double hi = -kInf;
  std::size_t j = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    lo = std::min(lo, rows[i].h);
    hi = std::max(hi, rows[i].h);
    double wlo = rows[i].h;
    double whi = rows[i].h;
    for (j = i; j < rows.size() && rows[j].t <= rows[i].t + window + 1e-12; ++j) {
      wlo = std::min(wlo, rows[j].h);
      whi = std::max(whi, rows[j].h);
    }
    worst = std::max(worst, whi - wlo);
  }
  const double range = hi - lo;
  return {"A10", worst <= kA10Band && range >= kA10MinRange,
          fmt("widest h-band over windows of length eps = %.3f (limit %.2f); h range over T = %.3f (min %.2f)", worst, kA10Band,
              range, kA10MinRange)};
}

inline std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Runs every command on a small configuration into `dir`.
inline void run_all_commands(const fs::path& dir, unsigned threads) {
  RunConfig cfg = load_run_config(ConfigDocument::parse(
      "[converge]\nepsilons = [0.2, 0.1]\nn = 400\n[duality]\nepsilons = [0.2]\nn = 200\nfamily_size = 16\n"
      "limit_snapshot_spacing = 0.01\n[fp]\ncells = 64\n",
      "determinism"));
  cfg.threads = threads;
  cmd_simulate(cfg, dir);
  cmd_converge(cfg, dir);
  cmd_duality(cfg, dir);
  cmd_coefficients(cfg, dir);
}

inline CriterionResult a11(const fs::path& scratch) {
  const std::array<std::pair<const char*, unsigned>, 3> runs{{{"t1a", 1u}, {"t1b", 1u}, {"t4", 4u}}};
  for (const auto& [name, t] : runs) {
    fs::remove_all(scratch / name);
    run_all_commands(scratch / name, t);
  }
  std::size_t files = 0;
  std::vector<std::string> diffs;
  for (const auto& entry : fs::directory_iterator(scratch / "t1a")) {
    ++files;
    const auto ref = file_bytes(entry.path());
    for (const char* other : {"t1b", "t4"}) {
      if (file_bytes(scratch / other / entry.path().filename()) != ref) {
        diffs.push_back(std::string(other) + "/" + entry.path().filename().string());
      }
    }
  }
  std::string detail = fmt("%zu files from simulate/converge/duality/coefficients compared across 2 runs at "
                           "--threads 1 and one at --threads 4: ",
                           files);
  if (diffs.empty()) {
    detail += "bit-identical";
  } else {
    detail += "differences in";
    for (const auto& d : diffs) detail += " " + d;
  }
  return {"A11", diffs.empty() && files >= 8, detail};
}

}  // namespace acceptance

inline const std::vector<std::string>& acceptance_ids() {
  static const std::vector<std::string> ids{"A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11"};
  return ids;
}

/// Runs the selected criteria (all when `only` is empty), printing one line
/// each: "<id> PASS|FAIL <detail> [<seconds>s]". Returns true if all passed.
inline bool run_acceptance(const std::set<std::string>& only, unsigned threads, const fs::path& scratch, std::ostream& os) {
  for (const auto& id : only) {
    if (std::find(acceptance_ids().begin(), acceptance_ids().end(), id) == acceptance_ids().end()) {
      throw Error(ErrorCode::InvalidArgument, "unknown acceptance criterion " + id);
    }
  }
  const std::vector<std::pair<std::string, std::function<CriterionResult()>>> table{
      {"A1", [] { return acceptance::a1(); }},
      {"A2", [] { return acceptance::a2(); }},
      {"A3", [&] { return acceptance::a3(threads); }},
      {"A4", [&] { return acceptance::a4(threads); }},
      {"A5", [&] { return acceptance::a5(threads); }},
      {"A6", [&] { return acceptance::a6(threads); }},
      {"A7", [&] { return acceptance::a7(threads); }},
      {"A8", [&] { return acceptance::a8(threads); }},
      {"A9", [] { return acceptance::a9(); }},
      {"A10", [&] { return acceptance::a10(scratch); }},
      {"A11", [&] { return acceptance::a11(scratch); }},
  };
  bool all = true;
  for (const auto& [id, fn] : table) {
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = {id, false, std::string("error: ") + e.what()};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && r.pass;
    os << r.id << (r.pass ? " PASS " : " FAIL ") << r.detail << acceptance::fmt(" [%.1fs]", r.seconds) << std::endl;
  }
  return all;
}

}  // namespace levelcg
