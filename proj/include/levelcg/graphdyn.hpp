#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "levelcg/errors.hpp"
#include "levelcg/levelset.hpp"
#include "levelcg/measures.hpp"
#include "levelcg/parallel.hpp"
#include "levelcg/rng.hpp"
#include "levelcg/sde.hpp"

namespace levelcg {

// ---------------------------------------------------------------------------
// Gluing data
// ---------------------------------------------------------------------------

struct GluingWeights {
  /// beta[i] for edge id i.
  std::vector<double> beta;
  /// Entry probabilities beta[i] / sum(beta).
  std::vector<double> prob;
};

/// Value of S on an edge at the saddle band boundary h* -+ delta_sing.
inline double saddle_action(const CoefficientSet& c, int edge) {
  const auto& e = c.edge(edge);
  const int o = c.graph.orientation(edge);
  if (o == 0) throw Error(ErrorCode::InvalidArgument, "edge " + std::to_string(edge) + " does not touch the vertex");
  return o > 0 ? e.action_values().back() : e.action_values().front();
}

/// beta_i = 2 S_i(h* -+ delta_sing) for the edges meeting at the saddle.
inline GluingWeights gluing_weights(const CoefficientSet& c) {
  if (!c.graph.vertex) throw Error(ErrorCode::UnsupportedTopology, "graph has no interior vertex");
  GluingWeights w;
  w.beta.assign(c.graph.edges.size(), 0.0);
  double total = 0.0;
  for (int id : c.graph.vertex->edges) {
    w.beta[static_cast<std::size_t>(id)] = 2.0 * saddle_action(c, id);
    total += w.beta[static_cast<std::size_t>(id)];
  }
  w.prob.resize(w.beta.size());
  for (std::size_t i = 0; i < w.beta.size(); ++i) w.prob[i] = w.beta[i] / total;
  return w;
}

// ---------------------------------------------------------------------------
// Branch statistics near the vertex
// ---------------------------------------------------------------------------

/// Two energy bands around h*: an excursion is armed when |h - h*| drops
/// below `inner` and recorded when it next exceeds `outer`.
struct BranchBands {
  double inner = 0.05;
  double outer = 0.2;
};

struct BranchEvent {
  int entry_edge = 0;
  double entry_distance = 0.0;
  int exit_edge = 0;
};

class BranchTracker {
 public:
  BranchTracker(BranchBands bands, double h_star) : bands_(bands), h_star_(h_star) {}

  void observe(int edge, double h, std::vector<BranchEvent>& out) {
    const double d = std::abs(h - h_star_);
    if (!armed_) {
      if (d < bands_.inner) {
        armed_ = true;
        entry_ = {edge, d, -1};
      }
    } else if (d > bands_.outer) {
      entry_.exit_edge = edge;
      out.push_back(entry_);
      armed_ = false;
    }
  }

 private:
  BranchBands bands_;
  double h_star_;
  bool armed_ = false;
  BranchEvent entry_;
};

/// Scale function X_i(d) = integral over [0, d] of dh / S_i at distance h
/// from the saddle along edge i.
inline double scale_distance(const CoefficientSet& c, int edge, double d) {
  const auto& e = c.edge(edge);
  const double hs = c.graph.h_star();
  const int o = c.graph.orientation(edge);
  auto f = [&](double x) { return 1.0 / e.action(hs - o * x); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, d, 8, 1e-10);
}

/// Redraw probabilities for the vertex shell of the graph Monte Carlo: atoms
/// captured within shell/2 of h* are re-emitted at distance `shell` on edge i
/// with probability proportional to (beta_i / S_i*) / (X_i(shell) - X_i(shell/2)).
/// This reproduces the exit law of the glued diffusion for any shell width and
/// tends to beta_i / sum(beta) as the shell shrinks.
inline std::vector<double> shell_emission_probabilities(const CoefficientSet& c, double shell) {
  const auto glue = gluing_weights(c);
  std::vector<double> q(glue.beta.size(), 0.0);
  double total = 0.0;
  for (int id : c.graph.vertex->edges) {
    const auto i = static_cast<std::size_t>(id);
    const double gap = scale_distance(c, id, shell) - scale_distance(c, id, 0.5 * shell);
    q[i] = glue.beta[i] / saddle_action(c, id) / gap;
    total += q[i];
  }
  for (double& x : q) x /= total;
  return q;
}

struct EntryEstimate {
  std::vector<double> prob;
  std::vector<double> std_error;
  std::vector<std::uint64_t> exits;
  std::uint64_t events = 0;
};

/// Estimates the vertex entry probabilities from two-band excursions. For the
/// glued diffusion an excursion entering at distance d on edge i leaves
/// through edge j != i with probability r_i(d) P_j, where
/// r_i(d) = 1 - X_i(d)/X_i(outer) and P_j is proportional to
/// (beta_j / S_j*) / X_j(outer). Off-diagonal counts give P_j; the entry
/// probabilities follow as p_j proportional to P_j X_j(outer) S_j*.
inline EntryEstimate estimate_entry_probabilities(const std::vector<BranchEvent>& events, const CoefficientSet& c,
                                                  BranchBands bands) {
  const std::size_t m = c.graph.edges.size();
  std::vector<double> x_outer(m, 0.0);
  std::vector<double> s_star(m, 0.0);
  for (int id : c.graph.vertex->edges) {
    s_star[static_cast<std::size_t>(id)] = saddle_action(c, id);
  }
  // X_i on a fine uniform grid of distances, by cumulative trapezoid.
  constexpr std::size_t kNodes = 4097;
  std::vector<std::vector<double>> x_table(m);
  for (int id : c.graph.vertex->edges) {
    const auto& e = c.edge(id);
    const int o = c.graph.orientation(id);
    auto& tab = x_table[static_cast<std::size_t>(id)];
    tab.assign(kNodes, 0.0);
    const double step = bands.outer / static_cast<double>(kNodes - 1);
    double prev = 1.0 / e.action(c.graph.h_star());
    for (std::size_t k = 1; k < kNodes; ++k) {
      const double cur = 1.0 / e.action(c.graph.h_star() - o * step * static_cast<double>(k));
      tab[k] = tab[k - 1] + 0.5 * step * (prev + cur);
      prev = cur;
    }
  }
  auto x_at = [&](std::size_t edge, double d) {
    const auto& tab = x_table[edge];
    const double x = std::clamp(d / bands.outer, 0.0, 1.0) * static_cast<double>(kNodes - 1);
    const auto k = std::min(static_cast<std::size_t>(x), kNodes - 2);
    return tab[k] + (x - static_cast<double>(k)) * (tab[k + 1] - tab[k]);
  };
  std::vector<double> hits(m, 0.0);
  std::vector<double> exposure(m, 0.0);
  for (int id : c.graph.vertex->edges) x_outer[static_cast<std::size_t>(id)] = x_table[static_cast<std::size_t>(id)].back();
  EntryEstimate est;
  est.exits.assign(m, 0);
  est.events = events.size();
  for (const auto& ev : events) {
    const auto i = static_cast<std::size_t>(ev.entry_edge);
    const auto j = static_cast<std::size_t>(ev.exit_edge);
    ++est.exits[j];
    const double r = 1.0 - x_at(i, ev.entry_distance) / x_outer[i];
    for (std::size_t k = 0; k < m; ++k) {
      if (k != i) exposure[k] += r;
    }
    if (j != i) hits[j] += 1.0;
  }
  std::vector<double> w(m, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    if (exposure[k] > 0.0) w[k] = hits[k] / exposure[k] * x_outer[k] * s_star[k];
    total += w[k];
  }
  est.prob.assign(m, 0.0);
  est.std_error.assign(m, 0.0);
  const double n = static_cast<double>(std::max<std::uint64_t>(1, est.events));
  for (std::size_t k = 0; k < m; ++k) {
    est.prob[k] = total > 0.0 ? w[k] / total : 0.0;
    est.std_error[k] = std::sqrt(est.prob[k] * (1.0 - est.prob[k]) / n);
  }
  return est;
}

/// Runs the full SDE and records two-band excursions of the projected energy
/// at every outer step. Events are concatenated in trajectory order.
inline std::vector<BranchEvent> sde_branch_events(const Potential& v, const LevelGraph& g, const SdeConfig& cfg,
                                                  BranchBands bands) {
  cfg.validate();
  if (!g.vertex) throw Error(ErrorCode::UnsupportedTopology, "graph has no interior vertex");
  std::vector<std::vector<BranchEvent>> per(cfg.n);
  const detail::SplittingStepper step(v, cfg);
  const std::size_t steps = cfg.steps();
  parallel_for(cfg.n, resolve_threads(cfg.threads), [&](std::size_t i) {
    RandomStream rng(cfg.base_seed, i, StreamDomain::sde);
    BranchTracker tracker(bands, g.h_star());
    PhasePoint x = cfg.x0;
    auto y = project(g, v, x);
    tracker.observe(y.edge, y.h, per[i]);
    for (std::size_t k = 0; k < steps; ++k) {
      step(x, rng);
      detail::check_escape(x, cfg, i, static_cast<double>(k + 1) * cfg.dt);
      y = project(g, v, x);
      tracker.observe(y.edge, y.h, per[i]);
    }
  });
  std::vector<BranchEvent> out;
  for (const auto& p : per) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo on the graph
// ---------------------------------------------------------------------------

struct GraphSdeConfig {
  const CoefficientSet* coefficients = nullptr;
  /// 0 selects the largest fraction 1e-3/k within 0.9 of the shell-resolution
  /// limit.
  double dt = 0.0;
  double vertex_shell = 0.01;
  double t_final = 1.0;
  GraphPoint start{kRightEdge, 0.0484};
  std::uint64_t base_seed = 20240611;
  std::size_t n = 1;
  double escape_bound = 1e3;
  unsigned threads = 0;
  /// Records two-band excursions when set.
  std::optional<BranchBands> branch_bands;

  /// Largest diffusion coefficient between the capture radius and four shell
  /// widths from the vertex.
  double shell_diffusion_max() const {
    const auto& c = *coefficients;
    if (!c.graph.vertex) return 0.0;
    double a = 0.0;
    const double hs = c.graph.h_star();
    for (int id : c.graph.vertex->edges) {
      const int o = c.graph.orientation(id);
      for (int k = 0; k <= 64; ++k) {
        const double d = 0.5 * vertex_shell + 3.5 * vertex_shell * k / 64.0;
        a = std::max(a, c.edge(id).diffusion(hs - o * d));
      }
    }
    return a;
  }

  double step() const {
    if (dt > 0.0) return dt;
    const double a = shell_diffusion_max();
    if (a <= 0.0) return 1e-3;
    const double limit = std::pow(vertex_shell / 4.0, 2) / a;
    // An integer fraction of 1e-3, so snapshot grids in multiples of 1e-3
    // fall on steps.
    return 1e-3 / std::ceil(1e-3 / (0.9 * limit));
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_final / step())); }

  void validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
      throw Error(ErrorCode::InvalidArgument, "graph." + field + ": " + why);
    };
    if (coefficients == nullptr) fail("coefficients", "missing coefficient tables");
    const auto& c = *coefficients;
    if (!(t_final > 0.0)) fail("t_final", "must be > 0");
    if (n < 1) fail("n", "must be >= 1");
    if (dt < 0.0) fail("dt", "must be >= 0");
    const auto& e = c.graph.edge(start.edge);
    if (start.h < e.h_lo || start.h > e.h_hi) fail("start", "energy outside the start edge");
    if (c.graph.vertex) {
      if (!(vertex_shell > c.spec.delta_sing)) fail("vertex_shell", "must exceed delta_sing of the tables");
      const double a = shell_diffusion_max();
      if (std::sqrt(a * step()) >= vertex_shell / 4.0) fail("dt", "sqrt(a_max dt) must stay below vertex_shell/4");
    }
    const double k = t_final / step();
    if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) fail("t_final", "must be a multiple of dt");
  }
};

struct GraphEnsemblePath {
  std::vector<double> times;
  /// states[k][i]: atom i at times[k].
  std::vector<std::vector<GraphPoint>> states;
  std::vector<BranchEvent> branch_events;

  std::size_t size() const noexcept { return states.empty() ? 0 : states.front().size(); }

  GraphMeasurePath to_measure_path() const {
    GraphMeasurePath out;
    out.times = times;
    for (const auto& s : states) out.slices.push_back(GraphMeasure::uniform(s));
    return out;
  }
};

namespace detail {

/// Dense uniform table of a(h) per edge with linear interpolation; queries
/// outside the tabulated range go to the interpolant.
class DiffusionLookup {
 public:
  explicit DiffusionLookup(const CoefficientSet& c, std::size_t points = 16384) : c_(c) {
    for (const auto& e : c.graph.edges) {
      const auto& ec = c.edge(e.id);
      Table t;
      t.lo = ec.grid().front();
      t.hi = std::min(ec.grid().back(), c.domain_hi(e.id));
      t.scale = static_cast<double>(points - 1) / (t.hi - t.lo);
      t.values.resize(points);
      for (std::size_t k = 0; k < points; ++k) {
        t.values[k] = std::max(ec.diffusion(t.lo + (t.hi - t.lo) * static_cast<double>(k) / static_cast<double>(points - 1)), 0.0);
      }
      tables_.push_back(std::move(t));
    }
  }

  double operator()(int edge, double h) const {
    const auto& t = tables_[static_cast<std::size_t>(edge)];
    const double x = (h - t.lo) * t.scale;
    if (x >= 0.0 && x < static_cast<double>(t.values.size() - 1)) {
      const auto k = static_cast<std::size_t>(x);
      const double w = x - static_cast<double>(k);
      return t.values[k] + w * (t.values[k + 1] - t.values[k]);
    }
    return std::max(c_.edge(edge).diffusion(h), 0.0);
  }

 private:
  struct Table {
    double lo = 0.0;
    double hi = 0.0;
    double scale = 0.0;
    std::vector<double> values;
  };
  const CoefficientSet& c_;
  std::vector<Table> tables_;
};

class GraphStepper {
 public:
  GraphStepper(const GraphSdeConfig& cfg, const std::vector<double>* emission)
      : c_(*cfg.coefficients),
        a_(*cfg.coefficients),
        dt_(cfg.step()),
        sqrt_dt_(std::sqrt(cfg.step())),
        shell_(cfg.vertex_shell),
        emission_(emission) {}

  /// Advances one atom; returns true when the atom entered the vertex shell.
  bool operator()(GraphPoint& y, RandomStream& rng, BranchTracker* tracker, std::vector<BranchEvent>* events) const {
    const double a = a_(y.edge, y.h);
    double h = y.h + dt_ + std::sqrt(a) * sqrt_dt_ * rng.normal();
    const auto& e = c_.graph.edge(y.edge);
    if (c_.graph.leaf_of(y.edge) != nullptr && h < e.h_lo) h = 2.0 * e.h_lo - h;
    if (emission_ != nullptr) {
      const double hs = c_.graph.h_star();
      const int o = c_.graph.orientation(y.edge);
      const double capture = 0.5 * shell_;
      const bool entered = (o > 0 && h >= hs - capture) || (o < 0 && h <= hs + capture);
      if (entered) {
        if (tracker) tracker->observe(y.edge, h, *events);
        const double u = rng.uniform();
        double acc = 0.0;
        int pick = c_.graph.vertex->edges.back();
        for (int id : c_.graph.vertex->edges) {
          acc += (*emission_)[static_cast<std::size_t>(id)];
          if (u < acc) {
            pick = id;
            break;
          }
        }
        y.edge = pick;
        y.h = hs - c_.graph.orientation(pick) * shell_;
        if (tracker) tracker->observe(y.edge, y.h, *events);
        return true;
      }
    }
    y.h = h;
    if (tracker) tracker->observe(y.edge, y.h, *events);
    return false;
  }

 private:
  const CoefficientSet& c_;
  DiffusionLookup a_;
  double dt_;
  double sqrt_dt_;
  double shell_;
  const std::vector<double>* emission_;
};

}  // namespace detail

/// Euler-Maruyama for the energy diffusion on the graph (drift 1, diffusion
/// 2S/T) with shell-and-redraw gluing at the vertex and reflection at leaves.
/// An atom coming within vertex_shell/2 of h* is re-emitted at distance
/// vertex_shell on an edge drawn from shell_emission_probabilities.
/// Atom i uses the graph-domain stream (base_seed, i).
inline GraphEnsemblePath simulate_graph_ensemble(const GraphSdeConfig& cfg, const std::vector<double>& snapshot_times) {
  cfg.validate();
  const auto& c = *cfg.coefficients;
  const double dt = cfg.step();
  std::vector<std::size_t> snap_steps;
  for (double t : snapshot_times) {
    const double k = t / dt;
    const auto kk = static_cast<std::size_t>(std::llround(k));
    if (t < 0.0 || std::abs(k - static_cast<double>(kk)) > 1e-6 || kk > cfg.steps()) {
      throw Error(ErrorCode::InvalidArgument, "snapshot time " + std::to_string(t) + " is not on the graph time grid");
    }
    if (!snap_steps.empty() && kk <= snap_steps.back()) throw Error(ErrorCode::InvalidArgument, "snapshot times must increase");
    snap_steps.push_back(kk);
  }
  std::vector<double> emission;
  if (c.graph.vertex) emission = shell_emission_probabilities(c, cfg.vertex_shell);
  const detail::GraphStepper step(cfg, c.graph.vertex ? &emission : nullptr);
  GraphEnsemblePath path;
  path.times = snapshot_times;
  path.states.assign(snapshot_times.size(), std::vector<GraphPoint>(cfg.n));
  std::vector<std::vector<BranchEvent>> events(cfg.n);
  parallel_for(cfg.n, resolve_threads(cfg.threads), [&](std::size_t i) {
    RandomStream rng(cfg.base_seed, i, StreamDomain::graph);
    std::optional<BranchTracker> tracker;
    if (cfg.branch_bands && c.graph.vertex) {
      tracker.emplace(*cfg.branch_bands, c.graph.h_star());
      tracker->observe(cfg.start.edge, cfg.start.h, events[i]);
    }
    GraphPoint y = cfg.start;
    std::size_t k = 0;
    for (std::size_t s = 0; s < snap_steps.size(); ++s) {
      for (; k < snap_steps[s]; ++k) {
        step(y, rng, tracker ? &*tracker : nullptr, &events[i]);
        if (!(y.h <= cfg.escape_bound)) {
          std::ostringstream os;
          os << "graph atom " << i << " exceeded h = " << cfg.escape_bound << " at t = " << static_cast<double>(k + 1) * dt;
          throw Error(ErrorCode::Unstable, os.str());
        }
      }
      path.states[s][i] = y;
    }
  });
  for (const auto& e : events) path.branch_events.insert(path.branch_events.end(), e.begin(), e.end());
  return path;
}

// ---------------------------------------------------------------------------
// Finite-volume Fokker-Planck solver
// ---------------------------------------------------------------------------

struct FpEdgeGrid {
  int edge = 0;
  /// Ascending cell faces; cells() == faces.size() - 1.
  std::vector<double> faces;

  std::size_t cells() const noexcept { return faces.size() - 1; }
  double lo() const { return faces.front(); }
  double hi() const { return faces.back(); }
  double width(std::size_t k) const { return faces[k + 1] - faces[k]; }
  double centre(std::size_t k) const { return 0.5 * (faces[k] + faces[k + 1]); }

  /// Cell of h; a point on a face belongs to the lower cell.
  std::size_t locate(double h) const {
    const auto it = std::lower_bound(faces.begin(), faces.end(), h);
    const auto j = static_cast<std::size_t>(it - faces.begin());
    return std::clamp<std::size_t>(j == 0 ? 0 : j - 1, 0, cells() - 1);
  }
};

struct FpGrid {
  std::vector<FpEdgeGrid> edges;
};

namespace detail {

inline std::vector<double> uniform_faces(double lo, double hi, std::size_t n) {
  std::vector<double> f(n + 1);
  for (std::size_t k = 0; k <= n; ++k) f[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n);
  f.back() = hi;
  return f;
}

/// Faces lo + L sinh(b s)/sinh(b), s = k/n, with b chosen so the first cell
/// has width `first`. Falls back to uniform cells when `first` >= L/n.
inline std::vector<double> stretched_faces(double lo, double hi, std::size_t n, double first) {
  const double len = hi - lo;
  const double target = first * static_cast<double>(n) / len;
  if (target >= 1.0) return uniform_faces(lo, hi, n);
  const double b = bisect([&](double x) { return x / std::sinh(x) - target; }, 1e-9, 50.0, 1e-14);
  std::vector<double> f(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    f[k] = lo + len * std::sinh(b * static_cast<double>(k) / static_cast<double>(n)) / std::sinh(b);
  }
  f.back() = hi;
  return f;
}

}  // namespace detail

/// Bounded edges get uniform cells over [h_lo, h_hi]. The truncated upper edge
/// [h*, h_max] is stretched so its first cell matches the well cell width,
/// which keeps the vertex coupling equally resolved on all sides.
inline FpGrid make_fp_grid(const CoefficientSet& c, std::size_t cells_per_edge = 512) {
  if (cells_per_edge < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 cells per edge");
  FpGrid g;
  double well_width = kInf;
  for (const auto& e : c.graph.edges) {
    if (std::isfinite(e.h_hi)) well_width = std::min(well_width, (e.h_hi - e.h_lo) / static_cast<double>(cells_per_edge));
  }
  for (const auto& e : c.graph.edges) {
    const double hi = c.domain_hi(e.id);
    if (!(hi > e.h_lo)) throw Error(ErrorCode::InvalidArgument, "empty computational domain on an edge");
    if (c.graph.vertex && !std::isfinite(e.h_hi) && std::isfinite(well_width)) {
      g.edges.push_back({e.id, detail::stretched_faces(e.h_lo, hi, cells_per_edge, well_width)});
    } else {
      g.edges.push_back({e.id, detail::uniform_faces(e.h_lo, hi, cells_per_edge)});
    }
  }
  return g;
}

/// Cell masses of a graph measure on the solver grid.
inline std::vector<std::vector<double>> deposit(const FpGrid& grid, const GraphMeasure& m) {
  std::vector<std::vector<double>> out;
  for (const auto& e : grid.edges) out.emplace_back(e.cells(), 0.0);
  for (const auto& a : m.atoms) {
    const auto& e = grid.edges.at(static_cast<std::size_t>(a.point.edge));
    if (a.point.h > e.hi()) {
      throw Error(ErrorCode::UnboundedSupport, "initial mass at h = " + std::to_string(a.point.h) + " beyond h_max");
    }
    out[static_cast<std::size_t>(a.point.edge)][e.locate(a.point.h)] += a.weight;
  }
  return out;
}

struct FpOptions {
  std::size_t cells_per_edge = 512;
  /// 0 selects the largest stable step times `safety`.
  double dt = 0.0;
  double safety = 0.9;
  double mass_tolerance = 1e-6;
};

struct GraphDensityPath {
  FpGrid grid;
  std::vector<double> times;
  /// masses[k][edge][cell]
  std::vector<std::vector<std::vector<double>>> masses;
  /// Flux weights at the vertex (beta per edge id; empty without vertex).
  std::vector<double> beta;
  /// Mass in the top 5% of cells of the truncated edge at each snapshot.
  std::vector<double> far_boundary_mass;
  double dt = 0.0;

  double total_mass(std::size_t k) const {
    double s = 0.0;
    for (const auto& e : masses[k]) {
      for (double x : e) s += x;
    }
    return s;
  }

  GraphMeasure slice_measure(std::size_t k) const {
    GraphMeasure out;
    for (std::size_t e = 0; e < grid.edges.size(); ++e) {
      const auto& ge = grid.edges[e];
      for (std::size_t i = 0; i < ge.cells(); ++i) {
        const double m = masses[k][e][i];
        if (m > 0.0) out.atoms.push_back({{ge.edge, ge.centre(i)}, m});
      }
    }
    return out;
  }

  GraphMeasurePath to_measure_path() const {
    GraphMeasurePath out;
    out.times = times;
    for (std::size_t k = 0; k < times.size(); ++k) out.slices.push_back(slice_measure(k));
    return out;
  }
};

/// Explicit conservative finite volumes for
///   d_t mu = -d_h(mu) + d_hh((S/T) mu)
/// on every edge. Interior faces use upwind advection and centred diffusion
/// with cell-consistent coefficients. Faces at the vertex use the flux
/// 2 S_i* (u_cell - u_v) / dh_i in the variable u = mu/T, which is continuous
/// across the vertex; u_v solves the discrete Kirchhoff balance, so mass is
/// conserved exactly. Leaf and truncation faces carry no flux.
inline GraphDensityPath solve_graph_fp(const CoefficientSet& c, const std::vector<std::vector<double>>& initial,
                                       const std::vector<double>& snapshot_times, const FpOptions& opt = {}) {
  GraphDensityPath out;
  out.grid = make_fp_grid(c, opt.cells_per_edge);
  const auto& grid = out.grid;
  const std::size_t ne = grid.edges.size();
  if (initial.size() != ne) throw Error(ErrorCode::InvalidArgument, "initial masses do not match the edge count");
  double m0 = 0.0;
  for (std::size_t e = 0; e < ne; ++e) {
    if (initial[e].size() != grid.edges[e].cells()) {
      throw Error(ErrorCode::InvalidArgument, "initial masses do not match the grid");
    }
    for (double x : initial[e]) {
      if (!(x >= 0.0)) throw Error(ErrorCode::InvalidArgument, "initial masses must be non-negative");
      m0 += x;
    }
  }
  if (std::abs(m0 - 1.0) > opt.mass_tolerance) {
    throw Error(ErrorCode::MassLoss, "initial mass " + std::to_string(m0) + " is not 1");
  }
  for (std::size_t k = 0; k < snapshot_times.size(); ++k) {
    if (snapshot_times[k] < 0.0 || (k > 0 && !(snapshot_times[k] > snapshot_times[k - 1]))) {
      throw Error(ErrorCode::InvalidArgument, "snapshot times must be non-negative and increasing");
    }
  }

  // Per-cell data: inverse width, diffusion S/T, mean period; per-face
  // inverse centre spacing.
  std::vector<std::vector<double>> inv_w(ne);
  std::vector<std::vector<double>> diff(ne);
  std::vector<std::vector<double>> tcell(ne);
  std::vector<std::vector<double>> inv_gap(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& ge = grid.edges[e];
    const auto& ec = c.edge(ge.edge);
    const std::size_t n = ge.cells();
    inv_w[e].resize(n);
    diff[e].resize(n);
    tcell[e].resize(n);
    inv_gap[e].assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      inv_w[e][i] = 1.0 / ge.width(i);
      diff[e][i] = ec.cell_p2(ge.faces[i], ge.faces[i + 1]);
      tcell[e][i] = ec.cell_mean_period(ge.faces[i], ge.faces[i + 1]);
    }
    for (std::size_t i = 1; i < n; ++i) inv_gap[e][i] = 1.0 / (ge.centre(i) - ge.centre(i - 1));
  }
  // Vertex coupling conductances S_i* / dh_i.
  std::vector<int> orient(ne, 0);
  std::vector<double> cond(ne, 0.0);
  double cond_total = 0.0;
  if (c.graph.vertex) {
    const auto glue = gluing_weights(c);
    out.beta = glue.beta;
    for (std::size_t e = 0; e < ne; ++e) {
      orient[e] = c.graph.orientation(grid.edges[e].edge);
      if (orient[e] == 0) continue;
      const std::size_t i = orient[e] > 0 ? grid.edges[e].cells() - 1 : 0;
      cond[e] = 0.5 * glue.beta[static_cast<std::size_t>(grid.edges[e].edge)] * inv_w[e][i];
      cond_total += cond[e];
    }
  }

  // Stability bound from the total outflow rate of every cell.
  double rate = 0.0;
  for (std::size_t e = 0; e < ne; ++e) {
    const std::size_t n = grid.edges[e].cells();
    for (std::size_t i = 0; i < n; ++i) {
      double r = inv_w[e][i] * (1.0 + diff[e][i] * (inv_gap[e][i] + inv_gap[e][i + 1]));
      const bool vertex_cell = (orient[e] > 0 && i == n - 1) || (orient[e] < 0 && i == 0);
      if (vertex_cell) r += 2.0 * cond[e] * inv_w[e][i] / tcell[e][i];
      rate = std::max(rate, r);
    }
  }
  const double dt_max = 1.0 / rate;
  if (opt.dt > dt_max) {
    std::ostringstream os;
    os << "time step " << opt.dt << " exceeds the stability limit " << dt_max;
    throw Error(ErrorCode::CFLViolation, os.str());
  }
  const double dt_target = opt.dt > 0.0 ? opt.dt : opt.safety * dt_max;

  auto mass = initial;
  std::vector<std::vector<double>> flux(ne);
  for (std::size_t e = 0; e < ne; ++e) flux[e].assign(grid.edges[e].cells() + 1, 0.0);

  auto step = [&](double dt) {
    double uv = 0.0;
    if (cond_total > 0.0) {
      for (std::size_t e = 0; e < ne; ++e) {
        if (orient[e] == 0) continue;
        const std::size_t i = orient[e] > 0 ? grid.edges[e].cells() - 1 : 0;
        uv += cond[e] * mass[e][i] * inv_w[e][i] / tcell[e][i];
      }
      uv /= cond_total;
    }
    for (std::size_t e = 0; e < ne; ++e) {
      const std::size_t n = grid.edges[e].cells();
      auto& f = flux[e];
      const auto& m = mass[e];
      const auto& d = diff[e];
      const auto& iw = inv_w[e];
      const auto& ig = inv_gap[e];
      f[0] = 0.0;
      f[n] = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        const double ml = m[i - 1] * iw[i - 1];
        const double mr = m[i] * iw[i];
        f[i] = ml - (d[i] * mr - d[i - 1] * ml) * ig[i];
      }
      if (orient[e] > 0) {
        f[n] = 2.0 * cond[e] * (m[n - 1] * iw[n - 1] / tcell[e][n - 1] - uv);
      } else if (orient[e] < 0) {
        f[0] = -2.0 * cond[e] * (m[0] * iw[0] / tcell[e][0] - uv);
      }
    }
    for (std::size_t e = 0; e < ne; ++e) {
      auto& m = mass[e];
      const auto& f = flux[e];
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += dt * (f[i] - f[i + 1]);
    }
  };

  auto far_mass = [&]() {
    for (std::size_t e = 0; e < ne; ++e) {
      if (std::isfinite(c.graph.edge(grid.edges[e].edge).h_hi)) continue;
      const std::size_t n = grid.edges[e].cells();
      double s = 0.0;
      for (std::size_t i = n - std::max<std::size_t>(1, n / 20); i < n; ++i) s += mass[e][i];
      return s;
    }
    return 0.0;
  };

  auto record = [&](double t) {
    double total = 0.0;
    for (const auto& me : mass) {
      for (double x : me) {
        if (x < 0.0) {
          throw Error(ErrorCode::CFLViolation, "negative cell mass " + std::to_string(x) + " at t = " + std::to_string(t));
        }
        total += x;
      }
    }
    if (std::abs(total - 1.0) > opt.mass_tolerance) {
      throw Error(ErrorCode::MassLoss, "total mass " + std::to_string(total) + " at t = " + std::to_string(t));
    }
    out.times.push_back(t);
    out.masses.push_back(mass);
    out.far_boundary_mass.push_back(far_mass());
  };

  double t = 0.0;
  out.dt = dt_target;
  for (double target : snapshot_times) {
    const double span = target - t;
    if (span > 0.0) {
      const auto sub = static_cast<std::size_t>(std::ceil(span / dt_target - 1e-9));
      const double dt = span / static_cast<double>(sub);
      for (std::size_t s = 0; s < sub; ++s) step(dt);
    }
    t = target;
    record(t);
  }
  return out;
}

/// Convenience overload: initial measure deposited onto the solver grid.
inline GraphDensityPath solve_graph_fp(const CoefficientSet& c, const GraphMeasure& initial,
                                       const std::vector<double>& snapshot_times, const FpOptions& opt = {}) {
  return solve_graph_fp(c, deposit(make_fp_grid(c, opt.cells_per_edge), initial), snapshot_times, opt);
}

}  // namespace levelcg
