#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "levelcg/errors.hpp"
#include "levelcg/hamiltonian.hpp"
#include "levelcg/interp.hpp"

namespace levelcg {

// ---------------------------------------------------------------------------
// Graph of connected level-set components
// ---------------------------------------------------------------------------

enum class EdgeSide { left_well, right_well, above_saddle, single_well };

inline std::string_view to_string(EdgeSide side) {
  switch (side) {
    case EdgeSide::left_well: return "left_well";
    case EdgeSide::right_well: return "right_well";
    case EdgeSide::above_saddle: return "above_saddle";
    case EdgeSide::single_well: return "single_well";
  }
  return "unknown";
}

/// Edge ids of the double-well graph.
inline constexpr int kLeftEdge = 0;
inline constexpr int kRightEdge = 1;
inline constexpr int kAboveEdge = 2;
/// Edge id of the one-edge graph of a single well.
inline constexpr int kSingleEdge = 0;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Edge {
  int id = 0;
  double h_lo = 0.0;
  double h_hi = kInf;
  EdgeSide side = EdgeSide::single_well;
  /// Positions swept by orbits on this edge.
  double q_lo = -kInf;
  double q_hi = kInf;
};

struct InteriorVertex {
  double h_star = 0.0;
  double q_saddle = 0.0;
  std::vector<int> edges;
};

struct LeafVertex {
  int edge = 0;
  double h = 0.0;
  double q_min = 0.0;
};

struct LevelGraph {
  std::vector<Edge> edges;
  std::optional<InteriorVertex> vertex;
  std::vector<LeafVertex> leaves;

  bool has_vertex() const noexcept { return vertex.has_value(); }
  double h_star() const noexcept { return vertex ? vertex->h_star : std::numeric_limits<double>::quiet_NaN(); }

  const Edge& edge(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= edges.size()) {
      throw Error(ErrorCode::InvalidArgument, "no edge with id " + std::to_string(id));
    }
    return edges[static_cast<std::size_t>(id)];
  }

  const LeafVertex* leaf_of(int id) const noexcept {
    for (const auto& l : leaves) {
      if (l.edge == id) return &l;
    }
    return nullptr;
  }

  /// +1 when the interior vertex sits at the upper end of the edge, -1 when at
  /// the lower end, 0 for edges not touching it.
  int orientation(int id) const {
    if (!vertex) return 0;
    const auto& e = edge(id);
    if (e.h_hi == vertex->h_star) return +1;
    if (e.h_lo == vertex->h_star) return -1;
    return 0;
  }

  /// Energy of the end of the edge that is closest to the interior vertex (or
  /// the leaf energy for the single-well graph). Graph distances are measured
  /// from this point.
  double reference_energy(int id) const {
    const auto& e = edge(id);
    if (!vertex) return e.h_lo;
    return vertex->h_star;
  }

  /// Distance along the edge from the reference point.
  double distance_from_reference(int id, double h) const { return std::abs(h - reference_energy(id)); }
};

struct GraphPoint {
  int edge = 0;
  double h = 0.0;

  friend bool operator==(const GraphPoint&, const GraphPoint&) = default;
};

/// Builds the three-edge graph of a double-well potential (minimum, maximum,
/// minimum). Edge ids are kLeftEdge, kRightEdge, kAboveEdge.
inline LevelGraph build_graph(const Potential& v, const RootScan& scan = {}) {
  const auto cps = critical_points(v, scan);
  const bool ok = cps.size() == 3 && cps[0].kind == CriticalKind::minimum && cps[1].kind == CriticalKind::maximum &&
                  cps[2].kind == CriticalKind::minimum;
  if (!ok) {
    std::ostringstream os;
    os << "expected critical points (min, max, min), found " << cps.size() << " critical point(s)";
    throw Error(ErrorCode::UnsupportedTopology, os.str());
  }
  const double h_star = cps[1].value;
  LevelGraph g;
  g.edges = {
      Edge{kLeftEdge, cps[0].value, h_star, EdgeSide::left_well, -kInf, cps[1].q},
      Edge{kRightEdge, cps[2].value, h_star, EdgeSide::right_well, cps[1].q, kInf},
      Edge{kAboveEdge, h_star, kInf, EdgeSide::above_saddle, -kInf, kInf},
  };
  g.vertex = InteriorVertex{h_star, cps[1].q, {kLeftEdge, kRightEdge, kAboveEdge}};
  g.leaves = {LeafVertex{kLeftEdge, cps[0].value, cps[0].q}, LeafVertex{kRightEdge, cps[2].value, cps[2].q}};
  return g;
}

/// One-edge graph of a single-well potential, used for the harmonic test case.
inline LevelGraph build_single_well_graph(const Potential& v, const RootScan& scan = {}) {
  const auto cps = critical_points(v, scan);
  if (cps.size() != 1 || cps[0].kind != CriticalKind::minimum) {
    throw Error(ErrorCode::UnsupportedTopology, "single-well graph needs exactly one critical point (a minimum)");
  }
  LevelGraph g;
  g.edges = {Edge{kSingleEdge, cps[0].value, kInf, EdgeSide::single_well, -kInf, kInf}};
  g.leaves = {LeafVertex{kSingleEdge, cps[0].value, cps[0].q}};
  return g;
}

/// Coarse-graining map: (q, p) -> (component of {H = h}, h). At the saddle
/// itself the point is assigned to the upper edge.
inline GraphPoint project(const LevelGraph& g, const Potential& v, const PhasePoint& x) {
  const double h = hamiltonian(v, x);
  if (!g.vertex) return {kSingleEdge, h};
  if (h > g.vertex->h_star) return {kAboveEdge, h};
  if (x.q < g.vertex->q_saddle) return {kLeftEdge, h};
  if (x.q > g.vertex->q_saddle) return {kRightEdge, h};
  return {kAboveEdge, h};
}

inline bool is_at_saddle(const LevelGraph& g, const Potential& v, const PhasePoint& x, double tie = 1e-12) {
  if (!g.vertex) return false;
  return std::abs(hamiltonian(v, x) - g.vertex->h_star) < tie && std::abs(x.q - g.vertex->q_saddle) < tie;
}

// ---------------------------------------------------------------------------
// Orbits: turning points, action, period
// ---------------------------------------------------------------------------

namespace detail {

inline void require_in_edge(const Edge& e, double h, bool strict) {
  const bool inside = strict ? (h > e.h_lo && h < e.h_hi) : (h >= e.h_lo && h <= e.h_hi);
  if (!inside || !std::isfinite(h)) {
    std::ostringstream os;
    os << "h = " << h << " outside edge " << e.id << " (" << to_string(e.side) << ") range [" << e.h_lo << ", "
       << e.h_hi << "]";
    throw Error(ErrorCode::OutOfRange, os.str());
  }
}

/// Smallest step-doubled position beyond `from` (in direction `dir`) where V > h.
inline double outer_bracket(const Potential& v, double from, double dir, double h) {
  double step = 1.0;
  double q = from + dir * step;
  while (v.value(q) <= h) {
    step *= 2.0;
    q = from + dir * step;
    if (step > 1e12) throw Error(ErrorCode::OutOfRange, "no outer turning point found");
  }
  return q;
}

/// Root of V(q) = h on [a, b] where V - h changes sign (bisection to machine
/// resolution).
inline double level_root(const Potential& v, double a, double b, double h) {
  return bisect([&](double q) { return v.value(q) - h; }, a, b, 0.0);
}

/// Synthetic division of a low-to-high polynomial by (q - root).
inline std::vector<double> deflate(const std::vector<double>& c, double root) {
  const std::size_t d = c.size() - 1;
  std::vector<double> b(d);
  b[d - 1] = c[d];
  for (std::size_t k = d - 1; k >= 1; --k) b[k - 1] = c[k] + root * b[k];
  return b;
}

inline double horner(const std::vector<double>& c, double q) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * q + *it;
  return acc;
}

}  // namespace detail

struct TurningPoints {
  double q_minus = 0.0;
  double q_plus = 0.0;
};

/// Orbit endpoints V(q) = h on the branch of `edge`, q_minus < q_plus.
inline TurningPoints turning_points(const Potential& v, const LevelGraph& g, int edge_id, double h) {
  const auto& e = g.edge(edge_id);
  detail::require_in_edge(e, h, false);
  auto leaf_q = [&](int id) {
    const auto* leaf = g.leaf_of(id);
    return leaf->q_min;
  };
  switch (e.side) {
    case EdgeSide::left_well: {
      const double qm = leaf_q(kLeftEdge);
      const double qs = g.vertex->q_saddle;
      return {detail::level_root(v, detail::outer_bracket(v, qm, -1.0, h), qm, h), detail::level_root(v, qm, qs, h)};
    }
    case EdgeSide::right_well: {
      const double qm = leaf_q(kRightEdge);
      const double qs = g.vertex->q_saddle;
      return {detail::level_root(v, qs, qm, h), detail::level_root(v, qm, detail::outer_bracket(v, qm, 1.0, h), h)};
    }
    case EdgeSide::above_saddle: {
      const double ql = leaf_q(kLeftEdge);
      const double qr = leaf_q(kRightEdge);
      return {detail::level_root(v, detail::outer_bracket(v, ql, -1.0, h), ql, h),
              detail::level_root(v, qr, detail::outer_bracket(v, qr, 1.0, h), h)};
    }
    case EdgeSide::single_well: {
      const double qm = leaf_q(kSingleEdge);
      return {detail::level_root(v, detail::outer_bracket(v, qm, -1.0, h), qm, h),
              detail::level_root(v, qm, detail::outer_bracket(v, qm, 1.0, h), h)};
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown edge side");
}

struct QuadratureOptions {
  double tolerance = 1e-13;
  unsigned max_depth = 25;
};

namespace detail {

/// Orbit integrals in the angle variable q = c + r sin(theta). Writing
/// h - V(q) = (q - q_-)(q_+ - q) W(q) with W from polynomial deflation, the
/// action integrand becomes r^2 cos^2(theta) sqrt(2 W) and the period
/// integrand 1 / sqrt(2 W); both are free of the turning-point singularity.
/// Interior critical points of V inside the orbit are used as split points.
struct OrbitIntegrand {
  double c = 0.0;
  double r = 0.0;
  std::vector<double> w;
  std::vector<double> splits;  // theta values, ascending, including both ends
};

inline OrbitIntegrand make_orbit(const Potential& v, const LevelGraph& g, int edge_id, double h) {
  const auto tp = turning_points(v, g, edge_id, h);
  OrbitIntegrand o;
  o.c = 0.5 * (tp.q_plus + tp.q_minus);
  o.r = 0.5 * (tp.q_plus - tp.q_minus);
  std::vector<double> poly(v.coefficients().begin(), v.coefficients().end());
  poly[0] -= h;
  o.w = deflate(deflate(poly, tp.q_plus), tp.q_minus);
  o.splits = {-std::numbers::pi / 2};
  if (g.vertex && o.r > 0.0) {
    const double s = (g.vertex->q_saddle - o.c) / o.r;
    if (s > -1.0 + 1e-14 && s < 1.0 - 1e-14) o.splits.push_back(std::asin(s));
  }
  o.splits.push_back(std::numbers::pi / 2);
  return o;
}

template <class F>
double integrate_pieces(const OrbitIntegrand& o, F&& f, const QuadratureOptions& opts) {
  using boost::math::quadrature::gauss_kronrod;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < o.splits.size(); ++i) {
    total += gauss_kronrod<double, 31>::integrate(f, o.splits[i], o.splits[i + 1], opts.max_depth, opts.tolerance);
  }
  return total;
}

}  // namespace detail

/// S(h) = closed-orbit integral of |p| dq on the branch of `edge`.
inline double action(const Potential& v, const LevelGraph& g, int edge_id, double h, const QuadratureOptions& opts = {}) {
  const auto& e = g.edge(edge_id);
  detail::require_in_edge(e, h, false);
  if (h == e.h_lo && e.side != EdgeSide::above_saddle) return 0.0;
  const auto o = detail::make_orbit(v, g, edge_id, h);
  if (o.r == 0.0) return 0.0;
  const double r2 = o.r * o.r;
  auto f = [&](double theta) {
    const double ct = std::cos(theta);
    const double w = std::max(detail::horner(o.w, o.c + o.r * std::sin(theta)), 0.0);
    return r2 * ct * ct * std::sqrt(2.0 * w);
  };
  return 2.0 * detail::integrate_pieces(o, f, opts);
}

/// T(h) = closed-orbit integral of dq / |p|, the orbit period.
inline double period(const Potential& v, const LevelGraph& g, int edge_id, double h, double delta_sing = 1e-4,
                     const QuadratureOptions& opts = {}) {
  const auto& e = g.edge(edge_id);
  detail::require_in_edge(e, h, true);
  if (g.vertex && std::abs(h - g.vertex->h_star) < delta_sing * (1.0 - 1e-9)) {
    std::ostringstream os;
    os << "h = " << h << " is within " << delta_sing << " of the saddle energy " << g.vertex->h_star;
    throw Error(ErrorCode::NearSaddle, os.str());
  }
  const auto o = detail::make_orbit(v, g, edge_id, h);
  auto f = [&](double theta) {
    const double w = detail::horner(o.w, o.c + o.r * std::sin(theta));
    return 1.0 / std::sqrt(2.0 * w);
  };
  return 2.0 * detail::integrate_pieces(o, f, opts);
}

// ---------------------------------------------------------------------------
// Coefficient tables
// ---------------------------------------------------------------------------

struct CoefficientSpec {
  double delta_sing = 1e-4;
  double delta_floor = 1e-6;
  std::size_t points = 256;
  /// Upper truncation of the unbounded edge.
  double h_max = 16.0;
};

/// Tabulated S(h), T(h) on one edge with monotone piecewise-cubic
/// interpolation. Queries outside the tabulated grid follow the edge ends:
/// linear decay of S/T to zero towards a leaf, clamping inside the saddle
/// band, linear extrapolation past the truncation of an unbounded edge.
class EdgeCoefficients {
 public:
  enum class End { clamp, leaf, vertex, open };

  EdgeCoefficients(int edge_id, double h_lo, double h_hi, End lo_end, End hi_end, std::vector<double> grid,
                   std::vector<double> s, std::vector<double> t, std::optional<double> s_at_lo = std::nullopt,
                   std::optional<double> s_at_hi = std::nullopt)
      : edge_id_(edge_id),
        h_lo_(h_lo),
        h_hi_(h_hi),
        lo_end_(lo_end),
        hi_end_(hi_end),
        grid_(std::move(grid)),
        s_(std::move(s)),
        t_(std::move(t)) {
    if (grid_.size() < 4 || s_.size() != grid_.size() || t_.size() != grid_.size()) {
      throw Error(ErrorCode::InvalidArgument, "coefficient table needs >= 4 points and matching S, T columns");
    }
    for (std::size_t i = 1; i < grid_.size(); ++i) {
      if (!(grid_[i] > grid_[i - 1])) throw Error(ErrorCode::InvalidArgument, "coefficient grid must increase");
    }
    for (double t : t_) {
      if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "period values must be positive");
    }
    std::vector<double> sx;
    std::vector<double> sy;
    if (s_at_lo) {
      sx.push_back(h_lo_);
      sy.push_back(*s_at_lo);
    }
    sx.insert(sx.end(), grid_.begin(), grid_.end());
    sy.insert(sy.end(), s_.begin(), s_.end());
    if (s_at_hi) {
      sx.push_back(h_hi_);
      sy.push_back(*s_at_hi);
    }
    s_lo_ = sx.front();
    s_hi_ = sx.back();
    s_interp_ = MonotoneCubic(std::move(sx), std::move(sy));
    t_interp_ = MonotoneCubic(grid_, t_);
  }

  /// Table supplied directly (test tables, exact closed forms). Values outside
  /// the grid are clamped.
  static EdgeCoefficients from_table(int edge_id, std::vector<double> grid, std::vector<double> s,
                                     std::vector<double> t) {
    const double lo = grid.front();
    const double hi = grid.back();
    return EdgeCoefficients(edge_id, lo, hi, End::clamp, End::clamp, std::move(grid), std::move(s), std::move(t));
  }

  int edge_id() const noexcept { return edge_id_; }
  double h_lo() const noexcept { return h_lo_; }
  double h_hi() const noexcept { return h_hi_; }
  End lo_end() const noexcept { return lo_end_; }
  End hi_end() const noexcept { return hi_end_; }
  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& action_values() const noexcept { return s_; }
  const std::vector<double>& period_values() const noexcept { return t_; }

  double action(double h) const { return s_interp_(std::clamp(h, s_lo_, s_hi_)); }

  double period(double h) const { return t_interp_(h); }

  /// Microcanonical average of p^2 on the level-set component, S/T.
  double p2_avg(double h) const {
    const double a = grid_.front();
    const double b = grid_.back();
    if (h < a) {
      if (lo_end_ == End::leaf) return node_p2(0) * std::max(h - h_lo_, 0.0) / (a - h_lo_);
      return node_p2(0);
    }
    if (h > b) {
      if (hi_end_ == End::open) {
        const std::size_t n = grid_.size();
        const double slope = (node_p2(n - 1) - node_p2(n - 2)) / (grid_[n - 1] - grid_[n - 2]);
        return node_p2(n - 1) + slope * (h - b);
      }
      return node_p2(grid_.size() - 1);
    }
    return action(h) / period(h);
  }

  /// Diffusion coefficient a(h) = 2 S/T of the limit energy process.
  double diffusion(double h) const { return 2.0 * p2_avg(h); }

  /// Mean of T over [a, b]. Uses (S(b) - S(a)) / (b - a), which is exact for
  /// T = dS/dh and resolves the logarithmic blow-up of T at the saddle; falls
  /// back to a Simpson average of T where S is flat.
  double cell_mean_period(double a, double b) const {
    const double ds = action(b) - action(a);
    if (ds > 0.0) return ds / (b - a);
    return (period(a) + 4.0 * period(0.5 * (a + b)) + period(b)) / 6.0;
  }

  /// Cell-consistent value of S/T at the cell centre: S(centre) over the cell
  /// mean of T. Equals p2_avg for smooth tables and stays consistent with
  /// cell-averaged densities next to the saddle.
  double cell_p2(double a, double b) const {
    const double tm = cell_mean_period(a, b);
    const double centre = 0.5 * (a + b);
    if (ds_positive(a, b)) return action(centre) / tm;
    return p2_avg(centre);
  }

 private:
  double node_p2(std::size_t i) const { return s_[i] / t_[i]; }
  bool ds_positive(double a, double b) const { return action(b) - action(a) > 0.0; }

  int edge_id_;
  double h_lo_;
  double h_hi_;
  End lo_end_;
  End hi_end_;
  std::vector<double> grid_;
  std::vector<double> s_;
  std::vector<double> t_;
  double s_lo_ = 0.0;
  double s_hi_ = 0.0;
  MonotoneCubic s_interp_;
  MonotoneCubic t_interp_;
};

/// Coefficient tables for every edge of a graph.
struct CoefficientSet {
  LevelGraph graph;
  CoefficientSpec spec;
  std::vector<EdgeCoefficients> edges;

  const EdgeCoefficients& edge(int id) const {
    for (const auto& e : edges) {
      if (e.edge_id() == id) return e;
    }
    throw Error(ErrorCode::InvalidArgument, "no coefficient table for edge " + std::to_string(id));
  }

  /// Upper end of the computational domain of an edge (h_max for the
  /// unbounded edge).
  double domain_hi(int id) const {
    const auto& e = graph.edge(id);
    return std::isfinite(e.h_hi) ? e.h_hi : spec.h_max;
  }
};

namespace detail {

/// Grid with geometric clustering: distances from `lo` (if refine_lo) and/or
/// to `hi` (if refine_hi) grow geometrically from the given offsets.
inline std::vector<double> clustered_grid(double lo, double hi, std::size_t m, bool refine_lo, double off_lo,
                                          bool refine_hi, double off_hi) {
  std::vector<double> out(m);
  const double len = hi - lo;
  for (std::size_t k = 0; k < m; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(m - 1);
    double h = 0.0;
    if (refine_lo && refine_hi) {
      const double half = 0.5 * len;
      h = s <= 0.5 ? lo + off_lo * std::pow(half / off_lo, 2.0 * s) : hi - off_hi * std::pow(half / off_hi, 2.0 * (1.0 - s));
    } else if (refine_lo) {
      h = lo + off_lo * std::pow((len - off_hi) / off_lo, s);
    } else if (refine_hi) {
      h = hi - off_hi * std::pow((len - off_lo) / off_hi, 1.0 - s);
    } else {
      h = lo + off_lo + (len - off_lo - off_hi) * s;
    }
    out[k] = h;
  }
  return out;
}

}  // namespace detail

/// Tabulates S and T on every edge. Well edges cover [h_leaf + delta_floor,
/// h* - delta_sing]; the upper edge covers [h* + delta_sing, h_max]; all grids
/// are geometric towards the leaf and the saddle.
inline CoefficientSet build_coefficients(const Potential& v, const LevelGraph& g, const CoefficientSpec& spec = {},
                                         const QuadratureOptions& quad = {}) {
  if (spec.points < 4) throw Error(ErrorCode::InvalidArgument, "need at least 4 grid points per edge");
  CoefficientSet set{g, spec, {}};
  for (const auto& e : g.edges) {
    const bool leaf_lo = g.leaf_of(e.id) != nullptr;
    const bool vertex_hi = g.vertex && e.h_hi == g.vertex->h_star;
    const bool vertex_lo = g.vertex && e.h_lo == g.vertex->h_star;
    const double hi = std::isfinite(e.h_hi) ? e.h_hi : spec.h_max;
    if (!(hi > e.h_lo)) throw Error(ErrorCode::InvalidArgument, "h_max must exceed the saddle energy");
    const double off_lo = leaf_lo ? spec.delta_floor : spec.delta_sing;
    const double off_hi = vertex_hi ? spec.delta_sing : 0.0;
    auto grid = detail::clustered_grid(e.h_lo, hi, spec.points, true, off_lo, vertex_hi, off_hi);
    std::vector<double> s(grid.size());
    std::vector<double> t(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      s[i] = action(v, g, e.id, grid[i], quad);
      t[i] = period(v, g, e.id, grid[i], spec.delta_sing, quad);
    }
    std::optional<double> s_lo;
    std::optional<double> s_hi;
    if (leaf_lo) s_lo = 0.0;
    if (vertex_lo) s_lo = action(v, g, e.id, e.h_lo, quad);
    if (vertex_hi) s_hi = action(v, g, e.id, e.h_hi, quad);
    using End = EdgeCoefficients::End;
    const End lo_end = leaf_lo ? End::leaf : (vertex_lo ? End::vertex : End::clamp);
    const End hi_end = vertex_hi ? End::vertex : (std::isfinite(e.h_hi) ? End::clamp : End::open);
    set.edges.emplace_back(e.id, e.h_lo, hi, lo_end, hi_end, std::move(grid), std::move(s), std::move(t), s_lo, s_hi);
  }
  return set;
}

}  // namespace levelcg
