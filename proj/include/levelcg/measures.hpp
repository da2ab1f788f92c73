#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "levelcg/errors.hpp"
#include "levelcg/hamiltonian.hpp"
#include "levelcg/levelset.hpp"
#include "levelcg/sde.hpp"

namespace levelcg {

struct WeightedAtom {
  GraphPoint point;
  double weight = 0.0;
};

/// Probability measure on the graph, stored as weighted atoms. Histograms
/// convert to this form with their bin masses lumped at bin centres.
struct GraphMeasure {
  std::vector<WeightedAtom> atoms;

  static GraphMeasure dirac(GraphPoint y) { return {{{y, 1.0}}}; }

  static GraphMeasure uniform(const std::vector<GraphPoint>& points) {
    GraphMeasure m;
    m.atoms.reserve(points.size());
    const double w = 1.0 / static_cast<double>(points.size());
    for (const auto& y : points) m.atoms.push_back({y, w});
    return m;
  }

  double total_mass() const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.weight;
    return s;
  }

  double mean_energy() const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.weight * a.point.h;
    return s;
  }

  /// Mass carried by one edge.
  double edge_mass(int edge) const {
    double s = 0.0;
    for (const auto& a : atoms) {
      if (a.point.edge == edge) s += a.weight;
    }
    return s;
  }

  void validate(const LevelGraph& g, double tolerance = 1e-12) const {
    for (const auto& a : atoms) {
      if (!(a.weight >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative atom weight");
      const auto& e = g.edge(a.point.edge);
      if (a.point.h < e.h_lo || a.point.h > e.h_hi) {
        throw Error(ErrorCode::OutOfRange, "atom at h = " + std::to_string(a.point.h) + " outside its edge");
      }
    }
    if (std::abs(total_mass() - 1.0) > tolerance) {
      throw Error(ErrorCode::InvalidArgument, "measure mass " + std::to_string(total_mass()) + " differs from 1");
    }
  }
};

struct GraphMeasurePath {
  std::vector<double> times;
  std::vector<GraphMeasure> slices;
};

/// Atom-identity preserving push-forward of one snapshot.
inline std::vector<GraphPoint> project_all(const std::vector<PhasePoint>& atoms, const LevelGraph& g, const Potential& v) {
  std::vector<GraphPoint> out;
  out.reserve(atoms.size());
  for (const auto& x : atoms) out.push_back(project(g, v, x));
  return out;
}

/// Image of the empirical measures under the coarse-graining map: each atom
/// is projected and keeps weight 1/n. Atom order follows trajectory order.
inline GraphMeasurePath pushforward(const EnsemblePath& ensemble, const LevelGraph& g, const Potential& v) {
  GraphMeasurePath out;
  out.times = ensemble.times;
  out.slices.reserve(ensemble.states.size());
  for (const auto& slice : ensemble.states) out.slices.push_back(GraphMeasure::uniform(project_all(slice, g, v)));
  return out;
}

// ---------------------------------------------------------------------------
// Wasserstein-1 on the tree
// ---------------------------------------------------------------------------

/// Geodesic distance on the graph: along the edge, or through the interior
/// vertex between different edges.
inline double graph_distance(const LevelGraph& g, const GraphPoint& a, const GraphPoint& b) {
  if (a.edge == b.edge) return std::abs(a.h - b.h);
  return g.distance_from_reference(a.edge, a.h) + g.distance_from_reference(b.edge, b.h);
}

/// Exact W1 under the tree metric. For every edge, cutting at distance d from
/// the vertex separates the subtree beyond the cut; W1 is the sum over edges
/// of the integral over d of |mu(beyond d) - nu(beyond d)|.
inline double w1_tree(const GraphMeasure& mu, const GraphMeasure& nu, const LevelGraph& g, double h_max = kInf) {
  struct Signed {
    double d;
    double w;
  };
  std::vector<std::vector<Signed>> per_edge(g.edges.size());
  auto add = [&](const GraphMeasure& m, double sign) {
    for (const auto& a : m.atoms) {
      if (a.weight == 0.0) continue;
      if (a.point.h > h_max) {
        std::ostringstream os;
        os << "atom at h = " << a.point.h << " beyond the truncation h_max = " << h_max;
        throw Error(ErrorCode::UnboundedSupport, os.str());
      }
      per_edge.at(static_cast<std::size_t>(a.point.edge)).push_back({g.distance_from_reference(a.point.edge, a.point.h), sign * a.weight});
    }
  };
  add(mu, 1.0);
  add(nu, -1.0);
  double total = 0.0;
  for (auto& atoms : per_edge) {
    std::sort(atoms.begin(), atoms.end(), [](const Signed& x, const Signed& y) { return x.d > y.d; });
    double beyond = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      beyond += atoms[k].w;
      const double next = k + 1 < atoms.size() ? atoms[k + 1].d : 0.0;
      total += std::abs(beyond) * (atoms[k].d - next);
    }
  }
  return total;
}

/// W1 at a single time for paired paths.
inline std::vector<double> w1_over_time(const GraphMeasurePath& a, const GraphMeasurePath& b, const LevelGraph& g,
                                        double h_max = kInf) {
  if (a.times.size() != b.times.size() || a.slices.size() != a.times.size() || b.slices.size() != b.times.size()) {
    throw Error(ErrorCode::TimeGridMismatch, "paths have different snapshot counts");
  }
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    if (std::abs(a.times[k] - b.times[k]) > 1e-12 * std::max(1.0, std::abs(a.times[k]))) {
      throw Error(ErrorCode::TimeGridMismatch, "snapshot " + std::to_string(k) + " times differ");
    }
  }
  std::vector<double> out(a.times.size());
  for (std::size_t k = 0; k < a.times.size(); ++k) out[k] = w1_tree(a.slices[k], b.slices[k], g, h_max);
  return out;
}

/// Uniform-in-time W1 distance (max over the common snapshots).
inline double sup_w1_over_time(const GraphMeasurePath& a, const GraphMeasurePath& b, const LevelGraph& g,
                               double h_max = kInf) {
  const auto w = w1_over_time(a, b, g, h_max);
  double m = 0.0;
  for (double x : w) m = std::max(m, x);
  return m;
}

// ---------------------------------------------------------------------------
// Binning
// ---------------------------------------------------------------------------

/// Bin boundaries per edge (index = edge id), ascending in h.
struct BinSpec {
  std::vector<std::vector<double>> boundaries;

  std::size_t bin_count(int edge) const { return boundaries.at(static_cast<std::size_t>(edge)).size() - 1; }

  /// Bin containing h; a point on a boundary belongs to the lower-h bin.
  std::size_t locate(int edge, double h) const {
    const auto& b = boundaries.at(static_cast<std::size_t>(edge));
    if (h < b.front() || h > b.back()) {
      std::ostringstream os;
      os << "h = " << h << " outside the bins of edge " << edge << " [" << b.front() << ", " << b.back() << "]";
      throw Error(ErrorCode::OutOfDomain, os.str());
    }
    const auto it = std::lower_bound(b.begin(), b.end(), h);
    const auto j = static_cast<std::size_t>(it - b.begin());
    return j == 0 ? 0 : j - 1;
  }
};

/// Default bins: `well_bins` per well edge and `upper_bins` on the upper edge
/// up to h_max. Widths grow geometrically away from the saddle, starting at
/// `finest`.
inline BinSpec default_bins(const LevelGraph& g, double h_max, std::size_t well_bins = 128, std::size_t upper_bins = 256,
                            double finest = 1e-3) {
  BinSpec spec;
  for (const auto& e : g.edges) {
    const bool upper = !std::isfinite(e.h_hi);
    const std::size_t n = upper ? upper_bins : well_bins;
    const double hi = upper ? h_max : e.h_hi;
    const double len = hi - e.h_lo;
    std::vector<double> d(n + 1, 0.0);
    const double ratio = std::pow(len / finest, 1.0 / static_cast<double>(n - 1));
    for (std::size_t k = 1; k <= n; ++k) d[k] = finest * std::pow(ratio, static_cast<double>(k - 1));
    d[n] = len;
    std::vector<double> b(n + 1);
    // Distances are measured from the saddle end (or from the leaf for a
    // single-well graph).
    const bool from_lo = upper || !g.vertex;
    for (std::size_t k = 0; k <= n; ++k) b[k] = from_lo ? e.h_lo + d[k] : hi - d[n - k];
    b.front() = e.h_lo;
    b.back() = hi;
    spec.boundaries.push_back(std::move(b));
  }
  return spec;
}

struct GraphHistogram {
  BinSpec bins;
  /// mass[edge][bin]
  std::vector<std::vector<double>> mass;

  double total_mass() const {
    double s = 0.0;
    for (const auto& m : mass) {
      for (double x : m) s += x;
    }
    return s;
  }

  /// Bin masses lumped at bin centres.
  GraphMeasure to_measure() const {
    GraphMeasure out;
    for (std::size_t e = 0; e < mass.size(); ++e) {
      const auto& b = bins.boundaries[e];
      for (std::size_t k = 0; k < mass[e].size(); ++k) {
        if (mass[e][k] != 0.0) out.atoms.push_back({{static_cast<int>(e), 0.5 * (b[k] + b[k + 1])}, mass[e][k]});
      }
    }
    return out;
  }
};

/// Mass-preserving binning of a measure.
inline GraphHistogram histogram(const GraphMeasure& m, const BinSpec& bins) {
  GraphHistogram out{bins, {}};
  for (std::size_t e = 0; e < bins.boundaries.size(); ++e) out.mass.emplace_back(bins.bin_count(static_cast<int>(e)), 0.0);
  for (const auto& a : m.atoms) {
    out.mass.at(static_cast<std::size_t>(a.point.edge))[bins.locate(a.point.edge, a.point.h)] += a.weight;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Local-equilibrium statistics
// ---------------------------------------------------------------------------

struct ConditionalBin {
  int edge = 0;
  double h_lo = 0.0;
  double h_hi = 0.0;
  std::size_t count = 0;
  double mean_p2 = 0.0;
  double mean_h = 0.0;
};

/// Sample mean of p^2 (and of h) over the atoms falling in each (edge, h-bin).
/// Bins without atoms report count 0 and zero means.
inline std::vector<ConditionalBin> conditional_p2(const std::vector<PhasePoint>& atoms, const LevelGraph& g,
                                                  const Potential& v, const BinSpec& bins) {
  std::vector<ConditionalBin> out;
  std::vector<std::size_t> offset;
  for (std::size_t e = 0; e < bins.boundaries.size(); ++e) {
    offset.push_back(out.size());
    const auto& b = bins.boundaries[e];
    for (std::size_t k = 0; k + 1 < b.size(); ++k) out.push_back({static_cast<int>(e), b[k], b[k + 1], 0, 0.0, 0.0});
  }
  for (const auto& x : atoms) {
    const auto y = project(g, v, x);
    auto& bin = out[offset.at(static_cast<std::size_t>(y.edge)) + bins.locate(y.edge, y.h)];
    ++bin.count;
    bin.mean_p2 += x.p * x.p;
    bin.mean_h += y.h;
  }
  for (auto& bin : out) {
    if (bin.count > 0) {
      bin.mean_p2 /= static_cast<double>(bin.count);
      bin.mean_h /= static_cast<double>(bin.count);
    }
  }
  return out;
}

}  // namespace levelcg
