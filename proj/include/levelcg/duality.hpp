#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "levelcg/errors.hpp"
#include "levelcg/graphdyn.hpp"
#include "levelcg/hamiltonian.hpp"
#include "levelcg/levelset.hpp"
#include "levelcg/measures.hpp"
#include "levelcg/sde.hpp"

namespace levelcg {

/// Value and first two derivatives.
struct Jet {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Test function g on the graph: one clamped cubic spline per edge over a
/// uniform knot grid. Each spline covers [h_lo, cap] of its edge; on the
/// unbounded edge g continues as a constant from `cap` up to h_max.
class GraphTestFunction {
 public:
  using Profile = std::function<Jet(int edge, double h)>;

  GraphTestFunction() = default;

  /// Samples `f` at `knots` uniform points per edge, with end slopes from f.
  /// Continuity of value and slope at the vertex is inherited from f.
  static GraphTestFunction from_profile(const LevelGraph& g, double cap, double h_max, std::size_t knots,
                                        const Profile& f, std::string name = {}) {
    if (knots < 4) throw Error(ErrorCode::InvalidArgument, "test function needs at least 4 knots per edge");
    if (!(cap <= h_max)) throw Error(ErrorCode::InvalidArgument, "test function support exceeds h_max");
    GraphTestFunction out;
    out.name_ = std::move(name);
    out.h_max_ = h_max;
    for (const auto& e : g.edges) {
      Piece piece;
      piece.lo = e.h_lo;
      piece.bounded = std::isfinite(e.h_hi);
      piece.hi = piece.bounded ? e.h_hi : cap;
      if (!(piece.hi > piece.lo)) throw Error(ErrorCode::InvalidArgument, "test function cap below the saddle energy");
      const double step = (piece.hi - piece.lo) / static_cast<double>(knots - 1);
      std::vector<double> values(knots);
      for (std::size_t k = 0; k < knots; ++k) {
        const double h = k + 1 == knots ? piece.hi : piece.lo + step * static_cast<double>(k);
        values[k] = f(e.id, h).value;
      }
      const Jet lo = f(e.id, piece.lo);
      const Jet hi = f(e.id, piece.hi);
      piece.end_values = {values.front(), values.back()};
      piece.end_slopes = {lo.d1, hi.d1};
      piece.spline = boost::math::interpolators::cardinal_cubic_b_spline<double>(values.begin(), values.end(), piece.lo,
                                                                                  step, lo.d1, hi.d1);
      out.pieces_.push_back(std::move(piece));
    }
    return out;
  }

  const std::string& name() const noexcept { return name_; }
  double h_max() const noexcept { return h_max_; }
  double factor() const noexcept { return factor_; }
  std::size_t edge_count() const noexcept { return pieces_.size(); }

  /// g, g', g'' at (edge, h).
  Jet jet(int edge, double h) const {
    if (edge < 0 || static_cast<std::size_t>(edge) >= pieces_.size()) {
      throw Error(ErrorCode::OutOfDomain, "test function has no edge " + std::to_string(edge));
    }
    const auto& p = pieces_[static_cast<std::size_t>(edge)];
    constexpr double kSlack = 1e-9;
    if (!(h >= p.lo - kSlack) || (p.bounded && h > p.hi + kSlack) || h > h_max_) {
      throw Error(ErrorCode::OutOfDomain,
                  "h = " + std::to_string(h) + " outside the test function domain on edge " + std::to_string(edge));
    }
    Jet j;
    if (h <= p.lo) {
      // End data is exact; the spline only supplies the curvature there.
      j = {p.end_values[0], p.end_slopes[0], p.spline.double_prime(p.lo)};
    } else if (h >= p.hi) {
      j = (!p.bounded && h > p.hi) ? Jet{p.end_values[1], 0.0, 0.0}
                                   : Jet{p.end_values[1], p.end_slopes[1], p.spline.double_prime(p.hi)};
    } else {
      j = {p.spline(h), p.spline.prime(h), p.spline.double_prime(h)};
    }
    return {factor_ * j.value, factor_ * j.d1, factor_ * j.d2};
  }

  double operator()(int edge, double h) const { return jet(edge, h).value; }

  /// The function s * g.
  GraphTestFunction scaled(double s) const {
    GraphTestFunction out = *this;
    out.factor_ *= s;
    return out;
  }

 private:
  struct Piece {
    double lo = 0.0;
    double hi = 0.0;
    bool bounded = true;
    std::array<double, 2> end_values{};
    std::array<double, 2> end_slopes{};
    boost::math::interpolators::cardinal_cubic_b_spline<double> spline;
  };

  std::string name_;
  double h_max_ = kInf;
  double factor_ = 1.0;
  std::vector<Piece> pieces_;
};

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

/// A^eps (g o Pi)(x) for A^eps f = (p/eps) f_q - (V'/eps) f_p + f_pp. With
/// f = g(H): f_q = g' V', f_p = g' p, f_pp = g'' p^2 + g'. The transport part
/// is g' {H, H} / eps, which vanishes identically.
namespace detail {

inline double composed_generator(const Jet& j, double dv, double p, double epsilon) {
  const double bracket = p * dv - dv * p;
  return j.d1 * bracket / epsilon + j.d2 * p * p + j.d1;
}

}  // namespace detail

inline double apply_generator_composed(const Potential& v, const LevelGraph& g, const GraphTestFunction& f,
                                       const PhasePoint& x, double epsilon) {
  const auto y = project(g, v, x);
  return detail::composed_generator(f.jet(y.edge, y.h), v.gradient(x.q), x.p, epsilon);
}

// ---------------------------------------------------------------------------
// Dual functionals
// ---------------------------------------------------------------------------

/// Monte Carlo value of a dual functional with its parts. `value` =
/// `linear` - `quadratic`; standard errors come from per-atom path sums.
struct DualValue {
  double value = 0.0;
  double std_error = 0.0;
  double linear = 0.0;
  double linear_std_error = 0.0;
  double quadratic = 0.0;
};

namespace detail {

inline std::vector<double> trapezoid_weights(const std::vector<double>& t) {
  std::vector<double> w(t.size(), 0.0);
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double dt = t[k + 1] - t[k];
    w[k] += 0.5 * dt;
    w[k + 1] += 0.5 * dt;
  }
  return w;
}

/// Mean and standard error of per-atom totals, linear and full.
inline DualValue summarize(const std::vector<double>& linear, const std::vector<double>& full, double quadratic) {
  const double n = static_cast<double>(linear.size());
  DualValue out;
  double ml = 0.0;
  double mf = 0.0;
  for (std::size_t i = 0; i < linear.size(); ++i) {
    ml += linear[i];
    mf += full[i];
  }
  ml /= n;
  mf /= n;
  double vl = 0.0;
  double vf = 0.0;
  for (std::size_t i = 0; i < linear.size(); ++i) {
    vl += (linear[i] - ml) * (linear[i] - ml);
    vf += (full[i] - mf) * (full[i] - mf);
  }
  const double denom = n > 1.0 ? n * (n - 1.0) : 1.0;
  out.value = mf;
  out.std_error = std::sqrt(vf / denom);
  out.linear = ml;
  out.linear_std_error = std::sqrt(vl / denom);
  out.quadratic = quadratic;
  return out;
}

}  // namespace detail

/// J^eps(rho, g o Pi) on an SDE ensemble:
///   <f, rho_T> - <f, rho_0> - int <A f, rho_t> dt - int <(d_p f)^2, rho_t> dt
/// with trapezoid time quadrature on the snapshot grid.
inline DualValue j_full(const EnsemblePath& ens, const LevelGraph& g, const Potential& v, const GraphTestFunction& f,
                        double epsilon) {
  if (ens.times.size() < 2) throw Error(ErrorCode::InvalidArgument, "ensemble needs at least two snapshots");
  const auto w = detail::trapezoid_weights(ens.times);
  const std::size_t n = ens.size();
  std::vector<double> lin(n, 0.0);
  std::vector<double> full(n, 0.0);
  double quad_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double l = 0.0;
    double q = 0.0;
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
      const auto& x = ens.states[k][i];
      const auto y = project(g, v, x);
      const Jet j = f.jet(y.edge, y.h);
      const double p2 = x.p * x.p;
      if (k == 0) l -= j.value;
      if (k + 1 == ens.times.size()) l += j.value;
      l -= w[k] * detail::composed_generator(j, v.gradient(x.q), x.p, epsilon);
      q += w[k] * j.d1 * j.d1 * p2;
    }
    lin[i] = l;
    full[i] = l - q;
    quad_total += q;
  }
  return detail::summarize(lin, full, quad_total / static_cast<double>(n));
}

/// Phase-space test function with its derivatives, for spot checks with f
/// that are not functions of the energy.
struct PhaseJet {
  double value = 0.0;
  double dq = 0.0;
  double dp = 0.0;
  double dpp = 0.0;
};

/// J^eps(rho, f) for a general time-independent f(q, p).
inline DualValue j_full_phase(const EnsemblePath& ens, const Potential& v, double epsilon,
                              const std::function<PhaseJet(const PhasePoint&)>& f) {
  if (ens.times.size() < 2) throw Error(ErrorCode::InvalidArgument, "ensemble needs at least two snapshots");
  const auto w = detail::trapezoid_weights(ens.times);
  const std::size_t n = ens.size();
  std::vector<double> lin(n, 0.0);
  std::vector<double> full(n, 0.0);
  double quad_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double l = 0.0;
    double q = 0.0;
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
      const auto& x = ens.states[k][i];
      const auto j = f(x);
      if (k == 0) l -= j.value;
      if (k + 1 == ens.times.size()) l += j.value;
      const double a = (x.p * j.dq - v.gradient(x.q) * j.dp) / epsilon + j.dpp;
      l -= w[k] * a;
      q += w[k] * j.dp * j.dp;
    }
    lin[i] = l;
    full[i] = l - q;
    quad_total += q;
  }
  return detail::summarize(lin, full, quad_total / static_cast<double>(n));
}

/// Coarse-grained functional: p^2 replaced by its level-set average S/T,
///   <g, mu_T> - <g, mu_0> - int <g' + (S/T) g'', mu_t> dt - int <(S/T) g'^2, mu_t> dt.
/// When every slice holds the same number of equally weighted atoms (a
/// push-forward or graph Monte Carlo ensemble), atoms are paired across time
/// and a standard error is reported; otherwise it is zero.
inline DualValue j_hat(const GraphMeasurePath& path, const CoefficientSet& c, const GraphTestFunction& f) {
  if (path.times.size() < 2 || path.slices.size() != path.times.size()) {
    throw Error(ErrorCode::InvalidArgument, "graph path needs at least two snapshots");
  }
  const auto w = detail::trapezoid_weights(path.times);
  const std::size_t m = path.times.size();
  bool paired = true;
  const std::size_t n = path.slices.front().atoms.size();
  for (const auto& s : path.slices) {
    if (s.atoms.size() != n) paired = false;
  }
  if (paired && n > 0) {
    const double w0 = path.slices.front().atoms.front().weight;
    for (const auto& s : path.slices) {
      for (const auto& a : s.atoms) {
        if (a.weight != w0) paired = false;
      }
    }
  }
  auto term = [&](const WeightedAtom& a, double& lin_rate, double& quad_rate) {
    const Jet j = f.jet(a.point.edge, a.point.h);
    const double p2 = c.edge(a.point.edge).p2_avg(a.point.h);
    lin_rate = j.d2 * p2 + j.d1;
    quad_rate = j.d1 * j.d1 * p2;
    return j.value;
  };
  if (paired) {
    std::vector<double> lin(n, 0.0);
    std::vector<double> full(n, 0.0);
    double quad_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double l = 0.0;
      double q = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        double lr = 0.0;
        double qr = 0.0;
        const double gv = term(path.slices[k].atoms[i], lr, qr);
        if (k == 0) l -= gv;
        if (k + 1 == m) l += gv;
        l -= w[k] * lr;
        q += w[k] * qr;
      }
      lin[i] = l;
      full[i] = l - q;
      quad_total += q;
    }
    return detail::summarize(lin, full, quad_total / static_cast<double>(n));
  }
  DualValue out;
  for (std::size_t k = 0; k < m; ++k) {
    double gsum = 0.0;
    double lsum = 0.0;
    double qsum = 0.0;
    for (const auto& a : path.slices[k].atoms) {
      double lr = 0.0;
      double qr = 0.0;
      gsum += a.weight * term(a, lr, qr);
      lsum += a.weight * lr;
      qsum += a.weight * qr;
    }
    if (k == 0) out.linear -= gsum;
    if (k + 1 == m) out.linear += gsum;
    out.linear -= w[k] * lsum;
    out.quadratic += w[k] * qsum;
  }
  out.value = out.linear - out.quadratic;
  return out;
}

/// Coarse-grained functional at an epsilon > 0 push-forward path.
inline DualValue j_hat_eps(const GraphMeasurePath& path, const CoefficientSet& c, const GraphTestFunction& f) {
  return j_hat(path, c, f);
}

/// Limit functional; the same expression evaluated on a limit path.
inline DualValue j_hat_zero(const GraphMeasurePath& path, const CoefficientSet& c, const GraphTestFunction& f) {
  return j_hat(path, c, f);
}

inline DualValue j_hat_zero(const GraphDensityPath& path, const CoefficientSet& c, const GraphTestFunction& f) {
  return j_hat(path.to_measure_path(), c, f);
}

/// Off-solution input: every atom moved up by `dh` in energy. Well atoms
/// pushed past the saddle continue on the edge above it.
inline GraphMeasurePath shift_energy(const GraphMeasurePath& path, const LevelGraph& g, double dh) {
  GraphMeasurePath out = path;
  for (auto& slice : out.slices) {
    for (auto& a : slice.atoms) {
      a.point.h += dh;
      const auto& e = g.edge(a.point.edge);
      if (a.point.h > e.h_hi && g.vertex) a.point.edge = kAboveEdge;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Test family
// ---------------------------------------------------------------------------

struct FamilySpec {
  std::size_t size = 64;
  /// Upper end of the support on the unbounded edge.
  double cap = 6.0;
  double h_max = 16.0;
  std::size_t knots = 64;
};

/// Deterministic family: the constant, then every base profile as +g, -g,
/// +0.1 g, -0.1 g, truncated to `size` members. Base profiles are smooth
/// functions of h shared by all edges, single-edge profiles that are flat to
/// first order at the vertex, and compact bumps inside one edge.
inline std::vector<GraphTestFunction> make_test_family(const LevelGraph& g, const FamilySpec& spec = {}) {
  struct Base {
    std::string name;
    GraphTestFunction::Profile f;
  };
  const double hs = g.vertex ? g.vertex->h_star : 0.0;
  const double cap = spec.cap;
  std::vector<Base> bases;
  for (int k : {1, 3, 5}) {
    const double w = k * std::numbers::pi / (2.0 * cap);
    bases.push_back({"sin" + std::to_string(k), [w](int, double h) {
                       return Jet{std::sin(w * h), w * std::cos(w * h), -w * w * std::sin(w * h)};
                     }});
  }
  for (int k : {1, 2}) {
    const double w = k * std::numbers::pi / cap;
    bases.push_back({"cos" + std::to_string(k), [w](int, double h) {
                       return Jet{std::cos(w * h), -w * std::sin(w * h), -w * w * std::cos(w * h)};
                     }});
  }
  if (g.vertex) {
    for (int id : g.vertex->edges) {
      const double width = std::isfinite(g.edge(id).h_hi) ? 0.1 : 0.5;
      bases.push_back({"vertex" + std::to_string(id), [id, hs, width](int edge, double h) {
                         if (edge != id) return Jet{};
                         const double x = h - hs;
                         const double r = x * x / (width * width);
                         const double e = std::exp(-r);
                         return Jet{x * x * e, (2.0 * x - 2.0 * x * r) * e, (2.0 - 10.0 * r + 4.0 * r * r) * e};
                       }});
    }
  }
  auto bump = [](int id, double centre, double width) {
    return [id, centre, width](int edge, double h) {
      const double u = (h - centre) / width;
      if (edge != id || std::abs(u) >= 1.0) return Jet{};
      const double s = 1.0 - u * u;
      return Jet{s * s * s, -6.0 * u * s * s / width, s * (30.0 * u * u - 6.0) / (width * width)};
    };
  };
  for (const auto& e : g.edges) {
    if (std::isfinite(e.h_hi)) {
      const double len = e.h_hi - e.h_lo;
      for (double c : {0.32, 0.68}) {
        bases.push_back({"bump" + std::to_string(e.id) + "_" + std::to_string(bases.size()), bump(e.id, e.h_lo + c * len, 0.24 * len)});
      }
    } else {
      const std::array<std::pair<double, double>, 4> spots{{{0.35, 0.3}, {0.95, 0.4}, {1.75, 0.6}, {2.75, 0.8}}};
      for (const auto& [c, w] : spots) {
        bases.push_back({"bump" + std::to_string(e.id) + "_" + std::to_string(bases.size()), bump(e.id, e.h_lo + c, w)});
      }
    }
  }
  std::vector<GraphTestFunction> out;
  if (spec.size == 0) return out;
  out.push_back(GraphTestFunction::from_profile(g, cap, spec.h_max, spec.knots, [](int, double) { return Jet{1.0, 0.0, 0.0}; },
                                                "const"));
  for (const auto& b : bases) {
    if (out.size() >= spec.size) break;
    const auto base = GraphTestFunction::from_profile(g, cap, spec.h_max, spec.knots, b.f, b.name);
    for (double s : {1.0, -1.0, 0.1, -0.1}) {
      if (out.size() >= spec.size) break;
      auto member = base.scaled(s);
      out.push_back(member);
    }
  }
  return out;
}

/// Label of a family member, e.g. "-0.1*sin3".
inline std::string member_label(const GraphTestFunction& f) {
  if (f.factor() == 1.0) return f.name();
  std::string s = f.factor() < 0.0 ? "-" : "+";
  const double a = std::abs(f.factor());
  if (a != 1.0) s += (a == 0.1 ? "0.1" : std::to_string(a)) + std::string("*");
  return s + f.name();
}

// ---------------------------------------------------------------------------
// Inequality chain
// ---------------------------------------------------------------------------

struct DualityRow {
  std::string label;
  DualValue full;
  DualValue hat_eps;
  double substitution_error = 0.0;
};

struct DualitySweep {
  double epsilon = 0.0;
  std::vector<DualityRow> rows;
  double sup_full = -kInf;
  double sup_full_std_error = 0.0;
  double sup_hat_eps = -kInf;
  double sup_hat_eps_std_error = 0.0;
  double max_substitution_error = 0.0;
  /// sup J_full >= sup J_hat_eps - substitution error - 3 SE.
  bool chain_holds = true;
};

struct DualityReport {
  std::vector<DualitySweep> sweeps;
  std::vector<std::string> labels;
  std::vector<DualValue> hat_zero;
  double sup_hat_zero = -kInf;
  double tolerance = 0.0;
  /// sup J_hat_zero(limit) <= max over eps of sup J_hat_eps + tolerance.
  bool liminf_holds = true;
  std::vector<std::string> warnings;
};

struct ChainInput {
  double epsilon = 0.0;
  const EnsemblePath* ensemble = nullptr;
};

/// Evaluates every family member on each epsilon ensemble (full and
/// coarse-grained functionals) and on the limit path.
inline DualityReport inequality_chain_report(const std::vector<ChainInput>& inputs, const GraphMeasurePath& limit,
                                             const CoefficientSet& c, const Potential& v,
                                             const std::vector<GraphTestFunction>& family, double tolerance) {
  DualityReport rep;
  rep.tolerance = tolerance;
  if (family.empty()) {
    rep.warnings.push_back("empty test family: all suprema are -inf");
    for (const auto& in : inputs) {
      DualitySweep sw;
      sw.epsilon = in.epsilon;
      rep.sweeps.push_back(sw);
    }
    return rep;
  }
  for (const auto& f : family) rep.labels.push_back(member_label(f));
  const auto& g = c.graph;
  double best_proxy = -kInf;
  for (const auto& in : inputs) {
    DualitySweep sw;
    sw.epsilon = in.epsilon;
    const auto pushed = pushforward(*in.ensemble, g, v);
    double max_se = 0.0;
    for (std::size_t m = 0; m < family.size(); ++m) {
      DualityRow row;
      row.label = rep.labels[m];
      row.full = j_full(*in.ensemble, g, v, family[m], in.epsilon);
      row.hat_eps = j_hat_eps(pushed, c, family[m]);
      row.substitution_error = std::abs(row.full.value - row.hat_eps.value);
      if (row.full.value > sw.sup_full) {
        sw.sup_full = row.full.value;
        sw.sup_full_std_error = row.full.std_error;
      }
      if (row.hat_eps.value > sw.sup_hat_eps) {
        sw.sup_hat_eps = row.hat_eps.value;
        sw.sup_hat_eps_std_error = row.hat_eps.std_error;
      }
      sw.max_substitution_error = std::max(sw.max_substitution_error, row.substitution_error);
      max_se = std::max(max_se, row.full.std_error);
      sw.rows.push_back(std::move(row));
    }
    sw.chain_holds = sw.sup_full >= sw.sup_hat_eps - sw.max_substitution_error - 3.0 * max_se;
    best_proxy = std::max(best_proxy, sw.sup_hat_eps);
    rep.sweeps.push_back(std::move(sw));
  }
  for (const auto& f : family) {
    rep.hat_zero.push_back(j_hat_zero(limit, c, f));
    rep.sup_hat_zero = std::max(rep.sup_hat_zero, rep.hat_zero.back().value);
  }
  if (!inputs.empty()) rep.liminf_holds = rep.sup_hat_zero <= best_proxy + tolerance;
  return rep;
}

}  // namespace levelcg
