#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "levelcg/errors.hpp"
#include "levelcg/hamiltonian.hpp"
#include "levelcg/levelset.hpp"
#include "levelcg/parallel.hpp"
#include "levelcg/rng.hpp"

namespace levelcg {

/// Default inner leapfrog resolution: the inner step is at most
/// epsilon / kDefaultInnerPerEpsilon, which keeps the noise-free energy error
/// below 1e-6 for H up to about 3.
inline constexpr double kDefaultInnerPerEpsilon = 2048.0;
/// Coarsest admissible inner step, epsilon / kMinInnerPerEpsilon.
inline constexpr double kMinInnerPerEpsilon = 8.0;

struct SdeConfig {
  double epsilon = 0.1;
  double dt = 1e-3;
  /// 0 selects ceil(2048 dt / epsilon).
  std::size_t inner_substeps = 0;
  double t_final = 1.0;
  PhasePoint x0{1.2, 0.0};
  std::uint64_t base_seed = 20240611;
  std::size_t n = 1;
  double escape_bound = 1e3;
  /// Switches the Wiener forcing off (deterministic Hamiltonian flow).
  bool noise = true;
  unsigned threads = 0;

  std::size_t substeps() const {
    if (inner_substeps > 0) return inner_substeps;
    return static_cast<std::size_t>(std::ceil(kDefaultInnerPerEpsilon * dt / epsilon - 1e-9));
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_final / dt)); }

  void validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
      throw Error(ErrorCode::InvalidArgument, "sde." + field + ": " + why);
    };
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail("epsilon", "must be > 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt", "must be > 0");
    if (!(t_final > 0.0) || !std::isfinite(t_final)) fail("t_final", "must be > 0");
    if (n < 1) fail("n", "must be >= 1");
    if (!std::isfinite(x0.q) || !std::isfinite(x0.p)) fail("x0", "must be finite");
    if (!(escape_bound > 0.0)) fail("escape_bound", "must be > 0");
    const double k = t_final / dt;
    if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) fail("t_final", "must be a multiple of dt");
    if (dt / static_cast<double>(substeps()) > epsilon / kMinInnerPerEpsilon * (1.0 + 1e-12)) {
      fail("inner_substeps", "inner step dt/inner_substeps must not exceed epsilon/8");
    }
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<PhasePoint> states;
};

/// Snapshot atoms of n i.i.d. trajectories: states[k][i] is trajectory i at
/// times[k].
struct EnsemblePath {
  std::vector<double> times;
  std::vector<std::vector<PhasePoint>> states;
  SdeConfig config;

  std::size_t size() const noexcept { return states.empty() ? 0 : states.front().size(); }
};

namespace detail {

/// One outer step: noise half-kick, inner position-Verlet sweep of the
/// Hamiltonian flow at speed 1/epsilon, noise half-kick.
class SplittingStepper {
 public:
  SplittingStepper(const Potential& v, const SdeConfig& cfg)
      : v_(v),
        kick_(cfg.noise ? std::sqrt(cfg.dt) : 0.0),
        substeps_(cfg.substeps()),
        tau_(cfg.dt / static_cast<double>(cfg.substeps()) / cfg.epsilon),
        noise_(cfg.noise) {}

  void operator()(PhasePoint& x, RandomStream& rng) const {
    if (noise_) x.p += kick_ * rng.normal();
    const double half = 0.5 * tau_;
    for (std::size_t s = 0; s < substeps_; ++s) {
      x.q += half * x.p;
      x.p -= tau_ * v_.gradient(x.q);
      x.q += half * x.p;
    }
    if (noise_) x.p += kick_ * rng.normal();
  }

 private:
  const Potential& v_;
  double kick_;
  std::size_t substeps_;
  double tau_;
  bool noise_;
};

inline void check_escape(const PhasePoint& x, const SdeConfig& cfg, std::size_t index, double t) {
  if (!(std::abs(x.q) <= cfg.escape_bound) || !std::isfinite(x.p)) {
    std::ostringstream os;
    os << "trajectory " << index << " left |q| <= " << cfg.escape_bound << " at t = " << t
       << " (step size too large for epsilon = " << cfg.epsilon << "?)";
    throw Error(ErrorCode::Unstable, os.str());
  }
}

}  // namespace detail

/// Full path of one trajectory, one state per outer step.
inline Trajectory integrate_path(const Potential& v, const SdeConfig& cfg, std::uint64_t trajectory_index) {
  cfg.validate();
  const std::size_t steps = cfg.steps();
  Trajectory out;
  out.times.reserve(steps + 1);
  out.states.reserve(steps + 1);
  RandomStream rng(cfg.base_seed, trajectory_index, StreamDomain::sde);
  const detail::SplittingStepper step(v, cfg);
  PhasePoint x = cfg.x0;
  out.times.push_back(0.0);
  out.states.push_back(x);
  for (std::size_t k = 1; k <= steps; ++k) {
    step(x, rng);
    const double t = static_cast<double>(k) * cfg.dt;
    detail::check_escape(x, cfg, trajectory_index, t);
    out.times.push_back(t);
    out.states.push_back(x);
  }
  return out;
}

/// Uniform snapshot grid 0, spacing, ..., t_final.
inline std::vector<double> snapshot_grid(double t_final, double spacing) {
  const auto m = static_cast<std::size_t>(std::llround(t_final / spacing));
  std::vector<double> t(m + 1);
  for (std::size_t k = 0; k <= m; ++k) t[k] = static_cast<double>(k) * spacing;
  t.back() = t_final;
  return t;
}

/// n independent trajectories recorded at the snapshot times, which must lie
/// on the outer time grid. Trajectory i uses stream (base_seed, i).
inline EnsemblePath simulate_ensemble(const Potential& v, const SdeConfig& cfg, const std::vector<double>& snapshot_times) {
  cfg.validate();
  std::vector<std::size_t> snap_steps;
  snap_steps.reserve(snapshot_times.size());
  for (double t : snapshot_times) {
    const double k = t / cfg.dt;
    const auto kk = static_cast<std::size_t>(std::llround(k));
    if (t < 0.0 || std::abs(k - static_cast<double>(kk)) > 1e-6 || kk > cfg.steps()) {
      throw Error(ErrorCode::InvalidArgument, "snapshot time " + std::to_string(t) + " is not on the outer grid");
    }
    if (!snap_steps.empty() && kk <= snap_steps.back()) {
      throw Error(ErrorCode::InvalidArgument, "snapshot times must increase");
    }
    snap_steps.push_back(kk);
  }
  EnsemblePath path;
  path.times = snapshot_times;
  path.config = cfg;
  path.states.assign(snapshot_times.size(), std::vector<PhasePoint>(cfg.n));
  const detail::SplittingStepper step(v, cfg);
  parallel_for(cfg.n, resolve_threads(cfg.threads), [&](std::size_t i) {
    RandomStream rng(cfg.base_seed, i, StreamDomain::sde);
    PhasePoint x = cfg.x0;
    std::size_t k = 0;
    for (std::size_t s = 0; s < snap_steps.size(); ++s) {
      for (; k < snap_steps[s]; ++k) {
        step(x, rng);
        detail::check_escape(x, cfg, i, static_cast<double>(k + 1) * cfg.dt);
      }
      path.states[s][i] = x;
    }
  });
  return path;
}

struct FigureRow {
  double t = 0.0;
  double q = 0.0;
  double p = 0.0;
  double h = 0.0;
  int edge = 0;
};

/// Trajectory in phase space together with its projection onto the graph.
inline std::vector<FigureRow> emit_figure_data(const Trajectory& traj, const LevelGraph& g, const Potential& v) {
  std::vector<FigureRow> rows;
  rows.reserve(traj.states.size());
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const auto& x = traj.states[k];
    const auto y = project(g, v, x);
    rows.push_back({traj.times[k], x.q, x.p, y.h, y.edge});
  }
  return rows;
}

}  // namespace levelcg
