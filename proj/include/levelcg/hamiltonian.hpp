#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "levelcg/errors.hpp"

namespace levelcg {

/// Polynomial potential V(q) = sum_i c_i q^i, coefficients stored low-to-high.
///
/// The checked constructor enforces confinement (even degree, positive leading
/// coefficient). `Potential::unchecked` skips that test and exists for
/// diagnostics on non-confining polynomials.
class Potential {
 public:
  explicit Potential(std::vector<double> coefficients) : coeffs_(std::move(coefficients)) {
    normalize();
    if (!is_confining()) {
      throw Error(ErrorCode::InvalidPotential,
                  "potential must have even degree >= 2 and a positive leading coefficient, got " +
                      describe());
    }
  }

  static Potential unchecked(std::vector<double> coefficients) {
    Potential v;
    v.coeffs_ = std::move(coefficients);
    v.normalize();
    return v;
  }

  /// V(q) = (q^2 - 1)^2 / 4
  static Potential double_well() { return Potential({0.25, 0.0, -0.5, 0.0, 0.25}); }
  /// V(q) = k q^2 / 2
  static Potential harmonic(double k = 1.0) { return Potential({0.0, 0.0, 0.5 * k}); }

  Potential shifted(double offset) const {
    auto c = coeffs_;
    c[0] += offset;
    return Potential(std::move(c));
  }

  std::span<const double> coefficients() const noexcept { return coeffs_; }
  std::size_t degree() const noexcept { return coeffs_.size() - 1; }

  bool is_confining() const noexcept {
    const auto d = degree();
    return d >= 2 && d % 2 == 0 && coeffs_.back() > 0.0;
  }

  double value(double q) const noexcept {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * q + *it;
    return acc;
  }

  double gradient(double q) const noexcept {
    double acc = 0.0;
    for (std::size_t i = coeffs_.size() - 1; i >= 1; --i) acc = acc * q + static_cast<double>(i) * coeffs_[i];
    return acc;
  }

  double curvature(double q) const noexcept {
    double acc = 0.0;
    for (std::size_t i = coeffs_.size() - 1; i >= 2; --i) {
      acc = acc * q + static_cast<double>(i * (i - 1)) * coeffs_[i];
    }
    return acc;
  }

  std::string describe() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < coeffs_.size(); ++i) os << (i ? ", " : "") << coeffs_[i];
    os << ']';
    return os.str();
  }

 private:
  Potential() = default;

  void normalize() {
    for (double c : coeffs_) {
      if (!std::isfinite(c)) throw Error(ErrorCode::InvalidPotential, "non-finite coefficient");
    }
    while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
    if (coeffs_.empty()) coeffs_.push_back(0.0);
  }

  std::vector<double> coeffs_;
};

struct PhasePoint {
  double q = 0.0;
  double p = 0.0;

  friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

enum class CriticalKind { minimum, maximum };

struct CriticalPoint {
  double q = 0.0;
  double value = 0.0;
  CriticalKind kind = CriticalKind::minimum;
};

/// Scan window and tolerances used to bracket the roots of V'.
struct RootScan {
  double lo = -10.0;
  double hi = 10.0;
  std::size_t cells = 10000;
  double tolerance = 1e-12;
  double degenerate_tolerance = 1e-8;
};

inline double eval_potential(const Potential& v, double q) { return v.value(q); }
inline double grad_potential(const Potential& v, double q) { return v.gradient(q); }

inline double hamiltonian(const Potential& v, const PhasePoint& x) { return 0.5 * x.p * x.p + v.value(x.q); }

namespace detail {

/// Bisection on a sign change of f over [a, b]; runs until the bracket is
/// narrower than `tol` or stops shrinking in floating point.
template <class F>
double bisect(F&& f, double a, double b, double tol) {
  double fa = f(a);
  if (fa == 0.0) return a;
  if (f(b) == 0.0) return b;
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b || b - a < tol) return m;
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// All real roots of V' inside the scan window, ascending, classified by the
/// sign of V''.
inline std::vector<CriticalPoint> critical_points(const Potential& v, const RootScan& scan = {}) {
  if (!(scan.hi > scan.lo) || scan.cells == 0) {
    throw Error(ErrorCode::InvalidArgument, "root scan needs hi > lo and cells > 0");
  }
  auto grad = [&v](double q) { return v.gradient(q); };
  const double width = scan.hi - scan.lo;
  auto node = [&](std::size_t k) { return scan.lo + width * static_cast<double>(k) / static_cast<double>(scan.cells); };

  std::vector<double> roots;
  double q_prev = node(0);
  double g_prev = grad(q_prev);
  if (g_prev == 0.0) roots.push_back(q_prev);
  for (std::size_t k = 1; k <= scan.cells; ++k) {
    const double q = node(k);
    const double g = grad(q);
    if (g == 0.0) {
      roots.push_back(q);
    } else if (g_prev != 0.0 && (g < 0.0) != (g_prev < 0.0)) {
      roots.push_back(detail::bisect(grad, q_prev, q, scan.tolerance));
    }
    q_prev = q;
    g_prev = g;
  }
  if (roots.empty()) throw Error(ErrorCode::NoRoots, "V' has no real root in the scan window");

  std::vector<CriticalPoint> out;
  out.reserve(roots.size());
  for (double q : roots) {
    const double c = v.curvature(q);
    if (std::abs(c) < scan.degenerate_tolerance) {
      std::ostringstream os;
      os << "V''(" << q << ") = " << c << " is below the degeneracy tolerance";
      throw Error(ErrorCode::DegenerateCritical, os.str());
    }
    out.push_back({q, v.value(q), c > 0.0 ? CriticalKind::minimum : CriticalKind::maximum});
  }
  return out;
}

}  // namespace levelcg
