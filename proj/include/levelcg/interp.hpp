#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "levelcg/errors.hpp"

namespace levelcg {

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes with
/// the weighted harmonic mean of Fritsch-Butland). Monotone data give a
/// monotone interpolant. Queries are clamped to the node range.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;

  MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw Error(ErrorCode::InvalidArgument, "interpolant needs >= 2 matching nodes");
    for (std::size_t i = 1; i < n; ++i) {
      if (!(x_[i] > x_[i - 1])) throw Error(ErrorCode::InvalidArgument, "interpolation nodes must increase");
    }
    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    d_.assign(n, 0.0);
    if (n == 2) {
      d_[0] = d_[1] = delta[0];
      return;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double h0 = x_[k] - x_[k - 1];
      const double h1 = x_[k + 1] - x_[k];
      const double d0 = delta[k - 1];
      const double d1 = delta[k];
      if (d0 * d1 <= 0.0) {
        d_[k] = 0.0;
      } else {
        const double w1 = 2.0 * h1 + h0;
        const double w2 = h1 + 2.0 * h0;
        d_[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
      }
    }
    d_[0] = end_slope(x_[1] - x_[0], x_[2] - x_[1], delta[0], delta[1]);
    d_[n - 1] = end_slope(x_[n - 1] - x_[n - 2], x_[n - 2] - x_[n - 3], delta[n - 2], delta[n - 3]);
  }

  double operator()(double xq) const {
    const auto [i, t, h] = locate(xq);
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * d_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
           (t3 - t2) * h * d_[i + 1];
  }

  double derivative(double xq) const {
    const auto [i, t, h] = locate(xq);
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * y_[i] + (6 * t - 6 * t2) * y_[i + 1]) / h + (3 * t2 - 4 * t + 1) * d_[i] +
           (3 * t2 - 2 * t) * d_[i + 1];
  }

  double x_min() const noexcept { return x_.front(); }
  double x_max() const noexcept { return x_.back(); }

 private:
  struct Where {
    std::size_t i;
    double t;
    double h;
  };

  Where locate(double xq) const {
    xq = std::clamp(xq, x_.front(), x_.back());
    auto it = std::upper_bound(x_.begin(), x_.end(), xq);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    if (i >= x_.size() - 1) i = x_.size() - 2;
    const double h = x_[i + 1] - x_[i];
    return {i, (xq - x_[i]) / h, h};
  }

  // Three-point end formula, limited to preserve monotonicity.
  static double end_slope(double h0, double h1, double d0, double d1) {
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0.0) return 0.0;
    if (d0 * d1 <= 0.0 && std::abs(d) > std::abs(3.0 * d0)) return 3.0 * d0;
    return d;
  }

  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> d_;
};

}  // namespace levelcg
