#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "trunc_ellipse/error.hpp"

namespace trunc_ellipse {

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
/// C1 everywhere and monotone on every interval where the data are.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;

  MonotoneCubic(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
      throw DomainError("MonotoneCubic: need at least two knots of matching size");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1])) throw DomainError("MonotoneCubic: knots must be strictly increasing");

    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
      delta[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);

    d_.assign(n, 0.0);
    d_[0] = delta[0];
    d_[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) {
        d_[i] = 0.0;
      } else {
        // weighted harmonic mean (Fritsch-Butland form)
        const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
        const double w1 = 2.0 * h1 + h0, w2 = h1 + 2.0 * h0;
        d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
    // keep end slopes inside the monotone region
    for (std::size_t e : {std::size_t{0}, n - 1}) {
      const double del = delta[e == 0 ? 0 : n - 2];
      if (d_[e] * del <= 0.0) d_[e] = 0.0;
      else if (std::abs(d_[e]) > 3.0 * std::abs(del)) d_[e] = 3.0 * del;
    }
  }

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }

  /// Value at t; clamps to the end values outside the knot range.
  double operator()(double t) const {
    if (t <= x_.front()) return y_.front();
    if (t >= x_.back()) return y_.back();
    const std::size_t i = segment(t);
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y_[i] + (s3 - 2 * s2 + s) * h * d_[i] +
           (-2 * s3 + 3 * s2) * y_[i + 1] + (s3 - s2) * h * d_[i + 1];
  }

  /// First derivative at t; zero outside the knot range.
  double derivative(double t) const {
    if (t < x_.front() || t > x_.back()) return 0.0;
    const std::size_t i = std::min(segment(t), x_.size() - 2);
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * y_[i] + (-6 * s2 + 6 * s) * y_[i + 1]) / h +
           (3 * s2 - 4 * s + 1) * d_[i] + (3 * s2 - 2 * s) * d_[i + 1];
  }

 private:
  std::size_t segment(double t) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - x_.begin() - 1, 0));
  }

  std::vector<double> x_, y_, d_;
};

}  // namespace trunc_ellipse
