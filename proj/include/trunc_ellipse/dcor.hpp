#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/model.hpp"
#include "trunc_ellipse/rng.hpp"

namespace trunc_ellipse {

struct DcorResult {
  double dcov2 = 0.0;  // squared sample distance covariance (V-statistic)
  double dcor = 0.0;   // distance correlation in [0, 1]
  double p_value = 1.0;
  int n_permutations = 0;
};

/// Squared distance covariance and variances by the O(n^2) definition:
/// double-centred distance matrices A, B and dCov^2 = mean(A .* B).
inline DcorResult distance_correlation_naive(const Matrix& x, const Matrix& y) {
  const Eigen::Index n = x.rows();
  if (y.rows() != n || n < 2) throw DomainError("distance_correlation: samples must have equal size >= 2");
  auto centred = [n](const Matrix& z) {
    Matrix d(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (z.row(i) - z.row(j)).norm();
    const Vector row = d.rowwise().mean();
    const double all = row.mean();
    d.colwise() -= row;
    d.rowwise() -= row.transpose();
    d.array() += all;
    return d;
  };
  const Matrix a = centred(x), b = centred(y);
  const double nn = static_cast<double>(n) * n;
  DcorResult r;
  r.dcov2 = (a.array() * b.array()).sum() / nn;
  const double vx = a.squaredNorm() / nn, vy = b.squaredNorm() / nn;
  r.dcor = vx > 0.0 && vy > 0.0 ? std::sqrt(std::max(r.dcov2, 0.0) / std::sqrt(vx * vy)) : 0.0;
  return r;
}

namespace detail {

class Fenwick4 {
 public:
  explicit Fenwick4(std::size_t n) : t_(n + 1) {}
  void clear() { std::fill(t_.begin(), t_.end(), Node{}); }
  void add(std::size_t i, double x, double y) {
    for (++i; i < t_.size(); i += i & (~i + 1)) {
      t_[i].c += 1.0;
      t_[i].x += x;
      t_[i].y += y;
      t_[i].xy += x * y;
    }
  }
  struct Node {
    double c = 0.0, x = 0.0, y = 0.0, xy = 0.0;
  };
  /// Sums over inserted entries with index < i.
  Node prefix(std::size_t i) const {
    Node s;
    for (; i > 0; i -= i & (~i + 1)) {
      s.c += t_[i].c;
      s.x += t_[i].x;
      s.y += t_[i].y;
      s.xy += t_[i].xy;
    }
    return s;
  }

 private:
  std::vector<Node> t_;
};

/// Row sums of |z_i - z_j| for every i, by sorting and prefix sums.
inline std::vector<double> abs_row_sums(const std::vector<double>& z) {
  const std::size_t n = z.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
  const double total = std::accumulate(z.begin(), z.end(), 0.0);
  std::vector<double> out(n);
  double before = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = z[idx[k]];
    const double after = total - before - v;
    out[idx[k]] = v * k - before + after - v * (n - 1 - k);
    before += v;
  }
  return out;
}

/// O(n log n) squared distance covariance of two univariate samples.
/// Precomputes the x ordering and y ranks so permutations of y are cheap.
class UnivariateDcov {
 public:
  UnivariateDcov(std::vector<double> x, std::vector<double> y)
      : n_(x.size()), x_(std::move(x)), y_(std::move(y)), tree_(n_) {
    if (y_.size() != n_ || n_ < 2) throw DomainError("distance_correlation: samples must have equal size >= 2");
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0);
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return x_[a] < x_[b]; });
    std::vector<std::size_t> by_y(n_);
    std::iota(by_y.begin(), by_y.end(), 0);
    std::sort(by_y.begin(), by_y.end(), [&](std::size_t a, std::size_t b) { return y_[a] < y_[b]; });
    y_rank_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) y_rank_[by_y[k]] = k;
    a_row_ = abs_row_sums(x_);
    b_row_ = abs_row_sums(y_);
    a_all_ = std::accumulate(a_row_.begin(), a_row_.end(), 0.0);
    b_all_ = std::accumulate(b_row_.begin(), b_row_.end(), 0.0);
  }

  std::size_t size() const { return n_; }

  /// dCov^2 with y replaced by y[perm[i]] (identity when perm is empty).
  double dcov2(const std::vector<std::size_t>& perm = {}) {
    auto yi = [&](std::size_t i) { return perm.empty() ? i : perm[i]; };
    // sum_{i,j} |x_i - x_j| |y_i - y_j|, each unordered pair visited once in x order
    tree_.clear();
    Fenwick4::Node all;
    double cross = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t i = order_[k];
      const std::size_t j = yi(i);
      const double xv = x_[i], yv = y_[j];
      const Fenwick4::Node lo = tree_.prefix(y_rank_[j]);
      const double t_lo = xv * yv * lo.c - xv * lo.y - yv * lo.x + lo.xy;
      const double t_all = xv * yv * all.c - xv * all.y - yv * all.x + all.xy;
      cross += 2.0 * t_lo - t_all;
      tree_.add(y_rank_[j], xv, yv);
      all.c += 1.0;
      all.x += xv;
      all.y += yv;
      all.xy += xv * yv;
    }
    cross *= 2.0;
    double ab_rows = 0.0;
    for (std::size_t i = 0; i < n_; ++i) ab_rows += a_row_[i] * b_row_[yi(i)];
    const double n = static_cast<double>(n_);
    return cross / (n * n) - 2.0 * ab_rows / (n * n * n) + a_all_ * b_all_ / (n * n * n * n);
  }

  double dvar2_x() { return self_dcov2(x_, a_row_, a_all_); }
  double dvar2_y() { return self_dcov2(y_, b_row_, b_all_); }

 private:
  double self_dcov2(const std::vector<double>& z, const std::vector<double>& row, double all) const {
    // sum_{i,j} (z_i - z_j)^2 = 2 n sum z^2 - 2 (sum z)^2
    const double n = static_cast<double>(n_);
    double s = 0.0, s2 = 0.0, rr = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      s += z[i];
      s2 += z[i] * z[i];
      rr += row[i] * row[i];
    }
    const double sq = 2.0 * n * s2 - 2.0 * s * s;
    return sq / (n * n) - 2.0 * rr / (n * n * n) + all * all / (n * n * n * n);
  }

  std::size_t n_;
  std::vector<double> x_, y_;
  std::vector<std::size_t> order_, y_rank_;
  std::vector<double> a_row_, b_row_;
  double a_all_ = 0.0, b_all_ = 0.0;
  Fenwick4 tree_;
};

inline void shuffle(std::vector<std::size_t>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace detail

/// Distance correlation of x and y with a permutation p-value
/// (1 + #{permuted dCov^2 >= observed}) / (1 + n_permutations).
/// Univariate pairs use the O(n log n) algorithm; otherwise the O(n^2) matrices.
inline DcorResult dcor_test(const Matrix& x, const Matrix& y, int n_permutations, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  if (y.rows() != n || n < 2) throw DomainError("distance_correlation: samples must have equal size >= 2");
  if (n_permutations < 0) throw DomainError("distance_correlation: n_permutations must be >= 0");
  CounterRng rng(seed, 0x64636f72ULL);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  DcorResult r;
  r.n_permutations = n_permutations;
  int exceed = 0;
  if (x.cols() == 1 && y.cols() == 1) {
    detail::UnivariateDcov d(std::vector<double>(x.data(), x.data() + n), std::vector<double>(y.data(), y.data() + n));
    r.dcov2 = d.dcov2();
    const double vx = d.dvar2_x(), vy = d.dvar2_y();
    r.dcor = vx > 0.0 && vy > 0.0 ? std::sqrt(std::max(r.dcov2, 0.0) / std::sqrt(vx * vy)) : 0.0;
    const double tol = 1e-12 * std::sqrt(std::max(vx * vy, 0.0));
    for (int k = 0; k < n_permutations; ++k) {
      detail::shuffle(perm, rng);
      if (d.dcov2(perm) >= r.dcov2 - tol) ++exceed;
    }
  } else {
    auto centred = [n](const Matrix& z) {
      Matrix dm(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) dm(i, j) = (z.row(i) - z.row(j)).norm();
      const Vector row = dm.rowwise().mean();
      const double all = row.mean();
      dm.colwise() -= row;
      dm.rowwise() -= row.transpose();
      dm.array() += all;
      return dm;
    };
    const Matrix a = centred(x), b = centred(y);
    const double nn = static_cast<double>(n) * n;
    r.dcov2 = (a.array() * b.array()).sum() / nn;
    const double vx = a.squaredNorm() / nn, vy = b.squaredNorm() / nn;
    r.dcor = vx > 0.0 && vy > 0.0 ? std::sqrt(std::max(r.dcov2, 0.0) / std::sqrt(vx * vy)) : 0.0;
    const double tol = 1e-12 * std::sqrt(std::max(vx * vy, 0.0));
    for (int k = 0; k < n_permutations; ++k) {
      detail::shuffle(perm, rng);
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto pj = static_cast<Eigen::Index>(perm[j]);
        for (Eigen::Index i = 0; i < n; ++i) s += a(i, j) * b(static_cast<Eigen::Index>(perm[i]), pj);
      }
      if (s / nn >= r.dcov2 - tol) ++exceed;
    }
  }
  r.p_value = (1.0 + exceed) / (1.0 + n_permutations);
  return r;
}

}  // namespace trunc_ellipse
