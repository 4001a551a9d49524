#pragma once

#include <cmath>
#include <cstddef>

#include "kamp/kstat.hpp"

namespace kamp {

/// Per-radius sums over the weight matrix W(r), W_ij = 1(d_ij <= r) e_ij:
///   r0 = sum_{i!=j} W_ij          r1 = sum_{i!=j} W_ij^2
///   r2 = sum_i w_i^2 - r1         r3 = r0^2 - 2 r1 - 4 r2
/// with w_i the row sums. r2 and r3 equal the distinct-index triple and
/// quadruple sums because W is symmetric.
template <typename Scalar>
struct RStatistics {
  RadiusGrid<Scalar> grid;
  ArrayX<Scalar> r0, r1, r2, r3;
  ArrayX<Scalar> row_sum_sq;         // sum_i w_i(r)^2
  ArrayX<Scalar> centered_sq;        // sum_i (w_i - (n-1) Wbar)^2
  ArrayX<Scalar> centered_abs_cube;  // sum_i |w_i - (n-1) Wbar|^3
  // Cumulative row sums w_i(r), one column per point. Empty when the
  // accumulation ran in radius blocks to bound memory.
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> row_sums;
  Index n_s{0};
  Scalar area{0};
  EdgeCorrection correction{EdgeCorrection::Translation};
};

/// Streams the pairs within the largest radius once per radius block. Row sums
/// are held for at most `max_cells` (radius, point) entries at a time.
template <typename Scalar>
RStatistics<Scalar> accumulate_r_statistics(const PointPattern<Scalar>& pp, const RadiusGrid<Scalar>& grid,
                                            EdgeCorrection corr, std::size_t max_cells = std::size_t{1} << 26) {
  const Index n = pp.size();
  if (n < 2) throw Error(ErrorCode::InsufficientPoints, "R statistics need at least 2 points, found " + std::to_string(n));
  grid.check_window(pp.window);

  const Index G = grid.size();
  const Index block = std::clamp<Index>(static_cast<Index>(max_cells / static_cast<std::size_t>(n)), 1, G);
  const BinLocator<Scalar> bin(grid);
  // Bucket-ordered copy keeps each point's neighbours at nearby indices. The
  // pair visiting sequence is unchanged, so the sums match the unsorted run.
  const std::vector<Index> order = [&] {
    const CellGrid<Scalar> probe(pp.xy, grid.max());
    return std::vector<Index>(probe.order().begin(), probe.order().end());
  }();
  Points<Scalar> xy(n, 2);
  for (Index s = 0; s < n; ++s) xy.row(s) = pp.xy.row(order[static_cast<std::size_t>(s)]);
  const CellGrid<Scalar> cells(xy, grid.max());
  const EdgeWeigher<Scalar> weigh(corr, pp.window);
  const Scalar n_pairs = static_cast<Scalar>(n) * static_cast<Scalar>(n - 1);

  RStatistics<Scalar> rs;
  rs.grid = grid;
  rs.n_s = n;
  rs.area = window_area(pp.window);
  rs.correction = corr;
  rs.row_sum_sq = ArrayX<Scalar>::Zero(G);
  rs.centered_sq = ArrayX<Scalar>::Zero(G);
  rs.centered_abs_cube = ArrayX<Scalar>::Zero(G);

  ArrayX<Scalar> hist0 = ArrayX<Scalar>::Zero(G), hist1 = ArrayX<Scalar>::Zero(G);
  ArrayX<Scalar> mean_weight;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> rows;
  ArrayX<Scalar> base(n);

  for (Index k0 = 0; k0 < G; k0 += block) {
    const Index k1 = std::min(G, k0 + block);
    const bool first = k0 == 0;
    rows.setZero(k1 - k0, n);
    base.setZero();
    Scalar* const rdata = rows.data();
    const Index stride = k1 - k0;
    cells.for_each_pair([&](Index i, Index j, Scalar d) {
      const Index k = bin(d);
      if (k >= G) return;
      const Scalar w = weigh(xy(i, 0) - xy(j, 0), xy(i, 1) - xy(j, 1));
      if (first) {
        hist0[k] += w;
        hist1[k] += w * w;
      }
      if (k < k0) {
        base[i] += w;
        base[j] += w;
      } else if (k < k1) {
        rdata[i * stride + (k - k0)] += w;
        rdata[j * stride + (k - k0)] += w;
      }
    });
    if (first) {
      // Ordered double sums count every unordered pair twice.
      rs.r0 = detail::cumulative<Scalar>(hist0 * Scalar(2));
      rs.r1 = detail::cumulative<Scalar>(hist1 * Scalar(2));
      mean_weight = rs.r0 / n_pairs;
    }
    for (Index i = 0; i < n; ++i) {
      Scalar running = base[i];
      for (Index k = k0; k < k1; ++k) {
        running += rows(k - k0, i);
        rows(k - k0, i) = running;
        rs.row_sum_sq[k] += running * running;
        const Scalar c = std::abs(running - static_cast<Scalar>(n - 1) * mean_weight[k]);
        rs.centered_sq[k] += c * c;
        rs.centered_abs_cube[k] += c * c * c;
      }
    }
    if (k0 == 0 && k1 == G) {
      rs.row_sums.resize(G, n);
      for (Index s = 0; s < n; ++s) rs.row_sums.col(order[static_cast<std::size_t>(s)]) = rows.col(s);
    }
  }

  rs.r2 = rs.row_sum_sq - rs.r1;
  rs.r3 = rs.r0.square() - Scalar(2) * rs.r1 - Scalar(4) * rs.r2;
  return rs;
}

/// Permutation-null mean of K, shared by univariate and bivariate queries.
/// Equals univariate K computed with every point marked.
template <typename Scalar>
ArrayX<Scalar> expectation_k(const RStatistics<Scalar>& rs) {
  if (rs.n_s < 2) throw Error(ErrorCode::InsufficientPoints, "expectation needs at least 2 points");
  const Scalar n = static_cast<Scalar>(rs.n_s);
  return rs.r0 * (rs.area / (n * (n - 1)));
}

template <typename Scalar>
struct Variance {
  ArrayX<Scalar> values;
  Eigen::Array<bool, Eigen::Dynamic, 1> clamped;  // tiny negative rounding set to 0
};

namespace detail {

// Relative size of a negative variance (against E^2) that is treated as
// rounding and clamped rather than reported as an inconsistency.
inline constexpr double kVarianceClampTolerance = 1e-9;

template <typename Scalar>
Variance<Scalar> finish_variance(ArrayX<Scalar> var, const ArrayX<Scalar>& expectation) {
  Variance<Scalar> out{std::move(var), Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(expectation.size(), false)};
  for (Index k = 0; k < out.values.size(); ++k) {
    Scalar& v = out.values[k];
    if (v >= 0) continue;
    const Scalar scale = expectation[k] * expectation[k];
    if (-v <= Scalar(kVarianceClampTolerance) * scale) {
      v = 0;
      out.clamped[k] = true;
    } else {
      throw Error(ErrorCode::InternalConsistency,
                  "negative permutation variance " + std::to_string(v) + " at radius index " + std::to_string(k));
    }
  }
  return out;
}

// Exact integer difference used by the R0^2 coefficient; 128-bit keeps it
// exact for any realistic point count.
inline long double exact_difference(__int128 a, __int128 b) { return static_cast<long double>(a - b); }

}  // namespace detail

/// Permutation-null variance of univariate K when `m` of the points carry the mark.
template <typename Scalar>
Variance<Scalar> variance_k_univariate(const RStatistics<Scalar>& rs, Index m) {
  const Index n = rs.n_s;
  if (m < 2) throw Error(ErrorCode::InsufficientPoints, "univariate variance needs m >= 2, got " + std::to_string(m));
  if (m > n) throw Error(ErrorCode::InvalidArgument, "mark count exceeds point count");
  const ArrayX<Scalar> e = expectation_k(rs);
  const Scalar N = static_cast<Scalar>(n), M = static_cast<Scalar>(m);
  const Scalar c = rs.area / (M * (M - 1));
  const Scalar f1 = M * (M - 1) / (N * (N - 1));
  const Scalar f2 = n >= 3 ? f1 * (M - 2) / (N - 2) : Scalar(0);

  if (m == n) return detail::finish_variance<Scalar>(ArrayX<Scalar>::Zero(rs.grid.size()), e);
  if (n < 4) {
    // No four distinct indices exist; r3 vanishes identically.
    ArrayX<Scalar> v = c * c * (Scalar(2) * rs.r1 * f1 + Scalar(4) * rs.r2 * f2) - e.square();
    return detail::finish_variance(std::move(v), e);
  }
  const Scalar f3 = f2 * (M - 3) / (N - 3);
  // c^2 {2 r1 f1 + 4 r2 f2 + r3 f3} - E^2 with r3 = r0^2 - 2 r1 - 4 r2 substituted;
  // the r0^2 coefficient c^2 f3 - (|A|/(n(n-1)))^2 is formed from an exact integer numerator.
  using I = __int128;
  const long double num = detail::exact_difference(I(m - 2) * (m - 3) * n * (n - 1), I(m) * (m - 1) * (n - 2) * (n - 3));
  const Scalar e_scale = rs.area / (N * (N - 1));
  const Scalar r0_coef =
      e_scale * e_scale * static_cast<Scalar>(num / (static_cast<long double>(M * (M - 1)) * (N - 2) * (N - 3)));
  ArrayX<Scalar> v = c * c * (Scalar(2) * rs.r1 * (f1 - f3) + Scalar(4) * rs.r2 * (f2 - f3)) + r0_coef * rs.r0.square();
  return detail::finish_variance(std::move(v), e);
}

/// Permutation-null variance of bivariate K with `m1` and `m2` points of the two marks.
template <typename Scalar>
Variance<Scalar> variance_k_bivariate(const RStatistics<Scalar>& rs, Index m1, Index m2) {
  const Index n = rs.n_s;
  if (m1 < 1 || m2 < 1) throw Error(ErrorCode::InsufficientPoints, "bivariate variance needs m1, m2 >= 1");
  if (m1 + m2 > n) throw Error(ErrorCode::InvalidArgument, "mark counts exceed point count");
  const ArrayX<Scalar> e = expectation_k(rs);
  const Scalar N = static_cast<Scalar>(n), X = static_cast<Scalar>(m1), Y = static_cast<Scalar>(m2);
  const Scalar c = rs.area / (X * Y);
  const Scalar h1 = X * Y / (N * (N - 1));
  const Scalar h2 = n >= 3 ? X * Y * (X + Y - 2) / (N * (N - 1) * (N - 2)) : Scalar(0);

  if (n < 4) {
    ArrayX<Scalar> v = c * c * (rs.r1 * h1 + rs.r2 * h2) - e.square();
    return detail::finish_variance(std::move(v), e);
  }
  const Scalar h3 = X * Y * (X - 1) * (Y - 1) / (N * (N - 1) * (N - 2) * (N - 3));
  using I = __int128;
  const long double num = detail::exact_difference(I(m1 - 1) * (m2 - 1) * n * (n - 1), I(m1) * m2 * (n - 2) * (n - 3));
  const Scalar e_scale = rs.area / (N * (N - 1));
  const Scalar r0_coef =
      e_scale * e_scale * static_cast<Scalar>(num / (static_cast<long double>(X * Y) * (N - 2) * (N - 3)));
  ArrayX<Scalar> v = c * c * (rs.r1 * (h1 - Scalar(2) * h3) + rs.r2 * (h2 - Scalar(4) * h3)) + r0_coef * rs.r0.square();
  return detail::finish_variance(std::move(v), e);
}

template <typename Scalar>
struct MomentPair {
  MarkQuery query;
  ArrayX<Scalar> expectation;
  ArrayX<Scalar> variance;
  Eigen::Array<bool, Eigen::Dynamic, 1> variance_clamped;
};

template <typename Scalar>
MomentPair<Scalar> permutation_moments(const RStatistics<Scalar>& rs, const MarkQuery& q, Index m1, Index m2 = 0) {
  auto var = q.is_bivariate() ? variance_k_bivariate(rs, m1, m2) : variance_k_univariate(rs, m1);
  return {q, expectation_k(rs), std::move(var.values), std::move(var.clamped)};
}

/// Finite-sample proxies for the two conditions behind the normal
/// approximation. Small ratios support it; the report never blocks anything.
template <typename Scalar>
struct ConditionReport {
  ArrayX<Scalar> rho1;  // sum |Wt_i.|^3 / (sum Wt_i.^2)^{3/2}
  ArrayX<Scalar> rho2;  // sum_{i!=j} Wt_ij^2 / sum Wt_i.^2
  Eigen::Array<bool, Eigen::Dynamic, 1> degenerate;
};

template <typename Scalar>
ConditionReport<Scalar> condition_diagnostics(const RStatistics<Scalar>& rs) {
  if (rs.n_s < 2) throw Error(ErrorCode::InsufficientPoints, "diagnostics need at least 2 points");
  const Index G = rs.grid.size();
  const Scalar n_pairs = static_cast<Scalar>(rs.n_s) * static_cast<Scalar>(rs.n_s - 1);
  ConditionReport<Scalar> out{ArrayX<Scalar>::Zero(G), ArrayX<Scalar>::Zero(G),
                              Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(G, false)};
  for (Index k = 0; k < G; ++k) {
    const Scalar s2 = rs.centered_sq[k];
    if (!(s2 > Scalar(1e-12) * rs.row_sum_sq[k])) {
      out.degenerate[k] = true;
      continue;
    }
    // sum over i != j of (W_ij - Wbar)^2, zero entries included.
    const Scalar off = std::max(Scalar(0), rs.r1[k] - rs.r0[k] * rs.r0[k] / n_pairs);
    out.rho1[k] = rs.centered_abs_cube[k] / std::pow(s2, Scalar(1.5));
    out.rho2[k] = off / s2;
  }
  return out;
}

}  // namespace kamp
