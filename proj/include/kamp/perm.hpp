#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "kamp/inference.hpp"

namespace kamp {

/// Uniform random relabeling of fixed locations (Fisher-Yates on the marks).
template <typename Scalar>
PointPattern<Scalar> permute_labels(const PointPattern<Scalar>& pp, std::uint64_t seed) {
  if (pp.size() < 2) throw Error(ErrorCode::InsufficientPoints, "permutation needs at least 2 points");
  PointPattern<Scalar> out = pp;
  Rng rng(seed);
  for (std::size_t i = out.marks.size() - 1; i > 0; --i)
    std::swap(out.marks[i], out.marks[uniform_index(rng, i + 1)]);
  return out;
}

/// Every pair within the largest radius with its edge weight, grouped by
/// radius bin. Geometry is fixed under relabeling, so the table is built once
/// and reused for every permutation.
template <typename Scalar>
struct PairTable {
  std::vector<std::uint32_t> first, second;
  std::vector<Scalar> weight;
  std::vector<std::size_t> bin_start;  // size G + 1
  Index n_s{0};
  Scalar area{0};
  RadiusGrid<Scalar> grid;

  static PairTable build(const PointPattern<Scalar>& pp, const RadiusGrid<Scalar>& grid, EdgeCorrection corr) {
    grid.check_window(pp.window);
    PairTable t;
    t.n_s = pp.size();
    t.area = window_area(pp.window);
    t.grid = grid;
    const Index G = grid.size();
    const BinLocator<Scalar> bin(grid);
    const CellGrid<Scalar> cells(pp.xy, grid.max());
    t.bin_start.assign(static_cast<std::size_t>(G) + 1, 0);
    cells.for_each_pair([&](Index, Index, Scalar d) {
      if (const Index k = bin(d); k < G) ++t.bin_start[static_cast<std::size_t>(k) + 1];
    });
    for (std::size_t k = 1; k < t.bin_start.size(); ++k) t.bin_start[k] += t.bin_start[k - 1];
    const std::size_t total = t.bin_start.back();
    t.first.resize(total);
    t.second.resize(total);
    t.weight.resize(total);
    std::vector<std::size_t> fill(t.bin_start.begin(), t.bin_start.end() - 1);
    const EdgeWeigher<Scalar> weigh(corr, pp.window);
    cells.for_each_pair([&](Index i, Index j, Scalar d) {
      const Index k = bin(d);
      if (k >= G) return;
      const std::size_t at = fill[static_cast<std::size_t>(k)]++;
      t.first[at] = static_cast<std::uint32_t>(i);
      t.second[at] = static_cast<std::uint32_t>(j);
      t.weight[at] = weigh(pp.xy(i, 0) - pp.xy(j, 0), pp.xy(i, 1) - pp.xy(j, 1));
    });
    return t;
  }

  /// K for a labeling given as per-point flags: 1 = first mark, 2 = second
  /// mark, 0 = neither. Univariate when m2 == 0.
  void k_values(std::span<const std::uint8_t> flags, Index m1, Index m2, Eigen::Ref<ArrayX<Scalar>> out) const {
    const Index G = grid.size();
    Scalar acc = 0;
    for (Index k = 0; k < G; ++k) {
      Scalar bin_sum = 0;
      const std::size_t lo = bin_start[static_cast<std::size_t>(k)], hi = bin_start[static_cast<std::size_t>(k) + 1];
      if (m2 == 0) {
        for (std::size_t p = lo; p < hi; ++p)
          if (flags[first[p]] & flags[second[p]]) bin_sum += weight[p];
        acc += Scalar(2) * bin_sum;
      } else {
        for (std::size_t p = lo; p < hi; ++p)
          if ((flags[first[p]] ^ flags[second[p]]) == 3) bin_sum += weight[p];
        acc += bin_sum;
      }
      out[k] = acc;
    }
    const Scalar scale = m2 == 0 ? area / (static_cast<Scalar>(m1) * static_cast<Scalar>(m1 - 1))
                                 : area / (static_cast<Scalar>(m1) * static_cast<Scalar>(m2));
    out *= scale;
  }
};

namespace detail {

template <typename Scalar>
std::vector<std::uint8_t> query_flags(const PointPattern<Scalar>& pp, const MarkQuery& q) {
  const auto c1 = pp.code_of(q.mark1);
  const auto c2 = q.is_bivariate() ? pp.code_of(*q.mark2) : std::nullopt;
  std::vector<std::uint8_t> flags(pp.marks.size(), 0);
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (c1 && pp.marks[i] == *c1) flags[i] = 1;
    else if (c2 && pp.marks[i] == *c2) flags[i] = 2;
  }
  return flags;
}

// Linear interpolation between order statistics.
template <typename Scalar>
Scalar quantile_sorted(std::span<const Scalar> sorted, double prob) {
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const Scalar frac = static_cast<Scalar>(pos - static_cast<double>(lo));
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

template <typename Scalar>
struct PermNullSummary {
  ArrayX<Scalar> mean, variance, q025, q975, p_value;
  Index permutations{0};
  std::uint64_t seed{0};
};

template <typename Scalar>
struct PermNullOutput {
  PermNullSummary<Scalar> summary;
  KampResult<Scalar> result;
};

/// Shuffles the per-point flags in place; the default is seeded Fisher-Yates.
using Permuter = std::function<void(std::span<std::uint8_t>, Rng&)>;

inline void fisher_yates(std::span<std::uint8_t> flags, Rng& rng) {
  for (std::size_t i = flags.size() - 1; i > 0; --i) std::swap(flags[i], flags[uniform_index(rng, i + 1)]);
}

/// Explicit Monte Carlo permutation null with B relabelings.
/// Empirical p-value: (1 + #{K_b >= K_obs}) / (B + 1), per radius.
template <typename Scalar>
PermNullOutput<Scalar> perm_null(const PointPattern<Scalar>& pp, const MarkQuery& q, const RadiusGrid<Scalar>& grid,
                                 EdgeCorrection corr, Index permutations, std::uint64_t seed,
                                 const Permuter& permuter = fisher_yates) {
  if (permutations < 1) throw Error(ErrorCode::InvalidArgument, "permutation count must be at least 1");
  const auto [m1, m2] = detail::query_counts(pp, q);
  if (q.is_bivariate() ? (m1 < 1 || m2 < 1) : m1 < 2)
    throw Error(ErrorCode::InsufficientPoints, "too few marked points for query '" + q.describe() + "'");

  const PairTable<Scalar> table = PairTable<Scalar>::build(pp, grid, corr);
  std::vector<std::uint8_t> flags = detail::query_flags(pp, q);
  const Index G = grid.size();

  ArrayX<Scalar> observed(G);
  table.k_values(flags, m1, m2, observed);

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> draws(G, permutations);
  Eigen::Array<Index, Eigen::Dynamic, 1> exceed = Eigen::Array<Index, Eigen::Dynamic, 1>::Zero(G);
  Rng rng(seed);
  ArrayX<Scalar> kb(G);
  for (Index b = 0; b < permutations; ++b) {
    permuter(flags, rng);
    table.k_values(flags, m1, m2, kb);
    draws.col(b) = kb.matrix();
    exceed += (kb >= observed).template cast<Index>();
  }

  PermNullSummary<Scalar> s;
  s.permutations = permutations;
  s.seed = seed;
  s.mean = draws.rowwise().mean().array();
  s.variance = ArrayX<Scalar>::Zero(G);
  if (permutations > 1)
    s.variance = (draws.colwise() - s.mean.matrix()).array().square().rowwise().sum() / static_cast<Scalar>(permutations - 1);
  s.p_value = (exceed.template cast<Scalar>() + Scalar(1)) / static_cast<Scalar>(permutations + 1);
  s.q025.resize(G);
  s.q975.resize(G);
  std::vector<Scalar> row(static_cast<std::size_t>(permutations));
  for (Index k = 0; k < G; ++k) {
    for (Index b = 0; b < permutations; ++b) row[static_cast<std::size_t>(b)] = draws(k, b);
    std::sort(row.begin(), row.end());
    s.q025[k] = detail::quantile_sorted<Scalar>(row, 0.025);
    s.q975[k] = detail::quantile_sorted<Scalar>(row, 0.975);
  }

  KampResult<Scalar> r;
  r.method = Method::Perm;
  r.query = q;
  r.grid = grid;
  r.k_hat = observed;
  r.expectation = s.mean;
  r.variance = s.variance;
  r.k_tilde = r.k_hat - r.expectation;
  r.variance_defined = Mask::Constant(G, true);
  r.variance_clamped = Mask::Constant(G, false);
  r.z = ArrayX<Scalar>::Zero(G);
  r.z_defined = Mask::Constant(G, false);
  for (Index k = 0; k < G; ++k) {
    if (s.variance[k] > 0) {
      r.z[k] = (r.k_hat[k] - s.mean[k]) / std::sqrt(s.variance[k]);
      r.z_defined[k] = true;
    }
  }
  r.p_value = s.p_value;
  r.p_defined = Mask::Constant(G, true);
  r.n_s = pp.size();
  r.m1 = m1;
  r.m2 = m2;
  r.seed = seed;
  return {std::move(s), std::move(r)};
}

struct ExactMoments {
  double mean{0};
  double variance{0};
  std::uint64_t assignments{0};
};

namespace detail {

// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum{0}, carry{0};
  void add(double x) {
    const double t = sum + x;
    carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace detail

/// Mean and variance of K at radius r over every distinct label assignment
/// with the pattern's mark counts. Brute force; n must be at most 10.
template <typename Scalar>
ExactMoments exact_moments_small(const PointPattern<Scalar>& pp, const MarkQuery& q, Scalar r, EdgeCorrection corr) {
  const Index n = pp.size();
  if (n > 10) throw Error(ErrorCode::TooLarge, "exact enumeration supports at most 10 points, got " + std::to_string(n));
  const auto [m1, m2] = detail::query_counts(pp, q);
  if (q.is_bivariate() ? (m1 < 1 || m2 < 1) : m1 < 2)
    throw Error(ErrorCode::InsufficientPoints, "too few marked points for query '" + q.describe() + "'");

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = pp.xy(i, 0) - pp.xy(j, 0), dy = pp.xy(i, 1) - pp.xy(j, 1);
      if (std::sqrt(dx * dx + dy * dy) <= r)
        w(i, j) = corr == EdgeCorrection::None ? 1.0 : translation_weight(pp.xy.row(i), pp.xy.row(j), pp.window);
    }
  }
  const double area = window_area(pp.window);
  const unsigned full = 1u << n;

  std::vector<double> values;
  auto k_between = [&](unsigned a, unsigned b) {
    double s = 0;
    for (Index i = 0; i < n; ++i)
      if (a >> i & 1u)
        for (Index j = 0; j < n; ++j)
          if (j != i && (b >> j & 1u)) s += w(i, j);
    return s;
  };
  for (unsigned s1 = 0; s1 < full; ++s1) {
    if (std::popcount(s1) != m1) continue;
    if (!q.is_bivariate()) {
      values.push_back(area / (double(m1) * double(m1 - 1)) * k_between(s1, s1));
      continue;
    }
    for (unsigned s2 = 0; s2 < full; ++s2) {
      if ((s2 & s1) || std::popcount(s2) != m2) continue;
      values.push_back(area / (double(m1) * double(m2)) * k_between(s1, s2));
    }
  }
  detail::CompensatedSum total, dev;
  for (double v : values) total.add(v);
  const double mean = total.value() / static_cast<double>(values.size());
  for (double v : values) dev.add((v - mean) * (v - mean));
  return {mean, dev.value() / static_cast<double>(values.size()), values.size()};
}

}  // namespace kamp
