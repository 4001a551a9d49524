#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "kamp/moments.hpp"
#include "kamp/random.hpp"

namespace kamp {

enum class Method { Kamp, KampLite, Perm, TheoreticalCsr };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Kamp: return "kamp";
    case Method::KampLite: return "kamp_lite";
    case Method::Perm: return "perm";
    case Method::TheoreticalCsr: return "k_theoretical";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  if (s == "kamp") return Method::Kamp;
  if (s == "kamp_lite") return Method::KampLite;
  if (s == "perm") return Method::Perm;
  if (s == "k_theoretical" || s == "theoretical_csr" || s == "k") return Method::TheoreticalCsr;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(s) + "'");
}

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Everything one method reports for one sample and query, per radius.
/// z and p_value entries are meaningful only where the matching mask is set.
template <typename Scalar>
struct KampResult {
  Method method{Method::Kamp};
  MarkQuery query;
  std::string sample_id;
  RadiusGrid<Scalar> grid;
  ArrayX<Scalar> k_hat, expectation, variance, z, p_value, k_tilde;
  Mask variance_defined, z_defined, p_defined, variance_clamped;
  Index n_s{0};   // points in the analysed pattern (after thinning for kamp_lite)
  Index m1{0};
  Index m2{0};
  std::optional<std::uint64_t> seed;
  std::optional<Scalar> thin_prob;
};

/// (k_hat - e) / sqrt(v); nullopt when v == 0.
template <typename Scalar>
std::optional<Scalar> z_statistic(Scalar k_hat, Scalar e, Scalar v) {
  if (v < 0) throw Error(ErrorCode::InvalidArgument, "variance must be non-negative");
  if (v == 0) return std::nullopt;
  return (k_hat - e) / std::sqrt(v);
}

/// 1 - Phi(z).
template <typename Scalar>
Scalar p_value_upper(Scalar z) {
  return Scalar(0.5) * std::erfc(z / std::numbers::sqrt2_v<Scalar>);
}

template <typename Scalar>
ArrayX<Scalar> degree_of_clustering(const KCurve<Scalar>& k_hat, const ArrayX<Scalar>& expectation,
                                    const RadiusGrid<Scalar>& expectation_grid) {
  if (!(k_hat.grid == expectation_grid) || expectation.size() != k_hat.values.size())
    throw Error(ErrorCode::GridMismatch, "K curve and expectation are on different radius grids");
  return k_hat.values - expectation;
}

template <typename Scalar>
struct ThinnedPattern {
  PointPattern<Scalar> pattern;
  bool underpopulated{false};  // fewer than 2 points survived
};

/// Independent retention of each point with probability keep_prob.
template <typename Scalar>
ThinnedPattern<Scalar> thin_pattern(const PointPattern<Scalar>& pp, double keep_prob, std::uint64_t seed) {
  if (!(keep_prob > 0 && keep_prob <= 1))
    throw Error(ErrorCode::InvalidArgument, "keep probability must lie in (0, 1]");
  Rng rng(seed);
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(static_cast<double>(pp.size()) * keep_prob) + 16);
  for (Index i = 0; i < pp.size(); ++i)
    if (uniform01(rng) < keep_prob) keep.push_back(i);
  ThinnedPattern<Scalar> out{pp.subset(keep), false};
  out.underpopulated = out.pattern.size() < 2;
  return out;
}

namespace detail {

template <typename Scalar>
void fill_normal_inference(KampResult<Scalar>& r) {
  const Index G = r.grid.size();
  r.z = ArrayX<Scalar>::Zero(G);
  r.p_value = ArrayX<Scalar>::Zero(G);
  r.z_defined = Mask::Constant(G, false);
  r.p_defined = Mask::Constant(G, false);
  for (Index k = 0; k < G; ++k) {
    if (auto z = z_statistic(r.k_hat[k], r.expectation[k], r.variance[k])) {
      r.z[k] = *z;
      r.p_value[k] = p_value_upper(*z);
      r.z_defined[k] = r.p_defined[k] = true;
    }
  }
}

template <typename Scalar>
std::pair<Index, Index> query_counts(const PointPattern<Scalar>& pp, const MarkQuery& q) {
  return {pp.count(q.mark1), q.is_bivariate() ? pp.count(*q.mark2) : Index{0}};
}

}  // namespace detail

/// Observed K, closed-form permutation moments, Z, one-sided p and K - E on the full pattern.
template <typename Scalar>
KampResult<Scalar> run_kamp(const PointPattern<Scalar>& pp, const MarkQuery& q, const RadiusGrid<Scalar>& grid,
                            EdgeCorrection corr) {
  const KCurve<Scalar> k = k_query(pp, q, grid, corr);
  const RStatistics<Scalar> rs = accumulate_r_statistics(pp, grid, corr);
  const MomentPair<Scalar> mom = permutation_moments(rs, q, k.m1, k.m2);

  KampResult<Scalar> r;
  r.method = Method::Kamp;
  r.query = q;
  r.grid = grid;
  r.k_hat = k.values;
  r.expectation = mom.expectation;
  r.variance = mom.variance;
  r.variance_clamped = mom.variance_clamped;
  r.variance_defined = Mask::Constant(grid.size(), true);
  r.k_tilde = degree_of_clustering(k, mom.expectation, rs.grid);
  r.n_s = pp.size();
  r.m1 = k.m1;
  r.m2 = k.m2;
  detail::fill_normal_inference(r);
  return r;
}

/// Thins the whole pattern once, then runs the full computation on what remains.
template <typename Scalar>
KampResult<Scalar> run_kamp_lite(const PointPattern<Scalar>& pp, const MarkQuery& q, const RadiusGrid<Scalar>& grid,
                                 EdgeCorrection corr, double keep_prob, std::uint64_t seed) {
  ThinnedPattern<Scalar> thinned = thin_pattern(pp, keep_prob, seed);
  const auto [m1, m2] = detail::query_counts(thinned.pattern, q);
  if (thinned.underpopulated || (q.is_bivariate() ? (m1 < 1 || m2 < 1) : m1 < 2))
    throw Error(ErrorCode::InsufficientPoints, "too few marked points survive thinning with keep probability " +
                                                   std::to_string(keep_prob));
  KampResult<Scalar> r = run_kamp(thinned.pattern, q, grid, corr);
  r.method = Method::KampLite;
  r.seed = seed;
  r.thin_prob = static_cast<Scalar>(keep_prob);
  return r;
}

/// Comparator against complete spatial randomness: expectation pi r^2, no variance.
template <typename Scalar>
KampResult<Scalar> run_theoretical(const PointPattern<Scalar>& pp, const MarkQuery& q, const RadiusGrid<Scalar>& grid,
                                   EdgeCorrection corr) {
  const KCurve<Scalar> k = k_query(pp, q, grid, corr);
  const Index G = grid.size();
  KampResult<Scalar> r;
  r.method = Method::TheoreticalCsr;
  r.query = q;
  r.grid = grid;
  r.k_hat = k.values;
  r.expectation = theoretical_csr(grid);
  r.k_tilde = r.k_hat - r.expectation;
  r.variance = r.z = r.p_value = ArrayX<Scalar>::Zero(G);
  r.variance_defined = r.z_defined = r.p_defined = r.variance_clamped = Mask::Constant(G, false);
  r.n_s = pp.size();
  r.m1 = k.m1;
  r.m2 = k.m2;
  return r;
}

}  // namespace kamp
