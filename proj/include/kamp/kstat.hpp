#pragma once

#include <numbers>
#include <optional>
#include <string>

#include "kamp/geometry.hpp"

namespace kamp {

/// Strictly increasing, non-negative evaluation radii.
template <typename Scalar>
struct RadiusGrid {
  ArrayX<Scalar> radii;

  RadiusGrid() = default;
  explicit RadiusGrid(ArrayX<Scalar> r) : radii(std::move(r)) { validate(); }

  static RadiusGrid uniform(Scalar r_max, Index count) {
    if (count < 2 || !(r_max > 0))
      throw Error(ErrorCode::InvalidArgument, "uniform grid needs r_max > 0 and at least 2 radii");
    ArrayX<Scalar> r(count);
    for (Index k = 0; k < count; ++k) r[k] = r_max * static_cast<Scalar>(k) / static_cast<Scalar>(count - 1);
    return RadiusGrid(std::move(r));
  }

  /// 0, step, 2 step, ... up to r_max (inclusive within rounding).
  static RadiusGrid from_step(Scalar r_max, Scalar step) {
    if (!(step > 0) || !(r_max > 0)) throw Error(ErrorCode::InvalidArgument, "step and r_max must be positive");
    const auto count = static_cast<Index>(std::floor(r_max / step * (1 + 1e-12))) + 1;
    ArrayX<Scalar> r(count);
    for (Index k = 0; k < count; ++k) r[k] = step * static_cast<Scalar>(k);
    return RadiusGrid(std::move(r));
  }

  /// 101 radii from 0 to a quarter of the shorter window side.
  static RadiusGrid default_for(const Window<Scalar>& w) { return uniform(w.shorter_side() / 4, 101); }

  Index size() const { return radii.size(); }
  Scalar max() const { return radii[radii.size() - 1]; }

  void validate() const {
    if (radii.size() == 0) throw Error(ErrorCode::InvalidArgument, "radius grid is empty");
    if (!(radii[0] >= 0)) throw Error(ErrorCode::InvalidArgument, "radii must be non-negative");
    for (Index k = 1; k < radii.size(); ++k)
      if (!(radii[k] > radii[k - 1])) throw Error(ErrorCode::InvalidArgument, "radii must be strictly increasing");
  }

  /// Translation-correction validity guard.
  void check_window(const Window<Scalar>& w) const {
    if (max() > w.shorter_side() / 2) {
      throw Error(ErrorCode::RadiusOutOfRange,
                  "max radius " + std::to_string(max()) + " exceeds half the shorter window side " +
                      std::to_string(w.shorter_side() / 2));
    }
  }

  /// Index of `r` on the grid, matched to relative tolerance 1e-9.
  std::optional<Index> find(Scalar r) const {
    const Scalar tol = Scalar(1e-9) * std::max(Scalar(1), std::abs(r));
    for (Index k = 0; k < radii.size(); ++k)
      if (std::abs(radii[k] - r) <= tol) return k;
    return std::nullopt;
  }

  bool operator==(const RadiusGrid& o) const {
    return radii.size() == o.radii.size() && (radii == o.radii).all();
  }
};

/// Maps a distance to the first grid index whose radius is >= the distance.
template <typename Scalar>
class BinLocator {
 public:
  explicit BinLocator(const RadiusGrid<Scalar>& g) : r_(&g.radii) {
    const Index n = g.size();
    if (n >= 2) {
      step_ = (g.max() - g.radii[0]) / static_cast<Scalar>(n - 1);
      uniform_ = step_ > 0;
      inv_step_ = uniform_ ? 1 / step_ : Scalar(0);
      for (Index k = 0; uniform_ && k < n; ++k)
        uniform_ = std::abs(g.radii[k] - (g.radii[0] + step_ * static_cast<Scalar>(k))) <= step_ * Scalar(1e-6);
    }
  }

  /// Returns size() when d exceeds the largest radius.
  Index operator()(Scalar d) const {
    const auto& r = *r_;
    const Index n = r.size();
    if (d > r[n - 1]) return n;
    Index k;
    if (uniform_) {
      const Scalar x = (d - r[0]) * inv_step_;
      k = static_cast<Index>(x);
      k += static_cast<Scalar>(k) < x;
      k = k < 0 ? 0 : (k > n - 1 ? n - 1 : k);
      while (k > 0 && r[k - 1] >= d) --k;
      while (r[k] < d) ++k;
    } else {
      k = static_cast<Index>(std::lower_bound(r.data(), r.data() + n, d) - r.data());
    }
    return k;
  }

 private:
  const ArrayX<Scalar>* r_;
  Scalar step_{0};
  Scalar inv_step_{0};
  bool uniform_{false};
};

/// Either a univariate query on one mark or a bivariate query on two distinct marks.
struct MarkQuery {
  std::string mark1;
  std::optional<std::string> mark2;

  static MarkQuery univariate(std::string mark) { return {std::move(mark), std::nullopt}; }
  static MarkQuery bivariate(std::string a, std::string b) {
    if (a == b) throw Error(ErrorCode::IdenticalMarks, "bivariate query needs two distinct marks, got '" + a + "' twice");
    return {std::move(a), std::move(b)};
  }

  bool is_bivariate() const { return mark2.has_value(); }
  std::string describe() const { return is_bivariate() ? mark1 + "," + *mark2 : mark1; }
};

template <typename Scalar>
struct KCurve {
  RadiusGrid<Scalar> grid;
  ArrayX<Scalar> values;
  Index m1{0};
  Index m2{0};  // zero for univariate curves
  Index n_s{0};
  EdgeCorrection correction{EdgeCorrection::Translation};
};

namespace detail {

/// Per-bin sum of edge weights over unordered pairs of `xy` within the grid.
template <typename Scalar>
ArrayX<Scalar> unordered_pair_histogram(const Points<Scalar>& xy, const Window<Scalar>& w,
                                        const RadiusGrid<Scalar>& grid, EdgeCorrection corr) {
  ArrayX<Scalar> hist = ArrayX<Scalar>::Zero(grid.size());
  const BinLocator<Scalar> bin(grid);
  const EdgeWeigher<Scalar> weigh(corr, w);
  CellGrid<Scalar> cells(xy, grid.max());
  cells.for_each_pair([&](Index i, Index j, Scalar d) {
    const Index k = bin(d);
    if (k < grid.size()) hist[k] += weigh(xy(i, 0) - xy(j, 0), xy(i, 1) - xy(j, 1));
  });
  return hist;
}

template <typename Scalar>
ArrayX<Scalar> cumulative(const ArrayX<Scalar>& a) {
  ArrayX<Scalar> out(a.size());
  Scalar acc = 0;
  for (Index k = 0; k < a.size(); ++k) out[k] = acc += a[k];
  return out;
}

}  // namespace detail

/// Univariate Ripley's K of the points carrying `mark`.
template <typename Scalar>
KCurve<Scalar> k_univariate(const PointPattern<Scalar>& pp, std::string_view mark, const RadiusGrid<Scalar>& grid,
                            EdgeCorrection corr) {
  grid.check_window(pp.window);
  const auto code = pp.code_of(mark);
  const auto rows = code ? pp.indices_of(*code) : std::vector<Index>{};
  const auto m = static_cast<Index>(rows.size());
  if (m < 2)
    throw Error(ErrorCode::InsufficientPoints,
                "univariate K needs at least 2 points marked '" + std::string(mark) + "', found " + std::to_string(m));
  Points<Scalar> sub(m, 2);
  for (Index k = 0; k < m; ++k) sub.row(k) = pp.xy.row(rows[static_cast<std::size_t>(k)]);

  // Each unordered pair stands for (i, j) and (j, i) of the ordered double sum.
  const ArrayX<Scalar> hist = detail::unordered_pair_histogram(sub, pp.window, grid, corr) * Scalar(2);
  const Scalar scale = window_area(pp.window) / (static_cast<Scalar>(m) * static_cast<Scalar>(m - 1));
  return {grid, detail::cumulative(hist) * scale, m, 0, pp.size(), corr};
}

/// Bivariate (cross-type) Ripley's K from `mark1` points to `mark2` points.
template <typename Scalar>
KCurve<Scalar> k_bivariate(const PointPattern<Scalar>& pp, std::string_view mark1, std::string_view mark2,
                           const RadiusGrid<Scalar>& grid, EdgeCorrection corr) {
  if (mark1 == mark2) throw Error(ErrorCode::IdenticalMarks, "bivariate K needs two distinct marks");
  grid.check_window(pp.window);
  const auto c1 = pp.code_of(mark1), c2 = pp.code_of(mark2);
  const auto rows1 = c1 ? pp.indices_of(*c1) : std::vector<Index>{};
  const auto rows2 = c2 ? pp.indices_of(*c2) : std::vector<Index>{};
  const auto m1 = static_cast<Index>(rows1.size()), m2 = static_cast<Index>(rows2.size());
  if (m1 < 1 || m2 < 1)
    throw Error(ErrorCode::InsufficientPoints, "bivariate K needs at least one point of each mark, found " +
                                                   std::to_string(m1) + " and " + std::to_string(m2));
  Points<Scalar> second(m2, 2);
  for (Index k = 0; k < m2; ++k) second.row(k) = pp.xy.row(rows2[static_cast<std::size_t>(k)]);

  ArrayX<Scalar> hist = ArrayX<Scalar>::Zero(grid.size());
  const BinLocator<Scalar> bin(grid);
  const EdgeWeigher<Scalar> weigh(corr, pp.window);
  CellGrid<Scalar> cells(second, grid.max());
  for (Index i : rows1) {
    const Scalar xi = pp.xy(i, 0), yi = pp.xy(i, 1);
    cells.for_each_within(xi, yi, [&](Index j, Scalar d) {
      const Index k = bin(d);
      if (k < grid.size()) hist[k] += weigh(xi - second(j, 0), yi - second(j, 1));
    });
  }
  const Scalar scale = window_area(pp.window) / (static_cast<Scalar>(m1) * static_cast<Scalar>(m2));
  return {grid, detail::cumulative(hist) * scale, m1, m2, pp.size(), corr};
}

template <typename Scalar>
KCurve<Scalar> k_query(const PointPattern<Scalar>& pp, const MarkQuery& q, const RadiusGrid<Scalar>& grid,
                       EdgeCorrection corr) {
  return q.is_bivariate() ? k_bivariate(pp, q.mark1, *q.mark2, grid, corr) : k_univariate(pp, q.mark1, grid, corr);
}

/// K under complete spatial randomness: pi r^2.
template <typename Scalar>
ArrayX<Scalar> theoretical_csr(const RadiusGrid<Scalar>& grid) {
  return std::numbers::pi_v<Scalar> * grid.radii.square();
}

}  // namespace kamp
