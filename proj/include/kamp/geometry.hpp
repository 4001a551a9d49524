#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>
#include <type_traits>

#include <Eigen/Dense>

#include "kamp/error.hpp"

namespace kamp {

using Index = Eigen::Index;

template <typename Scalar>
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 2, Eigen::RowMajor>;

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Axis-aligned rectangular observation window.
template <typename Scalar>
struct Window {
  Scalar x_min{0};
  Scalar x_max{1};
  Scalar y_min{0};
  Scalar y_max{1};

  static Window make(Scalar x0, Scalar x1, Scalar y0, Scalar y1) {
    Window w{x0, x1, y0, y1};
    w.validate();
    return w;
  }

  Scalar width() const { return x_max - x_min; }
  Scalar height() const { return y_max - y_min; }
  Scalar shorter_side() const { return std::min(width(), height()); }

  bool contains(Scalar x, Scalar y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }

  void validate() const {
    if (!(x_max > x_min) || !(y_max > y_min) || !std::isfinite(x_min) ||
        !std::isfinite(x_max) || !std::isfinite(y_min) || !std::isfinite(y_max)) {
      std::ostringstream os;
      os << "window [" << x_min << ", " << x_max << "] x [" << y_min << ", " << y_max
         << "] has no positive area";
      throw Error(ErrorCode::InvalidWindow, os.str());
    }
  }

  bool operator==(const Window&) const = default;
};

template <typename Scalar>
Scalar window_area(const Window<Scalar>& w) {
  return w.width() * w.height();
}

/// Tight bounding box of a point set; throws InvalidWindow when it is degenerate.
template <typename Scalar>
Window<Scalar> bounding_box(const Points<Scalar>& xy) {
  if (xy.rows() == 0) throw Error(ErrorCode::InvalidWindow, "bounding box of an empty point set");
  return Window<Scalar>::make(xy.col(0).minCoeff(), xy.col(0).maxCoeff(), xy.col(1).minCoeff(),
                              xy.col(1).maxCoeff());
}

enum class EdgeCorrection { None, Translation };

inline std::string_view to_string(EdgeCorrection c) {
  return c == EdgeCorrection::None ? "none" : "translation";
}

inline EdgeCorrection parse_edge_correction(std::string_view s) {
  if (s == "none") return EdgeCorrection::None;
  if (s == "translation") return EdgeCorrection::Translation;
  throw Error(ErrorCode::InvalidArgument, "unknown edge correction '" + std::string(s) + "'");
}

/// Translation weight from a displacement: |A| / ((width - |dx|)(height - |dy|)).
namespace detail {

template <typename Scalar>
[[noreturn, gnu::cold, gnu::noinline]] void throw_degenerate_pair(Scalar ax, Scalar ay, const Window<Scalar>& w) {
  std::ostringstream os;
  os << "pair displacement (" << ax << ", " << ay << ") reaches the window extent (" << w.width() << ", "
     << w.height() << ")";
  throw Error(ErrorCode::DegeneratePair, os.str());
}

}  // namespace detail

template <typename Scalar>
Scalar translation_weight_delta(Scalar dx, Scalar dy, const Window<Scalar>& w) {
  const Scalar ax = std::abs(dx);
  const Scalar ay = std::abs(dy);
  const Scalar ox = w.width() - ax;
  const Scalar oy = w.height() - ay;
  if (!(ox > 0) || !(oy > 0)) detail::throw_degenerate_pair(ax, ay, w);
  return window_area(w) / (ox * oy);
}

template <typename Scalar, typename P, typename Q>
Scalar translation_weight(const Eigen::MatrixBase<P>& p, const Eigen::MatrixBase<Q>& q,
                          const Window<Scalar>& w) {
  return translation_weight_delta<Scalar>(p(0) - q(0), p(1) - q(1), w);
}

template <typename Scalar>
Scalar edge_weight(EdgeCorrection corr, Scalar dx, Scalar dy, const Window<Scalar>& w) {
  return corr == EdgeCorrection::None ? Scalar(1) : translation_weight_delta(dx, dy, w);
}

/// edge_weight with the window extents hoisted out of pair loops.
template <typename Scalar>
class EdgeWeigher {
 public:
  EdgeWeigher(EdgeCorrection corr, const Window<Scalar>& w)
      : window_(w), width_(w.width()), height_(w.height()), area_(window_area(w)), translate_(corr == EdgeCorrection::Translation) {}

  Scalar operator()(Scalar dx, Scalar dy) const {
    if (!translate_) return Scalar(1);
    const Scalar ax = std::abs(dx);
    const Scalar ay = std::abs(dy);
    const Scalar ox = width_ - ax;
    const Scalar oy = height_ - ay;
    if (!(ox > 0) || !(oy > 0)) [[unlikely]]
      detail::throw_degenerate_pair(ax, ay, window_);
    return area_ / (ox * oy);
  }

 private:
  Window<Scalar> window_;
  Scalar width_, height_, area_;
  bool translate_;
};

/// Planar points, one integer mark code per point, and the label dictionary
/// the codes index into.
template <typename Scalar>
struct PointPattern {
  Points<Scalar> xy;
  std::vector<std::int32_t> marks;
  std::vector<std::string> labels;
  Window<Scalar> window;

  Index size() const { return xy.rows(); }

  std::optional<std::int32_t> code_of(std::string_view label) const {
    for (std::size_t k = 0; k < labels.size(); ++k)
      if (labels[k] == label) return static_cast<std::int32_t>(k);
    return std::nullopt;
  }

  std::int32_t require_code(std::string_view label) const {
    auto c = code_of(label);
    if (!c) throw Error(ErrorCode::UnknownMark, "mark '" + std::string(label) + "' not present in pattern");
    return *c;
  }

  Index count(std::int32_t code) const {
    return static_cast<Index>(std::count(marks.begin(), marks.end(), code));
  }

  Index count(std::string_view label) const {
    auto c = code_of(label);
    return c ? count(*c) : 0;
  }

  std::vector<Index> indices_of(std::int32_t code) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < marks.size(); ++i)
      if (marks[i] == code) out.push_back(static_cast<Index>(i));
    return out;
  }

  /// Copy of the points at `rows` (in that order) with their marks; labels and window unchanged.
  PointPattern subset(std::span<const Index> rows) const {
    PointPattern out;
    out.xy.resize(static_cast<Index>(rows.size()), 2);
    out.marks.resize(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out.xy.row(static_cast<Index>(k)) = xy.row(rows[k]);
      out.marks[k] = marks[static_cast<std::size_t>(rows[k])];
    }
    out.labels = labels;
    out.window = window;
    return out;
  }

  void validate() const {
    window.validate();
    if (static_cast<std::size_t>(xy.rows()) != marks.size())
      throw Error(ErrorCode::InvalidArgument, "marks and points differ in length");
    for (Index i = 0; i < xy.rows(); ++i) {
      if (!window.contains(xy(i, 0), xy(i, 1))) {
        std::ostringstream os;
        os << "point " << i << " (" << xy(i, 0) << ", " << xy(i, 1) << ") lies outside the window";
        throw Error(ErrorCode::InvalidArgument, os.str());
      }
    }
    for (auto m : marks)
      if (m < 0 || static_cast<std::size_t>(m) >= labels.size())
        throw Error(ErrorCode::InvalidArgument, "mark code outside the label dictionary");
  }
};

/// Builds a pattern from string marks. Labels are stored sorted so codes do not
/// depend on row order. Without a window the tight bounding box is used.
template <typename Scalar>
PointPattern<Scalar> make_pattern(Points<Scalar> xy, const std::vector<std::string>& marks,
                                  std::optional<std::type_identity_t<Window<Scalar>>> window = std::nullopt) {
  PointPattern<Scalar> pp;
  pp.labels = marks;
  std::sort(pp.labels.begin(), pp.labels.end());
  pp.labels.erase(std::unique(pp.labels.begin(), pp.labels.end()), pp.labels.end());
  pp.marks.reserve(marks.size());
  for (const auto& m : marks) {
    auto it = std::lower_bound(pp.labels.begin(), pp.labels.end(), m);
    pp.marks.push_back(static_cast<std::int32_t>(it - pp.labels.begin()));
  }
  pp.window = window ? *window : bounding_box(xy);
  pp.xy = std::move(xy);
  pp.validate();
  return pp;
}

template <typename Scalar>
struct Pair {
  Index i;
  Index j;
  Scalar d;
};

/// Uniform bucket grid over a point set. Buckets have side just over half
/// the search radius, so every qualifying pair lies within two buckets.
template <typename Scalar>
class CellGrid {
 public:
  CellGrid(const Points<Scalar>& xy, Scalar r_max) : xy_(&xy), r_max_(r_max) {
    if (!(r_max >= 0)) throw Error(ErrorCode::InvalidArgument, "search radius must be non-negative");
    const Index n = xy.rows();
    if (n == 0) return;
    x0_ = xy.col(0).minCoeff();
    y0_ = xy.col(1).minCoeff();
    const Scalar ex = xy.col(0).maxCoeff() - x0_;
    const Scalar ey = xy.col(1).maxCoeff() - y0_;
    // The 1e-9 slack keeps r_max / side_ strictly below the reach, so rounding
    // in the bucket coordinates cannot push a qualifying pair out of range.
    side_ = r_max > 0 ? r_max / 2 * (1 + Scalar(1e-9)) : std::max({ex, ey, Scalar(1)});
    // Cap the bucket count at a few per point; larger buckets stay correct.
    const double cap = 4.0 * static_cast<double>(n) + 16.0;
    while ((std::floor(ex / side_) + 1.0) * (std::floor(ey / side_) + 1.0) > cap) side_ *= Scalar(2);
    nx_ = static_cast<Index>(std::floor(ex / side_)) + 1;
    ny_ = static_cast<Index>(std::floor(ey / side_)) + 1;
    reach_ = std::max<Index>(1, static_cast<Index>(std::ceil(r_max_ / side_)));
    build_offsets();

    std::vector<Index> cell_of(static_cast<std::size_t>(n));
    start_.assign(static_cast<std::size_t>(nx_ * ny_ + 1), 0);
    for (Index i = 0; i < n; ++i) {
      const Index c = cell_index(xy(i, 0), xy(i, 1));
      cell_of[static_cast<std::size_t>(i)] = c;
      ++start_[static_cast<std::size_t>(c + 1)];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    items_.resize(static_cast<std::size_t>(n));
    std::vector<Index> fill(start_.begin(), start_.end() - 1);
    for (Index i = 0; i < n; ++i) items_[static_cast<std::size_t>(fill[static_cast<std::size_t>(cell_of[static_cast<std::size_t>(i)])]++)] = i;
  }

  Scalar radius() const { return r_max_; }
  /// Point indices in bucket order.
  std::span<const Index> order() const { return items_; }
  Index cells_x() const { return nx_; }
  Index cells_y() const { return ny_; }
  Index reach() const { return reach_; }
  std::span<const std::array<Index, 2>> forward() const { return forward_; }
  std::span<const Index> cell(Index c) const {
    return {items_.data() + start_[static_cast<std::size_t>(c)],
            static_cast<std::size_t>(start_[static_cast<std::size_t>(c + 1)] - start_[static_cast<std::size_t>(c)])};
  }

  /// Calls f(i, j, d) for every unordered pair with d <= radius, i < j.
  template <typename F>
  void for_each_pair(F&& f) const {
    const Points<Scalar>& xy = *xy_;
    for (Index cy = 0; cy < ny_; ++cy) {
      for (Index cx = 0; cx < nx_; ++cx) {
        const auto here = cell(cy * nx_ + cx);
        for (std::size_t a = 0; a < here.size(); ++a) {
          const Index i = here[a];
          const Scalar xi = xy(i, 0), yi = xy(i, 1);
          for (std::size_t b = a + 1; b < here.size(); ++b) visit(f, i, xi, yi, here[b]);
          for (const auto& off : forward_) {
            const Index nx = cx + off[0], ny = cy + off[1];
            if (nx < 0 || nx >= nx_ || ny >= ny_) continue;
            for (Index j : cell(ny * nx_ + nx)) visit(f, i, xi, yi, j);
          }
        }
      }
    }
  }

  /// Calls f(j, d) for every indexed point j within radius of (x, y).
  template <typename F>
  void for_each_within(Scalar x, Scalar y, F&& f) const {
    if (nx_ == 0) return;
    const Points<Scalar>& xy = *xy_;
    const Index cx = cell_coord(x, x0_), cy = cell_coord(y, y0_);
    for (Index ny = std::max<Index>(cy - reach_, 0); ny <= std::min(cy + reach_, ny_ - 1); ++ny) {
      for (Index nx = std::max<Index>(cx - reach_, 0); nx <= std::min(cx + reach_, nx_ - 1); ++nx) {
        for (Index j : cell(ny * nx_ + nx)) {
          const Scalar ddx = x - xy(j, 0), ddy = y - xy(j, 1);
          const Scalar d = std::sqrt(ddx * ddx + ddy * ddy);
          if (d <= r_max_) f(j, d);
        }
      }
    }
  }

  /// Calls f(j, d) for every j != i with d(i, j) <= radius.
  template <typename F>
  void for_each_neighbor(Index i, F&& f) const {
    for_each_within((*xy_)(i, 0), (*xy_)(i, 1), [&](Index j, Scalar d) {
      if (j != i) f(j, d);
    });
  }

 private:
  // Buckets scanned after the bucket itself: each unordered bucket pair within
  // reach exactly once, minus those whose nearest corners are out of range.
  void build_offsets() {
    const Scalar limit = r_max_ * r_max_ * (1 + Scalar(1e-6));
    auto gap = [&](Index d) { return static_cast<Scalar>(std::max<Index>(std::abs(d) - 1, 0)) * side_; };
    for (Index dy = 0; dy <= reach_; ++dy) {
      for (Index dx = dy == 0 ? 1 : -reach_; dx <= reach_; ++dx) {
        const Scalar gx = gap(dx), gy = gap(dy);
        if (gx * gx + gy * gy <= limit) forward_.push_back({dx, dy});
      }
    }
  }

  template <typename F>
  void visit(F& f, Index i, Scalar xi, Scalar yi, Index j) const {
    const Scalar dx = xi - (*xy_)(j, 0), dy = yi - (*xy_)(j, 1);
    const Scalar d2 = dx * dx + dy * dy;
    if (d2 > screen_) return;
    const Scalar d = std::sqrt(d2);
    if (d <= r_max_) {
      if (i < j) f(i, j, d);
      else f(j, i, d);
    }
  }

  Index cell_coord(Scalar v, Scalar origin) const { return static_cast<Index>(std::floor((v - origin) / side_)); }
  Index cell_index(Scalar x, Scalar y) const {
    const Index cx = std::min(cell_coord(x, x0_), nx_ - 1);
    const Index cy = std::min(cell_coord(y, y0_), ny_ - 1);
    return cy * nx_ + cx;
  }

  const Points<Scalar>* xy_;
  Scalar r_max_;
  // Squared-distance prefilter, slightly loose so the exact test decides.
  Scalar screen_{r_max_ * r_max_ * (1 + Scalar(1e-6))};
  Scalar x0_{0}, y0_{0}, side_{1};
  Index nx_{0}, ny_{0}, reach_{1};
  std::vector<std::array<Index, 2>> forward_;
  std::vector<Index> start_;
  std::vector<Index> items_;
};

/// Lazy single-consumer stream of the unordered pairs within r_max. The
/// referenced point matrix must outlive the stream.
template <typename Scalar>
class PairStream {
 public:
  PairStream(const Points<Scalar>& xy, Scalar r_max) : grid_(xy, r_max), xy_(&xy) {}

  std::optional<Pair<Scalar>> next() {
    const Index ncell = grid_.cells_x() * grid_.cells_y();
    while (cell_ < ncell) {
      const auto here = grid_.cell(cell_);
      if (a_ >= here.size()) {
        ++cell_;
        a_ = 0;
        nb_ = 0;
        b_ = 0;
        continue;
      }
      const Index i = here[a_];
      // nb_ == 0: same bucket (b > a); then the forward buckets in order.
      if (nb_ == 0) {
        if (b_ == 0) b_ = a_ + 1;
        while (b_ < here.size()) {
          if (auto p = test(i, here[b_++])) return p;
        }
        nb_ = 1;
        b_ = 0;
      }
      while (nb_ <= grid_.forward().size()) {
        const auto& off = grid_.forward()[nb_ - 1];
        const Index cx = cell_ % grid_.cells_x() + off[0];
        const Index cy = cell_ / grid_.cells_x() + off[1];
        if (cx >= 0 && cx < grid_.cells_x() && cy < grid_.cells_y()) {
          const auto there = grid_.cell(cy * grid_.cells_x() + cx);
          while (b_ < there.size()) {
            if (auto p = test(i, there[b_++])) return p;
          }
        }
        ++nb_;
        b_ = 0;
      }
      ++a_;
      nb_ = 0;
      b_ = 0;
    }
    return std::nullopt;
  }

  template <typename F>
  void for_each(F&& f) const {
    grid_.for_each_pair(std::forward<F>(f));
  }

 private:
  std::optional<Pair<Scalar>> test(Index i, Index j) const {
    const Scalar dx = (*xy_)(i, 0) - (*xy_)(j, 0), dy = (*xy_)(i, 1) - (*xy_)(j, 1);
    const Scalar d = std::sqrt(dx * dx + dy * dy);
    if (d > grid_.radius()) return std::nullopt;
    return Pair<Scalar>{std::min(i, j), std::max(i, j), d};
  }

  CellGrid<Scalar> grid_;
  const Points<Scalar>* xy_;
  Index cell_{0};
  std::size_t a_{0};
  std::size_t nb_{0};
  std::size_t b_{0};
};

template <typename Scalar>
PairStream<Scalar> neighbor_pairs(const PointPattern<Scalar>& pp, Scalar r_max) {
  if (!(r_max > 0)) throw Error(ErrorCode::InvalidArgument, "r_max must be positive");
  return PairStream<Scalar>(pp.xy, r_max);
}

}  // namespace kamp
