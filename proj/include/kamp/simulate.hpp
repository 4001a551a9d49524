#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kamp/geometry.hpp"
#include "kamp/random.hpp"

namespace kamp {

enum class Condition { HomNull, InhomNull, HomClustered, InhomClustered };

inline std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::HomNull: return "hom_null";
    case Condition::InhomNull: return "inhom_null";
    case Condition::HomClustered: return "hom_clustered";
    case Condition::InhomClustered: return "inhom_clustered";
  }
  return "unknown";
}

inline Condition parse_condition(std::string_view s) {
  if (s == "hom_null") return Condition::HomNull;
  if (s == "inhom_null") return Condition::InhomNull;
  if (s == "hom_clustered") return Condition::HomClustered;
  if (s == "inhom_clustered") return Condition::InhomClustered;
  throw Error(ErrorCode::InvalidArgument, "unknown simulation condition '" + std::string(s) + "'");
}

inline constexpr const char* kBackground = "background";
inline constexpr const char* kImmune = "immune";
inline constexpr const char* kImmune1 = "immune1";
inline constexpr const char* kImmune2 = "immune2";

/// One simulated sample. lambda_n is the expected total point count in the
/// window (not a per-area intensity).
struct SimScenario {
  Condition condition{Condition::HomNull};
  double lambda_n{2000};
  double abundance{0.1};
  // Null conditions only: when positive, marks are immune1 / immune2 /
  // background with probabilities abundance / abundance2 / remainder.
  double abundance2{0};
  Window<double> window{0, 10, 0, 10};
  int cluster_count{25};
  double cluster_radius{1.25};
  int hole_count{5};
  double hole_radius_min{0.5};
  double hole_radius_max{1.5};
  std::uint64_t seed{1};

  void validate() const {
    window.validate();
    if (!(lambda_n > 0)) throw Error(ErrorCode::InvalidArgument, "lambda_n must be positive");
    if (!(abundance > 0 && abundance < 1)) throw Error(ErrorCode::InvalidArgument, "abundance must lie in (0, 1)");
    if (abundance2 < 0 || abundance + abundance2 >= 1)
      throw Error(ErrorCode::InvalidArgument, "abundance + abundance2 must stay below 1");
    if (abundance2 > 0 && (condition == Condition::HomClustered || condition == Condition::InhomClustered))
      throw Error(ErrorCode::InvalidArgument, "two-mark labeling is only defined for the null conditions");
    if (cluster_count < 1 || !(cluster_radius > 0))
      throw Error(ErrorCode::InvalidArgument, "cluster parameters must be positive");
    if (hole_count < 0 || !(hole_radius_min > 0) || hole_radius_max < hole_radius_min)
      throw Error(ErrorCode::InvalidArgument, "hole radii must satisfy 0 < min <= max");
  }
};

namespace detail {

inline std::uint64_t poisson_count(Rng& rng, double mean) {
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(rng);
}

inline PointPattern<double> assemble(Points<double> xy, const std::vector<std::string>& marks, const Window<double>& w) {
  PointPattern<double> pp;
  pp.labels = {kBackground, kImmune, kImmune1, kImmune2};
  std::sort(pp.labels.begin(), pp.labels.end());
  pp.marks.reserve(marks.size());
  for (const auto& m : marks)
    pp.marks.push_back(static_cast<std::int32_t>(std::lower_bound(pp.labels.begin(), pp.labels.end(), m) - pp.labels.begin()));
  pp.xy = std::move(xy);
  pp.window = w;
  return pp;
}

inline std::string null_mark(Rng& rng, const SimScenario& sc) {
  const double u = uniform01(rng);
  if (sc.abundance2 > 0) {
    if (u < sc.abundance) return kImmune1;
    if (u < sc.abundance + sc.abundance2) return kImmune2;
    return kBackground;
  }
  return u < sc.abundance ? kImmune : kBackground;
}

struct Disk {
  double x, y, r;
  bool contains(double px, double py) const { return (px - x) * (px - x) + (py - y) * (py - y) <= r * r; }
};

inline std::vector<Disk> random_disks(Rng& rng, const Window<double>& w, int count, double r_min, double r_max) {
  std::vector<Disk> out;
  for (int k = 0; k < count; ++k) {
    const double x = w.x_min + w.width() * uniform01(rng);
    const double y = w.y_min + w.height() * uniform01(rng);
    out.push_back({x, y, r_min + (r_max - r_min) * uniform01(rng)});
  }
  return out;
}

inline Points<double> uniform_points(Rng& rng, const Window<double>& w, std::uint64_t n) {
  Points<double> xy(static_cast<Index>(n), 2);
  for (Index i = 0; i < xy.rows(); ++i) {
    xy(i, 0) = w.x_min + w.width() * uniform01(rng);
    xy(i, 1) = w.y_min + w.height() * uniform01(rng);
  }
  return xy;
}

}  // namespace detail

/// Homogeneous multitype Poisson: Poisson(lambda_n) uniform points, independent marks.
inline PointPattern<double> sim_hom_null(const SimScenario& sc) {
  sc.validate();
  Rng rng(sc.seed);
  const auto n = detail::poisson_count(rng, sc.lambda_n);
  Points<double> xy = detail::uniform_points(rng, sc.window, n);
  std::vector<std::string> marks;
  marks.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) marks.push_back(detail::null_mark(rng, sc));
  return detail::assemble(std::move(xy), marks, sc.window);
}

/// Intensity proportional to 5 x^2 (x measured from the window's left edge),
/// scaled so the expected total is lambda_n; same shape for every mark.
inline PointPattern<double> sim_inhom_null(const SimScenario& sc) {
  sc.validate();
  Rng rng(sc.seed);
  const auto n = detail::poisson_count(rng, sc.lambda_n);
  Points<double> xy(static_cast<Index>(n), 2);
  std::vector<std::string> marks;
  marks.reserve(n);
  const auto& w = sc.window;
  for (Index i = 0; i < xy.rows(); ++i) {
    // Inverse CDF of a density proportional to x^2 on [0, width).
    xy(i, 0) = w.x_min + w.width() * std::cbrt(uniform01(rng));
    xy(i, 1) = w.y_min + w.height() * uniform01(rng);
    marks.push_back(detail::null_mark(rng, sc));
  }
  return detail::assemble(std::move(xy), marks, w);
}

/// Uniform points; immune marks concentrated in random disks. Outside the
/// disks the immune probability is abundance / 4; inside it is set so the
/// overall expected fraction equals the abundance for the realized coverage.
inline PointPattern<double> sim_hom_clustered(const SimScenario& sc) {
  sc.validate();
  Rng rng(sc.seed);
  const auto n = detail::poisson_count(rng, sc.lambda_n);
  Points<double> xy = detail::uniform_points(rng, sc.window, n);
  const auto clusters = detail::random_disks(rng, sc.window, sc.cluster_count, sc.cluster_radius, sc.cluster_radius);

  std::vector<char> inside(n, 0);
  std::uint64_t covered = 0;
  for (Index i = 0; i < xy.rows(); ++i) {
    for (const auto& c : clusters) {
      if (c.contains(xy(i, 0), xy(i, 1))) {
        inside[static_cast<std::size_t>(i)] = 1;
        ++covered;
        break;
      }
    }
  }
  const double coverage = n > 0 ? static_cast<double>(covered) / static_cast<double>(n) : 0.0;
  const double q_out = sc.abundance / 4;
  const double q_in = coverage > 0 ? (sc.abundance - (1 - coverage) * q_out) / coverage : 2.0;
  if (q_in > 1)
    throw Error(ErrorCode::InfeasibleAbundance, "cluster coverage " + std::to_string(coverage) +
                                                    " cannot carry abundance " + std::to_string(sc.abundance));
  std::vector<std::string> marks;
  marks.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i)
    marks.push_back(uniform01(rng) < (inside[i] ? q_in : q_out) ? kImmune : kBackground);
  return detail::assemble(std::move(xy), marks, sc.window);
}

/// Clustered pattern with every point inside hole_count random disks removed.
inline PointPattern<double> sim_inhom_clustered(const SimScenario& sc) {
  PointPattern<double> base = sim_hom_clustered(sc);
  Rng rng(splitmix64(sc.seed ^ 0x686f6c6573ULL));
  const auto holes = detail::random_disks(rng, sc.window, sc.hole_count, sc.hole_radius_min, sc.hole_radius_max);
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(base.size()));
  for (Index i = 0; i < base.size(); ++i) {
    bool in_hole = false;
    for (const auto& h : holes) in_hole = in_hole || h.contains(base.xy(i, 0), base.xy(i, 1));
    if (!in_hole) keep.push_back(i);
  }
  return base.subset(keep);
}

inline PointPattern<double> simulate(const SimScenario& sc) {
  switch (sc.condition) {
    case Condition::HomNull: return sim_hom_null(sc);
    case Condition::InhomNull: return sim_inhom_null(sc);
    case Condition::HomClustered: return sim_hom_clustered(sc);
    case Condition::InhomClustered: return sim_inhom_clustered(sc);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown condition");
}

/// Hole disks used by sim_inhom_clustered for this scenario; exposed for checks.
inline std::vector<std::array<double, 3>> hole_disks(const SimScenario& sc) {
  Rng rng(splitmix64(sc.seed ^ 0x686f6c6573ULL));
  std::vector<std::array<double, 3>> out;
  for (const auto& h : detail::random_disks(rng, sc.window, sc.hole_count, sc.hole_radius_min, sc.hole_radius_max))
    out.push_back({h.x, h.y, h.r});
  return out;
}

}  // namespace kamp
