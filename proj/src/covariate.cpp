#include <cmath>
#include <map>

#include "kamp/pipeline.hpp"

namespace kamp {

std::vector<CovariateRow> extract_covariate(const std::vector<ResultRow>& rows, double r_star) {
  std::map<std::pair<std::string, std::string>, std::optional<CovariateRow>> groups;
  const double tol = 1e-9 * std::max(1.0, std::abs(r_star));
  for (const auto& r : rows) {
    auto& slot = groups[{r.sample_id, r.method}];
    if (std::abs(r.r - r_star) <= tol) slot = CovariateRow{r.sample_id, r.method, r.r, r.ktilde, r.pvalue};
  }
  std::vector<CovariateRow> out;
  out.reserve(groups.size());
  for (auto& [key, slot] : groups) {
    if (!slot)
      throw Error(ErrorCode::RadiusNotOnGrid, "radius " + format_real(r_star) + " is not on the grid of sample '" +
                                                  key.first + "', method " + key.second);
    out.push_back(std::move(*slot));
  }
  return out;
}

}  // namespace kamp
