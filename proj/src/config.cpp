#include <fstream>
#include <sstream>

#include "kamp/pipeline.hpp"

namespace kamp {

using nlohmann::json;

std::vector<Method> parse_method_list(const std::string& csv) {
  std::vector<Method> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const Method m = parse_method(item);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

void RunConfig::validate() const {
  if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "no method selected");
  const bool perm = std::find(methods.begin(), methods.end(), Method::Perm) != methods.end();
  if (perm && permutations < 1) throw Error(ErrorCode::InvalidArgument, "perm needs at least 1 permutation");
  if (!(thin_prob > 0 && thin_prob <= 1)) throw Error(ErrorCode::InvalidArgument, "thin probability must lie in (0, 1]");
  if (threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be at least 1");
  if (query.mark1.empty() || (query.mark2 && query.mark2->empty()))
    throw Error(ErrorCode::InvalidArgument, "mark labels must be non-empty");
  if (r_max && !(*r_max > 0)) throw Error(ErrorCode::InvalidArgument, "rmax must be positive");
  if (r_step && !(*r_step > 0)) throw Error(ErrorCode::InvalidArgument, "rstep must be positive");
  if (!radii.empty()) RadiusGrid<double>(Eigen::Map<const ArrayX<double>>(radii.data(), static_cast<Index>(radii.size())));
}

RadiusGrid<double> RunConfig::grid_for(const Window<double>& w) const {
  RadiusGrid<double> grid;
  if (!radii.empty()) {
    grid = RadiusGrid<double>(Eigen::Map<const ArrayX<double>>(radii.data(), static_cast<Index>(radii.size())));
  } else {
    const double rm = r_max.value_or(w.shorter_side() / 4);
    grid = r_step ? RadiusGrid<double>::from_step(rm, *r_step) : RadiusGrid<double>::uniform(rm, 101);
  }
  if (correction == EdgeCorrection::Translation) grid.check_window(w);
  return grid;
}

namespace {

std::vector<Method> methods_from(const json& v) {
  if (v.is_string()) return parse_method_list(v.get<std::string>());
  std::vector<Method> out;
  for (const auto& m : v) out.push_back(parse_method(m.get<std::string>()));
  return out;
}

}  // namespace

RunConfig config_from_json(const json& j, RunConfig c) {
  try {
    if (j.contains("methods")) c.methods = methods_from(j["methods"]);
    if (j.contains("mark")) c.query = MarkQuery::univariate(j["mark"].get<std::string>());
    if (j.contains("mark1") || j.contains("mark2")) {
      if (!j.contains("mark1") || !j.contains("mark2"))
        throw Error(ErrorCode::InvalidArgument, "mark1 and mark2 must be given together");
      c.query = MarkQuery::bivariate(j["mark1"].get<std::string>(), j["mark2"].get<std::string>());
    }
    if (j.contains("rmax")) c.r_max = j["rmax"].get<double>();
    if (j.contains("rstep")) c.r_step = j["rstep"].get<double>();
    if (j.contains("radii")) c.radii = j["radii"].get<std::vector<double>>();
    if (j.contains("correction")) c.correction = parse_edge_correction(j["correction"].get<std::string>());
    if (j.contains("thin")) c.thin_prob = j["thin"].get<double>();
    if (j.contains("perms")) c.permutations = j["perms"].get<Index>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
    if (j.contains("input")) c.input = j["input"].get<std::string>();
    if (j.contains("windows")) c.window_file = j["windows"].get<std::string>();
    if (j.contains("schema")) {
      const auto& s = j["schema"];
      if (s.contains("sample")) c.schema.sample_column = s["sample"].get<std::string>();
      if (s.contains("x")) c.schema.x_column = s["x"].get<std::string>();
      if (s.contains("y")) c.schema.y_column = s["y"].get<std::string>();
      if (s.contains("type")) c.schema.type_columns = {s["type"].get<std::string>()};
      if (s.contains("delimiter")) {
        const auto d = s["delimiter"].get<std::string>();
        if (d.size() != 1) throw Error(ErrorCode::InvalidArgument, "delimiter must be one character");
        c.schema.delimiter = d[0];
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
  }
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["methods"] = json::array();
  for (Method m : c.methods) j["methods"].push_back(std::string(to_string(m)));
  if (c.query.is_bivariate()) {
    j["mark1"] = c.query.mark1;
    j["mark2"] = *c.query.mark2;
  } else {
    j["mark"] = c.query.mark1;
  }
  if (c.r_max) j["rmax"] = *c.r_max;
  if (c.r_step) j["rstep"] = *c.r_step;
  if (!c.radii.empty()) j["radii"] = c.radii;
  j["correction"] = std::string(to_string(c.correction));
  j["thin"] = c.thin_prob;
  j["perms"] = c.permutations;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out"] = c.out_dir.string();
  if (c.input) j["input"] = c.input->string();
  if (c.window_file) j["windows"] = c.window_file->string();
  return j;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseFailure, path.string() + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

}  // namespace kamp
