#pragma once

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "shtk/dyadic.hpp"
#include "shtk/weights.hpp"

namespace shtk {

using json = nlohmann::json;

inline MetricKind metric_from_name(const std::string& name) {
  if (name == "euclidean") return MetricKind::Euclidean;
  if (name == "heisenberg") return MetricKind::Heisenberg;
  if (name == "omega-k") return MetricKind::OmegaK;
  if (name == "halfline") return MetricKind::HalfLine;
  if (name == "halfspace") return MetricKind::HalfSpace;
  fail("unknown metric: " + name);
}

inline json space_to_json(const Space& sp) {
  json j;
  j["model"] = sp.model();
  j["model_param"] = sp.model_param();
  j["metric"] = metric_name(sp.metric());
  j["omega_k"] = sp.omega_k();
  json pts = json::array(), mass = json::array();
  for (int i = 0; i < sp.size(); ++i) {
    pts.push_back(sp.point(i));
    mass.push_back(sp.mass(i));
  }
  j["points"] = pts;
  j["masses"] = mass;
  return j;
}

inline Space space_from_json(const json& j) {
  std::vector<Field> pts;
  for (const auto& p : j.at("points")) pts.push_back(p.get<Field>());
  Field mass = j.at("masses").get<Field>();
  return Space(std::move(pts), std::move(mass), metric_from_name(j.at("metric")),
               j.value("omega_k", 1), j.value("model", ""), j.value("model_param", 0.0));
}

// Point-cloud CSV: id,x1,...,xd,mass (mass optional; defaults to 1/n).
inline Space space_from_csv(const std::string& path, MetricKind metric, int omega_k = 1,
                            bool has_mass = true) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  std::vector<Field> pts;
  Field mass;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || std::isalpha(line[0])) continue;
    std::stringstream ss(line);
    std::string cell;
    Field row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    require(row.size() >= 2, "csv row needs id and at least one coordinate");
    if (has_mass) {
      mass.push_back(row.back());
      pts.push_back(Field(row.begin() + 1, row.end() - 1));
    } else {
      pts.push_back(Field(row.begin() + 1, row.end()));
    }
  }
  if (!has_mass || mass.empty()) mass.assign(pts.size(), 1.0 / double(pts.size()));
  return Space(std::move(pts), std::move(mass), metric, omega_k, "csv");
}

inline Field field_from_csv(const std::string& path, int expected_size) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  Field out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || std::isalpha(line[0])) continue;
    std::stringstream ss(line);
    std::string cell;
    Field row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    out.push_back(row.back());  // value is the last column (id optional)
  }
  require(int(out.size()) == expected_size, "field length does not match the space");
  return out;
}

// Weight specs: "const:c", "pow:a", "file:path".
inline Weight weight_from_spec(const Space& sp, const std::string& spec) {
  auto colon = spec.find(':');
  std::string kind = colon == std::string::npos ? spec : spec.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "const") return constant_weight(sp.size(), arg.empty() ? 1.0 : std::stod(arg));
  if (kind == "pow") return power_weight(sp, std::stod(arg));
  if (kind == "file") return Weight(field_from_csv(arg, sp.size()));
  fail("unknown weight spec: " + spec);
}

// Built-in model generators keyed by name (the CLI surface).
inline Space space_from_model(const std::string& model, int n, double lambda = 1.0, int k = 1) {
  if (model == "grid1d") return make_grid1d(n);
  if (model == "grid2d") {
    int side = std::max(1, int(std::round(std::sqrt(double(n)))));
    return make_grid2d(side);
  }
  if (model == "halfline") return make_halfline(n, lambda);
  if (model == "heisenberg") {
    int side = std::max(1, int(std::round(std::cbrt(double(n) / 2.0))));
    return make_heisenberg_lattice(side, 2 * side);
  }
  if (model == "omegak") {
    int side = std::max(1, int(std::round(std::cbrt(double(n)))));
    return make_omegak_boundary(side, side, k);
  }
  if (model == "halfspace") {
    int side = std::max(1, int(std::round(std::sqrt(double(n)))));
    return make_halfspace(side, 2, lambda);
  }
  fail("unknown model: " + model);
}

inline json system_to_json(const DyadicSystem& sys) {
  json j;
  j["delta"] = sys.delta();
  j["k_min"] = sys.k_min();
  j["k_max"] = sys.k_max();
  j["seed"] = sys.seed();
  j["a1"] = sys.constants().a1;
  j["A1"] = sys.constants().A1;
  j["c_mu0"] = sys.constants().c_mu0;
  j["max_children"] = sys.constants().max_children;
  json levels = json::array();
  for (int level = 0; level < sys.level_count(); ++level) {
    json cubes = json::array();
    for (int qi : sys.level_cubes(level)) {
      const Cube& q = sys.cube(qi);
      json cj;
      cj["center"] = q.center;
      cj["members"] = q.members;
      cj["parent_center"] = q.parent >= 0 ? sys.cube(q.parent).center : -1;
      cj["inner_radius"] = q.inner_radius;
      cj["outer_radius"] = q.outer_radius;
      cubes.push_back(cj);
    }
    levels.push_back(json{{"generation", sys.gen_of_level(level)}, {"cubes", cubes}});
  }
  j["levels"] = levels;
  return j;
}

struct SystemsFile {
  Space space;
  double delta;
  int k_min, k_max;
  std::vector<int> seeds;
};

inline json systems_to_json(const AdjacentSystems& adj) {
  json j;
  j["space"] = space_to_json(adj.space());
  j["delta"] = adj.delta();
  json systems = json::array();
  for (int t = 0; t < adj.count(); ++t) systems.push_back(system_to_json(adj.system(t)));
  j["systems"] = systems;
  j["c_adj"] = adj.c_adj();
  j["coverage"] = adj.coverage();
  return j;
}

// Rebuild from the stored parameters (construction is deterministic).
inline SystemsFile systems_params_from_json(const json& j) {
  SystemsFile out{space_from_json(j.at("space")), j.at("delta").get<double>(),
                  j.at("systems").at(0).at("k_min").get<int>(),
                  j.at("systems").at(0).at("k_max").get<int>(),
                  {}};
  for (const auto& s : j.at("systems")) out.seeds.push_back(s.at("seed").get<int>());
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  out << text;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail("config parse error in " + path + ": " + e.what());
  }
  return j;
}

}  // namespace shtk
