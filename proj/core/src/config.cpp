#include "structpop/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "structpop/error.hpp"
#include "structpop/kernel.hpp"

#if defined(STRUCTPOP_VENDOR_JSON)
#include <json.hpp>
#else
#include <nlohmann/json.hpp>
#endif

namespace structpop {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  fail(ErrorKind::kConfig, "config " + path + ": " + what);
}

void only_keys(const json& obj, const std::string& path,
               std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) config_error(path, "expected an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) config_error(path + "." + item.key(), "unknown key");
  }
}

double get_number(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) config_error(path + "." + key, "missing");
  const json& v = obj.at(key);
  if (!v.is_number()) config_error(path + "." + key, "expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const std::string& path, const char* key,
                 double fallback) {
  return obj.contains(key) ? get_number(obj, path, key) : fallback;
}

std::uint64_t unsigned_or(const json& obj, const std::string& path,
                          const char* key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) {
    config_error(path + "." + key, "expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<double> get_vector(const json& obj, const std::string& path,
                               const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_array()) {
    config_error(path + "." + key, "expected an array of numbers");
  }
  std::vector<double> out;
  for (const auto& v : obj.at(key)) {
    if (!v.is_number()) config_error(path + "." + key, "expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

RateFunction parse_rate(const json& j, const std::string& path) {
  only_keys(j, path, {"family", "params"});
  if (!j.contains("family") || !j.at("family").is_string()) {
    config_error(path + ".family", "expected a string");
  }
  const std::string family = j.at("family").get<std::string>();
  const json params = j.contains("params") ? j.at("params") : json::object();
  const std::string pp = path + ".params";
  try {
    if (family == "constant") {
      only_keys(params, pp, {"value"});
      return rates::Constant{get_number(params, pp, "value")};
    }
    if (family == "affine") {
      only_keys(params, pp, {"intercept", "slope"});
      return rates::Affine{get_number(params, pp, "intercept"),
                           get_number(params, pp, "slope")};
    }
    if (family == "sqrt_gap") {
      only_keys(params, pp, {"peak", "origin"});
      return rates::SqrtGap{get_number(params, pp, "peak"),
                            number_or(params, pp, "origin", 0.0)};
    }
    if (family == "gaussian") {
      only_keys(params, pp, {"base", "amplitude", "center", "width"});
      return rates::Gaussian{get_number(params, pp, "base"),
                             get_number(params, pp, "amplitude"),
                             get_number(params, pp, "center"),
                             get_number(params, pp, "width")};
    }
    if (family == "logistic_age") {
      only_keys(params, pp, {"low", "high", "midpoint", "steepness"});
      return rates::LogisticAge{get_number(params, pp, "low"),
                                get_number(params, pp, "high"),
                                get_number(params, pp, "midpoint"),
                                get_number(params, pp, "steepness")};
    }
    if (family == "tabulated") {
      only_keys(params, pp, {"traits", "ages", "values"});
      return rates::Tabulated{get_vector(params, pp, "traits"),
                              get_vector(params, pp, "ages"),
                              get_vector(params, pp, "values")};
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    config_error(path, e.what());
  }
  config_error(path + ".family", "unknown rate family '" + family + "'");
}

json emit_rate(const RateFunction& f) {
  json params = std::visit(
      [](const auto& r) -> json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, rates::Constant>) {
          return {{"value", r.value}};
        } else if constexpr (std::is_same_v<T, rates::Affine>) {
          return {{"intercept", r.intercept}, {"slope", r.slope}};
        } else if constexpr (std::is_same_v<T, rates::SqrtGap>) {
          return {{"peak", r.peak}, {"origin", r.origin}};
        } else if constexpr (std::is_same_v<T, rates::Gaussian>) {
          return {{"base", r.base},
                  {"amplitude", r.amplitude},
                  {"center", r.center},
                  {"width", r.width}};
        } else if constexpr (std::is_same_v<T, rates::LogisticAge>) {
          return {{"low", r.low},
                  {"high", r.high},
                  {"midpoint", r.midpoint},
                  {"steepness", r.steepness}};
        } else {
          return {{"traits", r.traits}, {"ages", r.ages}, {"values", r.values}};
        }
      },
      f.family());
  return {{"family", std::string(f.family_name())}, {"params", params}};
}

MutationKernel::Family parse_kernel(const json& j, const std::string& path) {
  only_keys(j, path, {"family", "params"});
  if (!j.contains("family") || !j.at("family").is_string()) {
    config_error(path + ".family", "expected a string");
  }
  const std::string family = j.at("family").get<std::string>();
  const json params = j.contains("params") ? j.at("params") : json::object();
  const std::string pp = path + ".params";
  if (family == "uniform") {
    only_keys(params, pp, {});
    return kernels::Uniform{};
  }
  if (family == "gaussian") {
    only_keys(params, pp, {"width"});
    const double w = get_number(params, pp, "width");
    if (!(w > 0.0)) config_error(pp + ".width", "must be > 0");
    return kernels::Gaussian{w};
  }
  config_error(path + ".family", "unknown kernel family '" + family + "'");
}

}  // namespace

ScenarioConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(root, "$",
            {"name", "trait_domain", "rates", "kernel", "p", "c", "grids",
             "solver", "simulation", "seed", "output_dir"});
  ScenarioConfig cfg;
  if (root.contains("name")) {
    if (!root.at("name").is_string()) config_error("$.name", "expected a string");
    cfg.name = root.at("name").get<std::string>();
  }
  if (root.contains("trait_domain")) {
    const json& d = root.at("trait_domain");
    if (!d.is_array() || d.size() != 2 || !d[0].is_number() || !d[1].is_number()) {
      config_error("$.trait_domain", "expected [lo, hi]");
    }
    cfg.trait_domain = {d[0].get<double>(), d[1].get<double>()};
    if (!(cfg.trait_domain.lo < cfg.trait_domain.hi)) {
      config_error("$.trait_domain", "requires lo < hi");
    }
  }
  if (!root.contains("rates")) config_error("$.rates", "missing");
  const json& r = root.at("rates");
  only_keys(r, "$.rates", {"birth", "death"});
  if (!r.contains("birth")) config_error("$.rates.birth", "missing");
  if (!r.contains("death")) config_error("$.rates.death", "missing");
  cfg.birth = parse_rate(r.at("birth"), "$.rates.birth");
  cfg.death = parse_rate(r.at("death"), "$.rates.death");
  if (root.contains("kernel")) cfg.kernel = parse_kernel(root.at("kernel"), "$.kernel");
  cfg.p = number_or(root, "$", "p", cfg.p);
  cfg.c = number_or(root, "$", "c", cfg.c);
  if (!(cfg.p > 0.0 && cfg.p < 1.0)) config_error("$.p", "must lie in (0, 1)");
  if (!(cfg.c >= 0.0) || !std::isfinite(cfg.c)) config_error("$.c", "must be >= 0");

  if (root.contains("grids")) {
    const json& g = root.at("grids");
    only_keys(g, "$.grids", {"nx", "da", "tol"});
    cfg.grids.nx = unsigned_or(g, "$.grids", "nx", cfg.grids.nx);
    cfg.grids.da = number_or(g, "$.grids", "da", cfg.grids.da);
    cfg.grids.tol = number_or(g, "$.grids", "tol", cfg.grids.tol);
  }
  if (cfg.grids.nx < 2) config_error("$.grids.nx", "must be >= 2");
  if (!(cfg.grids.da > 0.0)) config_error("$.grids.da", "must be > 0");
  if (!(cfg.grids.tol > 0.0)) config_error("$.grids.tol", "must be > 0");

  if (root.contains("solver")) {
    const json& s = root.at("solver");
    only_keys(s, "$.solver",
              {"perron_tol", "perron_max_iter", "lambda_tol", "gap_tol_rel"});
    cfg.solver.perron_tol = number_or(s, "$.solver", "perron_tol", cfg.solver.perron_tol);
    cfg.solver.perron_max_iter =
        unsigned_or(s, "$.solver", "perron_max_iter", cfg.solver.perron_max_iter);
    cfg.solver.lambda_tol = number_or(s, "$.solver", "lambda_tol", cfg.solver.lambda_tol);
    cfg.solver.gap_tol_rel =
        number_or(s, "$.solver", "gap_tol_rel", cfg.solver.gap_tol_rel);
  }
  if (!(cfg.solver.perron_tol > 0.0)) config_error("$.solver.perron_tol", "must be > 0");
  if (!(cfg.solver.lambda_tol > 0.0)) config_error("$.solver.lambda_tol", "must be > 0");
  if (!(cfg.solver.gap_tol_rel > 0.0)) config_error("$.solver.gap_tol_rel", "must be > 0");

  if (root.contains("simulation")) {
    const json& s = root.at("simulation");
    only_keys(s, "$.simulation", {"tmax", "replicates", "K"});
    cfg.simulation.tmax = number_or(s, "$.simulation", "tmax", cfg.simulation.tmax);
    cfg.simulation.replicates =
        unsigned_or(s, "$.simulation", "replicates", cfg.simulation.replicates);
    cfg.simulation.scale = number_or(s, "$.simulation", "K", cfg.simulation.scale);
  }
  if (!(cfg.simulation.tmax > 0.0)) config_error("$.simulation.tmax", "must be > 0");
  if (!(cfg.simulation.scale >= 1.0)) config_error("$.simulation.K", "must be >= 1");

  cfg.seed = unsigned_or(root, "$", "seed", cfg.seed);
  if (root.contains("output_dir")) {
    if (!root.at("output_dir").is_string()) {
      config_error("$.output_dir", "expected a string");
    }
    cfg.output_dir = root.at("output_dir").get<std::string>();
  }
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string emit_config(const ScenarioConfig& cfg) {
  json kernel;
  if (const auto* g = std::get_if<kernels::Gaussian>(&cfg.kernel)) {
    kernel = {{"family", "gaussian"}, {"params", {{"width", g->width}}}};
  } else {
    kernel = {{"family", "uniform"}, {"params", json::object()}};
  }
  json root = {
      {"name", cfg.name},
      {"trait_domain", {cfg.trait_domain.lo, cfg.trait_domain.hi}},
      {"rates", {{"birth", emit_rate(cfg.birth)}, {"death", emit_rate(cfg.death)}}},
      {"kernel", kernel},
      {"p", cfg.p},
      {"c", cfg.c},
      {"grids", {{"nx", cfg.grids.nx}, {"da", cfg.grids.da}, {"tol", cfg.grids.tol}}},
      {"solver",
       {{"perron_tol", cfg.solver.perron_tol},
        {"perron_max_iter", cfg.solver.perron_max_iter},
        {"lambda_tol", cfg.solver.lambda_tol},
        {"gap_tol_rel", cfg.solver.gap_tol_rel}}},
      {"simulation",
       {{"tmax", cfg.simulation.tmax},
        {"replicates", cfg.simulation.replicates},
        {"K", cfg.simulation.scale}}},
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
  };
  return root.dump(2) + "\n";
}

RateModel make_model(const ScenarioConfig& cfg) {
  return RateModel(cfg.trait_domain, cfg.birth, cfg.death,
                   MutationKernel(cfg.kernel, cfg.trait_domain), cfg.p, cfg.c);
}

Grids build_grids(const RateModel& model, const GridSettings& settings) {
  require(settings.nx >= 2, ErrorKind::kInvalidArgument,
          "grids need nx >= 2");
  require(settings.tol > 0.0, ErrorKind::kInvalidArgument,
          "truncation tolerance must be > 0");
  require(settings.da > 0.0, ErrorKind::kInvalidArgument,
          "age step must be > 0");
  Grids g;
  g.trait = make_trait_grid(model.domain(), settings.nx);
  const double horizon =
      choose_age_truncation(model, 0.0, settings.tol, settings.da);
  const auto steps =
      static_cast<std::size_t>(std::llround(horizon / settings.da));
  g.age = make_age_grid(settings.da, steps, settings.tol);
  return g;
}

Grids build_grids(const ScenarioConfig& cfg) {
  return build_grids(make_model(cfg), cfg.grids);
}

ScenarioConfig preset_constant() {
  ScenarioConfig c;
  c.name = "constant";
  c.trait_domain = {0.0, 1.0};
  c.birth = rates::Constant{2.0};
  c.death = rates::Constant{1.0};
  c.kernel = kernels::Uniform{};
  c.p = 0.3;
  c.c = 1.0;
  return c;
}

ScenarioConfig preset_singular() {
  ScenarioConfig c;
  c.name = "singular";
  c.trait_domain = {0.0, 1.0};
  c.birth = rates::SqrtGap{4.0, 0.0};
  c.death = rates::Constant{1.0};
  c.kernel = kernels::Uniform{};
  c.p = 0.05;
  c.c = 1.0;
  c.grids.nx = 800;
  return c;
}

ScenarioConfig preset(const std::string& name) {
  if (name == "constant") return preset_constant();
  if (name == "singular") return preset_singular();
  fail(ErrorKind::kInvalidArgument, "unknown preset '" + name + "'");
}

}  // namespace structpop
