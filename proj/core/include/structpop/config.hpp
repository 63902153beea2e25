#pragma once

#include <cstdint>
#include <string>

#include "structpop/grid.hpp"
#include "structpop/model.hpp"

namespace structpop {

struct GridSettings {
  std::size_t nx = 64;
  double da = 0.01;
  double tol = 1e-10;
  bool operator==(const GridSettings&) const = default;
};

struct SolverSettings {
  double perron_tol = 1e-12;
  std::size_t perron_max_iter = 200000;
  double lambda_tol = 1e-6;
  /// Regime threshold relative to rho.
  double gap_tol_rel = 1e-3;
  bool operator==(const SolverSettings&) const = default;
};

struct SimulationSettings {
  double tmax = 30.0;
  std::size_t replicates = 50;
  double scale = 2000.0;
  bool operator==(const SimulationSettings&) const = default;
};

/// Serializable description of a scenario.
struct ScenarioConfig {
  std::string name = "custom";
  Interval trait_domain{};
  RateFunction birth{rates::Constant{2.0}};
  RateFunction death{rates::Constant{1.0}};
  MutationKernel::Family kernel = kernels::Uniform{};
  double p = 0.3;
  double c = 1.0;
  GridSettings grids{};
  SolverSettings solver{};
  SimulationSettings simulation{};
  std::uint64_t seed = 20240601;
  std::string output_dir = "out";

  bool operator==(const ScenarioConfig&) const = default;
};

/// Parses the JSON schema. Unknown keys and malformed values throw a config
/// error naming the offending path.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);
std::string emit_config(const ScenarioConfig& config);

RateModel make_model(const ScenarioConfig& config);

/// Midpoint trait grid plus an age lattice truncated where the neglected
/// tail drops below grids.tol at lambda = 0.
Grids build_grids(const ScenarioConfig& config);
Grids build_grids(const RateModel& model, const GridSettings& settings);

/// S=[0,1], B=2, D=1, uniform kernel, p=0.3, c=1.
ScenarioConfig preset_constant();
/// S=[0,1], B=4-sqrt(x), D=1, uniform kernel, p=0.05, c=1.
ScenarioConfig preset_singular();
/// Looks up a preset by name ("constant" or "singular").
ScenarioConfig preset(const std::string& name);

}  // namespace structpop
