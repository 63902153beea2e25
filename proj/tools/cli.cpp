#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>

#include "structpop/config.hpp"
#include "structpop/csv.hpp"
#include "structpop/error.hpp"
#include "structpop/ibm.hpp"
#include "structpop/kernel.hpp"
#include "structpop/malthus.hpp"
#include "structpop/pde.hpp"
#include "structpop/spectral.hpp"

#if defined(STRUCTPOP_VENDOR_JSON)
#include <json.hpp>
#else
#include <nlohmann/json.hpp>
#endif

namespace structpop::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::string out;
  std::size_t nx = 0;
  double da = 0.0;
  double tol = 0.0;
  std::uint64_t seed = 0;
  std::size_t replicates = 0;
  double tmax = 0.0;
  std::vector<CLI::Option*> options;

  bool given(const std::string& name) const {
    for (CLI::Option* o : options) {
      if (o->get_name() == name && o->count() > 0) return true;
    }
    return false;
  }
};

/// Output directory, summary document and file manifest of one invocation.
class Report {
 public:
  Report(fs::path dir, const ScenarioConfig& config) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
      fail(ErrorKind::kIo, "cannot create output directory '" + dir_.string() + "'");
    }
    summary_["scenario"] = config.name;
    summary_["config"] = json::parse(emit_config(config));
  }

  std::ofstream open(const std::string& name) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) fail(ErrorKind::kIo, "cannot write '" + (dir_ / name).string() + "'");
    manifest_.push_back(name);
    return f;
  }

  json& operator[](const std::string& key) { return summary_[key]; }

  /// Writes summary.json after checking every manifest entry is non-empty.
  const json& finish() {
    for (const std::string& name : manifest_) {
      std::error_code ec;
      const auto size = fs::file_size(dir_ / name, ec);
      if (ec || size == 0) fail(ErrorKind::kIo, "artifact '" + name + "' is missing or empty");
    }
    manifest_.push_back("summary.json");
    summary_["manifest"] = manifest_;
    std::ofstream f(dir_ / "summary.json", std::ios::binary);
    if (!f) fail(ErrorKind::kIo, "cannot write summary.json");
    f << summary_.dump(2) << '\n';
    if (!f) fail(ErrorKind::kIo, "cannot write summary.json");
    return summary_;
  }

 private:
  fs::path dir_;
  json summary_;
  std::vector<std::string> manifest_;
};

void apply_overrides(ScenarioConfig& c, const Flags& f) {
  if (f.given("--nx")) c.grids.nx = f.nx;
  if (f.given("--da")) c.grids.da = f.da;
  if (f.given("--tol")) c.solver.lambda_tol = f.tol;
  if (f.given("--seed")) c.seed = f.seed;
  if (f.given("--replicates")) c.simulation.replicates = f.replicates;
  if (f.given("--tmax")) c.simulation.tmax = f.tmax;
  if (f.given("--out")) c.output_dir = f.out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json regime_json(const RegimeReport& r) {
  return {{"regime", std::string(to_string(r.regime))},
          {"gap", r.gap},
          {"gap_tol", r.gap_tol},
          {"plateau_count", r.plateau_count},
          {"band", {r.band.lo, r.band.hi}},
          {"band_mass", r.band_mass}};
}

void emit_spectral(Report& rep, MalthusSolver& solver, double lambda_max,
                   std::size_t points) {
  require(points >= 2 && lambda_max > 0.0, ErrorKind::kInvalidArgument,
          "spectral sweep needs --points >= 2 and --lambda-max > 0");
  auto f = rep.open("rho_curve.csv");
  CsvWriter csv(f, {"lambda", "rho_direct", "rho_dual", "rbar", "gap", "regime", "iterations"});
  bool decreasing = true;
  double prev = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double lambda = lambda_max * static_cast<double>(k) / static_cast<double>(points - 1);
    const PerronPair& d = solver.pair(lambda, OperatorKind::kDirect);
    const double rho = d.rho;
    const auto regime = d.regime;
    const auto iterations = d.iterations;
    const double rho_dual = solver.pair(lambda, OperatorKind::kDual).rho;
    const CollapsedKernel ker = solver.kernel(lambda);
    if (k > 0 && !(rho < prev)) decreasing = false;
    prev = rho;
    csv.row({lambda, rho, rho_dual, ker.rbar, rho - ker.rbar,
             std::string(to_string(regime)), static_cast<std::int64_t>(iterations)});
  }
  {
    auto kf = rep.open("kernel.csv");
    write_kernel_csv(kf, solver.kernel(0.0), solver.grids().trait);
  }
  const PerronPair p0 = solver.pair(0.0);
  RegimeOptions ro;
  ro.gap_tol_rel = solver.options().perron.gap_tol_rel;
  rep["spectral"] = {{"rho_at_zero", p0.rho},
                     {"strictly_decreasing", decreasing},
                     {"points", points},
                     {"lambda_max", lambda_max},
                     {"regime_at_zero",
                      regime_json(regime_classify(p0, solver.kernel(0.0),
                                                  solver.grids().trait, ro))}};
}

EigenTriple emit_malthus(Report& rep, MalthusSolver& solver) {
  EigenTriple t = eigen_triple(solver);
  const Grids& g = solver.grids();
  const CollapsedKernel ker = solver.kernel(t.lambda_star);
  {
    // u is the continuous density behind the Perron profile; blank when the
    // regime does not support one.
    std::optional<DensityResult> u;
    if (t.regime == Regime::kRegular) {
      u = density_from_profile(solver.pair(t.lambda_star), ker, g.trait,
                               t.regime_report.gap_tol);
    }
    auto f = rep.open("eigen.csv");
    CsvWriter csv(f, {"x", "weight", "profile", "u", "eta", "r"});
    for (std::size_t i = 0; i < g.trait.size(); ++i) {
      csv.row({g.trait.nodes[i], g.trait.weights[i], t.mu[i],
               u ? CsvWriter::Cell{u->u[i]} : CsvWriter::Cell{std::string()}, t.eta[i],
               ker.r[i]});
    }
  }
  {
    auto f = rep.open("eigen_triple.csv");
    CsvWriter csv(f, {"x", "a", "N", "phi"});
    for (std::size_t i = 0; i < g.trait.size(); ++i) {
      for (std::size_t j = 0; j < g.age.nodes(); ++j) {
        csv.row({g.trait.nodes[i], g.age.node(j), t.N(i, j), t.phi(i, j)});
      }
    }
  }
  rep["malthus"] = {
      {"lambda_star", t.lambda_star},
      {"rho_at_zero", t.rho_at_zero},
      {"int_N", t.int_N},
      {"int_N_phi", t.int_N_phi},
      {"eta_lower", {{"grid_value", t.eta_lower.grid_value},
                     {"proof_bound", t.eta_lower.proof_bound},
                     {"warning", t.eta_lower.warning}}},
      {"regime", regime_json(t.regime_report)},
      {"boundary_identity_residual", boundary_identity_residual(t.N, solver.collapser())},
      {"dual_equation_residual",
       dual_equation_residual(t.phi, t.lambda_star, solver.collapser())},
      {"age_horizon", g.age.horizon()},
      {"warning", t.warning}};
  return t;
}

StationaryState emit_stationary(Report& rep, const EigenTriple& t,
                                const RateModel& model, const Grids& g) {
  StationaryState s = stationary_state(t, model, g);
  auto f = rep.open("stationary.csv");
  CsvWriter csv(f, {"x", "a", "nbar"});
  for (std::size_t i = 0; i < g.trait.size(); ++i) {
    for (std::size_t j = 0; j < g.age.nodes(); ++j) {
      csv.row({g.trait.nodes[i], g.age.node(j), s.nbar(i, j)});
    }
  }
  rep["stationary"] = {
      {"mass", s.mass},
      {"c_times_mass", model.competition() * s.mass},
      {"lambda_star", s.lambda_star},
      {"weak_form_residual",
       stationary_residual(s.nbar, model, g, default_test_basket(g.trait.domain))}};
  return s;
}

AgeTraitField initial_density(const std::string& kind, const Grids& g,
                              const std::optional<StationaryState>& st) {
  if (kind == "uniform") return uniform_density(g, 1.0, 1.0);
  if (kind == "dirac") {
    const Interval& d = g.trait.domain;
    return dirac_density(g, 0.5 * (d.lo + d.hi), 0.5, 1.0);
  }
  if (kind == "nbar3") {
    require(st.has_value(), ErrorKind::kInvalidArgument,
            "initial data 'nbar3' needs competition c > 0");
    AgeTraitField n = st->nbar;
    for (double& v : n.data()) v *= 3.0;
    return n;
  }
  fail(ErrorKind::kInvalidArgument, "unknown initial data '" + kind + "'");
}

void emit_pde(Report& rep, const ScenarioConfig& cfg, const RateModel& model,
              const Grids& g, const std::string& initial, const std::string& which,
              double snapshot_every) {
  require(which == "nonlinear" || which == "linear" || which == "both",
          ErrorKind::kInvalidArgument, "--dynamics must be nonlinear, linear or both");
  MalthusSolver solver(model, g, malthus_options(cfg.solver));
  const EigenTriple t = eigen_triple(solver);
  std::optional<StationaryState> st;
  if (model.competition() > 0.0) st = stationary_state(t, model, g);
  const AgeTraitField n0 = initial_density(initial, g, st);
  const PdeSolver pde(model, g);
  const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 / pde.dt())));

  auto trace_file = rep.open("pde_trace.csv");
  CsvWriter trace(trace_file, {"dynamics", "t", "mass", "tv_to_stationary", "phi_dist",
                               "invariant", "D_t", "truncation_loss"});
  std::optional<std::ofstream> snap_file;
  std::optional<CsvWriter> snaps;
  if (snapshot_every > 0.0) {
    snap_file.emplace(rep.open("pde_snapshots.csv"));
    snaps.emplace(*snap_file, std::vector<std::string>{"dynamics", "t", "x", "a", "n"});
  }

  json runs = json::object();
  for (const Dynamics d : {Dynamics::kNonlinear, Dynamics::kLinear}) {
    const std::string name = d == Dynamics::kNonlinear ? "nonlinear" : "linear";
    if (which != "both" && which != name) continue;
    RunOptions o;
    o.dynamics = d;
    o.tmax = cfg.simulation.tmax;
    o.record_every = every;
    o.lambda_star = t.lambda_star;
    o.phi = t.phi;
    if (snapshot_every > 0.0) {
      o.snapshot_every = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(snapshot_every / pde.dt())));
    }
    double m0 = 0.0;
    if (d == Dynamics::kNonlinear) {
      if (st) o.target = st->nbar;
    } else {
      m0 = integrate_product(n0, t.phi, g);
      AgeTraitField target = t.N;
      for (double& v : target.data()) v *= m0;
      o.target = std::move(target);
      o.discount = t.lambda_star;
    }
    const Run run = simulate(pde, make_state(n0, g), o);
    for (const TraceRecord& r : run.trace) {
      trace.row({name, r.t, r.mass, r.tv_to_target, r.phi_dist, r.invariant, r.D_t,
                 r.truncation_loss});
    }
    if (snaps) {
      for (const DensityState& s : run.snapshots) {
        for (std::size_t i = 0; i < s.n.traits(); ++i) {
          for (std::size_t j = 0; j < s.n.ages(); ++j) {
            snaps->row({name, s.t, g.trait.nodes[i], g.age.node(j), s.n(i, j)});
          }
        }
      }
    }
    const TraceRecord& last = run.trace.back();
    json r = {{"final_mass", last.mass},
              {"final_time", last.t},
              {"truncation_loss", last.truncation_loss}};
    if (d == Dynamics::kNonlinear) {
      const auto ode = mass_ode_diag(run.trace, t.lambda_star, model.competition());
      r["mass_ode_max_residual"] = ode.max_residual;
      r["final_abs_D"] = ode.final_abs_D;
      if (st) r["final_tv_to_nbar"] = last.tv_to_target;
    } else {
      const double inv0 = run.trace.front().invariant;
      double drift = 0.0;
      for (const TraceRecord& x : run.trace) {
        drift = std::max(drift, std::abs(x.invariant - inv0) / inv0);
      }
      r["m0"] = m0;
      r["invariant_drift"] = drift;
      r["final_phi_dist"] = last.phi_dist;
    }
    runs[name] = r;
  }
  rep["pde"] = {{"initial", initial}, {"runs", runs}, {"dt", pde.dt()}};
  if (t.regime == Regime::kPossiblySingular) {
    rep["pde"]["convergence_report"] =
        "refused: the Perron problem is possibly singular on this grid";
  }
}

void emit_ibm(Report& rep, const ScenarioConfig& cfg, const RateModel& model,
              const Grids& g, const std::string& which) {
  require(which == "nonlinear" || which == "linear", ErrorKind::kInvalidArgument,
          "--dynamics must be nonlinear or linear");
  const Dynamics d = which == "nonlinear" ? Dynamics::kNonlinear : Dynamics::kLinear;
  std::optional<EigenTriple> t;
  try {
    MalthusSolver solver(model, g, malthus_options(cfg.solver));
    t = eigen_triple(solver);
  } catch (const SubcriticalError&) {
  }
  const AgeTraitField n0 = uniform_density(g, 1.0, 1.0);
  const IbmSimulator sim(model, g.trait);
  IbmOptions o;
  o.tmax = cfg.simulation.tmax;
  o.seed = cfg.seed;
  for (int k = 0; k <= 20; ++k) o.sample_times.push_back(o.tmax * k / 20.0);
  ReplicateOptions ro;
  ro.dynamics = d;
  ro.replicates = cfg.simulation.replicates;
  ro.scale = cfg.simulation.scale;
  if (t) {
    ro.phi = t->phi;
    ro.lambda_star = t->lambda_star;
  }
  const ReplicateSummary s = run_replicates(sim, n0, g, o, ro);

  auto f = rep.open("ibm_trace.csv");
  CsvWriter csv(f, {"replicate", "t", "mass", "V"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> final_mass, dv;
  for (std::size_t r = 0; r < s.mass.size(); ++r) {
    for (std::size_t k = 0; k < s.mass[r].size(); ++k) {
      const double v = s.V.empty() ? nan : s.V[r][k];
      csv.row({static_cast<std::int64_t>(r), s.times[k], s.mass[r][k], v});
    }
    if (s.mass[r].size() == s.times.size()) final_mass.push_back(s.mass[r].back());
    if (!s.V.empty() && s.V[r].size() == s.times.size()) dv.push_back(s.V[r].back() - s.V[r].front());
  }

  RunOptions po;
  po.dynamics = d;
  po.tmax = o.tmax;
  po.record_every = std::numeric_limits<std::size_t>::max();
  const double pde_mass = simulate(PdeSolver(model, g), make_state(n0, g), po).final_state.mass;

  auto ci_json = [](const MeanCi& c) {
    return json{{"mean", c.mean}, {"se", c.se}, {"sd", c.sd}, {"n", c.n},
                {"ci95", {c.mean - 1.96 * c.se, c.mean + 1.96 * c.se}}};
  };
  const MeanCi mc = mean_ci(final_mass);
  json j = {{"dynamics", which},
            {"scale", ro.scale},
            {"replicates", ro.replicates},
            {"aborted", s.aborted},
            {"final_mass", ci_json(mc)},
            {"pde_mass_at_tmax", pde_mass},
            {"mass_discrepancy_in_se",
             finite_or_null(mc.se > 0.0 ? std::abs(mc.mean - pde_mass) / mc.se : nan)}};
  if (t) {
    j["martingale_increment"] = ci_json(mean_ci(dv));
    const MartingaleHypothesis h = martingale_hypothesis(t->phi, model, g);
    j["martingale_hypothesis"] = {{"c_hat", finite_or_null(h.c_hat)}, {"finite", h.finite},
                                  {"note", h.note}};
  }
  rep["ibm"] = j;
}

struct Check {
  std::string name;
  double value;
  double tolerance;
  bool pass;
};

bool emit_verify(Report& rep, const ScenarioConfig& cfg, const RateModel& model,
                 const Grids& g) {
  std::vector<Check> checks;
  auto le = [&](std::string name, double value, double tol) {
    checks.push_back({std::move(name), value, tol, std::isfinite(value) && value <= tol});
  };
  const AssumptionReport ar = validate_assumptions(model, g);
  checks.push_back({"assumptions", ar.all_ok() ? 1.0 : 0.0, 1.0, ar.all_ok()});

  MalthusSolver solver(model, g, malthus_options(cfg.solver));
  const EigenTriple t = eigen_triple(solver);
  double prev = std::numeric_limits<double>::infinity();
  double margin = std::numeric_limits<double>::infinity();
  double dual_gap = 0.0;
  for (double lambda : {0.0, 0.5, 1.0, 2.0, 3.0}) {
    const double rd = solver.pair(lambda, OperatorKind::kDirect).rho;
    const double ru = solver.pair(lambda, OperatorKind::kDual).rho;
    dual_gap = std::max(dual_gap, std::abs(rd - ru) / rd);
    if (std::isfinite(prev)) margin = std::min(margin, prev - rd);
    prev = rd;
  }
  le("rho_direct_vs_dual", dual_gap, 1e-10);
  checks.push_back({"rho_strictly_decreasing", margin, 1e-6, margin >= 1e-6});
  const CollapsedKernel ker = solver.kernel(t.lambda_star);
  le("adjoint_defect",
     adjoint_residual(assemble(ker, g.trait, OperatorKind::kDirect),
                      assemble(ker, g.trait, OperatorKind::kDual)),
     1e-14);
  le("rho_at_lambda_star", std::abs(solver.pair(t.lambda_star).rho - 1.0), 1e-4);
  le("int_N", std::abs(t.int_N - 1.0), 1e-8);
  le("int_N_phi", std::abs(t.int_N_phi - 1.0), 1e-8);
  le("boundary_identity", boundary_identity_residual(t.N, solver.collapser()), 1e-4);
  le("dual_equation", dual_equation_residual(t.phi, t.lambda_star, solver.collapser()), 1e-3);
  checks.push_back({"eta_lower_positive", t.eta_lower.proof_bound, 0.0,
                    t.eta_lower.proof_bound > 0.0});
  if (model.competition() > 0.0) {
    const StationaryState s = stationary_state(t, model, g);
    le("stationary_weak_form",
       stationary_residual(s.nbar, model, g, default_test_basket(g.trait.domain)), 1e-3);
    le("competition_mass", std::abs(model.competition() * s.mass - t.lambda_star), 1e-8);
  }
  const PdeSolver pde(model, g);
  {
    const Interval& d = g.trait.domain;
    AgeTraitField v0 = t.N;
    for (std::size_t i = 0; i < v0.traits(); ++i) {
      const double f = 1.0 + 0.5 * std::cos(std::numbers::pi * (g.trait.nodes[i] - d.lo) / d.length());
      for (std::size_t j = 0; j < v0.ages(); ++j) v0(i, j) *= f;
    }
    RunOptions o;
    o.dynamics = Dynamics::kLinear;
    o.tmax = 5.0;
    o.phi = t.phi;
    o.discount = t.lambda_star;
    o.record_every = 10;
    const Run run = simulate(pde, make_state(v0, g), o);
    double drift = 0.0;
    for (const TraceRecord& r : run.trace) {
      drift = std::max(drift, std::abs(r.invariant / run.trace.front().invariant - 1.0));
    }
    le("linear_invariant_drift", drift, 1e-3);
  }
  {
    const PdeSolver free(model.with_competition(0.0), g);
    le("transform_identity_c0", transform_check(free, uniform_density(g, 1.0, 1.0), 1.0), 0.0);
  }

  json list = json::array();
  bool ok = true;
  auto f = rep.open("verify.csv");
  CsvWriter csv(f, {"check", "value", "tolerance", "pass"});
  for (const Check& c : checks) {
    ok = ok && c.pass;
    csv.row({c.name, c.value, c.tolerance, std::string(c.pass ? "true" : "false")});
    list.push_back({{"check", c.name}, {"value", finite_or_null(c.value)},
                    {"tolerance", c.tolerance}, {"pass", c.pass}});
  }
  rep["verify"] = {{"checks", list},
                   {"all_pass", ok},
                   {"regime", std::string(to_string(t.regime))},
                   {"assumption_warnings", ar.warnings},
                   {"assumption_notes", ar.notes}};
  return ok;
}

void emit_refinement(Report& rep, const ScenarioConfig& cfg, const RateModel& model) {
  const std::size_t top = cfg.grids.nx;
  std::vector<std::size_t> sizes;
  for (std::size_t div : {8u, 4u, 2u, 1u}) {
    if (top / div >= 2) sizes.push_back(top / div);
  }
  const Interval& d = cfg.trait_domain;
  const Interval band{d.lo, d.lo + 0.05 * d.length()};
  const auto rows = refinement_study(model, cfg.grids, sizes, band, malthus_options(cfg.solver));
  auto f = rep.open("refinement.csv");
  CsvWriter csv(f, {"n_x", "lambda_star_h", "gap", "mass_in_band"});
  json list = json::array();
  for (const RefinementRow& r : rows) {
    csv.row({static_cast<std::int64_t>(r.nx), r.lambda_star, r.gap, r.band_mass});
    list.push_back({{"n_x", r.nx}, {"lambda_star_h", r.lambda_star}, {"gap", r.gap},
                    {"mass_in_band", r.band_mass},
                    {"regime", std::string(to_string(r.regime))}});
  }
  bool gap_down = true, band_up = true;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    gap_down = gap_down && rows[k].gap < rows[k - 1].gap;
    band_up = band_up && rows[k].band_mass > rows[k - 1].band_mass;
  }
  rep["refinement"] = {{"rows", list},
                       {"band", {band.lo, band.hi}},
                       {"gap_strictly_decreasing", gap_down},
                       {"band_mass_strictly_increasing", band_up}};
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSubcritical: return kSubcritical;
    case ErrorKind::kNotConverged: return kNotConverged;
    case ErrorKind::kIo: return kIo;
    case ErrorKind::kConfig: return kConfig;
    case ErrorKind::kDomain:
    case ErrorKind::kInvalidArgument: return kDomain;
  }
  return kFailure;
}

int report_error(std::ostream& err, const std::string& kind, const std::string& message,
                 int code, json extra = json::object()) {
  json e = {{"kind", kind}, {"message", message}, {"exit_code", code}};
  for (auto& [k, v] : extra.items()) e[k] = v;
  err << json{{"error", e}}.dump() << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structured population solver: spectral, Malthusian, PDE and particle runs"};
  app.name("structpop");
  app.require_subcommand(1);
  Flags f;
  auto common = [&](CLI::App* s) {
    f.options.push_back(s->add_option("--config", f.config, "Scenario JSON file"));
    f.options.push_back(s->add_option("--out", f.out, "Output directory"));
    f.options.push_back(s->add_option("--nx", f.nx, "Trait grid size")->check(CLI::PositiveNumber));
    f.options.push_back(s->add_option("--da", f.da, "Age step and time step")->check(CLI::PositiveNumber));
    f.options.push_back(s->add_option("--tol", f.tol, "Tolerance on lambda*")->check(CLI::PositiveNumber));
    f.options.push_back(s->add_option("--seed", f.seed, "Base RNG seed"));
    f.options.push_back(s->add_option("--replicates", f.replicates, "IBM replicates")->check(CLI::PositiveNumber));
    f.options.push_back(s->add_option("--tmax", f.tmax, "Final time")->check(CLI::NonNegativeNumber));
  };

  double lambda_max = 3.0;
  std::size_t points = 13;
  auto* spectral = app.add_subcommand("spectral", "rho(lambda) sweep and regime");
  common(spectral);
  spectral->add_option("--lambda-max", lambda_max, "Upper end of the sweep");
  spectral->add_option("--points", points, "Number of sweep points");
  auto* malthus = app.add_subcommand("malthus", "lambda* and the eigen-elements");
  common(malthus);
  auto* stationary = app.add_subcommand("stationary", "Stationary state and residuals");
  common(stationary);
  std::string initial = "uniform";
  std::string dynamics = "both";
  double snapshot_every = 0.0;
  auto* pde = app.add_subcommand("pde", "Nonlinear and linear PDE runs");
  common(pde);
  pde->add_option("--initial", initial, "uniform, dirac or nbar3");
  pde->add_option("--dynamics", dynamics, "nonlinear, linear or both");
  pde->add_option("--snapshot-every", snapshot_every, "Snapshot period in time units");
  std::string ibm_dynamics = "nonlinear";
  auto* ibm = app.add_subcommand("ibm", "Replicated particle simulations");
  common(ibm);
  ibm->add_option("--dynamics", ibm_dynamics, "nonlinear or linear");
  auto* verify = app.add_subcommand("verify", "Invariant suite");
  common(verify);
  std::string scenario_name;
  bool scenario_verify = false;
  auto* scenario = app.add_subcommand("scenario", "Canonical presets");
  common(scenario);
  scenario->add_option("name", scenario_name, "constant or singular")
      ->required()
      ->check(CLI::IsMember({"constant", "singular"}));
  scenario->add_flag("--verify", scenario_verify, "Also run the invariant suite");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    return report_error(err, "usage", e.what(), kUsage);
  }

  try {
    ScenarioConfig cfg;
    CLI::App* cmd = app.get_subcommands().front();
    if (cmd == scenario) {
      cfg = preset(scenario_name);
    } else {
      if (f.config.empty()) {
        return report_error(err, "usage", "--config PATH is required for '" + cmd->get_name() + "'",
                            kUsage);
      }
      if (!fs::exists(f.config)) {
        return report_error(err, "usage", "config file '" + f.config + "' does not exist", kUsage);
      }
      cfg = load_config(f.config);
    }
    apply_overrides(cfg, f);
    const RateModel model = make_model(cfg);
    const Grids g = build_grids(model, cfg.grids);

    Report rep(cfg.output_dir, cfg);
    rep["command"] = cmd->get_name();
    bool verified = true;
    if (cmd == spectral) {
      MalthusSolver solver(model, g, malthus_options(cfg.solver));
      emit_spectral(rep, solver, lambda_max, points);
    } else if (cmd == malthus) {
      MalthusSolver solver(model, g, malthus_options(cfg.solver));
      emit_malthus(rep, solver);
    } else if (cmd == stationary) {
      require(model.competition() > 0.0, ErrorKind::kConfig,
              "stationary state needs competition c > 0");
      MalthusSolver solver(model, g, malthus_options(cfg.solver));
      emit_stationary(rep, emit_malthus(rep, solver), model, g);
    } else if (cmd == pde) {
      emit_pde(rep, cfg, model, g, initial, dynamics, snapshot_every);
    } else if (cmd == ibm) {
      emit_ibm(rep, cfg, model, g, ibm_dynamics);
    } else if (cmd == verify) {
      verified = emit_verify(rep, cfg, model, g);
    } else {
      MalthusSolver solver(model, g, malthus_options(cfg.solver));
      const EigenTriple t = emit_malthus(rep, solver);
      if (model.competition() > 0.0) emit_stationary(rep, t, model, g);
      if (scenario_name == "singular") {
        emit_refinement(rep, cfg, model);
        if (t.regime == Regime::kPossiblySingular) {
          rep["convergence_report"] =
              "refused: the Perron problem is possibly singular; the eigenmeasure may "
              "concentrate on the maximizing set of r and grid profiles are not densities";
        }
      }
      if (scenario_verify) verified = emit_verify(rep, cfg, model, g);
    }
    out << rep.finish().dump(2) << '\n';
    if (!verified) {
      return report_error(err, "verify", "one or more invariant checks failed", kVerifyFailed);
    }
    return kOk;
  } catch (const SubcriticalError& e) {
    return report_error(err, "subcritical", e.what(), kSubcritical,
                        {{"rho_at_zero", e.rho_at_zero()}});
  } catch (const Error& e) {
    return report_error(err, std::string(to_string(e.kind())), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report_error(err, "internal", e.what(), kFailure);
  }
}

}  // namespace structpop::cli
