#include "structpop/malthus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "structpop/error.hpp"

namespace structpop {

MalthusOptions malthus_options(const SolverSettings& settings) {
  MalthusOptions o;
  o.perron.tol = settings.perron_tol;
  o.perron.max_iter = settings.perron_max_iter;
  o.perron.gap_tol_rel = settings.gap_tol_rel;
  o.lambda_tol = settings.lambda_tol;
  return o;
}

MalthusSolver::MalthusSolver(const RateModel& model, const Grids& grids,
                             MalthusOptions options)
    : collapser_(model, grids), options_(std::move(options)) {
  require(options_.lambda_tol > 0.0, ErrorKind::kInvalidArgument,
          "lambda tolerance must be > 0");
}

const PerronPair& MalthusSolver::pair(double lambda, OperatorKind kind) {
  const auto key = std::make_pair(lambda, static_cast<int>(kind));
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  const auto op = assemble(collapser_.collapse(lambda), grids().trait, kind);
  PerronOptions po = options_.perron;
  po.decide.reset();
  if (kind == OperatorKind::kDirect && warm_.size() == op.n) po.start = warm_;
  PerronPair result;
  try {
    result = perron(op, po);
  } catch (const PerronNotConverged& e) {
    // One more budget, restarted from the last iterate.
    po.start = e.last_iterate().profile;
    result = perron(op, po);
  }
  if (kind == OperatorKind::kDirect) warm_ = result.profile;
  return cache_.emplace(key, std::move(result)).first->second;
}

RhoValue MalthusSolver::rho_of_lambda(double lambda) {
  const auto& p = pair(lambda);
  return {p.rho, collapser_.collapse(lambda).rbar};
}

bool MalthusSolver::above_one(double lambda) {
  const auto key = std::make_pair(lambda, static_cast<int>(OperatorKind::kDirect));
  if (auto it = cache_.find(key); it != cache_.end()) return it->second.rho >= 1.0;
  const auto op =
      assemble(collapser_.collapse(lambda), grids().trait, OperatorKind::kDirect);
  PerronOptions po = options_.perron;
  po.decide = 1.0;
  if (warm_.size() == op.n) po.start = warm_;
  PerronPair result;
  try {
    result = perron(op, po);
  } catch (const PerronNotConverged& e) {
    po.start = e.last_iterate().profile;
    result = perron(op, po);
  }
  warm_ = result.profile;
  if (result.decided) return result.lower > 1.0;
  const bool above = result.rho >= 1.0;
  cache_.emplace(key, std::move(result));
  return above;
}

LambdaStar MalthusSolver::find_lambda_star() {
  if (lambda_star_) return *lambda_star_;
  LambdaStar out;
  out.rho_at_zero = pair(0.0).rho;
  if (!(out.rho_at_zero > 1.0)) {
    std::ostringstream msg;
    msg << "subcritical model: rho(0) = " << out.rho_at_zero
        << " <= 1, no nontrivial stationary state";
    throw SubcriticalError(msg.str(), out.rho_at_zero);
  }
  double lo = 0.0;
  double hi = std::max(options_.lambda_start, options_.lambda_tol);
  std::size_t doublings = 0;
  while (above_one(hi)) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > options_.max_doublings) {
      fail(ErrorKind::kNotConverged,
           "no lambda with rho(lambda) < 1 found within the doubling cap");
    }
  }
  while (hi - lo > options_.lambda_tol) {
    const double mid = 0.5 * (lo + hi);
    if (above_one(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++out.bisection_steps;
  }
  out.lower = lo;
  out.upper = hi;
  out.lambda_star = 0.5 * (lo + hi);
  lambda_star_ = out;
  return out;
}

RhoValue rho_of_lambda(const RateModel& model, const Grids& grids, double lambda) {
  MalthusSolver solver(model, grids);
  return solver.rho_of_lambda(lambda);
}

AgeTraitField direct_profile(double lambda_star, std::vector<double>& mu,
                             const KernelCollapser& collapser) {
  const Grids& g = collapser.grids();
  require(mu.size() == g.trait.size(), ErrorKind::kInvalidArgument,
          "profile size differs from trait grid");
  AgeTraitField N = make_field(g);
  const auto& cum = collapser.cumulative_death();
  for (std::size_t i = 0; i < N.traits(); ++i) {
    for (std::size_t j = 0; j < N.ages(); ++j) {
      N(i, j) = mu[i] * std::exp(-cum(i, j) - lambda_star * g.age.node(j));
    }
  }
  const double mass = integrate(N, g);
  require(mass > 0.0, ErrorKind::kDomain, "direct profile has zero mass");
  for (double& v : N.data()) v /= mass;
  for (double& v : mu) v /= mass;
  return N;
}

namespace {

// Weights of g_j and g_{j+1} for the integral over one cell of a linear g
// against exp(-z t), t in [0, 1].
std::pair<double, double> fitted_weights(double z) {
  double e1;
  double e2;
  if (std::abs(z) < 1e-3) {
    e1 = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
    e2 = 0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0;
  } else {
    const double ez = std::exp(-z);
    e1 = (1.0 - ez) / z;
    e2 = (1.0 - (1.0 + z) * ez) / (z * z);
  }
  return {e1 - e2, e2};
}

}  // namespace

AgeTraitField dual_profile(double lambda_star, const std::vector<double>& eta,
                           const KernelCollapser& collapser) {
  const Grids& g = collapser.grids();
  const RateModel& model = collapser.model();
  const std::size_t n = g.trait.size();
  require(eta.size() == n, ErrorKind::kInvalidArgument,
          "profile size differs from trait grid");
  const double p = model.mutation_prob();
  const double h = g.age.step;
  const std::size_t last = g.age.steps;
  const auto& k = collapser.kernel_table();
  const auto& cum = collapser.cumulative_death();
  const auto& birth = collapser.birth_table();

  AgeTraitField phi = make_field(g);
  for (std::size_t i = 0; i < n; ++i) {
    double mutant = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      mutant += k[i * n + l] * eta[l] * g.trait.weights[l];
    }
    const double coeff = (1.0 - p) * eta[i] + p * mutant;
    const double x = g.trait.nodes[i];
    // Q_j = int_{a_j}^inf B R da / R(a_j), closed with frozen rates.
    double q = birth(i, last) / (model.death(x, g.age.horizon()) + lambda_star);
    phi(i, last) = coeff * q;
    for (std::size_t j = last; j-- > 0;) {
      const double z = cum(i, j + 1) - cum(i, j) + lambda_star * h;
      const auto [w0, w1] = fitted_weights(z);
      q = h * (w0 * birth(i, j) + w1 * birth(i, j + 1)) + std::exp(-z) * q;
      phi(i, j) = coeff * q;
    }
  }
  return phi;
}

double dual_equation_residual(const AgeTraitField& phi, double lambda_star,
                              const KernelCollapser& collapser) {
  const Grids& g = collapser.grids();
  const RateModel& model = collapser.model();
  const std::size_t n = g.trait.size();
  const double p = model.mutation_prob();
  const auto& k = collapser.kernel_table();
  const auto& birth = collapser.birth_table();
  double scale = 0.0;
  for (double v : phi.data()) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mutant = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      mutant += k[i * n + l] * phi(l, 0) * g.trait.weights[l];
    }
    const double renewal = (1.0 - p) * phi(i, 0) + p * mutant;
    const double x = g.trait.nodes[i];
    for (std::size_t j = 0; j < g.age.steps; ++j) {
      const double a = g.age.node(j);
      const double dphi = (phi(i, j + 1) - phi(i, j)) / g.age.step;
      const double r = dphi - (model.death(x, a) + lambda_star) * phi(i, j) +
                       birth(i, j) * renewal;
      worst = std::max(worst, std::abs(r));
    }
  }
  return scale > 0.0 ? worst / scale : worst;
}

double boundary_identity_residual(const AgeTraitField& N,
                                  const KernelCollapser& collapser) {
  const Grids& g = collapser.grids();
  const std::size_t n = g.trait.size();
  const double p = collapser.model().mutation_prob();
  const auto& k = collapser.kernel_table();
  const auto& birth = collapser.birth_table();
  std::vector<double> births(n, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t j = 0; j < N.ages(); ++j) {
      births[l] += birth(l, j) * N(l, j) * g.age.weights[j];
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double flux = (1.0 - p) * births[i];
    for (std::size_t l = 0; l < n; ++l) {
      flux += p * k[l * n + i] * births[l] * g.trait.weights[l];
    }
    worst = std::max(worst, std::abs(N(i, 0) - flux));
  }
  return worst;
}

EtaBound eta_lower_bound(const AgeTraitField& phi, double lambda_star,
                         const RateModel& model, const Grids& grids) {
  EtaBound out;
  double bmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grids.trait.size(); ++i) {
    for (std::size_t j = 0; j < grids.age.nodes(); ++j) {
      bmin = std::min(bmin, model.birth(grids.trait.nodes[i], grids.age.node(j)));
    }
  }
  double kmin = std::numeric_limits<double>::infinity();
  for (double x : grids.trait.nodes) {
    for (double y : grids.trait.nodes) kmin = std::min(kmin, model.kernel(x, 0.0, y));
  }
  const auto [lo, hi] = std::minmax_element(phi.data().begin(), phi.data().end());
  double phi0_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < phi.traits(); ++i) phi0_min = std::min(phi0_min, phi(i, 0));
  if (!(bmin > 0.0) || !(kmin > 0.0)) {
    out.warning = !(bmin > 0.0) ? "birth rate vanishes on the grid; contraction bound is 0"
                                : "mutation kernel vanishes on the grid; contraction bound is 0";
    return out;
  }
  if (!(*hi > 0.0)) {
    out.warning = "dual eigenfunction vanishes; contraction bound is 0";
    return out;
  }
  const double p = model.mutation_prob();
  out.grid_value = p * bmin * kmin * std::max(*lo, 0.0) / *hi;
  const double phi_proof =
      (1.0 - p) * phi0_min * bmin / (lambda_star + model.death_bound());
  out.proof_bound = p * bmin * kmin * phi_proof / *hi;
  return out;
}

EigenTriple eigen_triple(MalthusSolver& solver) {
  const LambdaStar ls = solver.find_lambda_star();
  const double lam = ls.lambda_star;
  EigenTriple t;
  t.lambda_star = lam;
  t.rho_at_zero = ls.rho_at_zero;
  const PerronPair direct = solver.pair(lam, OperatorKind::kDirect);
  const PerronPair dual = solver.pair(lam, OperatorKind::kDual);
  const Grids& g = solver.grids();

  t.mu = direct.profile;
  t.N = direct_profile(lam, t.mu, solver.collapser());
  t.eta = dual.profile;
  t.phi = dual_profile(lam, t.eta, solver.collapser());
  const double pairing = integrate_product(t.N, t.phi, g);
  require(pairing > 0.0, ErrorKind::kDomain, "direct and dual profiles are orthogonal");
  for (double& v : t.phi.data()) v /= pairing;
  for (double& v : t.eta) v /= pairing;
  t.int_N = integrate(t.N, g);
  t.int_N_phi = integrate_product(t.N, t.phi, g);

  RegimeOptions ro;
  ro.gap_tol_rel = solver.options().perron.gap_tol_rel;
  t.regime_report = regime_classify(direct, solver.kernel(lam), g.trait, ro);
  t.regime = t.regime_report.regime;
  t.eta_lower = eta_lower_bound(t.phi, lam, solver.model(), g);
  if (t.regime == Regime::kPossiblySingular) {
    t.warning =
        "possibly singular regime: grid eigen-data are not certified and the "
        "dual eigenfunction loses its continuum meaning";
  }
  return t;
}

StationaryState stationary_state(const EigenTriple& triple, const RateModel& model,
                                 const Grids& grids) {
  require(model.competition() > 0.0, ErrorKind::kInvalidArgument,
          "stationary state needs competition c > 0");
  StationaryState s;
  s.lambda_star = triple.lambda_star;
  s.nbar = triple.N;
  const double scale = triple.lambda_star / model.competition();
  for (double& v : s.nbar.data()) v *= scale;
  s.mass = integrate(s.nbar, grids);
  return s;
}

StationaryState stationary_state(const RateModel& model, const Grids& grids,
                                 const MalthusOptions& options) {
  MalthusSolver solver(model, grids, options);
  const EigenTriple t = eigen_triple(solver);
  return stationary_state(t, model, grids);
}

std::vector<RefinementRow> refinement_study(const RateModel& model,
                                            const GridSettings& base,
                                            const std::vector<std::size_t>& nx,
                                            const Interval& band,
                                            const MalthusOptions& options) {
  std::vector<RefinementRow> rows;
  for (std::size_t n : nx) {
    GridSettings gs = base;
    gs.nx = n;
    const Grids g = build_grids(model, gs);
    MalthusSolver solver(model, g, options);
    const LambdaStar ls = solver.find_lambda_star();
    const PerronPair& pair = solver.pair(ls.lambda_star);
    RegimeOptions ro;
    ro.gap_tol_rel = options.perron.gap_tol_rel;
    ro.band = band;
    const auto kernel = solver.kernel(ls.lambda_star);
    const auto rep = regime_classify(pair, kernel, g.trait, ro);
    rows.push_back({n, ls.lambda_star, rep.gap, rep.band_mass, kernel.rbar, rep.regime});
  }
  return rows;
}

}  // namespace structpop
