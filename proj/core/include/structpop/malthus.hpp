#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "structpop/config.hpp"
#include "structpop/grid.hpp"
#include "structpop/kernel.hpp"
#include "structpop/spectral.hpp"

namespace structpop {

struct MalthusOptions {
  PerronOptions perron{};
  double lambda_tol = 1e-6;
  /// First trial for the upper end of the bracket.
  double lambda_start = 1.0;
  std::size_t max_doublings = 40;
};

MalthusOptions malthus_options(const SolverSettings& settings);

struct RhoValue {
  double rho = 0.0;
  double rbar = 0.0;
};

struct LambdaStar {
  double lambda_star = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double rho_at_zero = 0.0;
  std::size_t bisection_steps = 0;
};

/// Spectral radius of the collapsed renewal operator as a function of
/// lambda, and the root of rho(lambda) = 1.
class MalthusSolver {
 public:
  MalthusSolver(const RateModel& model, const Grids& grids,
                MalthusOptions options = {});

  /// Converged Perron pair of the given kind at lambda (cached).
  const PerronPair& pair(double lambda, OperatorKind kind = OperatorKind::kDirect);
  RhoValue rho_of_lambda(double lambda);
  CollapsedKernel kernel(double lambda) const { return collapser_.collapse(lambda); }

  /// Bisection on [0, hi] with hi found by doubling. Throws SubcriticalError
  /// when rho(0) <= 1.
  LambdaStar find_lambda_star();

  const RateModel& model() const noexcept { return collapser_.model(); }
  const Grids& grids() const noexcept { return collapser_.grids(); }
  const KernelCollapser& collapser() const noexcept { return collapser_; }
  const MalthusOptions& options() const noexcept { return options_; }

 private:
  /// Sign of rho(lambda) - 1, using an early exit on the certified bracket.
  bool above_one(double lambda);

  KernelCollapser collapser_;
  MalthusOptions options_;
  std::map<std::pair<double, int>, PerronPair> cache_;
  std::vector<double> warm_;
  std::optional<LambdaStar> lambda_star_;
};

RhoValue rho_of_lambda(const RateModel& model, const Grids& grids, double lambda);

/// N(x_i, a_j) = mu_i R(x_i, a_j), scaled to unit total mass; mu is rescaled
/// in place to match.
AgeTraitField direct_profile(double lambda_star, std::vector<double>& mu,
                             const KernelCollapser& collapser);

/// phi(x_i, a_j) = R^{-1} [ (1-p) eta_i int_a B R + p sum_l k(x_i,x_l) eta_l
/// w_l int_a B R ], unnormalised. Tail integrals use an exponentially fitted
/// cell rule with a frozen-rate closure beyond the horizon.
AgeTraitField dual_profile(double lambda_star, const std::vector<double>& eta,
                           const KernelCollapser& collapser);

/// Residual of d/da phi - (D + lambda) phi + G[phi] = 0 on the lattice by
/// forward differences.
double dual_equation_residual(const AgeTraitField& phi, double lambda_star,
                              const KernelCollapser& collapser);

/// N(x, 0) - F[N](x): boundary identity of the direct eigenproblem.
double boundary_identity_residual(const AgeTraitField& N,
                                  const KernelCollapser& collapser);

struct EtaBound {
  /// p Bmin kmin min(phi) / max(phi) on the grid.
  double grid_value = 0.0;
  /// Same with min(phi) replaced by (1-p) min phi(., 0) Bmin / (lambda* + Dmax).
  double proof_bound = 0.0;
  std::string warning;
};

EtaBound eta_lower_bound(const AgeTraitField& phi, double lambda_star,
                         const RateModel& model, const Grids& grids);

struct EigenTriple {
  double lambda_star = 0.0;
  double rho_at_zero = 0.0;
  std::vector<double> mu;
  std::vector<double> eta;
  AgeTraitField N;
  AgeTraitField phi;
  EtaBound eta_lower;
  double int_N = 0.0;
  double int_N_phi = 0.0;
  Regime regime = Regime::kRegular;
  RegimeReport regime_report;
  /// Empty when the regime is Regular; otherwise explains that the continuum
  /// meaning of the dual data degrades.
  std::string warning;
};

EigenTriple eigen_triple(MalthusSolver& solver);

struct StationaryState {
  double lambda_star = 0.0;
  AgeTraitField nbar;
  double mass = 0.0;
};

/// nbar = (lambda* / c) N. Requires c > 0.
StationaryState stationary_state(const EigenTriple& triple, const RateModel& model,
                                 const Grids& grids);
StationaryState stationary_state(const RateModel& model, const Grids& grids,
                                 const MalthusOptions& options = {});

struct RefinementRow {
  std::size_t nx = 0;
  double lambda_star = 0.0;
  double gap = 0.0;
  double band_mass = 0.0;
  double rbar = 0.0;
  Regime regime = Regime::kRegular;
};

/// lambda*_h, rho - rbar and the Perron mass in band for each trait grid size.
std::vector<RefinementRow> refinement_study(const RateModel& model,
                                            const GridSettings& base,
                                            const std::vector<std::size_t>& nx,
                                            const Interval& band,
                                            const MalthusOptions& options = {});

}  // namespace structpop
