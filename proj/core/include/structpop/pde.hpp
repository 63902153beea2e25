#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "structpop/grid.hpp"
#include "structpop/model.hpp"

namespace structpop {

/// Density n(x_i, a_j) on the lattice with its cached mass.
struct DensityState {
  double t = 0.0;
  AgeTraitField n;
  double mass = 0.0;
  /// Mass carried past the age horizon so far.
  double truncation_loss = 0.0;
};

DensityState make_state(AgeTraitField n, const Grids& grids, double t = 0.0);

/// Constant density on ages [0, max_age] with the given total mass.
AgeTraitField uniform_density(const Grids& grids, double mass, double max_age);
/// Unit-mass single-cell spike at the nodes nearest to (x, a).
AgeTraitField dirac_density(const Grids& grids, double x, double a, double mass = 1.0);
/// Values f(x_i, a_j).
AgeTraitField sample_density(const Grids& grids,
                             const std::function<double(double, double)>& f);

enum class Dynamics { kNonlinear, kLinear };

/// Characteristic transport with dt = da: every step shifts ages by one cell,
/// applies the exact death factor of the cell and closes the birth boundary
/// semi-implicitly on the post-transport density.
class PdeSolver {
 public:
  PdeSolver(const RateModel& model, const Grids& grids);

  void step(DensityState& state, Dynamics dynamics) const;
  void step_nonlinear(DensityState& state) const { step(state, Dynamics::kNonlinear); }
  void step_linear(DensityState& state) const { step(state, Dynamics::kLinear); }

  /// F[n](x_i) = (1-p) sum_j B n w_a + p sum_l,j B(x_l) k(x_l, x_i) n w_l w_a.
  std::vector<double> renewal_flux(const AgeTraitField& n) const;

  /// Mass-weighted mean of (1-p)B + pB int k - D, per the mass equation.
  double net_growth(const AgeTraitField& n) const;

  double dt() const noexcept { return grids_.age.step; }
  const RateModel& model() const noexcept { return model_; }
  const Grids& grids() const noexcept { return grids_; }

 private:
  void close_boundary(AgeTraitField& n) const;

  RateModel model_;
  Grids grids_;
  AgeTraitField survival_;
  AgeTraitField birth_;
  std::vector<double> kernel_;
  std::vector<double> kernel_mass_;
  std::vector<double> death_;
  /// (I - w_0 T_0)^{-1}, row-major.
  std::vector<double> boundary_inverse_;
};

struct Distances {
  double tv = 0.0;
  double phi_weighted = 0.0;
};

/// tv = sum |n - target| w w_a and the phi-weighted analogue.
Distances distances(const AgeTraitField& n, const AgeTraitField& target,
                    const AgeTraitField& phi, const Grids& grids);

struct TraceRecord {
  double t = 0.0;
  double mass = 0.0;
  double tv_to_target = 0.0;
  double phi_dist = 0.0;
  double invariant = 0.0;
  double D_t = 0.0;
  double truncation_loss = 0.0;
};

struct RunOptions {
  Dynamics dynamics = Dynamics::kNonlinear;
  double tmax = 10.0;
  /// Distances compare exp(-discount t) n_t with target.
  std::optional<AgeTraitField> target;
  std::optional<AgeTraitField> phi;
  double discount = 0.0;
  double lambda_star = 0.0;
  std::size_t record_every = 1;
  /// 0 disables snapshots.
  std::size_t snapshot_every = 0;
};

struct Run {
  std::vector<TraceRecord> trace;
  std::vector<DensityState> snapshots;
  DensityState final_state;
};

Run simulate(const PdeSolver& solver, DensityState initial, const RunOptions& options);

/// Lockstep nonlinear and linear runs from the same data; returns the maximum
/// over the run of sum |exp(c int rho) n_t - v_t| / sum v_t, with the time
/// integral by the trapezoid rule.
double transform_check(const PdeSolver& solver, const AgeTraitField& n0, double tmax);

struct TestFunction {
  std::string name;
  std::function<double(double, double)> f;
  std::function<double(double, double)> df_da;
};

/// Polynomials in x times exp(-a), sin and cos in x times a exp(-a), and 1.
std::vector<TestFunction> default_test_basket(const Interval& domain);

/// Max over the basket of |sum (df/da - (D + c mass) f + G[f]) nbar|.
double stationary_residual(const AgeTraitField& nbar, const RateModel& model,
                           const Grids& grids,
                           const std::vector<TestFunction>& basket);

struct MassOdeDiagnostics {
  std::vector<double> D;
  /// Centered-difference residual of drho/dt = rho (D + lambda*) - c rho^2.
  std::vector<double> residual;
  double max_residual = 0.0;
  double final_abs_D = 0.0;
};

MassOdeDiagnostics mass_ode_diag(const std::vector<TraceRecord>& trace,
                                 double lambda_star, double competition);

struct RateFit {
  double rate = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

/// Least-squares fit of log(value) = intercept - rate t on [t0, t1].
RateFit fit_decay(const std::vector<double>& t, const std::vector<double>& value,
                  double t0, double t1);

struct DataDependence {
  /// max over t of log(d(t) / d(0)) / t; finite means at most exponential.
  double c_hat = 0.0;
  std::vector<double> t;
  std::vector<double> distance;
};

/// Nonlinear runs from two nearby initial data, compared in a bounded
/// Lipschitz proxy (sup over a basket of 1-Lipschitz test functions bounded
/// by 1).
DataDependence data_dependence(const PdeSolver& solver, const AgeTraitField& a,
                               const AgeTraitField& b, double tmax,
                               std::size_t record_every = 10);

}  // namespace structpop
