#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "structpop/grid.hpp"
#include "structpop/model.hpp"

namespace structpop {

/// ||B|| exp(-(Dmin + lambda) A) / (Dmin + lambda): bound on every neglected
/// age integral beyond A.
double tail_bound(const RateModel& model, double lambda, double horizon);

/// Smallest multiple of step (at least one step) whose tail bound is below
/// tol.
double choose_age_truncation(const RateModel& model, double lambda, double tol,
                             double step);

/// log R_lambda(x, a_j) for j = 0..steps, with the death integral by
/// cumulative trapezoid on the lattice.
std::vector<double> log_survival(const RateModel& model, double x,
                                 double lambda, const AgeGrid& age);

/// R_lambda(x, a) at a lattice node a.
double survival_factor(const RateModel& model, double x, double a,
                       double lambda, double step);

/// Trait-space data r_lambda(x_i) and K_lambda(x_l, x_i) on a grid.
struct CollapsedKernel {
  double lambda = 0.0;
  std::size_t n = 0;
  std::vector<double> r;
  /// K[l * n + i] = K_lambda(x_l, x_i).
  std::vector<double> K;
  double rbar = 0.0;
  double step = 0.0;
  double horizon = 0.0;
  double tail_bound = 0.0;

  double kernel(std::size_t l, std::size_t i) const { return K[l * n + i]; }
};

/// Caches the lambda-independent tables so a sweep over lambda costs one
/// pass over the lattice per value.
class KernelCollapser {
 public:
  KernelCollapser(const RateModel& model, const Grids& grids);

  CollapsedKernel collapse(double lambda) const;
  /// Integral of B R_lambda over age, per trait node.
  std::vector<double> birth_integral(double lambda) const;

  const RateModel& model() const noexcept { return model_; }
  const Grids& grids() const noexcept { return grids_; }
  /// Cumulative trapezoid of D along the lattice, trait-major.
  const AgeTraitField& cumulative_death() const noexcept { return cum_death_; }
  const AgeTraitField& birth_table() const noexcept { return birth_; }
  /// k(x_l, ., x_i) at [l * n + i].
  const std::vector<double>& kernel_table() const noexcept { return kernel_; }

 private:
  void check_lambda(double lambda) const;

  RateModel model_;
  Grids grids_;
  AgeTraitField birth_;
  AgeTraitField cum_death_;
  AgeTraitField discounted_;
  std::vector<double> kernel_;
};

CollapsedKernel collapse(const RateModel& model, const Grids& grids,
                         double lambda);
std::vector<double> collapse_r(const RateModel& model, const Grids& grids,
                               double lambda);
std::vector<double> collapse_K(const RateModel& model, const Grids& grids,
                               double lambda);

/// Rows (kind, lambda, x, y, value); y is blank for r rows.
void write_kernel_csv(std::ostream& out, const CollapsedKernel& kernel,
                      const TraitGrid& grid);

}  // namespace structpop
