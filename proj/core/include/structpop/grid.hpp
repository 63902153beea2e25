#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "structpop/model.hpp"

namespace structpop {

/// Midpoint-rule nodes and weights on the trait interval.
struct TraitGrid {
  Interval domain;
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }
};

TraitGrid make_trait_grid(const Interval& domain, std::size_t nx);

/// Uniform age lattice a_j = j * step, j = 0..steps, with end-corrected
/// trapezoid weights. Every age integral in the library uses these weights.
struct AgeGrid {
  double step = 0.0;
  std::size_t steps = 0;
  double tol = 0.0;
  std::vector<double> weights;

  std::size_t nodes() const noexcept { return steps + 1; }
  double horizon() const noexcept { return step * static_cast<double>(steps); }
  double node(std::size_t j) const noexcept {
    return step * static_cast<double>(j);
  }
};

/// Quadrature weights for steps + 1 equally spaced nodes. Uses Gregory
/// corrections of order four at the left end and a trapezoid right end;
/// plain trapezoid below eight steps.
std::vector<double> age_weights(std::size_t steps, double step);

AgeGrid make_age_grid(double step, std::size_t steps, double tol = 0.0);

struct Grids {
  TraitGrid trait;
  AgeGrid age;
};

/// Values on the (trait, age) lattice, stored trait-major.
class AgeTraitField {
 public:
  AgeTraitField() = default;
  AgeTraitField(std::size_t nx, std::size_t na, double fill = 0.0)
      : nx_(nx), na_(na), values_(nx * na, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return values_[i * na_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return values_[i * na_ + j];
  }
  double* row(std::size_t i) { return values_.data() + i * na_; }
  const double* row(std::size_t i) const { return values_.data() + i * na_; }

  std::size_t traits() const noexcept { return nx_; }
  std::size_t ages() const noexcept { return na_; }
  std::vector<double>& data() noexcept { return values_; }
  const std::vector<double>& data() const noexcept { return values_; }

  bool same_shape(const AgeTraitField& o) const noexcept {
    return nx_ == o.nx_ && na_ == o.na_;
  }

 private:
  std::size_t nx_ = 0;
  std::size_t na_ = 0;
  std::vector<double> values_;
};

AgeTraitField make_field(const Grids& grids, double fill = 0.0);

/// Sum of f * w_i * omega_j over the lattice.
double integrate(const AgeTraitField& f, const Grids& grids);
/// Sum of f * g * w_i * omega_j over the lattice.
double integrate_product(const AgeTraitField& f, const AgeTraitField& g,
                         const Grids& grids);

struct AssumptionReport {
  bool death_floor_ok = false;
  bool kernel_normalized = false;
  bool support_window_ok = false;
  double min_death = 0.0;
  double max_kernel_defect = 0.0;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;

  bool all_ok() const noexcept {
    return death_floor_ok && kernel_normalized && support_window_ok;
  }
};

/// Sampled checks of the standing assumptions. Never throws on a failed
/// check; failures are reported as warnings.
AssumptionReport validate_assumptions(const RateModel& model,
                                      const Grids& grids);

}  // namespace structpop
