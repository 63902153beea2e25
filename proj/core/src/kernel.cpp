#include "structpop/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "structpop/csv.hpp"
#include "structpop/error.hpp"

namespace structpop {

namespace {

void require_lambda(const RateModel& model, double lambda) {
  if (!(lambda > -model.death_floor()) || !std::isfinite(lambda)) {
    std::ostringstream msg;
    msg << "lambda=" << lambda << " must exceed -Dmin=" << -model.death_floor()
        << " for the age integrals to converge";
    fail(ErrorKind::kDomain, msg.str());
  }
}

}  // namespace

double tail_bound(const RateModel& model, double lambda, double horizon) {
  require_lambda(model, lambda);
  const double rate = model.death_floor() + lambda;
  return std::max(model.birth_bound(), 0.0) * std::exp(-rate * horizon) / rate;
}

double choose_age_truncation(const RateModel& model, double lambda, double tol,
                             double step) {
  require_lambda(model, lambda);
  require(tol > 0.0 && step > 0.0, ErrorKind::kInvalidArgument,
          "truncation needs tol > 0 and step > 0");
  const double rate = model.death_floor() + lambda;
  const double bmax = std::max(model.birth_bound(), 0.0);
  double steps = 1.0;
  if (bmax > 0.0) {
    const double a0 = std::log(bmax / (rate * tol)) / rate;
    steps = std::max(1.0, std::ceil(a0 / step));
  }
  while (tail_bound(model, lambda, steps * step) >= tol) steps += 1.0;
  while (steps > 1.0 && tail_bound(model, lambda, (steps - 1.0) * step) < tol) {
    steps -= 1.0;
  }
  return steps * step;
}

std::vector<double> log_survival(const RateModel& model, double x,
                                 double lambda, const AgeGrid& age) {
  require_lambda(model, lambda);
  std::vector<double> out(age.nodes());
  double cum = 0.0;
  double prev = model.death(x, 0.0);
  out[0] = 0.0;
  for (std::size_t j = 1; j < age.nodes(); ++j) {
    const double d = model.death(x, age.node(j));
    cum += 0.5 * age.step * (prev + d);
    prev = d;
    out[j] = -cum - lambda * age.node(j);
  }
  return out;
}

double survival_factor(const RateModel& model, double x, double a,
                       double lambda, double step) {
  require_lambda(model, lambda);
  require(a >= 0.0 && step > 0.0, ErrorKind::kDomain,
          "survival factor needs a >= 0 and step > 0");
  const double ratio = a / step;
  const double j = std::round(ratio);
  require(std::abs(ratio - j) <= 1e-9 * std::max(1.0, ratio), ErrorKind::kDomain,
          "age is not a lattice node");
  const auto steps = static_cast<std::size_t>(j);
  if (steps == 0) return 1.0;
  const auto ls = log_survival(model, x, lambda, make_age_grid(step, steps));
  return std::exp(ls.back());
}

KernelCollapser::KernelCollapser(const RateModel& model, const Grids& grids)
    : model_(model), grids_(grids) {
  const std::size_t n = grids_.trait.size();
  const std::size_t na = grids_.age.nodes();
  birth_ = AgeTraitField(n, na);
  cum_death_ = AgeTraitField(n, na);
  discounted_ = AgeTraitField(n, na);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grids_.trait.nodes[i];
    const auto ls = log_survival(model_, x, 0.0, grids_.age);
    for (std::size_t j = 0; j < na; ++j) {
      const double b = model_.birth(x, grids_.age.node(j));
      birth_(i, j) = b;
      cum_death_(i, j) = -ls[j];
      discounted_(i, j) = grids_.age.weights[j] * b * std::exp(ls[j]);
    }
  }
  kernel_.resize(n * n);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      kernel_[l * n + i] =
          model_.kernel(grids_.trait.nodes[l], 0.0, grids_.trait.nodes[i]);
    }
  }
}

void KernelCollapser::check_lambda(double lambda) const {
  require_lambda(model_, lambda);
  const double bound = tail_bound(model_, lambda, grids_.age.horizon());
  if (grids_.age.tol > 0.0 && bound > grids_.age.tol) {
    std::ostringstream msg;
    msg << "age horizon " << grids_.age.horizon() << " leaves a tail bound "
        << bound << " above tolerance " << grids_.age.tol
        << " at lambda=" << lambda;
    fail(ErrorKind::kDomain, msg.str());
  }
}

std::vector<double> KernelCollapser::birth_integral(double lambda) const {
  check_lambda(lambda);
  const std::size_t n = grids_.trait.size();
  const std::size_t na = grids_.age.nodes();
  std::vector<double> disc(na);
  for (std::size_t j = 0; j < na; ++j) {
    disc[j] = std::exp(-lambda * grids_.age.node(j));
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = discounted_.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < na; ++j) s += row[j] * disc[j];
    out[i] = s;
  }
  return out;
}

// The registry kernels do not depend on the parent's age, so r and K share
// the same age integral of B R.
CollapsedKernel KernelCollapser::collapse(double lambda) const {
  const auto integral = birth_integral(lambda);
  const std::size_t n = integral.size();
  const double p = model_.mutation_prob();
  CollapsedKernel out;
  out.lambda = lambda;
  out.n = n;
  out.r.resize(n);
  out.K.resize(n * n);
  for (std::size_t l = 0; l < n; ++l) {
    out.r[l] = (1.0 - p) * integral[l];
    const double scale = p * integral[l];
    for (std::size_t i = 0; i < n; ++i) {
      out.K[l * n + i] = scale * kernel_[l * n + i];
    }
  }
  out.rbar = *std::max_element(out.r.begin(), out.r.end());
  out.step = grids_.age.step;
  out.horizon = grids_.age.horizon();
  out.tail_bound = tail_bound(model_, lambda, out.horizon);
  return out;
}

CollapsedKernel collapse(const RateModel& model, const Grids& grids,
                         double lambda) {
  return KernelCollapser(model, grids).collapse(lambda);
}

std::vector<double> collapse_r(const RateModel& model, const Grids& grids,
                               double lambda) {
  return collapse(model, grids, lambda).r;
}

std::vector<double> collapse_K(const RateModel& model, const Grids& grids,
                               double lambda) {
  return collapse(model, grids, lambda).K;
}

void write_kernel_csv(std::ostream& out, const CollapsedKernel& kernel,
                      const TraitGrid& grid) {
  require(kernel.n == grid.size(), ErrorKind::kInvalidArgument,
          "kernel and grid sizes differ");
  CsvWriter csv(out, {"kind", "lambda", "x", "y", "value"});
  for (std::size_t i = 0; i < kernel.n; ++i) {
    csv.row({std::string("r"), kernel.lambda, grid.nodes[i], std::string(),
             kernel.r[i]});
  }
  for (std::size_t l = 0; l < kernel.n; ++l) {
    for (std::size_t i = 0; i < kernel.n; ++i) {
      csv.row({std::string("K"), kernel.lambda, grid.nodes[l], grid.nodes[i],
               kernel.kernel(l, i)});
    }
  }
}

}  // namespace structpop
