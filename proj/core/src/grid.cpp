#include "structpop/grid.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "structpop/error.hpp"

namespace structpop {

TraitGrid make_trait_grid(const Interval& domain, std::size_t nx) {
  require(nx >= 2, ErrorKind::kInvalidArgument, "trait grid needs nx >= 2");
  require(domain.lo < domain.hi, ErrorKind::kInvalidArgument,
          "trait domain must satisfy lo < hi");
  TraitGrid g;
  g.domain = domain;
  g.nodes.resize(nx);
  g.weights.assign(nx, domain.length() / static_cast<double>(nx));
  for (std::size_t i = 0; i < nx; ++i) {
    g.nodes[i] = domain.lo + domain.length() * (static_cast<double>(i) + 0.5) /
                                 static_cast<double>(nx);
  }
  return g;
}

std::vector<double> age_weights(std::size_t steps, double step) {
  std::vector<double> w(steps + 1, step);
  if (steps == 0) {
    w[0] = 0.0;
    return w;
  }
  w.front() = 0.5 * step;
  w.back() = 0.5 * step;
  if (steps >= 8) {
    static constexpr double kLeft[4] = {251.0 / 720.0, 299.0 / 240.0,
                                        211.0 / 240.0, 739.0 / 720.0};
    for (std::size_t j = 0; j < 4; ++j) w[j] = kLeft[j] * step;
  }
  return w;
}

AgeGrid make_age_grid(double step, std::size_t steps, double tol) {
  require(step > 0.0 && std::isfinite(step), ErrorKind::kInvalidArgument,
          "age step must be positive");
  require(steps >= 1, ErrorKind::kInvalidArgument,
          "age grid needs at least one step");
  AgeGrid g;
  g.step = step;
  g.steps = steps;
  g.tol = tol;
  g.weights = age_weights(steps, step);
  return g;
}

AgeTraitField make_field(const Grids& grids, double fill) {
  return AgeTraitField(grids.trait.size(), grids.age.nodes(), fill);
}

double integrate(const AgeTraitField& f, const Grids& grids) {
  const auto& wa = grids.age.weights;
  double total = 0.0;
  for (std::size_t i = 0; i < f.traits(); ++i) {
    const double* r = f.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < f.ages(); ++j) s += r[j] * wa[j];
    total += s * grids.trait.weights[i];
  }
  return total;
}

double integrate_product(const AgeTraitField& f, const AgeTraitField& g,
                         const Grids& grids) {
  require(f.same_shape(g), ErrorKind::kInvalidArgument,
          "field shapes differ");
  const auto& wa = grids.age.weights;
  double total = 0.0;
  for (std::size_t i = 0; i < f.traits(); ++i) {
    const double* r = f.row(i);
    const double* q = g.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < f.ages(); ++j) s += r[j] * q[j] * wa[j];
    total += s * grids.trait.weights[i];
  }
  return total;
}

AssumptionReport validate_assumptions(const RateModel& model,
                                      const Grids& grids) {
  AssumptionReport rep;
  const auto& xs = grids.trait.nodes;
  const std::size_t nx = xs.size();
  const std::size_t na = grids.age.nodes();

  rep.min_death = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < na; ++j) {
      rep.min_death = std::min(rep.min_death, model.death(xs[i], grids.age.node(j)));
    }
  }
  rep.death_floor_ok = rep.min_death >= model.death_floor() - 1e-12;
  if (!rep.death_floor_ok) {
    std::ostringstream msg;
    msg << "death rate sample " << rep.min_death
        << " falls below the declared floor " << model.death_floor();
    rep.warnings.push_back(msg.str());
  }

  using boost::math::quadrature::gauss_kronrod;
  const Interval& s = model.domain();
  const std::size_t stride = std::max<std::size_t>(1, nx / 16);
  const double ages[3] = {0.0, 0.5 * grids.age.horizon(), grids.age.horizon()};
  rep.max_kernel_defect = 0.0;
  for (std::size_t i = 0; i < nx; i += stride) {
    for (double a : ages) {
      auto f = [&](double y) { return model.kernel(xs[i], a, y); };
      const double mass =
          gauss_kronrod<double, 61>::integrate(f, s.lo, s.hi, 15, 1e-13);
      rep.max_kernel_defect = std::max(rep.max_kernel_defect, std::abs(mass - 1.0));
    }
  }
  rep.kernel_normalized = rep.max_kernel_defect <= 1e-8;
  if (!rep.kernel_normalized) {
    std::ostringstream msg;
    msg << "mutation kernel integrates to 1 only within "
        << rep.max_kernel_defect;
    rep.warnings.push_back(msg.str());
  }

  // Common age window where birth and mutation towards the neighbouring
  // nodes are both positive. A sampled check can falsify the open-set support
  // condition but cannot certify it.
  rep.support_window_ok = true;
  for (std::size_t i = 0; i < nx && rep.support_window_ok; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(nx - 1, i + 1);
    for (std::size_t l = lo; l <= hi; ++l) {
      std::size_t run = 0;
      bool found = false;
      for (std::size_t j = 0; j < na && !found; ++j) {
        const double a = grids.age.node(j);
        const bool positive = model.birth(xs[i], a) > 0.0 &&
                              model.kernel(xs[i], a, xs[l]) > 0.0;
        run = positive ? run + 1 : 0;
        found = run >= 2;
      }
      if (!found) {
        rep.support_window_ok = false;
        std::ostringstream msg;
        msg << "no common age window with positive birth and mutation from x="
            << xs[i] << " to x=" << xs[l]
            << " (sampled check; it can only falsify the support condition)";
        rep.warnings.push_back(msg.str());
        break;
      }
    }
  }
  if (rep.support_window_ok) {
    rep.notes.emplace_back(
        "support condition passed on the sampled lattice only; this does not "
        "certify it on the continuum");
  }
  return rep;
}

}  // namespace structpop
