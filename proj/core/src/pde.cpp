#include "structpop/pde.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "structpop/error.hpp"

namespace structpop {

DensityState make_state(AgeTraitField n, const Grids& grids, double t) {
  require(n.traits() == grids.trait.size() && n.ages() == grids.age.nodes(),
          ErrorKind::kInvalidArgument, "density shape differs from grids");
  for (double v : n.data()) {
    require(v >= 0.0 && std::isfinite(v), ErrorKind::kInvalidArgument,
            "density must be finite and nonnegative");
  }
  DensityState s;
  s.t = t;
  s.mass = integrate(n, grids);
  s.n = std::move(n);
  return s;
}

AgeTraitField uniform_density(const Grids& grids, double mass, double max_age) {
  AgeTraitField n = make_field(grids);
  for (std::size_t i = 0; i < n.traits(); ++i) {
    for (std::size_t j = 0; j < n.ages(); ++j) {
      if (grids.age.node(j) <= max_age + 1e-12) n(i, j) = 1.0;
    }
  }
  const double m = integrate(n, grids);
  require(m > 0.0, ErrorKind::kInvalidArgument, "uniform density has empty support");
  for (double& v : n.data()) v *= mass / m;
  return n;
}

AgeTraitField dirac_density(const Grids& grids, double x, double a, double mass) {
  require(grids.trait.domain.contains(x) && a >= 0.0 && a <= grids.age.horizon(),
          ErrorKind::kDomain, "spike location outside the lattice");
  const auto& nodes = grids.trait.nodes;
  std::size_t i = 0;
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    if (std::abs(nodes[k] - x) < std::abs(nodes[i] - x)) i = k;
  }
  const auto j = static_cast<std::size_t>(std::llround(a / grids.age.step));
  AgeTraitField n = make_field(grids);
  n(i, j) = mass / (grids.trait.weights[i] * grids.age.weights[j]);
  return n;
}

AgeTraitField sample_density(const Grids& grids,
                             const std::function<double(double, double)>& f) {
  AgeTraitField n = make_field(grids);
  for (std::size_t i = 0; i < n.traits(); ++i) {
    for (std::size_t j = 0; j < n.ages(); ++j) {
      n(i, j) = f(grids.trait.nodes[i], grids.age.node(j));
    }
  }
  return n;
}

PdeSolver::PdeSolver(const RateModel& model, const Grids& grids)
    : model_(model), grids_(grids) {
  const std::size_t n = grids_.trait.size();
  const std::size_t na = grids_.age.nodes();
  const double h = grids_.age.step;
  survival_ = AgeTraitField(n, na);
  birth_ = AgeTraitField(n, na);
  death_.resize(n * na);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grids_.trait.nodes[i];
    for (std::size_t j = 0; j < na; ++j) {
      birth_(i, j) = model_.birth(x, grids_.age.node(j));
      death_[i * na + j] = model_.death(x, grids_.age.node(j));
    }
    // Exact decay over a cell with the death integral by the trapezoid rule.
    for (std::size_t j = 0; j + 1 < na; ++j) {
      survival_(i, j) =
          std::exp(-0.5 * h * (death_[i * na + j] + death_[i * na + j + 1]));
    }
    survival_(i, na - 1) = std::exp(-h * death_[i * na + na - 1]);
  }
  kernel_.resize(n * n);
  kernel_mass_.assign(n, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      kernel_[l * n + i] =
          model_.kernel(grids_.trait.nodes[l], 0.0, grids_.trait.nodes[i]);
      kernel_mass_[l] += kernel_[l * n + i] * grids_.trait.weights[i];
    }
  }
  const double p = model_.mutation_prob();
  const double w0 = grids_.age.weights[0];
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) -=
        w0 * (1.0 - p) * birth_(i, 0);
    for (std::size_t l = 0; l < n; ++l) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) -=
          w0 * p * birth_(l, 0) * kernel_[l * n + i] * grids_.trait.weights[l];
    }
  }
  const Eigen::MatrixXd inv = a.partialPivLu().inverse();
  boundary_inverse_.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < n; ++l) {
      boundary_inverse_[i * n + l] =
          inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
    }
  }
}

void PdeSolver::close_boundary(AgeTraitField& n) const {
  const std::size_t nx = n.traits();
  const std::size_t na = n.ages();
  const double p = model_.mutation_prob();
  const auto& wa = grids_.age.weights;
  const auto& wx = grids_.trait.weights;
  std::vector<double> b(nx, 0.0);
  for (std::size_t l = 0; l < nx; ++l) {
    const double* row = n.row(l);
    const double* br = birth_.row(l);
    double s = 0.0;
    for (std::size_t j = 1; j < na; ++j) s += wa[j] * br[j] * row[j];
    b[l] = s;
  }
  std::vector<double> rhs(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    double mutant = 0.0;
    for (std::size_t l = 0; l < nx; ++l) mutant += kernel_[l * nx + i] * wx[l] * b[l];
    rhs[i] = (1.0 - p) * b[i] + p * mutant;
  }
  for (std::size_t i = 0; i < nx; ++i) {
    const double* inv = boundary_inverse_.data() + i * nx;
    double s = 0.0;
    for (std::size_t l = 0; l < nx; ++l) s += inv[l] * rhs[l];
    n(i, 0) = std::max(s, 0.0);
  }
}

void PdeSolver::step(DensityState& state, Dynamics dynamics) const {
  AgeTraitField& n = state.n;
  require(n.traits() == grids_.trait.size() && n.ages() == grids_.age.nodes(),
          ErrorKind::kInvalidArgument, "density shape differs from grids");
  const double h = grids_.age.step;
  const std::size_t last = n.ages() - 1;
  const double decay = dynamics == Dynamics::kNonlinear
                           ? std::exp(-model_.competition() * state.mass * h)
                           : 1.0;
  double lost = 0.0;
  for (std::size_t i = 0; i < n.traits(); ++i) {
    double* row = n.row(i);
    const double* s = survival_.row(i);
    lost += grids_.trait.weights[i] * h * row[last] * s[last];
    for (std::size_t j = last; j > 0; --j) row[j] = row[j - 1] * s[j - 1] * decay;
    row[0] = 0.0;
  }
  close_boundary(n);
  state.t += h;
  state.truncation_loss += lost * decay;
  state.mass = integrate(n, grids_);
}

std::vector<double> PdeSolver::renewal_flux(const AgeTraitField& n) const {
  const std::size_t nx = n.traits();
  const double p = model_.mutation_prob();
  const auto& wa = grids_.age.weights;
  const auto& wx = grids_.trait.weights;
  std::vector<double> b(nx, 0.0);
  for (std::size_t l = 0; l < nx; ++l) {
    for (std::size_t j = 0; j < n.ages(); ++j) b[l] += wa[j] * birth_(l, j) * n(l, j);
  }
  std::vector<double> flux(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    double mutant = 0.0;
    for (std::size_t l = 0; l < nx; ++l) mutant += kernel_[l * nx + i] * wx[l] * b[l];
    flux[i] = (1.0 - p) * b[i] + p * mutant;
  }
  return flux;
}

double PdeSolver::net_growth(const AgeTraitField& n) const {
  const double p = model_.mutation_prob();
  const auto& wa = grids_.age.weights;
  const std::size_t na = n.ages();
  double num = 0.0;
  double mass = 0.0;
  for (std::size_t i = 0; i < n.traits(); ++i) {
    const double wx = grids_.trait.weights[i];
    const double* row = n.row(i);
    const double* br = birth_.row(i);
    const double* dr = death_.data() + i * na;
    for (std::size_t j = 0; j < na; ++j) {
      const double m = wx * wa[j] * row[j];
      num += m * ((1.0 - p) * br[j] + p * br[j] * kernel_mass_[i] - dr[j]);
      mass += m;
    }
  }
  return mass > 0.0 ? num / mass : 0.0;
}

Distances distances(const AgeTraitField& n, const AgeTraitField& target,
                    const AgeTraitField& phi, const Grids& grids) {
  require(n.same_shape(target) && n.same_shape(phi), ErrorKind::kInvalidArgument,
          "field shapes differ");
  Distances d;
  const auto& wa = grids.age.weights;
  for (std::size_t i = 0; i < n.traits(); ++i) {
    const double wx = grids.trait.weights[i];
    for (std::size_t j = 0; j < n.ages(); ++j) {
      const double diff = std::abs(n(i, j) - target(i, j)) * wx * wa[j];
      d.tv += diff;
      d.phi_weighted += phi(i, j) * diff;
    }
  }
  return d;
}

namespace {

TraceRecord make_record(const PdeSolver& solver, const DensityState& s,
                        const RunOptions& o) {
  TraceRecord r;
  r.t = s.t;
  r.mass = s.mass;
  r.truncation_loss = s.truncation_loss;
  r.D_t = solver.net_growth(s.n) - o.lambda_star;
  const double e = std::exp(-o.discount * s.t);
  const Grids& g = solver.grids();
  const auto& wa = g.age.weights;
  double tv = 0.0;
  double pd = 0.0;
  double inv = 0.0;
  for (std::size_t i = 0; i < s.n.traits(); ++i) {
    const double wx = g.trait.weights[i];
    for (std::size_t j = 0; j < s.n.ages(); ++j) {
      const double v = e * s.n(i, j);
      const double w = wx * wa[j];
      const double ph = o.phi ? (*o.phi)(i, j) : 1.0;
      inv += ph * v * w;
      if (o.target) {
        const double diff = std::abs(v - (*o.target)(i, j)) * w;
        tv += diff;
        pd += ph * diff;
      }
    }
  }
  r.tv_to_target = tv;
  r.phi_dist = o.phi ? pd : 0.0;
  r.invariant = inv;
  return r;
}

}  // namespace

Run simulate(const PdeSolver& solver, DensityState initial, const RunOptions& o) {
  require(o.tmax >= 0.0, ErrorKind::kInvalidArgument, "tmax must be >= 0");
  require(o.record_every >= 1, ErrorKind::kInvalidArgument, "record_every must be >= 1");
  const Grids& g = solver.grids();
  if (o.target) {
    require(o.target->traits() == g.trait.size() && o.target->ages() == g.age.nodes(),
            ErrorKind::kInvalidArgument, "target shape differs from grids");
  }
  if (o.phi) {
    require(o.phi->traits() == g.trait.size() && o.phi->ages() == g.age.nodes(),
            ErrorKind::kInvalidArgument, "phi shape differs from grids");
  }
  Run run;
  DensityState s = std::move(initial);
  const auto steps = static_cast<std::size_t>(std::llround(o.tmax / solver.dt()));
  run.trace.reserve(steps / o.record_every + 2);
  run.trace.push_back(make_record(solver, s, o));
  if (o.snapshot_every) run.snapshots.push_back(s);
  for (std::size_t k = 1; k <= steps; ++k) {
    solver.step(s, o.dynamics);
    if (k % o.record_every == 0 || k == steps) run.trace.push_back(make_record(solver, s, o));
    if (o.snapshot_every && k % o.snapshot_every == 0) run.snapshots.push_back(s);
  }
  run.final_state = std::move(s);
  return run;
}

double transform_check(const PdeSolver& solver, const AgeTraitField& n0, double tmax) {
  const Grids& g = solver.grids();
  DensityState nl = make_state(n0, g);
  DensityState lin = make_state(n0, g);
  const double c = solver.model().competition();
  const double h = solver.dt();
  const auto steps = static_cast<std::size_t>(std::llround(tmax / h));
  double integral = 0.0;
  double worst = 0.0;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double before = nl.mass;
    solver.step(nl, Dynamics::kNonlinear);
    solver.step(lin, Dynamics::kLinear);
    integral += 0.5 * h * (before + nl.mass);
    const double factor = std::exp(c * integral);
    double diff = 0.0;
    for (std::size_t i = 0; i < nl.n.traits(); ++i) {
      const double wx = g.trait.weights[i];
      for (std::size_t j = 0; j < nl.n.ages(); ++j) {
        diff += std::abs(factor * nl.n(i, j) - lin.n(i, j)) * wx * g.age.weights[j];
      }
    }
    if (lin.mass > 0.0) worst = std::max(worst, diff / lin.mass);
  }
  return worst;
}

std::vector<TestFunction> default_test_basket(const Interval& d) {
  const double lo = d.lo;
  const double len = d.length();
  auto ex = [](double a) { return std::exp(-a); };
  std::vector<TestFunction> b;
  b.push_back({"one", [](double, double) { return 1.0; }, [](double, double) { return 0.0; }});
  for (int k = 0; k <= 2; ++k) {
    b.push_back({"x^" + std::to_string(k) + "*exp(-a)",
                 [=](double x, double a) { return std::pow((x - lo) / len, k) * ex(a); },
                 [=](double x, double a) { return -std::pow((x - lo) / len, k) * ex(a); }});
  }
  const double w = std::numbers::pi / len;
  b.push_back({"sin(pi x)*a*exp(-a)",
               [=](double x, double a) { return std::sin(w * (x - lo)) * a * ex(a); },
               [=](double x, double a) { return std::sin(w * (x - lo)) * (1.0 - a) * ex(a); }});
  b.push_back({"cos(pi x)*a*exp(-a)",
               [=](double x, double a) { return std::cos(w * (x - lo)) * a * ex(a); },
               [=](double x, double a) { return std::cos(w * (x - lo)) * (1.0 - a) * ex(a); }});
  return b;
}

double stationary_residual(const AgeTraitField& nbar, const RateModel& model,
                           const Grids& grids, const std::vector<TestFunction>& basket) {
  require(nbar.traits() == grids.trait.size() && nbar.ages() == grids.age.nodes(),
          ErrorKind::kInvalidArgument, "density shape differs from grids");
  const std::size_t nx = grids.trait.size();
  const double p = model.mutation_prob();
  const double mass = integrate(nbar, grids);
  const auto& xs = grids.trait.nodes;
  const auto& wx = grids.trait.weights;
  std::vector<double> kernel(nx * nx);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t l = 0; l < nx; ++l) kernel[i * nx + l] = model.kernel(xs[i], 0.0, xs[l]);
  }
  double worst = 0.0;
  for (const auto& tf : basket) {
    std::vector<double> f0(nx);
    for (std::size_t i = 0; i < nx; ++i) f0[i] = tf.f(xs[i], 0.0);
    double defect = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
      double mutant = 0.0;
      for (std::size_t l = 0; l < nx; ++l) mutant += kernel[i * nx + l] * f0[l] * wx[l];
      const double renewal = (1.0 - p) * f0[i] + p * mutant;
      double s = 0.0;
      for (std::size_t j = 0; j < nbar.ages(); ++j) {
        const double a = grids.age.node(j);
        const double g = tf.df_da(xs[i], a) -
                         (model.death(xs[i], a) + model.competition() * mass) * tf.f(xs[i], a) +
                         model.birth(xs[i], a) * renewal;
        s += g * nbar(i, j) * grids.age.weights[j];
      }
      defect += s * wx[i];
    }
    worst = std::max(worst, std::abs(defect));
  }
  return worst;
}

MassOdeDiagnostics mass_ode_diag(const std::vector<TraceRecord>& trace,
                                 double lambda_star, double competition) {
  MassOdeDiagnostics d;
  d.D.reserve(trace.size());
  for (const auto& r : trace) d.D.push_back(r.D_t);
  d.residual.assign(trace.size(), 0.0);
  for (std::size_t k = 1; k + 1 < trace.size(); ++k) {
    const double rho = trace[k].mass;
    const double drho = (trace[k + 1].mass - trace[k - 1].mass) /
                        (trace[k + 1].t - trace[k - 1].t);
    d.residual[k] = drho - rho * (trace[k].D_t + lambda_star) + competition * rho * rho;
    d.max_residual = std::max(d.max_residual, std::abs(d.residual[k]));
  }
  d.final_abs_D = trace.empty() ? 0.0 : std::abs(trace.back().D_t);
  return d;
}

RateFit fit_decay(const std::vector<double>& t, const std::vector<double>& value,
                  double t0, double t1) {
  require(t.size() == value.size(), ErrorKind::kInvalidArgument,
          "fit inputs have different lengths");
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  RateFit fit;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t0 - 1e-12 || t[k] > t1 + 1e-12 || !(value[k] > 0.0)) continue;
    const double y = std::log(value[k]);
    st += t[k];
    sy += y;
    stt += t[k] * t[k];
    sty += t[k] * y;
    ++fit.points;
  }
  require(fit.points >= 2, ErrorKind::kInvalidArgument,
          "decay fit needs at least two positive samples");
  const double m = static_cast<double>(fit.points);
  const double slope = (m * sty - st * sy) / (m * stt - st * st);
  fit.rate = -slope;
  fit.intercept = (sy - slope * st) / m;
  return fit;
}

namespace {

double bl_proxy(const AgeTraitField& a, const AgeTraitField& b, const Grids& g) {
  const double lo = g.trait.domain.lo;
  const double len = g.trait.domain.length();
  double best = 0.0;
  for (int k = 0; k <= 3; ++k) {
    for (int l = 0; l <= 2; ++l) {
      for (double phase : {0.0, std::numbers::pi / 2}) {
        const double kx = std::numbers::pi * k / len;
        const double lip = std::max(1.0, std::hypot(kx, static_cast<double>(l)));
        double s = 0.0;
        for (std::size_t i = 0; i < a.traits(); ++i) {
          const double x = g.trait.nodes[i] - lo;
          double row = 0.0;
          for (std::size_t j = 0; j < a.ages(); ++j) {
            const double f = std::cos(kx * x + l * g.age.node(j) + phase) / lip;
            row += f * (a(i, j) - b(i, j)) * g.age.weights[j];
          }
          s += row * g.trait.weights[i];
        }
        best = std::max(best, std::abs(s));
      }
    }
  }
  return best;
}

}  // namespace

DataDependence data_dependence(const PdeSolver& solver, const AgeTraitField& a,
                               const AgeTraitField& b, double tmax,
                               std::size_t record_every) {
  const Grids& g = solver.grids();
  DensityState sa = make_state(a, g);
  DensityState sb = make_state(b, g);
  DataDependence out;
  out.t.push_back(0.0);
  out.distance.push_back(bl_proxy(sa.n, sb.n, g));
  const auto steps = static_cast<std::size_t>(std::llround(tmax / solver.dt()));
  for (std::size_t k = 1; k <= steps; ++k) {
    solver.step(sa, Dynamics::kNonlinear);
    solver.step(sb, Dynamics::kNonlinear);
    if (k % record_every == 0 || k == steps) {
      out.t.push_back(sa.t);
      out.distance.push_back(bl_proxy(sa.n, sb.n, g));
    }
  }
  const double d0 = out.distance.front();
  out.c_hat = 0.0;
  for (std::size_t k = 1; k < out.t.size(); ++k) {
    if (d0 > 0.0 && out.distance[k] > 0.0) {
      out.c_hat = std::max(out.c_hat, std::log(out.distance[k] / d0) / out.t[k]);
    }
  }
  return out;
}

}  // namespace structpop
