#include "structpop/ibm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "structpop/error.hpp"

namespace structpop {

namespace {

std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t trait_cell(const TraitGrid& grid, double x) {
  const auto& nodes = grid.nodes;
  auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
  if (it == nodes.begin()) return 0;
  if (it == nodes.end()) return nodes.size() - 1;
  const auto k = static_cast<std::size_t>(it - nodes.begin());
  return (x - nodes[k - 1] <= nodes[k] - x) ? k - 1 : k;
}

std::vector<double> default_times(const IbmOptions& o) {
  if (o.sample_times.empty()) return {0.0, o.tmax};
  return o.sample_times;
}

}  // namespace

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t replicate) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(replicate + 0x632be59bd9b4e019ULL));
}

Population sample_population(const AgeTraitField& density, const Grids& grids,
                             double scale, std::uint64_t seed) {
  require(scale >= 1.0, ErrorKind::kInvalidArgument, "scale K must be >= 1");
  require(density.traits() == grids.trait.size() &&
              density.ages() == grids.age.nodes(),
          ErrorKind::kInvalidArgument, "density shape differs from grids");
  const std::size_t na = density.ages();
  std::vector<double> cell(density.data().size());
  double mass = 0.0;
  for (std::size_t i = 0; i < density.traits(); ++i) {
    for (std::size_t j = 0; j < na; ++j) {
      const double v = density(i, j);
      require(v >= 0.0 && std::isfinite(v), ErrorKind::kInvalidArgument,
              "density must be finite and nonnegative");
      cell[i * na + j] = v * grids.trait.weights[i] * grids.age.weights[j];
      mass += cell[i * na + j];
    }
  }
  Population pop;
  pop.scale = scale;
  pop.stream = seed;
  const auto count = static_cast<std::size_t>(std::llround(scale * mass));
  if (count == 0) return pop;

  std::mt19937_64 rng(splitmix64(seed ^ 0x5eedf00dULL));
  std::discrete_distribution<std::size_t> pick(cell.begin(), cell.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = grids.age.step;
  pop.particles.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t c = pick(rng);
    const std::size_t i = c / na;
    const std::size_t j = c % na;
    const double w = grids.trait.weights[i];
    const double x = grids.trait.nodes[i] + (unit(rng) - 0.5) * w;
    const double a_lo = std::max(0.0, grids.age.node(j) - 0.5 * h);
    const double a_hi = std::min(grids.age.horizon(), grids.age.node(j) + 0.5 * h);
    const double a = a_lo + unit(rng) * (a_hi - a_lo);
    pop.particles.push_back({std::clamp(x, grids.trait.domain.lo, grids.trait.domain.hi), -a});
  }
  return pop;
}

IbmSimulator::IbmSimulator(const RateModel& model, const TraitGrid& grid)
    : model_(model), grid_(grid) {
  const std::size_t n = grid_.size();
  require(n >= 1, ErrorKind::kInvalidArgument, "empty trait grid");
  cdf_.assign(n * n, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += model_.kernel(grid_.nodes[l], 0.0, grid_.nodes[i]) * grid_.weights[i];
      cdf_[l * n + i] = acc;
    }
    require(acc > 0.0, ErrorKind::kDomain, "mutation kernel has no mass on the grid");
    for (std::size_t i = 0; i < n; ++i) cdf_[l * n + i] /= acc;
  }
}

double IbmSimulator::mutant_trait(double parent, std::mt19937_64& rng) const {
  const std::size_t n = grid_.size();
  const std::size_t l = trait_cell(grid_, parent);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  const double* row = cdf_.data() + l * n;
  const auto i = std::min<std::size_t>(
      static_cast<std::size_t>(std::upper_bound(row, row + n, u) - row), n - 1);
  const double w = grid_.weights[i];
  const double y = grid_.nodes[i] + (unit(rng) - 0.5) * w;
  return std::clamp(y, grid_.domain.lo, grid_.domain.hi);
}

EventLog IbmSimulator::run(Population pop, const IbmOptions& options,
                           Dynamics dynamics) const {
  require(pop.scale >= 1.0, ErrorKind::kInvalidArgument, "scale K must be >= 1");
  require(options.tmax >= pop.t, ErrorKind::kInvalidArgument,
          "tmax precedes the population clock");
  const std::vector<double> times = default_times(options);
  require(std::is_sorted(times.begin(), times.end()) && times.front() >= pop.t &&
              times.back() <= options.tmax,
          ErrorKind::kInvalidArgument, "sample times must be sorted within [t0, tmax]");

  EventLog log;
  log.seed = options.seed;
  pop.stream = options.seed;
  std::mt19937_64 rng(options.seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double bmax = model_.birth_bound();
  const double dmax = model_.death_bound();
  const double c = dynamics == Dynamics::kNonlinear ? model_.competition() : 0.0;
  const double p = model_.mutation_prob();
  const double K = pop.scale;

  std::size_t next = 0;
  auto record_until = [&](double limit) {
    while (next < times.size() && times[next] <= limit) {
      log.samples.push_back({times[next], pop.count(), pop.mass()});
      if (options.keep_populations) {
        Population snap = pop;
        snap.t = times[next];
        log.populations.push_back(std::move(snap));
      }
      ++next;
    }
  };

  double t = pop.t;
  while (true) {
    const std::size_t N = pop.count();
    if (N == 0) break;
    const double crowd = c * static_cast<double>(N) / K;
    const double per = bmax + dmax + crowd;
    const double tau = expo(rng) / (static_cast<double>(N) * per);
    const double tn = t + tau;
    if (tn > options.tmax) break;
    record_until(std::nextafter(tn, -std::numeric_limits<double>::infinity()));
    t = tn;
    pop.t = t;

    std::uniform_int_distribution<std::size_t> who(0, N - 1);
    const std::size_t k = who(rng);
    const Particle ind = pop.particles[k];
    const double a = ind.age(t);
    const double mark = unit(rng) * per;
    const double b = model_.birth(ind.trait, a);
    if (mark < b) {
      double trait = ind.trait;
      if (unit(rng) < p) {
        trait = mutant_trait(ind.trait, rng);
        ++log.mutations;
      }
      pop.particles.push_back({trait, t});
      ++log.births;
      if (pop.count() > options.max_particles) {
        log.aborted = true;
        std::ostringstream msg;
        msg << "population exceeded " << options.max_particles << " particles at t=" << t;
        log.abort_reason = msg.str();
        break;
      }
    } else if (mark < b + model_.death(ind.trait, a) + crowd) {
      pop.particles[k] = pop.particles.back();
      pop.particles.pop_back();
      ++log.deaths;
      if (pop.particles.empty()) log.extinction_time = t;
    } else {
      ++log.phantoms;
    }
  }
  if (!log.aborted) {
    record_until(options.tmax);
    pop.t = options.tmax;
  }
  log.final_population = std::move(pop);
  return log;
}

EventLog simulate_nonlinear(const IbmSimulator& sim, Population initial,
                            const IbmOptions& options) {
  return sim.run(std::move(initial), options, Dynamics::kNonlinear);
}

EventLog simulate_linear(const IbmSimulator& sim, Population initial,
                         const IbmOptions& options) {
  return sim.run(std::move(initial), options, Dynamics::kLinear);
}

GridInterpolant::GridInterpolant(AgeTraitField field, const Grids& grids)
    : field_(std::move(field)), traits_(grids.trait.nodes), step_(grids.age.step) {
  require(field_.traits() == traits_.size() && field_.ages() == grids.age.nodes(),
          ErrorKind::kInvalidArgument, "field shape differs from grids");
}

double GridInterpolant::operator()(double x, double a) const {
  const std::size_t n = traits_.size();
  std::size_t i0 = 0;
  double tx = 0.0;
  if (n > 1 && x > traits_.front()) {
    if (x >= traits_.back()) {
      i0 = n - 2;
      tx = 1.0;
    } else {
      i0 = static_cast<std::size_t>(
               std::upper_bound(traits_.begin(), traits_.end(), x) - traits_.begin()) - 1;
      tx = (x - traits_[i0]) / (traits_[i0 + 1] - traits_[i0]);
    }
  }
  const std::size_t i1 = n > 1 ? i0 + 1 : i0;
  const std::size_t na = field_.ages();
  const double s = std::max(a, 0.0) / step_;
  std::size_t j0 = std::min(static_cast<std::size_t>(s), na - 1);
  double ta = s - static_cast<double>(j0);
  if (j0 + 1 >= na) {
    j0 = na - 1;
    ta = 0.0;
  }
  const std::size_t j1 = std::min(j0 + 1, na - 1);
  auto at = [&](std::size_t i) {
    return (1.0 - ta) * field_(i, j0) + ta * field_(i, j1);
  };
  return (1.0 - tx) * at(i0) + tx * at(i1);
}

std::vector<double> martingale_series(const EventLog& log, const GridInterpolant& phi,
                                      double lambda_star) {
  require(log.populations.size() == log.samples.size(), ErrorKind::kInvalidArgument,
          "martingale series needs populations kept at every sample time");
  std::vector<double> v;
  v.reserve(log.populations.size());
  for (const Population& pop : log.populations) {
    double s = 0.0;
    for (const Particle& q : pop.particles) s += phi(q.trait, q.age(pop.t));
    v.push_back(std::exp(-lambda_star * pop.t) * s / pop.scale);
  }
  return v;
}

Deposit empirical_to_grid(const Population& pop, const Grids& grids) {
  Deposit out;
  AgeTraitField n = make_field(grids);
  const std::size_t last = grids.age.steps;
  for (const Particle& q : pop.particles) {
    const std::size_t i = trait_cell(grids.trait, q.trait);
    const double a = std::max(q.age(pop.t), 0.0);
    auto j = static_cast<std::size_t>(std::llround(a / grids.age.step));
    if (j > last) {
      j = last;
      ++out.overflow;
    }
    n(i, j) += 1.0 / (pop.scale * grids.trait.weights[i] * grids.age.weights[j]);
  }
  out.state.t = pop.t;
  out.state.mass = pop.mass();
  out.state.n = std::move(n);
  return out;
}

ReplicateSummary run_replicates(const IbmSimulator& sim,
                                const AgeTraitField& initial_density,
                                const Grids& grids, const IbmOptions& options,
                                const ReplicateOptions& rep) {
  require(rep.replicates >= 1, ErrorKind::kInvalidArgument, "need at least one replicate");
  std::optional<GridInterpolant> phi;
  if (rep.phi) phi.emplace(*rep.phi, grids);
  ReplicateSummary out;
  out.times = default_times(options);
  out.mass.resize(rep.replicates);
  if (phi) out.V.resize(rep.replicates);
  for (std::size_t r = 0; r < rep.replicates; ++r) {
    IbmOptions o = options;
    o.seed = replicate_seed(options.seed, r);
    o.keep_populations = phi.has_value();
    Population pop = sample_population(initial_density, grids, rep.scale, o.seed);
    EventLog log = sim.run(std::move(pop), o, rep.dynamics);
    if (log.aborted) ++out.aborted;
    for (const SampleRecord& s : log.samples) out.mass[r].push_back(s.mass);
    if (phi) out.V[r] = martingale_series(log, *phi, rep.lambda_star);
  }
  return out;
}

MeanCi mean_ci(const std::vector<double>& values) {
  MeanCi out;
  out.n = values.size();
  if (values.empty()) return out;
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(out.n);
  if (out.n > 1) {
    double q = 0.0;
    for (double v : values) q += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(q / static_cast<double>(out.n - 1));
    out.se = out.sd / std::sqrt(static_cast<double>(out.n));
  }
  return out;
}

MartingaleHypothesis martingale_hypothesis(const AgeTraitField& phi,
                                           const RateModel& model,
                                           const Grids& grids) {
  require(phi.traits() == grids.trait.size() && phi.ages() == grids.age.nodes(),
          ErrorKind::kInvalidArgument, "phi shape differs from grids");
  MartingaleHypothesis out;
  const std::size_t n = phi.traits();
  const double p = model.mutation_prob();
  const double phi_min = *std::min_element(phi.data().begin(), phi.data().end());
  if (!(phi_min > 0.0)) {
    out.finite = false;
    out.c_hat = std::numeric_limits<double>::infinity();
    out.note = "phi vanishes on the lattice; no finite bound is evident";
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grids.trait.nodes[i];
    for (std::size_t j = 0; j < phi.ages(); ++j) {
      const double a = grids.age.node(j);
      double mutant = 0.0;
      for (std::size_t l = 0; l < n; ++l) {
        mutant += model.kernel(x, a, grids.trait.nodes[l]) * phi(l, 0) * phi(l, 0) *
                  grids.trait.weights[l];
      }
      const double g = model.birth(x, a) * ((1.0 - p) * phi(i, 0) * phi(i, 0) + p * mutant);
      const double value = (g + model.death(x, a) * phi(i, j) * phi(i, j)) / phi(i, j);
      out.c_hat = std::max(out.c_hat, value);
    }
  }
  out.finite = std::isfinite(out.c_hat);
  if (!out.finite) out.note = "grid sweep produced a non-finite bound";
  return out;
}

}  // namespace structpop
