#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "structpop/grid.hpp"
#include "structpop/model.hpp"
#include "structpop/pde.hpp"

namespace structpop {

/// An individual; its age at time t is t - birth_time.
struct Particle {
  double trait = 0.0;
  double birth_time = 0.0;
  double age(double t) const noexcept { return t - birth_time; }
};

/// Particles of mass 1/scale at clock t.
struct Population {
  double scale = 1.0;
  double t = 0.0;
  std::uint64_t stream = 0;
  std::vector<Particle> particles;

  std::size_t count() const noexcept { return particles.size(); }
  double mass() const noexcept { return static_cast<double>(count()) / scale; }
};

/// Stream seed for a replicate, derived by splitmix64 from the base seed.
std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t replicate) noexcept;

/// round(scale * mass) i.i.d. draws from the lattice density: a cell is
/// chosen with probability proportional to n w omega, then the position is
/// uniform inside the cell.
Population sample_population(const AgeTraitField& density, const Grids& grids,
                             double scale, std::uint64_t seed);

struct IbmOptions {
  double tmax = 10.0;
  /// Sorted times in [0, tmax]; empty means {0, tmax}.
  std::vector<double> sample_times;
  std::uint64_t seed = 1;
  /// The run aborts with a partial log once the population exceeds this.
  std::size_t max_particles = 5'000'000;
  bool keep_populations = false;
};

struct SampleRecord {
  double t = 0.0;
  std::size_t count = 0;
  double mass = 0.0;
};

struct EventLog {
  std::uint64_t seed = 0;
  std::vector<SampleRecord> samples;
  /// Populations at the sample times when requested.
  std::vector<Population> populations;
  std::size_t births = 0;
  std::size_t mutations = 0;
  std::size_t deaths = 0;
  std::size_t phantoms = 0;
  bool aborted = false;
  std::string abort_reason;
  /// Time of the last death when the population went extinct.
  std::optional<double> extinction_time;
  Population final_population;
};

/// Exact simulation of the particle process by thinning against the bound
/// N (Bmax + Dmax + c N / K). Mutant traits are drawn from the kernel
/// tabulated on the trait grid: a cell by inverse CDF, then uniform inside.
class IbmSimulator {
 public:
  IbmSimulator(const RateModel& model, const TraitGrid& grid);

  EventLog run(Population initial, const IbmOptions& options,
               Dynamics dynamics) const;

  const RateModel& model() const noexcept { return model_; }
  const TraitGrid& grid() const noexcept { return grid_; }

 private:
  double mutant_trait(double parent, std::mt19937_64& rng) const;

  RateModel model_;
  TraitGrid grid_;
  /// Row l holds the cumulative cell probabilities of k(x_l, .).
  std::vector<double> cdf_;
};

EventLog simulate_nonlinear(const IbmSimulator& sim, Population initial,
                            const IbmOptions& options);
EventLog simulate_linear(const IbmSimulator& sim, Population initial,
                         const IbmOptions& options);

/// Bilinear interpolation of a lattice field; clamps outside the nodes.
class GridInterpolant {
 public:
  GridInterpolant(AgeTraitField field, const Grids& grids);
  double operator()(double x, double a) const;

 private:
  AgeTraitField field_;
  std::vector<double> traits_;
  double step_;
};

/// V_t = exp(-lambda* t) K^-1 sum phi(x, a) at each kept population.
std::vector<double> martingale_series(const EventLog& log, const GridInterpolant& phi,
                                      double lambda_star);

struct Deposit {
  DensityState state;
  /// Particles older than the horizon, folded into the last age cell.
  std::size_t overflow = 0;
};

/// Nearest-node histogram with value (1/K) / (w_i omega_j) per particle.
Deposit empirical_to_grid(const Population& pop, const Grids& grids);

struct ReplicateOptions {
  Dynamics dynamics = Dynamics::kNonlinear;
  std::size_t replicates = 50;
  double scale = 2000.0;
  /// When set, V_t is computed for every replicate.
  std::optional<AgeTraitField> phi;
  double lambda_star = 0.0;
};

struct ReplicateSummary {
  std::vector<double> times;
  /// [replicate][sample]
  std::vector<std::vector<double>> mass;
  std::vector<std::vector<double>> V;
  std::size_t aborted = 0;
};

/// Independent replicates from i.i.d. draws of the initial density. Replicate
/// r uses replicate_seed(options.seed, r), so results do not depend on the
/// execution order.
ReplicateSummary run_replicates(const IbmSimulator& sim,
                                const AgeTraitField& initial_density,
                                const Grids& grids, const IbmOptions& options,
                                const ReplicateOptions& rep);

struct MeanCi {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

MeanCi mean_ci(const std::vector<double>& values);

struct MartingaleHypothesis {
  /// max over the lattice of (G[phi^2] + D phi^2) / phi.
  double c_hat = 0.0;
  bool finite = false;
  std::string note;
};

MartingaleHypothesis martingale_hypothesis(const AgeTraitField& phi,
                                           const RateModel& model,
                                           const Grids& grids);

}  // namespace structpop
