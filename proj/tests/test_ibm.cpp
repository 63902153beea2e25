#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "structpop/config.hpp"
#include "structpop/ibm.hpp"
#include "structpop/malthus.hpp"

using namespace structpop;

namespace {

struct Case {
  RateModel model;
  Grids grids;
};

Case make_case(ScenarioConfig cfg, std::size_t nx = 16) {
  cfg.grids.nx = nx;
  RateModel m = make_model(cfg);
  return {m, build_grids(m, cfg.grids)};
}

Population single(double trait, double scale = 1.0) {
  Population p;
  p.scale = scale;
  p.particles.push_back({trait, 0.0});
  return p;
}

Population cohort(std::size_t n, double scale) {
  Population p;
  p.scale = scale;
  for (std::size_t k = 0; k < n; ++k) p.particles.push_back({(k + 0.5) / n, -0.5});
  return p;
}

}  // namespace

TEST(Ibm, SingleParticleLifetimeIsExponential) {
  ScenarioConfig cfg = preset_constant();
  cfg.birth = rates::Constant{0.0};
  const Case c = make_case(cfg, 4);
  const IbmSimulator sim(c.model, c.grids.trait);
  std::vector<double> life;
  IbmOptions o;
  o.tmax = 1e3;
  for (std::uint64_t r = 0; r < 10000; ++r) {
    o.seed = replicate_seed(99, r);
    const EventLog log = simulate_nonlinear(sim, single(0.5), o);
    ASSERT_TRUE(log.extinction_time.has_value());
    life.push_back(*log.extinction_time);
  }
  // D = 1 plus c N / K = 1 for the lone particle.
  const double pv = oracle::ks_pvalue(life, [](double t) { return 1.0 - std::exp(-2.0 * t); });
  EXPECT_GT(pv, 0.01);
  const double wrong = oracle::ks_pvalue(life, [](double t) { return 1.0 - std::exp(-t); });
  EXPECT_LT(wrong, 1e-6);
}

TEST(Ibm, SameSeedSameLog) {
  const Case c = make_case(preset_constant());
  const IbmSimulator sim(c.model, c.grids.trait);
  IbmOptions o;
  o.tmax = 3.0;
  o.seed = 5;
  o.sample_times = {0.0, 1.0, 2.0, 3.0};
  const EventLog a = simulate_nonlinear(sim, cohort(200, 200.0), o);
  const EventLog b = simulate_nonlinear(sim, cohort(200, 200.0), o);
  ASSERT_EQ(a.samples.size(), 4u);
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    EXPECT_EQ(a.samples[k].count, b.samples[k].count);
    EXPECT_EQ(a.samples[k].t, b.samples[k].t);
  }
  EXPECT_EQ(a.births, b.births);
  EXPECT_EQ(a.deaths, b.deaths);
  EXPECT_EQ(a.mutations, b.mutations);
  ASSERT_EQ(a.final_population.count(), b.final_population.count());
  for (std::size_t k = 0; k < a.final_population.count(); ++k) {
    EXPECT_EQ(a.final_population.particles[k].trait, b.final_population.particles[k].trait);
    EXPECT_EQ(a.final_population.particles[k].birth_time,
              b.final_population.particles[k].birth_time);
  }
  o.seed = 6;
  const EventLog other = simulate_nonlinear(sim, cohort(200, 200.0), o);
  EXPECT_NE(other.births + other.deaths * 7919, a.births + a.deaths * 7919);
}

TEST(Ibm, NoCompetitionMatchesLinear) {
  ScenarioConfig cfg = preset_constant();
  cfg.c = 0.0;
  const Case c = make_case(cfg);
  const IbmSimulator sim(c.model, c.grids.trait);
  IbmOptions o;
  o.tmax = 2.0;
  o.seed = 11;
  const EventLog nl = simulate_nonlinear(sim, cohort(100, 100.0), o);
  const EventLog lin = simulate_linear(sim, cohort(100, 100.0), o);
  EXPECT_EQ(nl.births, lin.births);
  EXPECT_EQ(nl.deaths, lin.deaths);
  EXPECT_EQ(nl.phantoms, lin.phantoms);
  EXPECT_EQ(nl.final_population.count(), lin.final_population.count());
}

TEST(Ibm, PureDeathMean) {
  ScenarioConfig cfg = preset_constant();
  cfg.birth = rates::Constant{0.0};
  const Case c = make_case(cfg, 4);
  const IbmSimulator sim(c.model, c.grids.trait);
  std::vector<double> mass;
  IbmOptions o;
  o.tmax = 1.0;
  for (std::uint64_t r = 0; r < 400; ++r) {
    o.seed = replicate_seed(3, r);
    mass.push_back(simulate_linear(sim, cohort(100, 100.0), o).final_population.mass());
  }
  const MeanCi ci = mean_ci(mass);
  EXPECT_NEAR(ci.mean, std::exp(-1.0), 4.0 * ci.se);
}

TEST(Ibm, YuleMean) {
  ScenarioConfig cfg = preset_constant();
  cfg.birth = rates::Constant{1.0};
  cfg.death = rates::Constant{0.01};
  const Case c = make_case(cfg, 4);
  const IbmSimulator sim(c.model, c.grids.trait);
  std::vector<double> count;
  IbmOptions o;
  o.tmax = 2.0;
  for (std::uint64_t r = 0; r < 2000; ++r) {
    o.seed = replicate_seed(17, r);
    count.push_back(simulate_linear(sim, single(0.3), o).final_population.mass());
  }
  const MeanCi ci = mean_ci(count);
  EXPECT_NEAR(ci.mean, std::exp(0.99 * 2.0), 4.0 * ci.se);
}

TEST(Ibm, MutantsStayInDomainAndNoMutationKeepsTraits) {
  ScenarioConfig cfg = preset_constant();
  cfg.kernel = kernels::Gaussian{0.05};
  cfg.p = 0.99;
  const Case c = make_case(cfg, 20);
  const IbmSimulator sim(c.model, c.grids.trait);
  IbmOptions o;
  o.tmax = 2.0;
  const EventLog log = simulate_nonlinear(sim, cohort(50, 50.0), o);
  EXPECT_LE(log.mutations, log.births);
  EXPECT_GE(log.mutations, log.births * 9 / 10);
  double spread = 0.0;
  for (const Particle& q : log.final_population.particles) {
    EXPECT_GE(q.trait, 0.0);
    EXPECT_LE(q.trait, 1.0);
    spread = std::max(spread, q.trait);
  }
  EXPECT_GT(spread, 0.0);

  cfg.p = 1e-12;
  const Case k = make_case(cfg, 20);
  const IbmSimulator clone(k.model, k.grids.trait);
  const EventLog same = simulate_nonlinear(clone, single(0.37, 1.0), o);
  EXPECT_EQ(same.mutations, 0u);
  for (const Particle& q : same.final_population.particles) EXPECT_EQ(q.trait, 0.37);
}

TEST(Ibm, EmpiricalToGrid) {
  const Case c = make_case(preset_constant(), 8);
  Population p = single(0.3, 10.0);
  p.t = 0.5;
  const Deposit d = empirical_to_grid(p, c.grids);
  EXPECT_EQ(d.overflow, 0u);
  const std::size_t i = 2;  // midpoints 0.0625, 0.1875, 0.3125, ...
  const std::size_t j = 50;
  EXPECT_NEAR(d.state.n(i, j), 1.0 / (10.0 * c.grids.trait.weights[i] * c.grids.age.weights[j]),
              1e-12);
  EXPECT_NEAR(integrate(d.state.n, c.grids), 0.1, 1e-12);

  Population many = cohort(300, 100.0);
  many.particles.push_back({0.9, -1e3});
  const Deposit all = empirical_to_grid(many, c.grids);
  EXPECT_EQ(all.overflow, 1u);
  EXPECT_NEAR(integrate(all.state.n, c.grids), many.mass(), 1e-12);
  EXPECT_NEAR(all.state.mass, many.mass(), 1e-15);
}

TEST(Ibm, InitialSampleMatchesDensity) {
  const Case c = make_case(preset_constant(), 16);
  const StationaryState st = stationary_state(c.model, c.grids);
  const Population pop = sample_population(st.nbar, c.grids, 5000.0, 123);
  EXPECT_EQ(pop.count(), 5000u);
  std::vector<double> hist(16, 0.0);
  double age = 0.0;
  for (const Particle& q : pop.particles) {
    hist[std::min<std::size_t>(static_cast<std::size_t>(q.trait * 16.0), 15)] += 1.0 / 5000.0;
    age += q.age(0.0) / 5000.0;
  }
  double tv = 0.0;
  for (double h : hist) tv += std::abs(h - 1.0 / 16.0);
  EXPECT_LE(tv, 2.0 * std::sqrt(16.0 / 5000.0));
  // N = 2 exp(-2a) has mean age 1/2.
  EXPECT_NEAR(age, 0.5, 4.0 * 0.5 / std::sqrt(5000.0));
}

TEST(Ibm, MartingaleStartsAtPairing) {
  const Case c = make_case(preset_constant(), 16);
  MalthusSolver s(c.model, c.grids);
  const EigenTriple t = eigen_triple(s);
  const GridInterpolant phi(t.phi, c.grids);
  IbmOptions o;
  o.tmax = 1.0;
  o.keep_populations = true;
  const Population pop = sample_population(t.N, c.grids, 500.0, 8);
  const EventLog log = simulate_linear(IbmSimulator(c.model, c.grids.trait), pop, o);
  const auto v = martingale_series(log, phi, t.lambda_star);
  ASSERT_EQ(v.size(), 2u);
  // phi is identically one for this model, so V_0 is the initial mass.
  EXPECT_NEAR(v.front(), pop.mass(), 1e-5);
  EXPECT_NEAR(v.back(), std::exp(-t.lambda_star) * log.final_population.mass(), 1e-5);
}

TEST(Ibm, ReplicatesDoNotDependOnOrder) {
  const Case c = make_case(preset_constant(), 8);
  const IbmSimulator sim(c.model, c.grids.trait);
  const AgeTraitField n0 = uniform_density(c.grids, 1.0, 1.0);
  IbmOptions o;
  o.tmax = 1.0;
  o.seed = 31;
  ReplicateOptions rep;
  rep.scale = 100.0;
  rep.replicates = 4;
  const ReplicateSummary four = run_replicates(sim, n0, c.grids, o, rep);
  rep.replicates = 2;
  const ReplicateSummary two = run_replicates(sim, n0, c.grids, o, rep);
  EXPECT_EQ(two.mass[0], four.mass[0]);
  EXPECT_EQ(two.mass[1], four.mass[1]);
  IbmOptions solo = o;
  solo.seed = replicate_seed(31, 3);
  const EventLog third = sim.run(sample_population(n0, c.grids, 100.0, solo.seed), solo,
                                 Dynamics::kNonlinear);
  EXPECT_EQ(third.final_population.mass(), four.mass[3].back());
}

TEST(Ibm, MartingaleHypothesisConstant) {
  const Case c = make_case(preset_constant(), 16);
  MalthusSolver s(c.model, c.grids);
  const EigenTriple t = eigen_triple(s);
  const MartingaleHypothesis h = martingale_hypothesis(t.phi, c.model, c.grids);
  EXPECT_TRUE(h.finite);
  EXPECT_NEAR(h.c_hat, 3.0, 1e-3);
}

TEST(Ibm, ExplosionCapAborts) {
  ScenarioConfig cfg = preset_constant();
  cfg.birth = rates::Constant{5.0};
  const Case c = make_case(cfg, 4);
  const IbmSimulator sim(c.model, c.grids.trait);
  IbmOptions o;
  o.tmax = 10.0;
  o.max_particles = 1000;
  const EventLog log = simulate_linear(sim, cohort(100, 100.0), o);
  EXPECT_TRUE(log.aborted);
  EXPECT_FALSE(log.abort_reason.empty());
  EXPECT_LT(log.samples.size(), 2u);
}

TEST(Ibm, MeanCi) {
  const MeanCi ci = mean_ci({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(ci.mean, 2.5);
  EXPECT_NEAR(ci.sd, std::sqrt(5.0 / 3.0), 1e-14);
  EXPECT_NEAR(ci.se, std::sqrt(5.0 / 3.0) / 2.0, 1e-14);
  EXPECT_EQ(mean_ci({}).n, 0u);
}
