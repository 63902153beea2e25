#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "structpop/config.hpp"
#include "structpop/kernel.hpp"
#include "structpop/spectral.hpp"

using namespace structpop;

namespace {

struct Case {
  RateModel model;
  Grids grids;
};

Case make_case(ScenarioConfig cfg, std::size_t nx) {
  cfg.grids.nx = nx;
  RateModel m = make_model(cfg);
  return {m, build_grids(m, cfg.grids)};
}

ScenarioConfig bump_config() {
  ScenarioConfig cfg = preset_constant();
  cfg.name = "bump";
  cfg.birth = rates::Gaussian{0.1, 3.0, 0.4, 0.15};
  cfg.kernel = kernels::Gaussian{0.1};
  cfg.p = 0.1;
  return cfg;
}

CollapsedKernel zero_mutation(CollapsedKernel k) {
  std::fill(k.K.begin(), k.K.end(), 0.0);
  return k;
}

}  // namespace

TEST(Assemble, HandAssembledTwoNodeOperator) {
  const Case c = make_case(preset_constant(), 2);
  const CollapsedKernel k = collapse(c.model, c.grids, 0.0);
  const DiscreteOperator d = assemble(k, c.grids.trait, OperatorKind::kDirect);
  EXPECT_NEAR(d.at(0, 0), 1.7, 1e-9);
  EXPECT_NEAR(d.at(0, 1), 0.3, 1e-9);
  EXPECT_NEAR(d.at(1, 0), 0.3, 1e-9);
  EXPECT_NEAR(d.at(1, 1), 1.7, 1e-9);
  const DiscreteOperator u = assemble(k, c.grids.trait, OperatorKind::kDual);
  EXPECT_EQ(adjoint_residual(d, u), 0.0);
}

TEST(Assemble, DualIsTransposeOnUniformWeights) {
  const Case c = make_case(bump_config(), 12);
  const CollapsedKernel k = collapse(c.model, c.grids, 0.5);
  const DiscreteOperator d = assemble(k, c.grids.trait, OperatorKind::kDirect);
  const DiscreteOperator u = assemble(k, c.grids.trait, OperatorKind::kDual);
  for (std::size_t i = 0; i < d.n; ++i)
    for (std::size_t j = 0; j < d.n; ++j) EXPECT_DOUBLE_EQ(d.at(i, j), u.at(j, i));
  EXPECT_LE(adjoint_residual(d, u), 1e-14);
}

TEST(Assemble, ZeroKernelIsDiagonal) {
  const Case c = make_case(bump_config(), 6);
  const CollapsedKernel k = zero_mutation(collapse(c.model, c.grids, 0.0));
  const DiscreteOperator d = assemble(k, c.grids.trait, OperatorKind::kDirect);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(d.at(i, j), i == j ? k.r[i] : 0.0);
}

TEST(Adjoint, PerturbationIsDetected) {
  const Case c = make_case(preset_constant(), 4);
  const CollapsedKernel k = collapse(c.model, c.grids, 0.0);
  const DiscreteOperator d = assemble(k, c.grids.trait, OperatorKind::kDirect);
  DiscreteOperator u = assemble(k, c.grids.trait, OperatorKind::kDual);
  u.at(2, 1) += 1e-3;
  EXPECT_NEAR(adjoint_residual(d, u), 1e-3 * c.grids.trait.weights[2], 1e-15);
}

TEST(Perron, ConstantModel) {
  for (std::size_t nx : {2u, 7u, 32u}) {
    const Case c = make_case(preset_constant(), nx);
    for (auto [lambda, expect] : {std::pair{0.0, 2.0}, std::pair{1.0, 1.0}}) {
      const PerronPair p =
          perron(assemble(collapse(c.model, c.grids, lambda), c.grids.trait, OperatorKind::kDirect));
      EXPECT_NEAR(p.rho, expect, 1e-9);
      EXPECT_TRUE(p.certified);
      for (double v : p.profile) EXPECT_NEAR(v, 1.0, 1e-9);
    }
  }
}

TEST(Perron, ZeroKernelPicksTheMaximum) {
  const Case c = make_case(bump_config(), 40);
  const CollapsedKernel k = zero_mutation(collapse(c.model, c.grids, 0.0));
  const PerronPair p = perron(assemble(k, c.grids.trait, OperatorKind::kDirect));
  EXPECT_NEAR(p.rho, k.rbar, 1e-12);
  const auto top = std::max_element(k.r.begin(), k.r.end()) - k.r.begin();
  const auto peak = std::max_element(p.profile.begin(), p.profile.end()) - p.profile.begin();
  EXPECT_EQ(top, peak);
  RegimeOptions ro;
  EXPECT_EQ(regime_classify(p, k, c.grids.trait, ro).regime, Regime::kPossiblySingular);
}

TEST(Perron, AgreesWithDenseEigensolver) {
  for (auto cfg : {preset_constant(), preset_singular(), bump_config()}) {
    for (std::size_t nx : {5u, 23u, 50u}) {
      const Case c = make_case(cfg, nx);
      for (double lambda : {0.0, 1.3, 3.0}) {
        const CollapsedKernel k = collapse(c.model, c.grids, lambda);
        for (auto kind : {OperatorKind::kDirect, OperatorKind::kDual}) {
          const DiscreteOperator op = assemble(k, c.grids.trait, kind);
          const PerronPair p = perron(op);
          const double dense = oracle::dense_spectral_radius(op.m, op.n);
          EXPECT_NEAR(p.rho, dense, 1e-8 * dense) << cfg.name << " nx=" << nx;
          EXPECT_GE(p.rho, k.rbar - 1e-12);
          EXPECT_LE(p.residual, 1e-9);
        }
      }
    }
  }
}

TEST(Perron, DirectAndDualSpectralRadiiMatch) {
  for (auto cfg : {preset_constant(), preset_singular(), bump_config()}) {
    const Case c = make_case(cfg, 64);
    for (double lambda : {0.0, 0.5, 1.0, 2.0, 3.0}) {
      const CollapsedKernel k = collapse(c.model, c.grids, lambda);
      const double a = perron(assemble(k, c.grids.trait, OperatorKind::kDirect)).rho;
      const double b = perron(assemble(k, c.grids.trait, OperatorKind::kDual)).rho;
      EXPECT_LE(std::abs(a - b) / a, 1e-10) << cfg.name << " lambda=" << lambda;
    }
  }
}

TEST(Perron, RegularProfileIsPositive) {
  const Case c = make_case(bump_config(), 50);
  const PerronPair p =
      perron(assemble(collapse(c.model, c.grids, 0.5), c.grids.trait, OperatorKind::kDirect));
  EXPECT_EQ(p.regime, Regime::kRegular);
  for (double v : p.profile) EXPECT_GT(v, 0.0);
  double mass = 0.0;
  for (std::size_t i = 0; i < p.profile.size(); ++i) mass += p.profile[i] * c.grids.trait.weights[i];
  EXPECT_NEAR(mass, 1.0, 1e-12);
}

TEST(Perron, NonConvergenceCarriesLastIterate) {
  const Case c = make_case(bump_config(), 30);
  PerronOptions o;
  o.max_iter = 2;
  o.tol = 1e-15;
  try {
    perron(assemble(collapse(c.model, c.grids, 0.0), c.grids.trait, OperatorKind::kDirect), o);
    FAIL();
  } catch (const PerronNotConverged& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotConverged);
    EXPECT_EQ(e.last_iterate().profile.size(), 30u);
    EXPECT_GT(e.last_iterate().upper, 0.0);
  }
}

TEST(Perron, DecideStopsEarly) {
  const Case c = make_case(preset_singular(), 200);
  const DiscreteOperator op =
      assemble(collapse(c.model, c.grids, 1.0), c.grids.trait, OperatorKind::kDirect);
  PerronOptions o;
  o.decide = 1.0;
  const PerronPair quick = perron(op, o);
  const PerronPair full = perron(op);
  EXPECT_TRUE(quick.decided);
  EXPECT_LT(quick.iterations, full.iterations);
  EXPECT_EQ(quick.lower > 1.0, full.rho > 1.0);
}

TEST(Regime, ConstantModelIsRegular) {
  const Case c = make_case(preset_constant(), 16);
  const CollapsedKernel k = collapse(c.model, c.grids, 1.0);
  const PerronPair p = perron(assemble(k, c.grids.trait, OperatorKind::kDirect));
  const RegimeReport r = regime_classify(p, k, c.grids.trait, {});
  EXPECT_NEAR(p.rho, 1.0, 1e-9);
  EXPECT_NEAR(k.rbar, 0.7, 1e-9);
  EXPECT_NEAR(r.gap, 0.3, 1e-9);
  EXPECT_EQ(r.regime, Regime::kRegular);
  EXPECT_EQ(r.plateau_count, 16u);
}

TEST(Regime, SqrtGapGapShrinksUnderRefinement) {
  double prev_gap = 1.0, prev_band = 0.0, prev_inv = 0.0;
  for (std::size_t nx : {100u, 200u, 400u}) {
    const Case c = make_case(preset_singular(), nx);
    const CollapsedKernel k = collapse(c.model, c.grids, 2.8);
    const PerronPair p = perron(assemble(k, c.grids.trait, OperatorKind::kDirect));
    RegimeOptions o;
    o.band = Interval{0.0, 0.05};
    const RegimeReport r = regime_classify(p, k, c.grids.trait, o);
    EXPECT_EQ(r.regime, Regime::kPossiblySingular);
    EXPECT_LT(r.gap, prev_gap);
    EXPECT_GT(r.band_mass, prev_band);
    // The inverse gap is integrable: the discrete integral stays bounded.
    if (prev_inv > 0.0) EXPECT_NEAR(r.inverse_gap_integral / prev_inv, 1.0, 0.05);
    prev_gap = r.gap;
    prev_band = r.band_mass;
    prev_inv = r.inverse_gap_integral;
  }
}

TEST(Density, ConstantModelIsOne) {
  const Case c = make_case(preset_constant(), 10);
  const CollapsedKernel k = collapse(c.model, c.grids, 1.0);
  const PerronPair p = perron(assemble(k, c.grids.trait, OperatorKind::kDirect));
  const DensityResult d = density_from_profile(p, k, c.grids.trait, 1e-3);
  for (double v : d.u) EXPECT_NEAR(v, 1.0, 1e-9);
  EXPECT_LE(d.fixed_point_residual, 1e-9);
}

TEST(Density, GaussianBumpPositiveAndMatchesDenseEigenvector) {
  const Case c = make_case(bump_config(), 40);
  const CollapsedKernel k = collapse(c.model, c.grids, 0.5);
  const DiscreteOperator op = assemble(k, c.grids.trait, OperatorKind::kDirect);
  const PerronPair p = perron(op);
  const DensityResult d = density_from_profile(p, k, c.grids.trait, 1e-3);
  for (double v : d.u) EXPECT_GT(v, 0.0);

  Eigen::MatrixXd a(op.n, op.n);
  for (std::size_t i = 0; i < op.n; ++i)
    for (std::size_t j = 0; j < op.n; ++j) a(i, j) = op.at(i, j);
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  Eigen::Index top = 0;
  es.eigenvalues().real().maxCoeff(&top);
  Eigen::VectorXd v = es.eigenvectors().col(top).real();
  double mass = 0.0;
  for (std::size_t i = 0; i < op.n; ++i) mass += v[i] * c.grids.trait.weights[i];
  for (std::size_t i = 0; i < op.n; ++i) EXPECT_NEAR(d.u[i], v[i] / mass, 1e-7);
}

TEST(Density, SingularInputRejected) {
  const Case c = make_case(bump_config(), 8);
  const CollapsedKernel k = zero_mutation(collapse(c.model, c.grids, 0.0));
  const PerronPair p = perron(assemble(k, c.grids.trait, OperatorKind::kDirect));
  EXPECT_THROW(density_from_profile(p, k, c.grids.trait, 1e-6), Error);
}

TEST(Primitivity, SomePowerIsPositive) {
  for (auto cfg : {preset_constant(), bump_config()}) {
    const Case c = make_case(cfg, 12);
    const DiscreteOperator op =
        assemble(collapse(c.model, c.grids, 0.0), c.grids.trait, OperatorKind::kDirect);
    const std::size_t m = primitivity_index(op, 12);
    EXPECT_GE(m, 1u);
    EXPECT_LE(m, 12u);
  }
  const Case c = make_case(bump_config(), 5);
  const DiscreteOperator diag = assemble(zero_mutation(collapse(c.model, c.grids, 0.0)),
                                         c.grids.trait, OperatorKind::kDirect);
  EXPECT_EQ(primitivity_index(diag, 5), 0u);
}

TEST(Perron, DualityPairingOnRandomVectors) {
  const Case c = make_case(bump_config(), 30);
  const CollapsedKernel k = collapse(c.model, c.grids, 0.7);
  const DiscreteOperator d = assemble(k, c.grids.trait, OperatorKind::kDirect);
  const DiscreteOperator u = assemble(k, c.grids.trait, OperatorKind::kDual);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> f(30), g(30), df, ug;
  for (int rep = 0; rep < 5; ++rep) {
    for (auto& v : f) v = unif(rng);
    for (auto& v : g) v = unif(rng);
    d.apply(f, df);
    u.apply(g, ug);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < 30; ++i) {
      lhs += df[i] * g[i] * c.grids.trait.weights[i];
      rhs += f[i] * ug[i] * c.grids.trait.weights[i];
    }
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}
