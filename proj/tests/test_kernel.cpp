#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "structpop/config.hpp"
#include "structpop/error.hpp"
#include "structpop/kernel.hpp"

using namespace structpop;

namespace {

struct Fixture {
  RateModel model;
  Grids grids;
};

Fixture constant_setup(std::size_t nx = 16) {
  ScenarioConfig cfg = preset_constant();
  cfg.grids.nx = nx;
  RateModel m = make_model(cfg);
  return {m, build_grids(m, cfg.grids)};
}

}  // namespace

TEST(Survival, ClosedForms) {
  const Fixture s = constant_setup();
  EXPECT_EQ(survival_factor(s.model, 0.3, 0.0, 0.7, 0.01), 1.0);
  EXPECT_NEAR(survival_factor(s.model, 0.3, 1.0, 1.0, 0.01), std::exp(-2.0), 1e-14);
  EXPECT_NEAR(survival_factor(s.model, 0.3, 12.0, 0.0, 0.01), std::exp(-12.0), 1e-12 * std::exp(-12.0));
  EXPECT_THROW(survival_factor(s.model, 0.3, 1.0, -1.0, 0.01), Error);
}

TEST(Survival, DecreasingAlongTheLattice) {
  ScenarioConfig cfg = preset_constant();
  cfg.death = rates::LogisticAge{0.5, 2.0, 3.0, 2.0};
  const RateModel m = make_model(cfg);
  const Grids g = build_grids(m, cfg.grids);
  const auto ls = log_survival(m, 0.5, 0.2, g.age);
  EXPECT_EQ(ls.front(), 0.0);
  for (std::size_t j = 1; j < ls.size(); ++j) EXPECT_LT(ls[j], ls[j - 1]);
}

TEST(Truncation, LatticeHorizons) {
  const Fixture s = constant_setup();
  EXPECT_NEAR(choose_age_truncation(s.model, 0.0, 1e-10, 0.01), 23.72, 1e-9);
  // 2 exp(-2A) / 2 < 1e-10  =>  A > ln(1e10) / 2 = 11.513
  EXPECT_NEAR(choose_age_truncation(s.model, 1.0, 1e-10, 0.01), 11.52, 1e-9);
  EXPECT_NEAR(choose_age_truncation(s.model, 0.0, 10.0, 0.01), 0.01, 1e-15);
  EXPECT_LT(tail_bound(s.model, 0.0, 23.72), 1e-10);
  EXPECT_GE(tail_bound(s.model, 0.0, 23.71), 1e-10);
}

TEST(Collapse, ConstantModelClosedForms) {
  const Fixture s = constant_setup();
  for (auto [lambda, r, k] : {std::tuple{0.0, 1.4, 0.6}, std::tuple{1.0, 0.7, 0.3}}) {
    const CollapsedKernel c = collapse(s.model, s.grids, lambda);
    for (double v : c.r) EXPECT_NEAR(v, r, 1e-9);
    for (double v : c.K) EXPECT_NEAR(v, k, 1e-9);
    EXPECT_NEAR(c.rbar, r, 1e-9);
    EXPECT_LE(c.tail_bound, s.grids.age.tol);
  }
}

TEST(Collapse, ZeroBirthGivesZeroKernel) {
  ScenarioConfig cfg = preset_constant();
  cfg.birth = rates::Constant{0.0};
  cfg.grids.nx = 8;
  const RateModel m = make_model(cfg);
  const CollapsedKernel c = collapse(m, build_grids(m, cfg.grids), 0.0);
  for (double v : c.r) EXPECT_EQ(v, 0.0);
  for (double v : c.K) EXPECT_EQ(v, 0.0);
}

TEST(Collapse, SqrtGapAgainstClosedForm) {
  ScenarioConfig cfg = preset_singular();
  cfg.grids.nx = 32;
  const RateModel m = make_model(cfg);
  const Grids g = build_grids(m, cfg.grids);
  const double lambda = 2.8;
  const CollapsedKernel c = collapse(m, g, lambda);
  double rmax = 0.0;
  for (std::size_t i = 0; i < g.trait.size(); ++i) {
    const double b = 4.0 - std::sqrt(g.trait.nodes[i]);
    // Gregory quadrature of b exp(-3.8 a) at da = 0.01.
    EXPECT_NEAR(c.r[i], 0.95 * b / (1.0 + lambda), 1e-8);
    EXPECT_NEAR(c.kernel(i, 0), 0.05 * b / (1.0 + lambda), 1e-8);
    EXPECT_GT(c.r[i], 0.0);
    rmax = std::max(rmax, c.r[i]);
  }
  EXPECT_EQ(c.rbar, rmax);
}

TEST(Collapse, BadLambdaRejected) {
  const Fixture s = constant_setup();
  EXPECT_THROW(collapse(s.model, s.grids, -1.0), Error);
  EXPECT_THROW(collapse(s.model, s.grids, -1.5), Error);
}

TEST(Collapse, CsvHasRAndKRows) {
  const Fixture s = constant_setup(4);
  std::ostringstream out;
  write_kernel_csv(out, collapse(s.model, s.grids, 0.0), s.grids.trait);
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("kind,lambda,x,y,value\n", 0), 0u);
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  EXPECT_EQ(lines, 1u + 4u + 16u);
}
