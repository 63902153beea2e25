#include <gtest/gtest.h>

#include <cmath>

#include "structpop/error.hpp"
#include "structpop/model.hpp"

using namespace structpop;

namespace {

RateModel constant_model(double b = 2.0, double d = 1.0, double p = 0.3, double c = 1.0) {
  return RateModel({0.0, 1.0}, rates::Constant{b}, rates::Constant{d},
                   MutationKernel(kernels::Uniform{}, {0.0, 1.0}), p, c);
}

}  // namespace

TEST(Rates, ConstantFamilyAtAnyPoint) {
  const RateModel m = constant_model();
  for (double x : {0.0, 0.3, 1.0}) {
    for (double a : {0.0, 2.5, 40.0}) {
      const RatePair r = eval_rates(m, x, a);
      EXPECT_EQ(r.birth, 2.0);
      EXPECT_EQ(r.death, 1.0);
    }
  }
}

TEST(Rates, SqrtGapAtQuarter) {
  const RateFunction f = rates::SqrtGap{4.0, 0.0};
  EXPECT_DOUBLE_EQ(f(0.25, 0.0), 3.5);
  EXPECT_DOUBLE_EQ(f.sup({0.0, 1.0}), 4.0);
  EXPECT_DOUBLE_EQ(f.inf({0.0, 1.0}), 3.0);
}

TEST(Rates, AffineGaussianLogistic) {
  const RateFunction affine = rates::Affine{1.0, -0.5};
  EXPECT_DOUBLE_EQ(affine(0.4, 7.0), 0.8);
  EXPECT_DOUBLE_EQ(affine.sup({0.0, 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(affine.inf({0.0, 1.0}), 0.5);

  const RateFunction bump = rates::Gaussian{0.1, 2.0, 0.5, 0.1};
  EXPECT_DOUBLE_EQ(bump(0.5, 0.0), 2.1);
  EXPECT_NEAR(bump(0.6, 0.0), 0.1 + 2.0 * std::exp(-0.5), 1e-15);
  EXPECT_TRUE(bump.age_independent());

  const RateFunction logistic = rates::LogisticAge{1.0, 3.0, 2.0, 4.0};
  EXPECT_DOUBLE_EQ(logistic(0.0, 2.0), 2.0);
  EXPECT_FALSE(logistic.age_independent());
  EXPECT_LE(logistic.sup({0.0, 1.0}), 3.0 + 1e-12);
  EXPECT_GE(logistic.inf({0.0, 1.0}), 1.0 - 1e-12);
}

TEST(Rates, TabulatedIsBilinearAndClamped) {
  const RateFunction t = rates::Tabulated{{0.0, 1.0}, {0.0, 2.0}, {1.0, 3.0, 2.0, 6.0}};
  EXPECT_DOUBLE_EQ(t(0.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(t(0.5, 1.0), 0.25 * (1.0 + 3.0 + 2.0 + 6.0));
  EXPECT_DOUBLE_EQ(t(1.0, 10.0), 6.0);
  EXPECT_THROW((RateFunction{rates::Tabulated{{0.0, 1.0}, {0.0}, {1.0}}}), Error);
}

TEST(Rates, InvalidParametersRejected) {
  EXPECT_THROW((RateFunction{rates::Gaussian{0.0, 1.0, 0.5, 0.0}}), Error);
  EXPECT_THROW((RateFunction{rates::Constant{std::nan("")}}), Error);
}

TEST(Kernels, UniformIsOneEverywhere) {
  const RateModel m = constant_model();
  for (double x : {0.0, 0.5, 1.0}) {
    for (double y : {0.0, 0.25, 1.0}) EXPECT_EQ(eval_kernel(m, x, 3.0, y), 1.0);
  }
}

TEST(Kernels, GaussianIsNormalisedOnTheDomain) {
  const MutationKernel k(kernels::Gaussian{0.1}, {0.0, 1.0});
  for (double x : {0.0, 0.3, 1.0}) {
    // Composite Simpson on a fine grid as an independent check.
    const int n = 20000;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double y = static_cast<double>(i) / n;
      const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      s += wgt * k(x, 0.0, y);
    }
    EXPECT_NEAR(s / (3.0 * n), 1.0, 1e-8) << "x=" << x;
  }
}

TEST(Model, DomainChecks) {
  const RateModel m = constant_model();
  EXPECT_THROW(eval_rates(m, 1.5, 0.0), Error);
  EXPECT_THROW(eval_rates(m, 0.5, -1.0), Error);
  EXPECT_THROW(eval_kernel(m, 0.5, 0.0, -0.2), Error);
  try {
    eval_rates(m, -3.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
}

TEST(Model, ValidationOfParameters) {
  EXPECT_THROW(constant_model(2.0, 1.0, 0.0), Error);
  EXPECT_THROW(constant_model(2.0, 1.0, 1.0), Error);
  EXPECT_THROW(constant_model(2.0, 1.0, 0.3, -1.0), Error);
  EXPECT_THROW(constant_model(2.0, 0.0), Error);
  EXPECT_THROW(constant_model(-1.0, 1.0), Error);
  EXPECT_NO_THROW(constant_model(2.0, 1.0, 0.3, 0.0));
}

TEST(Model, BoundsAndBuilders) {
  const RateModel m = constant_model();
  EXPECT_EQ(m.birth_bound(), 2.0);
  EXPECT_EQ(m.death_bound(), 1.0);
  EXPECT_EQ(m.death_floor(), 1.0);
  EXPECT_EQ(m.with_competition(2.0).competition(), 2.0);
  EXPECT_EQ(m.with_birth(rates::Constant{0.5}).birth(0.2, 0.0), 0.5);
}

TEST(Errors, KindNames) {
  EXPECT_EQ(to_string(ErrorKind::kSubcritical), "subcritical");
  EXPECT_EQ(to_string(ErrorKind::kConfig), "config");
  const SubcriticalError e("x", 0.5);
  EXPECT_EQ(e.kind(), ErrorKind::kSubcritical);
  EXPECT_EQ(e.rho_at_zero(), 0.5);
}
