#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace structpop {

/// Closed trait interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double length() const noexcept { return hi - lo; }
  bool contains(double x, double slack = 1e-12) const noexcept {
    return x >= lo - slack && x <= hi + slack;
  }
  bool operator==(const Interval&) const = default;
};

// Parametric rate families. Values are rates (1/time) evaluated at trait x
// and age a.
namespace rates {

struct Constant {
  double value = 0.0;
  bool operator==(const Constant&) const = default;
};

/// intercept + slope * x
struct Affine {
  double intercept = 0.0;
  double slope = 0.0;
  bool operator==(const Affine&) const = default;
};

/// peak - sqrt(|x - origin|); maximal at the origin with an integrable
/// inverse gap.
struct SqrtGap {
  double peak = 0.0;
  double origin = 0.0;
  bool operator==(const SqrtGap&) const = default;
};

/// base + amplitude * exp(-(x - center)^2 / (2 width^2))
struct Gaussian {
  double base = 0.0;
  double amplitude = 0.0;
  double center = 0.0;
  double width = 1.0;
  bool operator==(const Gaussian&) const = default;
};

/// low + (high - low) / (1 + exp(-steepness (a - midpoint)))
struct LogisticAge {
  double low = 0.0;
  double high = 0.0;
  double midpoint = 0.0;
  double steepness = 1.0;
  bool operator==(const LogisticAge&) const = default;
};

/// Bilinear interpolation of values[i * ages.size() + j] at (traits[i],
/// ages[j]), clamped outside the table.
struct Tabulated {
  std::vector<double> traits;
  std::vector<double> ages;
  std::vector<double> values;
  bool operator==(const Tabulated&) const = default;
};

}  // namespace rates

class RateFunction {
 public:
  using Family = std::variant<rates::Constant, rates::Affine, rates::SqrtGap,
                              rates::Gaussian, rates::LogisticAge,
                              rates::Tabulated>;

  RateFunction() = default;
  /// Accepts any rate family struct. Implicit so families read naturally.
  template <class F, class = std::enable_if_t<
                         std::is_constructible_v<Family, F&&> &&
                         !std::is_same_v<std::decay_t<F>, RateFunction>>>
  RateFunction(F&& family)  // NOLINT(google-explicit-constructor)
      : family_(std::forward<F>(family)) {
    validate();
  }

  double operator()(double x, double a) const;

  /// Bounds over domain x [0, inf).
  double sup(const Interval& domain) const;
  double inf(const Interval& domain) const;

  bool age_independent() const noexcept;
  std::string_view family_name() const noexcept;
  const Family& family() const noexcept { return family_; }

  bool operator==(const RateFunction&) const = default;

 private:
  void validate() const;

  Family family_ = rates::Constant{};
};

// Mutation kernels: probability densities in the offspring trait y.
namespace kernels {

/// k = 1 / Leb(S)
struct Uniform {
  bool operator==(const Uniform&) const = default;
};

/// Normal density centred on the parent trait, truncated and renormalised
/// to the domain.
struct Gaussian {
  double width = 0.1;
  bool operator==(const Gaussian&) const = default;
};

}  // namespace kernels

class MutationKernel {
 public:
  using Family = std::variant<kernels::Uniform, kernels::Gaussian>;

  MutationKernel() = default;
  MutationKernel(Family family, Interval domain);

  /// k(x, a, y): density of the mutant trait y for a parent (x, a).
  double operator()(double x, double a, double y) const;

  double sup() const;
  double inf() const;
  bool age_independent() const noexcept { return true; }
  std::string_view family_name() const noexcept;
  const Family& family() const noexcept { return family_; }
  const Interval& domain() const noexcept { return domain_; }

  bool operator==(const MutationKernel&) const = default;

 private:
  Family family_ = kernels::Uniform{};
  Interval domain_{};
};

/// Demographic data of the selection-mutation model on a one-dimensional
/// trait interval. c == 0 is accepted and denotes the linear dynamics.
class RateModel {
 public:
  RateModel(Interval domain, RateFunction birth, RateFunction death,
            MutationKernel kernel, double mutation_prob, double competition);

  double birth(double x, double a) const { return birth_(x, a); }
  double death(double x, double a) const { return death_(x, a); }
  double kernel(double x, double a, double y) const {
    return kernel_(x, a, y);
  }

  const Interval& domain() const noexcept { return domain_; }
  const RateFunction& birth_function() const noexcept { return birth_; }
  const RateFunction& death_function() const noexcept { return death_; }
  const MutationKernel& mutation_kernel() const noexcept { return kernel_; }
  double mutation_prob() const noexcept { return p_; }
  double competition() const noexcept { return c_; }

  double death_floor() const noexcept { return death_floor_; }
  double birth_bound() const noexcept { return birth_bound_; }
  double death_bound() const noexcept { return death_bound_; }

  RateModel with_competition(double c) const;
  RateModel with_birth(RateFunction birth) const;

 private:
  Interval domain_;
  RateFunction birth_;
  RateFunction death_;
  MutationKernel kernel_;
  double p_;
  double c_;
  double death_floor_;
  double birth_bound_;
  double death_bound_;
};

struct RatePair {
  double birth;
  double death;
};

/// Point evaluation with domain checks (x in S, a >= 0).
RatePair eval_rates(const RateModel& model, double x, double a);
double eval_kernel(const RateModel& model, double x, double a, double y);

}  // namespace structpop
