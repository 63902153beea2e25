#include "structpop/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "structpop/error.hpp"

namespace structpop {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double distance_to(const Interval& s, double x) {
  if (x < s.lo) return s.lo - x;
  if (x > s.hi) return x - s.hi;
  return 0.0;
}

double farthest_distance(const Interval& s, double x) {
  return std::max(std::abs(x - s.lo), std::abs(x - s.hi));
}

// Index i with grid[i] <= v < grid[i+1] and the interpolation fraction.
std::pair<std::size_t, double> locate(const std::vector<double>& grid,
                                      double v) {
  if (grid.size() == 1 || v <= grid.front()) return {0, 0.0};
  if (v >= grid.back()) return {grid.size() - 2, 1.0};
  auto it = std::upper_bound(grid.begin(), grid.end(), v);
  std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
  return {i, (v - grid[i]) / (grid[i + 1] - grid[i])};
}

double tabulated_value(const rates::Tabulated& t, double x, double a) {
  const std::size_t na = t.ages.size();
  auto [i, fx] = locate(t.traits, x);
  auto [j, fa] = locate(t.ages, a);
  const std::size_t i1 = std::min(i + 1, t.traits.size() - 1);
  const std::size_t j1 = std::min(j + 1, na - 1);
  const double v00 = t.values[i * na + j];
  const double v01 = t.values[i * na + j1];
  const double v10 = t.values[i1 * na + j];
  const double v11 = t.values[i1 * na + j1];
  return (1 - fx) * ((1 - fa) * v00 + fa * v01) +
         fx * ((1 - fa) * v10 + fa * v11);
}

void check_family(const RateFunction::Family& family) {
  std::visit(
      Overloaded{
          [](const rates::Constant& f) {
            require(std::isfinite(f.value), ErrorKind::kInvalidArgument,
                    "constant rate must be finite");
          },
          [](const rates::Affine& f) {
            require(std::isfinite(f.intercept) && std::isfinite(f.slope),
                    ErrorKind::kInvalidArgument,
                    "affine rate parameters must be finite");
          },
          [](const rates::SqrtGap& f) {
            require(std::isfinite(f.peak) && std::isfinite(f.origin),
                    ErrorKind::kInvalidArgument,
                    "sqrt_gap parameters must be finite");
          },
          [](const rates::Gaussian& f) {
            require(f.width > 0 && std::isfinite(f.base) &&
                        std::isfinite(f.amplitude) && std::isfinite(f.center),
                    ErrorKind::kInvalidArgument,
                    "gaussian rate needs finite parameters and width > 0");
          },
          [](const rates::LogisticAge& f) {
            require(std::isfinite(f.low) && std::isfinite(f.high) &&
                        std::isfinite(f.midpoint) &&
                        std::isfinite(f.steepness),
                    ErrorKind::kInvalidArgument,
                    "logistic_age parameters must be finite");
          },
          [](const rates::Tabulated& f) {
            require(!f.traits.empty() && !f.ages.empty() &&
                        f.values.size() == f.traits.size() * f.ages.size(),
                    ErrorKind::kInvalidArgument,
                    "tabulated rate needs values of size traits x ages");
            require(std::is_sorted(f.traits.begin(), f.traits.end()) &&
                        std::adjacent_find(f.traits.begin(), f.traits.end()) ==
                            f.traits.end(),
                    ErrorKind::kInvalidArgument,
                    "tabulated traits must be strictly increasing");
            require(std::is_sorted(f.ages.begin(), f.ages.end()) &&
                        std::adjacent_find(f.ages.begin(), f.ages.end()) ==
                            f.ages.end(),
                    ErrorKind::kInvalidArgument,
                    "tabulated ages must be strictly increasing");
            for (double v : f.values) {
              require(std::isfinite(v), ErrorKind::kInvalidArgument,
                      "tabulated values must be finite");
            }
          },
      },
      family);
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

}  // namespace

void RateFunction::validate() const { check_family(family_); }

double RateFunction::operator()(double x, double a) const {
  return std::visit(
      Overloaded{
          [](const rates::Constant& f) { return f.value; },
          [x](const rates::Affine& f) { return f.intercept + f.slope * x; },
          [x](const rates::SqrtGap& f) {
            return f.peak - std::sqrt(std::abs(x - f.origin));
          },
          [x](const rates::Gaussian& f) {
            const double z = (x - f.center) / f.width;
            return f.base + f.amplitude * std::exp(-0.5 * z * z);
          },
          [a](const rates::LogisticAge& f) {
            return f.low + (f.high - f.low) /
                               (1.0 + std::exp(-f.steepness * (a - f.midpoint)));
          },
          [x, a](const rates::Tabulated& f) { return tabulated_value(f, x, a); },
      },
      family_);
}

double RateFunction::sup(const Interval& s) const {
  return std::visit(
      Overloaded{
          [](const rates::Constant& f) { return f.value; },
          [&s](const rates::Affine& f) {
            return f.intercept + std::max(f.slope * s.lo, f.slope * s.hi);
          },
          [&s](const rates::SqrtGap& f) {
            return f.peak - std::sqrt(distance_to(s, f.origin));
          },
          [&s](const rates::Gaussian& f) {
            const double near = distance_to(s, f.center) / f.width;
            const double far = farthest_distance(s, f.center) / f.width;
            const double g_near = std::exp(-0.5 * near * near);
            const double g_far = std::exp(-0.5 * far * far);
            return f.base + std::max(f.amplitude * g_near, f.amplitude * g_far);
          },
          [this](const rates::LogisticAge& f) {
            const double limit = f.steepness > 0   ? f.high
                                 : f.steepness < 0 ? f.low
                                                   : (*this)(0.0, 0.0);
            return std::max((*this)(0.0, 0.0), limit);
          },
          [](const rates::Tabulated& f) {
            return *std::max_element(f.values.begin(), f.values.end());
          },
      },
      family_);
}

double RateFunction::inf(const Interval& s) const {
  return std::visit(
      Overloaded{
          [](const rates::Constant& f) { return f.value; },
          [&s](const rates::Affine& f) {
            return f.intercept + std::min(f.slope * s.lo, f.slope * s.hi);
          },
          [&s](const rates::SqrtGap& f) {
            return f.peak - std::sqrt(farthest_distance(s, f.origin));
          },
          [&s](const rates::Gaussian& f) {
            const double near = distance_to(s, f.center) / f.width;
            const double far = farthest_distance(s, f.center) / f.width;
            const double g_near = std::exp(-0.5 * near * near);
            const double g_far = std::exp(-0.5 * far * far);
            return f.base + std::min(f.amplitude * g_near, f.amplitude * g_far);
          },
          [this](const rates::LogisticAge& f) {
            const double limit = f.steepness > 0   ? f.high
                                 : f.steepness < 0 ? f.low
                                                   : (*this)(0.0, 0.0);
            return std::min((*this)(0.0, 0.0), limit);
          },
          [](const rates::Tabulated& f) {
            return *std::min_element(f.values.begin(), f.values.end());
          },
      },
      family_);
}

bool RateFunction::age_independent() const noexcept {
  return std::visit(
      Overloaded{
          [](const rates::LogisticAge& f) { return f.low == f.high; },
          [](const rates::Tabulated& f) { return f.ages.size() == 1; },
          [](const auto&) { return true; },
      },
      family_);
}

std::string_view RateFunction::family_name() const noexcept {
  return std::visit(
      Overloaded{
          [](const rates::Constant&) { return std::string_view("constant"); },
          [](const rates::Affine&) { return std::string_view("affine"); },
          [](const rates::SqrtGap&) { return std::string_view("sqrt_gap"); },
          [](const rates::Gaussian&) { return std::string_view("gaussian"); },
          [](const rates::LogisticAge&) {
            return std::string_view("logistic_age");
          },
          [](const rates::Tabulated&) { return std::string_view("tabulated"); },
      },
      family_);
}

MutationKernel::MutationKernel(Family family, Interval domain)
    : family_(family), domain_(domain) {
  require(domain.lo < domain.hi, ErrorKind::kInvalidArgument,
          "kernel domain must have lo < hi");
  if (const auto* g = std::get_if<kernels::Gaussian>(&family_)) {
    require(g->width > 0 && std::isfinite(g->width),
            ErrorKind::kInvalidArgument, "gaussian kernel width must be > 0");
  }
}

double MutationKernel::operator()(double x, double /*a*/, double y) const {
  return std::visit(
      Overloaded{
          [this](const kernels::Uniform&) { return 1.0 / domain_.length(); },
          [this, x, y](const kernels::Gaussian& g) {
            const double s = g.width;
            const double mass = normal_cdf((domain_.hi - x) / s) -
                                normal_cdf((domain_.lo - x) / s);
            const double z = (y - x) / s;
            return std::exp(-0.5 * z * z) /
                   (s * std::sqrt(2.0 * std::numbers::pi) * mass);
          },
      },
      family_);
}

double MutationKernel::sup() const {
  if (std::holds_alternative<kernels::Uniform>(family_)) {
    return 1.0 / domain_.length();
  }
  // The peak k(x, x) is largest where the truncated mass is smallest.
  return std::max((*this)(domain_.lo, 0.0, domain_.lo),
                  (*this)(0.5 * (domain_.lo + domain_.hi), 0.0,
                          0.5 * (domain_.lo + domain_.hi)));
}

double MutationKernel::inf() const {
  if (std::holds_alternative<kernels::Uniform>(family_)) {
    return 1.0 / domain_.length();
  }
  double lowest = std::numeric_limits<double>::infinity();
  constexpr int kSamples = 257;
  for (int s = 0; s < kSamples; ++s) {
    const double x = domain_.lo + domain_.length() * s / (kSamples - 1);
    lowest = std::min({lowest, (*this)(x, 0.0, domain_.lo),
                       (*this)(x, 0.0, domain_.hi)});
  }
  return lowest;
}

std::string_view MutationKernel::family_name() const noexcept {
  return std::holds_alternative<kernels::Uniform>(family_) ? "uniform"
                                                           : "gaussian";
}

RateModel::RateModel(Interval domain, RateFunction birth, RateFunction death,
                     MutationKernel kernel, double mutation_prob,
                     double competition)
    : domain_(domain),
      birth_(std::move(birth)),
      death_(std::move(death)),
      kernel_(std::move(kernel)),
      p_(mutation_prob),
      c_(competition) {
  require(std::isfinite(domain.lo) && std::isfinite(domain.hi) &&
              domain.lo < domain.hi,
          ErrorKind::kInvalidArgument, "trait domain must satisfy lo < hi");
  require(kernel_.domain() == domain_, ErrorKind::kInvalidArgument,
          "mutation kernel domain differs from trait domain");
  require(p_ > 0.0 && p_ < 1.0, ErrorKind::kInvalidArgument,
          "mutation probability must lie in (0, 1)");
  require(std::isfinite(c_) && c_ >= 0.0, ErrorKind::kInvalidArgument,
          "competition must be finite and >= 0");
  birth_bound_ = birth_.sup(domain_);
  death_bound_ = death_.sup(domain_);
  death_floor_ = death_.inf(domain_);
  require(birth_.inf(domain_) >= 0.0, ErrorKind::kInvalidArgument,
          "birth rate must be nonnegative on the domain");
  require(death_floor_ > 0.0, ErrorKind::kInvalidArgument,
          "death rate must be bounded below by a positive constant");
  require(std::isfinite(birth_bound_) && std::isfinite(death_bound_),
          ErrorKind::kInvalidArgument, "rates must be bounded");
}

RateModel RateModel::with_competition(double c) const {
  return RateModel(domain_, birth_, death_, kernel_, p_, c);
}

RateModel RateModel::with_birth(RateFunction birth) const {
  return RateModel(domain_, std::move(birth), death_, kernel_, p_, c_);
}

RatePair eval_rates(const RateModel& model, double x, double a) {
  if (!model.domain().contains(x) || !(a >= 0.0) || !std::isfinite(a)) {
    std::ostringstream msg;
    msg << "rate evaluation outside the domain: x=" << x << " a=" << a;
    fail(ErrorKind::kDomain, msg.str());
  }
  return {model.birth(x, a), model.death(x, a)};
}

double eval_kernel(const RateModel& model, double x, double a, double y) {
  if (!model.domain().contains(x) || !model.domain().contains(y) ||
      !(a >= 0.0) || !std::isfinite(a)) {
    std::ostringstream msg;
    msg << "kernel evaluation outside the domain: x=" << x << " a=" << a
        << " y=" << y;
    fail(ErrorKind::kDomain, msg.str());
  }
  return model.kernel(x, a, y);
}

}  // namespace structpop
