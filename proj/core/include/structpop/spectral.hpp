#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "structpop/error.hpp"
#include "structpop/grid.hpp"
#include "structpop/kernel.hpp"

namespace structpop {

enum class OperatorKind { kDirect, kDual };
enum class Regime { kRegular, kPossiblySingular };

std::string_view to_string(OperatorKind kind) noexcept;
std::string_view to_string(Regime regime) noexcept;

/// Nystrom discretization of the renewal operator on the trait grid.
///   direct: M[i][j] = r_i d_ij + K(x_j, x_i) w_j
///   dual:   M[i][j] = r_i d_ij + K(x_i, x_j) w_j
struct DiscreteOperator {
  OperatorKind kind = OperatorKind::kDirect;
  double lambda = 0.0;
  std::size_t n = 0;
  std::vector<double> m;
  std::vector<double> weights;
  std::vector<double> r;
  double rbar = 0.0;

  double at(std::size_t i, std::size_t j) const { return m[i * n + j]; }
  double& at(std::size_t i, std::size_t j) { return m[i * n + j]; }
  void apply(const std::vector<double>& x, std::vector<double>& y) const;
};

DiscreteOperator assemble(const CollapsedKernel& kernel, const TraitGrid& grid,
                          OperatorKind kind);

struct PerronOptions {
  double tol = 1e-12;
  std::size_t max_iter = 200000;
  /// The iteration runs on M - theta * min(diag M), which keeps the matrix
  /// nonnegative with a positive diagonal.
  double shift_fraction = 0.9;
  /// Optional positive starting vector (warm start); uniform otherwise.
  std::vector<double> start;
  /// When set, stop as soon as the certified bracket excludes this value.
  std::optional<double> decide;
  /// Regime flag threshold: Regular iff rho - rbar > gap_tol_rel * rho.
  double gap_tol_rel = 1e-3;
};

struct PerronPair {
  double rho = 0.0;
  /// Nonnegative eigenvector normalised to sum(profile * w) = 1.
  std::vector<double> profile;
  std::size_t iterations = 0;
  /// max |M v - rho v| / max |v|.
  double residual = 0.0;
  /// Collatz-Wielandt bracket; certified when every profile entry is > 0.
  double lower = 0.0;
  double upper = 0.0;
  bool certified = false;
  /// True when the run stopped because the bracket excluded options.decide.
  bool decided = false;
  Regime regime = Regime::kRegular;
};

class PerronNotConverged : public Error {
 public:
  PerronNotConverged(const std::string& what, PerronPair last)
      : Error(ErrorKind::kNotConverged, what), last_(std::move(last)) {}
  const PerronPair& last_iterate() const noexcept { return last_; }

 private:
  PerronPair last_;
};

/// Shifted power iteration. Converged when the Collatz-Wielandt bracket has
/// relative width <= tol, or, for profiles with vanishing entries, when the
/// residual is <= tol * rho.
PerronPair perron(const DiscreteOperator& op, const PerronOptions& options = {});

/// max_ij |direct[i][j] w_i - dual[j][i] w_j|.
double adjoint_residual(const DiscreteOperator& direct,
                        const DiscreteOperator& dual);

/// Smallest m <= max_power with every entry of M^m positive; 0 if none.
std::size_t primitivity_index(const DiscreteOperator& op, std::size_t max_power);

struct RegimeReport {
  Regime regime = Regime::kRegular;
  double gap = 0.0;
  double gap_tol = 0.0;
  /// Nodes with r within gap_tol of rbar (discrete level set).
  std::size_t plateau_count = 0;
  /// sum over non-maximal nodes of w / (rbar - r).
  double inverse_gap_integral = 0.0;
  std::size_t argmax = 0;
  Interval band{};
  /// Fraction of profile mass inside band.
  double band_mass = 0.0;
};

struct RegimeOptions {
  /// Absolute gap threshold; defaults to gap_tol_rel * rho.
  std::optional<double> gap_tol;
  double gap_tol_rel = 1e-3;
  /// Band around argmax r; defaults to half-width 0.05 * Leb(S).
  std::optional<Interval> band;
};

/// Single-grid classification. This is evidence only: a refinement study is
/// the authoritative classifier.
RegimeReport regime_classify(const PerronPair& pair,
                             const CollapsedKernel& kernel,
                             const TraitGrid& grid,
                             const RegimeOptions& options = {});

struct DensityResult {
  std::vector<double> u;
  double fixed_point_residual = 0.0;
};

/// u_i = sum_j K(x_j, x_i) profile_j w_j / (rho - r_i), unit mass. Rejects
/// pairs whose gap rho - rbar is not above gap_tol.
DensityResult density_from_profile(const PerronPair& pair,
                                   const CollapsedKernel& kernel,
                                   const TraitGrid& grid, double gap_tol);

}  // namespace structpop
