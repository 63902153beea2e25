#include "structpop/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace structpop {

std::string_view to_string(OperatorKind kind) noexcept {
  return kind == OperatorKind::kDirect ? "direct" : "dual";
}

std::string_view to_string(Regime regime) noexcept {
  return regime == Regime::kRegular ? "Regular" : "PossiblySingular";
}

void DiscreteOperator::apply(const std::vector<double>& x,
                             std::vector<double>& y) const {
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = m.data() + i * n;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += row[j] * x[j];
    y[i] = s;
  }
}

DiscreteOperator assemble(const CollapsedKernel& kernel, const TraitGrid& grid,
                          OperatorKind kind) {
  require(kernel.n == grid.size() && kernel.r.size() == kernel.n &&
              kernel.K.size() == kernel.n * kernel.n,
          ErrorKind::kInvalidArgument, "kernel and grid sizes differ");
  DiscreteOperator op;
  op.kind = kind;
  op.lambda = kernel.lambda;
  op.n = kernel.n;
  op.weights = grid.weights;
  op.r = kernel.r;
  op.rbar = kernel.rbar;
  op.m.assign(op.n * op.n, 0.0);
  const std::size_t n = op.n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double k = kind == OperatorKind::kDirect ? kernel.K[j * n + i]
                                                     : kernel.K[i * n + j];
      op.m[i * n + j] = k * grid.weights[j];
    }
    op.m[i * n + i] += kernel.r[i];
  }
  return op;
}

namespace {

struct Bracket {
  double lower;
  double upper;
  bool usable;
};

// Collatz-Wielandt bounds min/max (Mx)_i / x_i. Not usable when the vector
// has entries negligible against its maximum.
Bracket collatz_wielandt(const std::vector<double>& x,
                         const std::vector<double>& y) {
  const double xmax = *std::max_element(x.begin(), x.end());
  const double xmin = *std::min_element(x.begin(), x.end());
  if (!(xmin > 1e-8 * xmax)) return {0.0, 0.0, false};
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double q = y[i] / x[i];
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  return {lo, hi, true};
}

void finish(PerronPair& pair, const DiscreteOperator& op,
            std::vector<double> x, double gap_tol_rel) {
  double mass = 0.0;
  for (std::size_t i = 0; i < op.n; ++i) mass += x[i] * op.weights[i];
  if (mass > 0.0) {
    for (double& v : x) v /= mass;
  }
  std::vector<double> y;
  op.apply(x, y);
  double res = 0.0;
  double xmax = 0.0;
  for (std::size_t i = 0; i < op.n; ++i) {
    res = std::max(res, std::abs(y[i] - pair.rho * x[i]));
    xmax = std::max(xmax, x[i]);
  }
  pair.residual = xmax > 0.0 ? res / xmax : 0.0;
  pair.profile = std::move(x);
  pair.regime = pair.rho - op.rbar > gap_tol_rel * pair.rho
                    ? Regime::kRegular
                    : Regime::kPossiblySingular;
}

}  // namespace

PerronPair perron(const DiscreteOperator& op, const PerronOptions& options) {
  require(op.n > 0 && op.m.size() == op.n * op.n && op.weights.size() == op.n,
          ErrorKind::kInvalidArgument, "malformed operator");
  require(options.tol > 0.0, ErrorKind::kInvalidArgument,
          "perron tolerance must be > 0");
  const std::size_t n = op.n;
  double min_diag = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    min_diag = std::min(min_diag, op.at(i, i));
    for (std::size_t j = 0; j < n; ++j) {
      require(op.at(i, j) >= 0.0 && std::isfinite(op.at(i, j)),
              ErrorKind::kInvalidArgument,
              "operator entries must be finite and nonnegative");
    }
  }
  const double sigma = options.shift_fraction * min_diag;

  std::vector<double> x(n, 1.0);
  if (!options.start.empty()) {
    require(options.start.size() == n, ErrorKind::kInvalidArgument,
            "warm start has the wrong size");
    x = options.start;
    const double mx = *std::max_element(x.begin(), x.end());
    bool ok = mx > 0.0;
    for (double v : x) ok = ok && v >= 0.0 && std::isfinite(v);
    if (ok) {
      for (double& v : x) v = std::max(v / mx, 1e-300);
    } else {
      std::fill(x.begin(), x.end(), 1.0);
    }
  }

  PerronPair pair;
  std::vector<double> y(n);
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    op.apply(x, y);
    pair.iterations = it;
    const double ymax = *std::max_element(y.begin(), y.end());
    if (!(ymax > 0.0)) {
      pair.rho = 0.0;
      pair.lower = pair.upper = 0.0;
      pair.certified = true;
      finish(pair, op, std::vector<double>(n, 1.0), options.gap_tol_rel);
      return pair;
    }
    const Bracket cw = collatz_wielandt(x, y);
    if (cw.usable) {
      pair.lower = cw.lower;
      pair.upper = cw.upper;
      const double mid = 0.5 * (cw.lower + cw.upper);
      if (cw.upper - cw.lower <= options.tol * mid) {
        pair.rho = mid;
        pair.certified = true;
        finish(pair, op, x, options.gap_tol_rel);
        return pair;
      }
      if (options.decide &&
          (cw.lower > *options.decide || cw.upper < *options.decide)) {
        pair.rho = mid;
        pair.certified = true;
        pair.decided = true;
        finish(pair, op, x, options.gap_tol_rel);
        return pair;
      }
    } else {
      double xy = 0.0;
      double xx = 0.0;
      double xmax = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        xy += x[i] * y[i];
        xx += x[i] * x[i];
        xmax = std::max(xmax, x[i]);
      }
      const double rq = xy / xx;
      double res = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        res = std::max(res, std::abs(y[i] - rq * x[i]));
      }
      pair.rho = rq;
      if (res <= options.tol * rq * xmax) {
        pair.certified = false;
        pair.lower = pair.upper = rq;
        finish(pair, op, x, options.gap_tol_rel);
        return pair;
      }
    }
    double next_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = y[i] - sigma * x[i];
      next_max = std::max(next_max, x[i]);
    }
    for (double& v : x) v /= next_max;
  }
  if (pair.lower > 0.0) pair.rho = 0.5 * (pair.lower + pair.upper);
  finish(pair, op, x, options.gap_tol_rel);
  std::ostringstream msg;
  msg << "power iteration did not converge in " << options.max_iter
      << " iterations (bracket [" << pair.lower << ", " << pair.upper << "])";
  throw PerronNotConverged(msg.str(), pair);
}

double adjoint_residual(const DiscreteOperator& direct,
                        const DiscreteOperator& dual) {
  require(direct.n == dual.n && direct.weights == dual.weights,
          ErrorKind::kInvalidArgument, "operators live on different grids");
  double defect = 0.0;
  const auto& w = direct.weights;
  for (std::size_t i = 0; i < direct.n; ++i) {
    for (std::size_t j = 0; j < direct.n; ++j) {
      defect = std::max(defect,
                        std::abs(direct.at(i, j) * w[i] - dual.at(j, i) * w[j]));
    }
  }
  return defect;
}

std::size_t primitivity_index(const DiscreteOperator& op,
                              std::size_t max_power) {
  const std::size_t n = op.n;
  std::vector<char> base(n * n), power(n * n), next(n * n);
  for (std::size_t k = 0; k < n * n; ++k) base[k] = op.m[k] > 0.0;
  power = base;
  for (std::size_t m = 1; m <= max_power; ++m) {
    if (std::all_of(power.begin(), power.end(), [](char c) { return c != 0; })) {
      return m;
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        char v = 0;
        for (std::size_t k = 0; k < n && !v; ++k) {
          v = power[i * n + k] && base[k * n + j];
        }
        next[i * n + j] = v;
      }
    }
    power.swap(next);
  }
  return 0;
}

RegimeReport regime_classify(const PerronPair& pair,
                             const CollapsedKernel& kernel,
                             const TraitGrid& grid,
                             const RegimeOptions& options) {
  require(pair.profile.size() == kernel.n && kernel.n == grid.size(),
          ErrorKind::kInvalidArgument, "pair, kernel and grid sizes differ");
  RegimeReport rep;
  rep.gap = pair.rho - kernel.rbar;
  rep.gap_tol = options.gap_tol.value_or(options.gap_tol_rel * pair.rho);
  rep.regime = rep.gap > rep.gap_tol ? Regime::kRegular
                                     : Regime::kPossiblySingular;
  rep.argmax = static_cast<std::size_t>(
      std::max_element(kernel.r.begin(), kernel.r.end()) - kernel.r.begin());
  for (std::size_t i = 0; i < kernel.n; ++i) {
    const double d = kernel.rbar - kernel.r[i];
    if (d <= rep.gap_tol) ++rep.plateau_count;
    if (d > 0.0) rep.inverse_gap_integral += grid.weights[i] / d;
  }
  if (options.band) {
    rep.band = *options.band;
  } else {
    const double h = 0.05 * grid.domain.length();
    const double c = grid.nodes[rep.argmax];
    rep.band = {c - h, c + h};
  }
  double inside = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < kernel.n; ++i) {
    const double m = pair.profile[i] * grid.weights[i];
    total += m;
    if (grid.nodes[i] >= rep.band.lo && grid.nodes[i] <= rep.band.hi) inside += m;
  }
  rep.band_mass = total > 0.0 ? inside / total : 0.0;
  return rep;
}

DensityResult density_from_profile(const PerronPair& pair,
                                   const CollapsedKernel& kernel,
                                   const TraitGrid& grid, double gap_tol) {
  require(pair.profile.size() == kernel.n && kernel.n == grid.size(),
          ErrorKind::kInvalidArgument, "pair, kernel and grid sizes differ");
  if (!(pair.rho - kernel.rbar > gap_tol)) {
    std::ostringstream msg;
    msg << "density reconstruction needs rho - rbar > " << gap_tol
        << "; got " << pair.rho - kernel.rbar << " (possibly singular)";
    fail(ErrorKind::kInvalidArgument, msg.str());
  }
  const std::size_t n = kernel.n;
  DensityResult out;
  out.u.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      s += kernel.K[j * n + i] * pair.profile[j] * grid.weights[j];
    }
    out.u[i] = s / (pair.rho - kernel.r[i]);
  }
  double mass = 0.0;
  double pmass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mass += out.u[i] * grid.weights[i];
    pmass += pair.profile[i] * grid.weights[i];
  }
  for (double& v : out.u) v /= mass;
  for (std::size_t i = 0; i < n; ++i) {
    out.fixed_point_residual = std::max(
        out.fixed_point_residual, std::abs(out.u[i] - pair.profile[i] / pmass));
  }
  return out;
}

}  // namespace structpop
