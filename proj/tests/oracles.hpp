#pragma once

// Independent reference computations used by the tests. Nothing here calls
// the library solvers.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Spectral radius of a dense row-major n x n matrix by a full eigensolve.
inline double dense_spectral_radius(const std::vector<double>& m, std::size_t n) {
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = m[i * n + j];
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     double tol = 1e-14) {
  double flo = f(lo);
  for (int it = 0; it < 400 && hi - lo > tol * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Rank-one renewal operator with uniform mutation kernel on [0, 1] and
/// constant death D: with I(x) = B(x) / (D + lambda), the spectral radius
/// solves the secular equation sum_l p I_l w_l / (rho - (1-p) I_l) = 1.
struct SecularModel {
  std::function<double(double)> birth;
  double death = 1.0;
  double p = 0.05;
  std::vector<double> nodes;
  std::vector<double> weights;

  double integral(double x, double lambda) const { return birth(x) / (death + lambda); }

  double rho(double lambda) const {
    double rbar = 0.0;
    for (double x : nodes) rbar = std::max(rbar, (1 - p) * integral(x, lambda));
    auto f = [&](double rho) {
      double s = 0.0;
      for (std::size_t l = 0; l < nodes.size(); ++l) {
        const double il = integral(nodes[l], lambda);
        s += p * il * weights[l] / (rho - (1 - p) * il);
      }
      return s - 1.0;
    };
    double hi = rbar + 1.0;
    while (f(hi) > 0) hi *= 2;
    return bisect(f, rbar * (1 + 1e-15) + 1e-300, hi);
  }

  double lambda_star() const {
    auto f = [&](double lambda) { return rho(lambda) - 1.0; };
    double hi = 1.0;
    while (f(hi) > 0) hi *= 2;
    return bisect(f, 0.0, hi, 1e-13);
  }
};

/// Solution of m' = m (b - d) - c m^2.
inline double logistic_mass(double m0, double growth, double c, double t) {
  const double k = growth / c;
  return k / (1.0 + (k / m0 - 1.0) * std::exp(-growth * t));
}

/// One-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
inline double ks_pvalue(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    q += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  }
  return std::clamp(q, 0.0, 1.0);
}

}  // namespace oracle
