#pragma once

// Independent numerical oracles shared by the unit tests and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace vaelab::testing {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                           double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
  return simpson_step(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

/// Adaptive Simpson quadrature of f over [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson_step(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, 50);
}

inline double chi2_density(double t, int k) {
  if (t <= 0) return k == 2 ? 0.5 : 0.0;
  const double h = 0.5 * k;
  return std::exp((h - 1) * std::log(t) - t / 2 - h * std::log(2.0) - std::lgamma(h));
}

/// CDF of chi-squared with k degrees of freedom by direct quadrature of the density.
inline double chi2_cdf_quadrature(double x, int k) {
  return integrate([k](double t) { return chi2_density(t, k); }, 0, x, 1e-13);
}

/// Kolmogorov-Smirnov distance between a sample and Uniform(0, 1).
inline double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1) / n - p[i], p[i] - static_cast<double>(i) / n});
  }
  return d;
}

/// Random symmetric positive definite n x n matrix: B B^T / n + floor * I.
inline std::vector<double> random_spd(std::size_t n, std::mt19937_64& rng, double floor = 0.05) {
  std::normal_distribution<double> g;
  std::vector<double> b(n * n), a(n * n, 0);
  for (auto& v : b) v = g(rng);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) a[i * n + j] += b[i * n + k] * b[j * n + k];
      a[i * n + j] /= static_cast<double>(n);
    }
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += floor;
  return a;
}

/// Lower Cholesky factor of an SPD matrix (test-side, unpivoted).
inline std::vector<double> cholesky(const std::vector<double>& a, std::size_t n) {
  std::vector<double> l(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = i == j ? std::sqrt(s) : s / l[j * n + j];
    }
  return l;
}

}  // namespace vaelab::testing
