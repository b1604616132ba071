#pragma once

#include <span>
#include <vector>

#include "vaelab/tensor.hpp"

namespace vaelab::inline VAELAB_NS {

inline constexpr double kCovarianceRegularizer = 1e-6;
inline constexpr double kPsdTolerance = 1e-6;

/// Mean and covariance (row-major dim x dim) of a set of logit vectors.
struct GaussianStats {
  std::vector<double> m;
  std::vector<double> sigma;
  std::size_t count = 0;

  std::size_t dim() const { return m.size(); }
  double cov(std::size_t i, std::size_t j) const { return sigma[i * dim() + j]; }
};

/// Sample mean and covariance (divisor N - 1) plus 1e-6 I. Needs N >= 2;
/// the regularizer keeps the covariance invertible for any N.
GaussianStats fit_stats(const Tensor& logits);
/// One GaussianStats per label; every class needs at least 2 rows.
std::vector<GaussianStats> fit_class_stats(const Tensor& logits, std::span<const int> labels, std::size_t classes);
/// Rounds m and sigma to single precision, the resolution the stats cache stores.
void round_to_f32(GaussianStats& stats);

/// Symmetric eigendecomposition by cyclic Jacobi rotations. `vectors` is
/// row-major n x n with eigenvector j in column j.
struct SymEigen {
  std::vector<double> values;
  std::vector<double> vectors;
};
SymEigen jacobi_eigen(std::span<const double> a, std::size_t n);

/// Symmetric PSD square root; eigenvalues below -1e-6 raise NumericError,
/// smaller negative ones are clamped to 0.
std::vector<double> sqrt_psd(std::span<const double> a, std::size_t n);

/// ||ma - mb||^2 + Tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2)
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

/// Closed form for even k; other k are a ContractError, x < 0 a DomainError.
double chi2_cdf(double x, int k = 10);
/// 1 - chi2_cdf, summed directly so that small tails keep their precision.
double chi2_sf(double x, int k = 10);

/// (x - m)^T S^-1 (x - m) through a Cholesky factor of S, computed once.
class Mahalanobis {
 public:
  explicit Mahalanobis(const GaussianStats& stats);
  double d2(std::span<const double> x) const;
  std::size_t dim() const { return m_.size(); }

 private:
  std::vector<double> m_;
  std::vector<double> chol_;  // lower triangle, row-major
};

struct PValueResult {
  int label = 0;
  double d2 = 0;
  double p = 1;
};

/// Lowest index among the maxima.
int argmax(std::span<const double> x);

double unconditional_p_value(std::span<const double> logits, const GaussianStats& global);
PValueResult conditional_p_value(std::span<const double> logits, const std::vector<GaussianStats>& per_class);

/// Row-wise versions over an N x k logit matrix, factorizing each covariance once.
std::vector<double> unconditional_p_values(const Tensor& logits, const GaussianStats& global);
std::vector<PValueResult> conditional_p_values(const Tensor& logits, const std::vector<GaussianStats>& per_class);

struct Summary {
  double mean = 0;
  double q1 = 0;
  double median = 0;
  double q3 = 0;
};

/// Quartiles by linear interpolation between order statistics.
Summary summarize(std::vector<double> values);

}  // namespace vaelab::inline VAELAB_NS
