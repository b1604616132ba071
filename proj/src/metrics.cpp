#include "vaelab/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vaelab/error.hpp"

namespace vaelab::inline VAELAB_NS {

namespace {

std::vector<double> row_of(const Tensor& t, std::size_t r) {
  const std::size_t k = t.dim(1);
  std::vector<double> out(k);
  for (std::size_t j = 0; j < k; ++j) out[j] = t[r * k + j];
  return out;
}

GaussianStats fit_rows(const Tensor& logits, const std::vector<std::size_t>& rows) {
  const std::size_t k = logits.dim(1), n = rows.size();
  if (n < 2) throw ContractError("fit_stats needs at least 2 rows, got " + std::to_string(n));
  GaussianStats s{std::vector<double>(k, 0), std::vector<double>(k * k, 0), n};
  for (auto r : rows)
    for (std::size_t j = 0; j < k; ++j) s.m[j] += logits[r * k + j];
  for (auto& v : s.m) v /= static_cast<double>(n);
  std::vector<double> d(k);
  for (auto r : rows) {
    for (std::size_t j = 0; j < k; ++j) d[j] = logits[r * k + j] - s.m[j];
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i; j < k; ++j) s.sigma[i * k + j] += d[i] * d[j];
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      const double c = s.sigma[i * k + j] / static_cast<double>(n - 1) + (i == j ? kCovarianceRegularizer : 0.0);
      s.sigma[i * k + j] = s.sigma[j * k + i] = c;
    }
  }
  return s;
}

void check_logits(const Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("logits must be N x k, got " + shape_str(logits.shape()));
}

void check_symmetric(const GaussianStats& s, const char* which) {
  const std::size_t k = s.dim();
  if (s.sigma.size() != k * k) throw DimensionError(std::string(which) + ": covariance is not k x k");
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(s.cov(i, j) - s.cov(j, i)) > kPsdTolerance) {
        throw NumericError(std::string(which) + ": covariance is not symmetric");
      }
}

std::vector<double> matmul_sq(const std::vector<double>& a, const std::vector<double>& b, std::size_t n) {
  std::vector<double> c(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += a[i * n + k] * b[k * n + j];
  return c;
}

}  // namespace

GaussianStats fit_stats(const Tensor& logits) {
  check_logits(logits);
  std::vector<std::size_t> rows(logits.dim(0));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return fit_rows(logits, rows);
}

std::vector<GaussianStats> fit_class_stats(const Tensor& logits, std::span<const int> labels, std::size_t classes) {
  check_logits(logits);
  if (labels.size() != logits.dim(0)) throw DimensionError("one label per logit row expected");
  std::vector<std::vector<std::size_t>> groups(classes);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes) {
      throw ContractError("label " + std::to_string(labels[r]) + " out of range");
    }
    groups[static_cast<std::size_t>(labels[r])].push_back(r);
  }
  std::vector<GaussianStats> out;
  for (std::size_t c = 0; c < classes; ++c) {
    try {
      out.push_back(fit_rows(logits, groups[c]));
    } catch (const ContractError& e) {
      throw ContractError("class " + std::to_string(c) + ": " + e.what());
    }
  }
  return out;
}

void round_to_f32(GaussianStats& stats) {
  for (auto& v : stats.m) v = static_cast<float>(v);
  for (auto& v : stats.sigma) v = static_cast<float>(v);
}

SymEigen jacobi_eigen(std::span<const double> input, std::size_t n) {
  if (input.size() != n * n) throw DimensionError("jacobi_eigen: matrix is not n x n");
  std::vector<double> a(input.begin(), input.end());
  std::vector<double> v(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1;

  double scale = 0;
  for (double x : a) scale += x * x;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off <= 1e-30 * scale || off == 0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  SymEigen out{std::vector<double>(n), std::move(v)};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a[i * n + i];
  return out;
}

std::vector<double> sqrt_psd(std::span<const double> a, std::size_t n) {
  const SymEigen e = jacobi_eigen(a, n);
  const double lo = *std::min_element(e.values.begin(), e.values.end());
  if (lo < -kPsdTolerance) {
    throw NumericError("matrix is not positive semi-definite: min eigenvalue " + std::to_string(lo));
  }
  std::vector<double> out(n * n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = std::sqrt(std::max(e.values[k], 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += e.vectors[i * n + k] * r * e.vectors[j * n + k];
  }
  return out;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  const std::size_t n = a.dim();
  if (b.dim() != n) {
    throw DimensionError("frechet_distance: dimensions " + std::to_string(n) + " and " + std::to_string(b.dim()));
  }
  check_symmetric(a, "frechet_distance(a)");
  check_symmetric(b, "frechet_distance(b)");
  double mean_term = 0;
  for (std::size_t i = 0; i < n; ++i) mean_term += (a.m[i] - b.m[i]) * (a.m[i] - b.m[i]);

  const auto ra = sqrt_psd(a.sigma, n);
  sqrt_psd(b.sigma, n);  // PSD check on b
  auto inner = matmul_sq(matmul_sq(ra, b.sigma, n), ra, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) inner[i * n + j] = inner[j * n + i] = 0.5 * (inner[i * n + j] + inner[j * n + i]);
  const SymEigen e = jacobi_eigen(inner, n);
  double tr_sqrt = 0;
  for (double l : e.values) tr_sqrt += std::sqrt(std::max(l, 0.0));
  double tr = 0;
  for (std::size_t i = 0; i < n; ++i) tr += a.cov(i, i) + b.cov(i, i);
  return std::max(mean_term + tr - 2 * tr_sqrt, 0.0);
}

double chi2_sf(double x, int k) {
  if (k <= 0 || k % 2 != 0) throw ContractError("chi2: only positive even degrees of freedom, got " + std::to_string(k));
  if (!(x >= 0)) throw DomainError("chi2: x must be non-negative, got " + std::to_string(x));
  double term = 1, acc = 1;
  for (int i = 1; i < k / 2; ++i) {
    term *= (x / 2) / i;
    acc += term;
  }
  return std::exp(-x / 2) * acc;
}

double chi2_cdf(double x, int k) { return 1 - chi2_sf(x, k); }

Mahalanobis::Mahalanobis(const GaussianStats& stats) : m_(stats.m), chol_(stats.sigma.size(), 0) {
  const std::size_t n = m_.size();
  if (stats.sigma.size() != n * n) throw DimensionError("Mahalanobis: covariance is not k x k");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = stats.sigma[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= chol_[i * n + k] * chol_[j * n + k];
      if (i == j) {
        if (!(s > 0)) throw NumericError("covariance is singular (pivot " + std::to_string(s) + " at " + std::to_string(i) + ")");
        chol_[i * n + i] = std::sqrt(s);
      } else {
        chol_[i * n + j] = s / chol_[j * n + j];
      }
    }
  }
}

double Mahalanobis::d2(std::span<const double> x) const {
  const std::size_t n = m_.size();
  if (x.size() != n) throw DimensionError("Mahalanobis: vector of length " + std::to_string(x.size()));
  // forward solve L y = x - m; d2 = |y|^2
  std::vector<double> y(n);
  double d2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i] - m_[i];
    for (std::size_t k = 0; k < i; ++k) s -= chol_[i * n + k] * y[k];
    y[i] = s / chol_[i * n + i];
    d2 += y[i] * y[i];
  }
  return d2;
}

int argmax(std::span<const double> x) {
  if (x.empty()) throw ContractError("argmax of an empty vector");
  return static_cast<int>(std::max_element(x.begin(), x.end()) - x.begin());
}

double unconditional_p_value(std::span<const double> logits, const GaussianStats& global) {
  const Mahalanobis mh(global);
  return chi2_sf(mh.d2(logits), static_cast<int>(mh.dim()));
}

PValueResult conditional_p_value(std::span<const double> logits, const std::vector<GaussianStats>& per_class) {
  const int label = argmax(logits);
  if (static_cast<std::size_t>(label) >= per_class.size()) throw ContractError("no stats for class " + std::to_string(label));
  const Mahalanobis mh(per_class[static_cast<std::size_t>(label)]);
  const double d2 = mh.d2(logits);
  return {label, d2, chi2_sf(d2, static_cast<int>(mh.dim()))};
}

std::vector<double> unconditional_p_values(const Tensor& logits, const GaussianStats& global) {
  check_logits(logits);
  const Mahalanobis mh(global);
  std::vector<double> out(logits.dim(0));
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = chi2_sf(mh.d2(row_of(logits, r)), static_cast<int>(mh.dim()));
  return out;
}

std::vector<PValueResult> conditional_p_values(const Tensor& logits, const std::vector<GaussianStats>& per_class) {
  check_logits(logits);
  std::vector<Mahalanobis> mh;
  for (const auto& s : per_class) mh.emplace_back(s);
  std::vector<PValueResult> out(logits.dim(0));
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto x = row_of(logits, r);
    const int label = argmax(x);
    if (static_cast<std::size_t>(label) >= mh.size()) throw ContractError("no stats for class " + std::to_string(label));
    const double d2 = mh[static_cast<std::size_t>(label)].d2(x);
    out[r] = {label, d2, chi2_sf(d2, static_cast<int>(mh[0].dim()))};
  }
  return out;
}

Summary summarize(std::vector<double> values) {
  if (values.empty()) throw ContractError("summary of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  auto quantile = [&](double q) {
    const double h = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  double mean = 0;
  for (double v : values) mean += v;
  return {mean / static_cast<double>(n), quantile(0.25), quantile(0.5), quantile(0.75)};
}

}  // namespace vaelab::inline VAELAB_NS
