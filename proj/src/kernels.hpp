#pragma once

// Dense kernels shared by the autodiff ops. All loops run in a fixed order so
// results are bitwise reproducible.

#include <cstddef>
#include <vector>

#include "vaelab/tensor.hpp"

namespace vaelab::inline VAELAB_NS::kernels {

/// C[m x n] += A[m x k] * B[k x n], all row-major.
inline void gemm_acc(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = c + i * n;
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = arow[p];
      if (aip == Real{0}) continue;
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

inline std::vector<Real> transpose(const Real* a, std::size_t rows, std::size_t cols) {
  std::vector<Real> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  }
  return t;
}

/// Geometry of a convolution between a "large" NHWC image and the "small"
/// image it is reduced to by a stride-s kernel.
struct ConvGeometry {
  std::size_t batch;
  std::size_t big_h, big_w, big_c;
  std::size_t small_h, small_w;
  std::size_t kh, kw;
  std::size_t stride;
  std::size_t pad_top, pad_left;

  std::size_t patch() const { return kh * kw * big_c; }
  std::size_t positions() const { return batch * small_h * small_w; }
};

/// Gathers patches: out[positions x patch], ordered (ky, kx, c) within a patch.
inline std::vector<Real> im2col(const Real* img, const ConvGeometry& g) {
  std::vector<Real> cols(g.positions() * g.patch(), Real{0});
  Real* dst = cols.data();
  for (std::size_t b = 0; b < g.batch; ++b) {
    const Real* base = img + b * g.big_h * g.big_w * g.big_c;
    for (std::size_t oy = 0; oy < g.small_h; ++oy) {
      for (std::size_t ox = 0; ox < g.small_w; ++ox) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
            if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.big_h) && ix < static_cast<std::ptrdiff_t>(g.big_w)) {
              const Real* src = base + (static_cast<std::size_t>(iy) * g.big_w + static_cast<std::size_t>(ix)) * g.big_c;
              for (std::size_t c = 0; c < g.big_c; ++c) dst[c] = src[c];
            }
            dst += g.big_c;
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatter-adds patches back into img (which must be zeroed or accumulating).
inline void col2im_acc(const Real* cols, const ConvGeometry& g, Real* img) {
  const Real* src = cols;
  for (std::size_t b = 0; b < g.batch; ++b) {
    Real* base = img + b * g.big_h * g.big_w * g.big_c;
    for (std::size_t oy = 0; oy < g.small_h; ++oy) {
      for (std::size_t ox = 0; ox < g.small_w; ++ox) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
            if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.big_h) && ix < static_cast<std::ptrdiff_t>(g.big_w)) {
              Real* d = base + (static_cast<std::size_t>(iy) * g.big_w + static_cast<std::size_t>(ix)) * g.big_c;
              for (std::size_t c = 0; c < g.big_c; ++c) d[c] += src[c];
            }
            src += g.big_c;
          }
        }
      }
    }
  }
}

}  // namespace vaelab::inline VAELAB_NS::kernels
