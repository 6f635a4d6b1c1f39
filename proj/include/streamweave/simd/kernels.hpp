#pragma once
// Dense double-precision kernels behind vector-core.
//
// Every kernel has a scalar reference implementation; an AVX2+FMA variant is
// compiled in a separate translation unit and selected at first use when the
// CPU reports support. Setting STREAMWEAVE_SIMD=scalar forces the reference
// path. Variants differ only in summation order, so results agree to within
// rounding (see tests/test_kernels.cpp).

#include <cstddef>
#include <string_view>

namespace streamweave::simd {

struct KernelTable {
  std::string_view name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i a[i]^2
  double (*sum_squares)(const double* a, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[i] *= alpha
  void (*scale)(double alpha, double* y, std::size_t n);
  // out[i] = sum_j m[i*cols + j] * x[j]   (row-major matrix-vector)
  void (*gemv)(const double* m, const double* x, double* out, std::size_t rows, std::size_t cols);
  // m[i*cols + j] += alpha * u[i] * v[j]  (rank-1 update)
  void (*ger)(double alpha, const double* u, const double* v, double* m, std::size_t rows,
              std::size_t cols);
};

const KernelTable& scalar_kernels() noexcept;

/// Returns nullptr when the AVX2 variant was not compiled in or the running
/// CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels() noexcept;

/// Kernel table chosen for this process (resolved once).
const KernelTable& active() noexcept;

}  // namespace streamweave::simd
