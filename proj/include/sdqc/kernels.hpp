#pragma once

#include <cstddef>
#include <span>

// Dense row-major kernels behind the autodiff ops. `serial` holds the naive
// reference loops that the tests compare against; `omp` holds the
// row-parallel versions the library actually calls. Each output row of an
// `omp` kernel is computed by one thread with a fixed summation order, so
// results do not depend on the thread count.
namespace sdqc::kernels {

// Column mask for row_softmax: mask[j] != 0 excludes column j (weight 0).
using ColumnMask = std::span<const unsigned char>;

namespace serial {
// c[m×n] (+)= a[m×k] · b[k×n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
// c[m×n] (+)= a[m×k] · b[n×k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
// c[k×n] (+)= a[m×k]^T · b[m×n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
void row_softmax(std::span<const double> x, std::span<double> y, std::size_t rows, std::size_t cols, ColumnMask mask);
// out[n×c] = Σ_i w[i]·mats[i]
void weighted_sum(std::span<const std::span<const double>> mats, std::span<const double> w, std::span<double> out);
}  // namespace serial

namespace omp {
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
void row_softmax(std::span<const double> x, std::span<double> y, std::size_t rows, std::size_t cols, ColumnMask mask);
void weighted_sum(std::span<const std::span<const double>> mats, std::span<const double> w, std::span<double> out);
}  // namespace omp

using omp::gemm_nn;
using omp::gemm_nt;
using omp::gemm_tn;
using omp::row_softmax;
using omp::weighted_sum;

}  // namespace sdqc::kernels
