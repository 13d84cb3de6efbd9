#include "sdqc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace sdqc::kernels {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = 1 << 15;

inline bool masked(ColumnMask mask, std::size_t j) { return !mask.empty() && mask[j] != 0; }

inline void softmax_row(const double* x, double* y, std::size_t cols, ColumnMask mask) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < cols; ++j)
    if (!masked(mask, j)) mx = std::max(mx, x[j]);
  if (!std::isfinite(mx)) {
    std::fill(y, y + cols, 0.0);
    return;
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = masked(mask, j) ? 0.0 : std::exp(x[j] - mx);
    sum += y[j];
  }
  for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
}

}  // namespace

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += a[i * k + p] * b[i * n + j];
      c[p * n + j] = accumulate ? c[p * n + j] + s : s;
    }
}

void row_softmax(std::span<const double> x, std::span<double> y, std::size_t rows, std::size_t cols, ColumnMask mask) {
  for (std::size_t i = 0; i < rows; ++i) softmax_row(x.data() + i * cols, y.data() + i * cols, cols, mask);
}

void weighted_sum(std::span<const std::span<const double>> mats, std::span<const double> w, std::span<double> out) {
  for (std::size_t e = 0; e < out.size(); ++e) {
    double s = 0.0;
    for (std::size_t i = 0; i < mats.size(); ++i) s += w[i] * mats[i][e];
    out[e] = s;
  }
}

}  // namespace serial

namespace omp {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    std::vector<double> acc(n, 0.0);
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
    }
    double* crow = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = accumulate ? crow[j] + acc[j] : acc[j];
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* arow = a.data() + i * k;
    double* crow = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t pp = 0; pp < rows; ++pp) {
    const auto p = static_cast<std::size_t>(pp);
    std::vector<double> acc(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
    }
    double* crow = c.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = accumulate ? crow[j] + acc[j] : acc[j];
  }
}

void row_softmax(std::span<const double> x, std::span<double> y, std::size_t rows, std::size_t cols, ColumnMask mask) {
  const auto r = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
  for (std::ptrdiff_t i = 0; i < r; ++i)
    softmax_row(x.data() + static_cast<std::size_t>(i) * cols, y.data() + static_cast<std::size_t>(i) * cols, cols, mask);
}

void weighted_sum(std::span<const std::span<const double>> mats, std::span<const double> w, std::span<double> out) {
  const auto len = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static) if (out.size() * mats.size() > kParallelWork)
  for (std::ptrdiff_t e = 0; e < len; ++e) {
    double s = 0.0;
    for (std::size_t i = 0; i < mats.size(); ++i) s += w[i] * mats[i][static_cast<std::size_t>(e)];
    out[static_cast<std::size_t>(e)] = s;
  }
}

}  // namespace omp

}  // namespace sdqc::kernels
