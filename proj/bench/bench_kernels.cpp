// Serial reference kernels vs the OpenMP versions: wall time and max deviation.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include "sdqc/kernels.hpp"

namespace k = sdqc::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double seconds(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void report(const char* name, double ts, double tp, double diff) {
  std::printf("%-22s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   max|diff| %.2e\n", name, ts * 1e3, tp * 1e3,
              ts / tp, diff);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? static_cast<std::size_t>(std::atoi(argv[1])) : 256;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 5;
  std::printf("size %zu, %d threads, %d reps\n", n, omp_get_max_threads(), reps);

  std::mt19937_64 rng(42);
  const auto a = random_values(n * n, rng);
  const auto b = random_values(n * n, rng);
  std::vector<double> cs(n * n), cp(n * n);

  using Gemm = void (*)(std::span<const double>, std::span<const double>, std::span<double>, std::size_t,
                        std::size_t, std::size_t, bool);
  const struct {
    const char* name;
    Gemm serial, parallel;
  } gemms[] = {{"gemm_nn", k::serial::gemm_nn, k::omp::gemm_nn},
               {"gemm_nt", k::serial::gemm_nt, k::omp::gemm_nt},
               {"gemm_tn", k::serial::gemm_tn, k::omp::gemm_tn}};
  for (const auto& g : gemms) {
    const double ts = seconds([&] { g.serial(a, b, cs, n, n, n, false); }, reps);
    const double tp = seconds([&] { g.parallel(a, b, cp, n, n, n, false); }, reps);
    report(g.name, ts, tp, max_diff(cs, cp));
  }

  std::vector<unsigned char> mask(n, 0);
  for (std::size_t j = n - n / 8; j < n; ++j) mask[j] = 1;
  const double ts = seconds([&] { k::serial::row_softmax(a, cs, n, n, mask); }, reps * 10);
  const double tp = seconds([&] { k::omp::row_softmax(a, cp, n, n, mask); }, reps * 10);
  report("row_softmax (masked)", ts, tp, max_diff(cs, cp));

  std::vector<std::vector<double>> mats;
  std::vector<std::span<const double>> views;
  for (int i = 0; i < 16; ++i) mats.push_back(random_values(n * 4, rng));
  for (const auto& m : mats) views.emplace_back(m);
  const auto w = random_values(mats.size(), rng);
  std::vector<double> ws(n * 4), wp(n * 4);
  const double ts2 = seconds([&] { k::serial::weighted_sum(views, w, ws); }, reps * 100);
  const double tp2 = seconds([&] { k::omp::weighted_sum(views, w, wp); }, reps * 100);
  report("weighted_sum", ts2, tp2, max_diff(ws, wp));
  return 0;
}
