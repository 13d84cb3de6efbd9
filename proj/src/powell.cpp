#include "sdqc/powell.hpp"

#include <cmath>
#include <string>

#include "sdqc/error.hpp"
#include "sdqc/numfmt.hpp"

namespace sdqc {

namespace {

double checked(const Objective& f, std::span<const double> x, int& evals) {
  ++evals;
  const double v = f(x);
  if (!std::isfinite(v)) fail(ErrorCode::NonFiniteObjective, "objective returned " + format_double(v));
  return v;
}

double along(const Objective& f, std::span<const double> x, std::span<const double> d, double t,
             std::vector<double>& buf, int& evals) {
  for (std::size_t i = 0; i < x.size(); ++i) buf[i] = x[i] + t * d[i];
  return checked(f, buf, evals);
}

}  // namespace

LineResult line_minimize(const Objective& f, std::span<const double> x, std::span<const double> d, double f0,
                         const LineSearchOptions& opt) {
  if (x.size() != d.size()) fail(ErrorCode::DimensionMismatch, "line search direction has the wrong length");
  const int n = std::max(opt.samples | 1, 3);
  std::vector<double> buf(x.size());
  LineResult best{0.0, f0, 0};
  auto better = [&](double t, double v) { return v < best.f || (v == best.f && std::abs(t) < std::abs(best.t)); };

  double center = 0.0, half = opt.half_width;
  double step = 0.0;
  for (int expansion = 0;; ++expansion) {
    step = 2.0 * half / (n - 1);
    int best_k = -1;
    for (int k = 0; k < n; ++k) {
      const double t = center - half + step * k;
      if (t == 0.0) continue;  // f0 already known
      const double v = along(f, x, d, t, buf, best.evaluations);
      if (better(t, v)) {
        best.t = t;
        best.f = v;
        best_k = k;
      }
    }
    const bool on_edge = best_k == 0 || best_k == n - 1;
    if (!on_edge || expansion >= opt.max_expansions) break;
    center = best.t;
    half *= 2.0;
  }

  // Golden-section refinement inside the neighbouring scan cells.
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = best.t - step, b = best.t + step;
  double c = b - g * (b - a), e = a + g * (b - a);
  double fc = along(f, x, d, c, buf, best.evaluations);
  double fe = along(f, x, d, e, buf, best.evaluations);
  if (better(c, fc)) best.t = c, best.f = fc;
  if (better(e, fe)) best.t = e, best.f = fe;
  for (int it = 0; it < opt.refine_iters && (b - a) > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc <= fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - g * (b - a);
      fc = along(f, x, d, c, buf, best.evaluations);
      if (better(c, fc)) best.t = c, best.f = fc;
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + g * (b - a);
      fe = along(f, x, d, e, buf, best.evaluations);
      if (better(e, fe)) best.t = e, best.f = fe;
    }
  }
  return best;
}

PowellResult powell_minimize(const Objective& f, std::vector<double> x0, const PowellOptions& opt) {
  const std::size_t n = x0.size();
  if (n == 0) fail(ErrorCode::DimensionMismatch, "powell needs at least one variable");
  PowellResult res;
  res.x = std::move(x0);
  res.f = checked(f, res.x, res.evaluations);
  res.history.push_back(res.f);

  std::vector<std::vector<double>> dirs(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) dirs[i][i] = 1.0;

  auto move_along = [&](const std::vector<double>& d) {
    const auto lr = line_minimize(f, res.x, d, res.f, opt.line);
    res.evaluations += lr.evaluations;
    if (lr.f < res.f) {
      for (std::size_t i = 0; i < n; ++i) res.x[i] += lr.t * d[i];
      res.f = lr.f;
    }
  };

  std::vector<double> start(n), extrapolated(n), net(n);
  for (int cycle = 0; cycle < opt.max_iter; ++cycle) {
    const double f_start = res.f;
    start = res.x;
    std::size_t biggest = 0;
    double biggest_drop = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double before = res.f;
      move_along(dirs[i]);
      if (before - res.f > biggest_drop) {
        biggest_drop = before - res.f;
        biggest = i;
      }
    }
    ++res.cycles;
    const double gain = f_start - res.f;
    if (gain > 0) ++res.improving_cycles;

    if (gain > opt.ftol) {
      for (std::size_t i = 0; i < n; ++i) {
        net[i] = res.x[i] - start[i];
        extrapolated[i] = 2.0 * res.x[i] - start[i];
      }
      const double f_ext = checked(f, extrapolated, res.evaluations);
      if (f_ext < f_start) {
        const double a = f_start - res.f - biggest_drop;
        const double t = 2.0 * (f_start - 2.0 * res.f + f_ext) * a * a - biggest_drop * (f_start - f_ext) * (f_start - f_ext);
        if (t < 0.0) {
          move_along(net);
          dirs[biggest] = dirs[n - 1];
          dirs[n - 1] = net;
        }
      }
    }
    res.history.push_back(res.f);
    if (gain <= opt.ftol) break;
  }
  return res;
}

}  // namespace sdqc
