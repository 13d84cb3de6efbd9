#pragma once

#include <functional>
#include <span>
#include <vector>

namespace sdqc {

using Objective = std::function<double(std::span<const double>)>;

struct LineSearchOptions {
  double half_width = 4.0;  // initial scan covers t ∈ [−half_width, half_width]
  int samples = 33;         // scan points, odd so that t = 0 is one of them
  int max_expansions = 30;  // re-centre and double the window while the best point sits on an edge
  int refine_iters = 80;    // golden-section steps around the best scan point
};

struct LineResult {
  double t = 0.0;
  double f = 0.0;
  int evaluations = 0;
};

// Minimizes f(x + t·d) over t. Returns the best point evaluated, so the result
// is never worse than t = 0 even for step-shaped objectives.
LineResult line_minimize(const Objective& f, std::span<const double> x, std::span<const double> d, double f0,
                         const LineSearchOptions& opt = {});

struct PowellOptions {
  double ftol = 1e-12;  // stop when a full cycle lowers f by no more than this
  int max_iter = 200;   // cycles
  LineSearchOptions line;
};

struct PowellResult {
  std::vector<double> x;
  double f = 0.0;
  int cycles = 0;
  int improving_cycles = 0;
  std::vector<double> history;  // f at the start, then after every cycle
  int evaluations = 0;
};

// Direction-set minimization: each cycle line-minimizes along every direction,
// then the direction of largest decrease is replaced by the cycle's net
// displacement when the modified-Powell test allows it.
PowellResult powell_minimize(const Objective& f, std::vector<double> x0, const PowellOptions& opt = {});

}  // namespace sdqc
