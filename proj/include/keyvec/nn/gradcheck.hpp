#ifndef KEYVEC_NN_GRADCHECK_HPP
#define KEYVEC_NN_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "keyvec/nn/tape.hpp"

namespace keyvec::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  /// Smallest distance to a kink seen by any piecewise op, over all evaluations.
  double min_margin = std::numeric_limits<double>::infinity();
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;

  /// True when no kink lies within 10 eps of any evaluation point.
  bool locally_smooth(double eps) const { return min_margin > 10.0 * eps; }
};

/// Relative error |a - n| / max(1e-8, |a| + |n|).
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(x + eps) - f(x - eps)) / (2 eps), coordinate by coordinate.
///
/// `fn(tape, vars)` must build a scalar on `tape` from the leaf `vars`, which
/// hold `inputs` in order. Analytic gradients are always taken in double;
/// `Oracle` sets the precision of the difference quotients. With
/// `Oracle = long double`, `fn` must accept tapes of both types.
template <typename Oracle = double, typename Fn>
GradCheckResult finite_difference_check(Fn&& fn, std::vector<Tensor<double>> inputs, double eps = 1e-5) {
  GradCheckResult result;
  std::vector<std::vector<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    vars.reserve(inputs.size());
    for (const auto& t : inputs) vars.push_back(tape.constant(t, true));
    tape.backward(fn(tape, std::as_const(vars)));
    for (const auto& v : vars) {
      auto g = v.grad();
      analytic.emplace_back(g.begin(), g.end());
    }
    result.min_margin = std::min(result.min_margin, tape.min_margin());
  }

  std::vector<Tensor<Oracle>> point;
  point.reserve(inputs.size());
  for (const auto& t : inputs) point.push_back(t.template cast<Oracle>());
  auto evaluate = [&] {
    Tape<Oracle> tape;
    std::vector<Var<Oracle>> vars;
    vars.reserve(point.size());
    for (const auto& t : point) vars.push_back(tape.constant(t));
    const Oracle loss = fn(tape, std::as_const(vars)).item();
    result.min_margin = std::min(result.min_margin, tape.min_margin());
    return loss;
  };

  const Oracle step = static_cast<Oracle>(eps);
  for (std::size_t k = 0; k < point.size(); ++k) {
    for (std::size_t i = 0; i < point[k].size(); ++i) {
      const Oracle orig = point[k][i];
      point[k][i] = orig + step;
      const Oracle up = evaluate();
      point[k][i] = orig - step;
      const Oracle down = evaluate();
      point[k][i] = orig;
      const double numeric = static_cast<double>((up - down) / (2 * step));
      const double err = relative_error(analytic[k][i], numeric);
      ++result.coordinates;
      if (err > result.max_rel_error || result.coordinates == 1) {
        result.max_rel_error = err;
        result.worst_input = k;
        result.worst_index = i;
        result.analytic = analytic[k][i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace keyvec::nn

#endif  // KEYVEC_NN_GRADCHECK_HPP
