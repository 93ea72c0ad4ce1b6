#ifndef KEYVEC_GRADIENT_SUITE_HPP
#define KEYVEC_GRADIENT_SUITE_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace keyvec {

struct GradientSuiteOptions {
  std::uint64_t seed = 1;
  /// Random shapes/parameter draws per check.
  std::size_t trials = 20;
  double eps = 1e-5;
};

/// Worst finite-difference disagreement for one primitive or for the joint loss.
struct GradientCheckEntry {
  std::string name;
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  /// Trials that were compared; piecewise ops skip draws that land near a kink.
  std::size_t checked = 0;
  std::size_t skipped = 0;

  bool passed(std::size_t required) const { return checked >= required && max_rel_error < tolerance; }
};

/// Central-difference checks in double precision of every nn primitive and of
/// the full joint loss over random tiny models. Linear and lookup ops are held
/// to 1e-6, everything else to 1e-4.
std::vector<GradientCheckEntry> run_gradient_suite(const GradientSuiteOptions& opts);

}  // namespace keyvec

#endif  // KEYVEC_GRADIENT_SUITE_HPP
