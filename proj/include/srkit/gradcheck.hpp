#pragma once

// Central finite-difference checks of every backward pass. The oracle side
// evaluates the naive reference ops in double; the analytic side is the
// float implementation under test.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "srkit/tensor.hpp"

namespace srkit {

inline constexpr double kGradcheckStep = 1e-3;
inline constexpr double kGradcheckTolerance = 1e-3;
/// Denominator floor of the relative error, so gradients that are zero up to
/// float rounding do not register as large relative errors.
inline constexpr double kGradcheckFloor = 1e-3;
inline constexpr int kGradcheckCases = 20;

enum class GradcheckSize { micro, small };

/// Replacement backward passes, used to confirm the harness catches bugs.
struct GradcheckHooks {
  std::function<Tensor(const Tensor& probs, const Tensor& grad_out)> softmax_bwd;
};

struct GradcheckEntry {
  std::string op;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates where every step down to 1e-9 still crossed a ReLU kink.
  std::size_t skipped = 0;
  bool passed() const { return checked > 0 && max_rel_error < kGradcheckTolerance; }
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  bool passed() const;
};

double relative_error(double analytic, double numeric, double floor = kGradcheckFloor);

GradcheckReport run_gradcheck(GradcheckSize size, std::uint64_t seed, const GradcheckHooks& hooks = {});

}  // namespace srkit
