#pragma once

#include <array>
#include <span>

#include "propkit/kernels.hpp"

namespace propkit {

struct NoiseFitOptions {
  /// Fit l * D(l) instead of D(l).
  bool fit_on_ld = false;
};

struct NoiseFitResult {
  NoiseParams params;
  long l_min = 0;
  long l_max = 0;
  double sse = 0.0;
  /// [D_LF, D_HF] pinned at zero by the non-negativity constraint
  std::array<bool, 2> clamped{};
  bool fit_on_ld = false;
};

/// Least squares for D_emp(l) - D_base(l) = D_LF + D_HF / l over the given
/// lags, with D_LF, D_HF >= 0. All three spans are aligned.
NoiseFitResult fit_noise(std::span<const double> D_emp, std::span<const double> D_base, std::span<const long> lags,
                         const NoiseFitOptions& options = {});

}  // namespace propkit
