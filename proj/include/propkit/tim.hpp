#pragma once

#include <array>
#include <span>
#include <vector>

#include "propkit/kernels.hpp"
#include "propkit/stats.hpp"

namespace propkit {

struct CalibrationOptions {
  /// Number of response equations l = 0..n_equations - 1 per type; values
  /// above L + 1 give an overdetermined least-squares fit. Negative: L + 1.
  int n_equations = -1;
  double rcond_floor = 1e-13;
};

/// Solves S(l) = sum_n dG(n) C(n - l), l = 0..L.
TimKernel calibrate_tim1(const CorrelationSet& corr, const ResponseSet& resp, int L,
                         const CalibrationOptions& options = {});
/// Solves S_p1(l) = sum_p2 P(p2) sum_n dG_p2(n) C_{p1,p2}(l - n), l = 0..L, both types.
TimKernel calibrate_tim2(const CorrelationSet& corr, const ResponseSet& resp, int L,
                         const CalibrationOptions& options = {});

/// Model response on lags [-L_neg, L_pos]. `R_cond[type]` is conditioned on the
/// type of the reference trade; TIM1 leaves the conditional curves empty.
struct ResponsePrediction {
  LagSeries R, S;
  std::array<LagSeries, kTypeCount> R_cond, S_cond;
  bool has_conditional() const { return !R_cond[0].values.empty(); }
};

/// TIM1 kernels use the unconditional C, TIM2 kernels the conditional family.
ResponsePrediction predict_response_tim(const TimKernel& kernel, const CorrelationSet& corr, int L_neg,
                                        int L_pos);
/// Permanent-impact shortcut; requires kernel.is_constant().
ResponsePrediction predict_response_tim_constant(const TimKernel& kernel, const CorrelationSet& corr, int L_neg,
                                                 int L_pos);

/// Largest correlation lag a prediction or diffusion evaluation needs.
long tim_required_horizon(const TimKernel& kernel, int L_neg, int L_pos);

/// D(l) for each requested lag. Sums over the kernel support are exact: with
/// dG(n > L) = 0 every infinite sum has finitely many non-zero terms.
std::vector<double> signature_tim1(const TimKernel& kernel, const CorrelationSet& corr, const NoiseParams& noise,
                                   std::span<const long> lags);
std::vector<double> signature_tim2(const TimKernel& kernel, const CorrelationSet& corr, const NoiseParams& noise,
                                   std::span<const long> lags);
/// Constant-kernel closed form of the two-type diffusion curve.
std::vector<double> signature_tim2_constant(const TimKernel& kernel, const CorrelationSet& corr,
                                            const NoiseParams& noise, std::span<const long> lags);

/// Lags 1..n as a vector, for the signature functions.
std::vector<long> lag_range(long first, long last);

}  // namespace propkit
