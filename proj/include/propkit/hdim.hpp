#pragma once

#include <span>
#include <vector>

#include "propkit/kernels.hpp"
#include "propkit/stats.hpp"
#include "propkit/tim.hpp"

namespace propkit {

struct HdimOptions {
  /// Pair-response equations l = 1..n_equations per past type; negative: L.
  int n_equations = -1;
  double rcond_floor = 1e-13;
  /// When set, the three-point factorization residual over `factorization_lags`
  /// is measured on this series and stored in the kernel.
  const EventSeries* series = nullptr;
  std::vector<int> factorization_lags{1, 2, 5, 10};
};

/// Factorized two-type calibration. Unknowns G_C(1), kappa_{NC,C}(1..L),
/// kappa_{C,C}(1..L); equations S_{p1,C}(l) for both p1 and l = 1..L, plus the
/// equal-time equation for S_C(0). Everything into NC stays zero.
InfluenceKernel calibrate_hdim2(const CorrelationSet& corr, const ResponseSet& resp, int L,
                                const HdimOptions& options = {});
/// Single-type version on the pooled sign correlation and S(l).
InfluenceKernel calibrate_hdim1(const CorrelationSet& corr, const ResponseSet& resp, int L,
                                const HdimOptions& options = {});

/// kappa_{p',p}(l) = dG_{p'}(l) for both present types, G_p(1) = dG_p(0).
/// The result is flagged unconstrained (and pooled for a TIM1 kernel).
InfluenceKernel embed_tim_as_hdim(const TimKernel& kernel);

ResponsePrediction predict_response_hdim2(const InfluenceKernel& kernel, const CorrelationSet& corr, int L_neg,
                                          int L_pos);

/// Factorized diffusion curve D(l) for the requested lags.
std::vector<double> signature_hdim2(const InfluenceKernel& kernel, const CorrelationSet& corr,
                                    const NoiseParams& noise, std::span<const long> lags);

}  // namespace propkit
