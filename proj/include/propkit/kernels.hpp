#pragma once

#include <array>
#include <limits>
#include <string_view>
#include <vector>

#include "propkit/events.hpp"

namespace propkit {

enum class TimVariant { TIM1, TIM2 };
std::string_view to_string(TimVariant v);

/// Transient impact propagator truncated at lag L.
///
/// `dG[slot][n]` holds the differential kernel for n = 0..L with dG(0) = G(1);
/// `G[slot][l]` the cumulative propagator for l = 0..L+1 with G(0) = 0.
/// TIM1 has one slot shared by both event types, TIM2 has [NC, C].
struct TimKernel {
  TimVariant variant = TimVariant::TIM1;
  int L = 0;
  std::vector<std::vector<double>> dG;
  std::vector<std::vector<double>> G;
  /// max-norm residual of the calibration system (0 for hand-built kernels)
  double residual = 0.0;

  static TimKernel tim1(std::vector<double> dG);
  static TimKernel tim2(std::vector<double> dG_nc, std::vector<double> dG_c);
  /// From propagator values G(1..L+1).
  static TimKernel tim1_from_propagator(const std::vector<double>& G);

  const std::vector<double>& differential(EventType t) const { return dG[slot(t)]; }
  /// dG_t(n); zero for n < 0 or n > L.
  double dg(EventType t, long n) const;
  /// G_t(l); zero for l <= 0, equal to G_t(L+1) beyond.
  double g(EventType t, long lag) const;
  /// True when every dG(n >= 1) is exactly zero (permanent impact).
  bool is_constant() const;
  void validate() const;

 private:
  std::size_t slot(EventType t) const { return variant == TimVariant::TIM1 ? 0 : index(t); }
};

/// Rebuilds G from dG.
void recompute_propagator(TimKernel& k);

struct NoiseParams {
  double D_LF = 0.0;
  double D_HF = 0.0;
  void validate() const;
};

/// History dependent influence kernel kappa[past][present][n], n = 1..L
/// (index 0 unused and zero), and immediate impacts G1[type].
struct InfluenceKernel {
  int L = 0;
  std::array<std::array<std::vector<double>, kTypeCount>, kTypeCount> kappa;
  std::array<double, kTypeCount> G1{};
  /// Set by the TIM embedding, which may give NC events an impact.
  bool unconstrained = false;
  /// Single-type kernel: every event is treated as type C (only kappa[C][C] and G1[C] matter).
  bool pooled = false;
  double residual = 0.0;
  double factorization_residual = std::numeric_limits<double>::quiet_NaN();

  static InfluenceKernel zero(int L);
  double k(EventType past, EventType present, long n) const;
  /// Finite entries; unless unconstrained, kappa[.][NC] = 0 and G1[NC] = 0.
  void validate() const;
};

}  // namespace propkit
