#include "propkit/kernels.hpp"

#include <cmath>

#include "numeric.hpp"
#include "propkit/error.hpp"

namespace propkit {

std::string_view to_string(TimVariant v) { return v == TimVariant::TIM1 ? "tim1" : "tim2"; }

void recompute_propagator(TimKernel& k) {
  k.G.assign(k.dG.size(), {});
  for (std::size_t s = 0; s < k.dG.size(); ++s) {
    auto& G = k.G[s];
    G.assign(k.dG[s].size() + 1, 0.0);
    detail::CompensatedSum acc;
    for (std::size_t n = 0; n < k.dG[s].size(); ++n) {
      acc.add(k.dG[s][n]);
      G[n + 1] = acc.value();
    }
  }
}

TimKernel TimKernel::tim1(std::vector<double> dG) {
  TimKernel k;
  k.variant = TimVariant::TIM1;
  k.L = static_cast<int>(dG.size()) - 1;
  k.dG = {std::move(dG)};
  k.validate();
  recompute_propagator(k);
  return k;
}

TimKernel TimKernel::tim2(std::vector<double> dG_nc, std::vector<double> dG_c) {
  if (dG_nc.size() != dG_c.size())
    throw Error(ErrorKind::Validation, "tim", "per-type kernels must share the truncation lag");
  TimKernel k;
  k.variant = TimVariant::TIM2;
  k.L = static_cast<int>(dG_c.size()) - 1;
  k.dG = {std::move(dG_nc), std::move(dG_c)};
  k.validate();
  recompute_propagator(k);
  return k;
}

TimKernel TimKernel::tim1_from_propagator(const std::vector<double>& G) {
  if (G.empty()) throw Error(ErrorKind::Validation, "tim", "empty propagator");
  std::vector<double> dG(G.size());
  dG[0] = G[0];
  for (std::size_t n = 1; n < G.size(); ++n) dG[n] = G[n] - G[n - 1];
  // G(L+1) is the last value, so dG has entries 0..L with L = size - 1
  return tim1(std::move(dG));
}

double TimKernel::dg(EventType t, long n) const {
  if (n < 0 || n > L) return 0.0;
  return dG[slot(t)][static_cast<std::size_t>(n)];
}

double TimKernel::g(EventType t, long lag) const {
  if (lag <= 0) return 0.0;
  const auto& v = G[slot(t)];
  return lag > L + 1 ? v.back() : v[static_cast<std::size_t>(lag)];
}

bool TimKernel::is_constant() const {
  for (const auto& s : dG)
    for (std::size_t n = 1; n < s.size(); ++n)
      if (s[n] != 0.0) return false;
  return true;
}

void TimKernel::validate() const {
  const std::size_t slots = variant == TimVariant::TIM1 ? 1 : 2;
  if (L < 0) throw Error(ErrorKind::Validation, "tim", "kernel needs at least dG(0)");
  if (dG.size() != slots) throw Error(ErrorKind::Validation, "tim", "wrong number of kernel slots");
  for (const auto& s : dG) {
    if (s.size() != static_cast<std::size_t>(L) + 1)
      throw Error(ErrorKind::Validation, "tim", "kernel length does not match L");
    for (double v : s)
      if (!std::isfinite(v)) throw Error(ErrorKind::Validation, "tim", "non-finite kernel entry");
  }
}

void NoiseParams::validate() const {
  if (!(D_LF >= 0.0) || !(D_HF >= 0.0) || !std::isfinite(D_LF) || !std::isfinite(D_HF))
    throw Error(ErrorKind::Validation, "tim", "noise variances must be finite and non-negative");
}

InfluenceKernel InfluenceKernel::zero(int L) {
  if (L < 0) throw Error(ErrorKind::Validation, "hdim", "negative truncation lag");
  InfluenceKernel k;
  k.L = L;
  for (auto& row : k.kappa)
    for (auto& v : row) v.assign(static_cast<std::size_t>(L) + 1, 0.0);
  return k;
}

double InfluenceKernel::k(EventType past, EventType present, long n) const {
  if (n < 1 || n > L) return 0.0;
  return kappa[index(past)][index(present)][static_cast<std::size_t>(n)];
}

void InfluenceKernel::validate() const {
  if (L < 0) throw Error(ErrorKind::Validation, "hdim", "negative truncation lag");
  for (const auto& row : kappa)
    for (const auto& v : row) {
      if (v.size() != static_cast<std::size_t>(L) + 1)
        throw Error(ErrorKind::Validation, "hdim", "kernel length does not match L");
      for (double x : v)
        if (!std::isfinite(x)) throw Error(ErrorKind::Validation, "hdim", "non-finite kernel entry");
    }
  for (double g : G1)
    if (!std::isfinite(g)) throw Error(ErrorKind::Validation, "hdim", "non-finite immediate impact");
  if (unconstrained) return;
  if (G1[index(EventType::NC)] != 0.0)
    throw Error(ErrorKind::Validation, "hdim", "G_NC(1) must be zero");
  for (const auto& row : kappa)
    for (double x : row[index(EventType::NC)])
      if (x != 0.0) throw Error(ErrorKind::Validation, "hdim", "kappa into NC events must be zero");
}

}  // namespace propkit
