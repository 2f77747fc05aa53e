#include "propkit/tim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "model_common.hpp"
#include "numeric.hpp"
#include "propkit/error.hpp"
#include "propkit/linalg.hpp"

namespace propkit {

using detail::CcTable;
using detail::CompensatedSum;

namespace {

CorrelationView view_for(const TimKernel& k, const CorrelationSet& corr) {
  return k.variant == TimVariant::TIM1 ? CorrelationView::pooled(corr) : CorrelationView::typed(corr);
}

/// Kernel values per type slot (indexed by type; TIM1 fills both with its one slot).
struct KernelTable {
  int L = 0;
  std::array<std::vector<double>, kTypeCount> dG;
  std::array<std::vector<double>, kTypeCount> G;  // G(0..L+1)

  explicit KernelTable(const TimKernel& k) : L(k.L) {
    for (auto t : kEventTypes) {
      dG[index(t)] = k.differential(t);
      G[index(t)].resize(static_cast<std::size_t>(L) + 2);
      for (long l = 0; l <= L + 1; ++l) G[index(t)][static_cast<std::size_t>(l)] = k.g(t, l);
    }
  }
  double g(std::size_t t, long l) const {
    if (l <= 0) return 0.0;
    return l > L + 1 ? G[t].back() : G[t][static_cast<std::size_t>(l)];
  }
};

TimKernel calibrate(const CorrelationView& view, const ResponseSet& resp, int L, const CalibrationOptions& options,
                    TimVariant variant) {
  if (L < 0) throw Error(ErrorKind::InvalidInput, "tim", "kernel truncation must be >= 0");
  const int n_eq = options.n_equations < 0 ? L + 1 : options.n_equations;
  if (n_eq < L + 1)
    throw Error(ErrorKind::Underdetermined, "tim", "need at least L + 1 response equations per type");
  if (n_eq - 1 > resp.L_pos)
    throw Error(ErrorKind::InvalidInput, "tim",
                "responses measured to lag " + std::to_string(resp.L_pos) + ", calibration needs " +
                    std::to_string(n_eq - 1));
  if (L > view.max_lag() || n_eq - 1 > view.max_lag())
    throw Error(ErrorKind::InvalidInput, "tim",
                "correlations measured to lag " + std::to_string(view.max_lag()) + ", calibration needs " +
                    std::to_string(std::max(L, n_eq - 1)));

  const CcTable cc(view, std::max(L, n_eq - 1));
  const auto& types = cc.active;
  const Eigen::Index rows = static_cast<Eigen::Index>(types.size()) * n_eq;
  const Eigen::Index cols = static_cast<Eigen::Index>(types.size()) * (L + 1);
  Eigen::MatrixXd A(rows, cols);
  Eigen::VectorXd b(rows);
  for (std::size_t i = 0; i < types.size(); ++i) {
    const std::size_t p1 = types[i];
    const LagSeries& S = view.single() ? resp.S : resp.S_cond[p1];
    for (int l = 0; l < n_eq; ++l) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * n_eq + l;
      b(r) = S.at(l);
      for (std::size_t j = 0; j < types.size(); ++j) {
        const std::size_t p2 = types[j];
        for (int n = 0; n <= L; ++n)
          A(r, static_cast<Eigen::Index>(j) * (L + 1) + n) = cc.P[p2] * cc(p1, p2, l - n);
      }
    }
  }
  if (!b.allFinite())
    throw Error(ErrorKind::DegenerateType, "tim", "conditional responses unavailable for one event type");
  const auto sol = solve_dense(A, b, "tim", options.rcond_floor);
  auto slot = [&](std::size_t j) {
    return std::vector<double>(sol.x.data() + static_cast<Eigen::Index>(j) * (L + 1),
                               sol.x.data() + static_cast<Eigen::Index>(j + 1) * (L + 1));
  };
  TimKernel k = variant == TimVariant::TIM1 ? TimKernel::tim1(slot(0)) : TimKernel::tim2(slot(0), slot(1));
  k.residual = sol.residual;
  return k;
}

LagSeries make_lags(int L_neg, int L_pos) {
  LagSeries s;
  s.min_lag = -L_neg;
  s.values.assign(static_cast<std::size_t>(L_neg + L_pos) + 1, 0.0);
  return s;
}

/// Cumulates S into R: R(l > 0) = sum_{0 <= i < l} S(i), R(-l) = -sum_{0 < i <= l} S(-i).
void cumulate(const LagSeries& S, LagSeries& R, int L_neg, int L_pos) {
  R.at(0) = 0.0;
  CompensatedSum acc;
  for (long l = 1; l <= L_pos; ++l) {
    acc.add(S.at(l - 1));
    R.at(l) = acc.value();
  }
  acc = CompensatedSum();
  for (long l = 1; l <= L_neg; ++l) {
    acc.add(S.at(-l));
    R.at(-l) = -acc.value();
  }
}

void check_horizon(const CorrelationView& view, long need) { view.require(need, "tim"); }

/// Second route for the negative-lag response:
/// -sum_n dG_p2(n) sum_{0<i<=l} C_{p2,p}(n+i), through prefix sums of C.
void check_negative_lag_signs(const CcTable& cc, const KernelTable& kt, const ResponsePrediction& pred,
                              bool single, int L_neg) {
  for (std::size_t p : cc.active) {
    const LagSeries& R = single ? pred.R : pred.R_cond[p];
    std::vector<std::vector<double>> prefix(kTypeCount);
    for (std::size_t p2 : cc.active) {
      auto& pre = prefix[p2];
      pre.assign(static_cast<std::size_t>(cc.K) + 2, 0.0);
      for (long k = 0; k <= cc.K; ++k) pre[static_cast<std::size_t>(k + 1)] = pre[static_cast<std::size_t>(k)] + cc(p2, p, k);
    }
    double scale = 0.0;
    for (std::size_t p2 : cc.active)
      for (double v : kt.dG[p2]) scale = std::max(scale, std::abs(v) * cc.P[p2]);
    for (long l = 1; l <= L_neg; ++l) {
      double direct = 0.0;
      for (std::size_t p2 : cc.active)
        for (int n = 0; n <= kt.L; ++n) {
          const double window = prefix[p2][static_cast<std::size_t>(n + l + 1)] - prefix[p2][static_cast<std::size_t>(n + 1)];
          direct -= cc.P[p2] * kt.dG[p2][static_cast<std::size_t>(n)] * window;
        }
      const double model = R.at(-l);
      const double tol = 1e-9 * scale * static_cast<double>(l) * static_cast<double>(kt.L + 1);
      if (std::abs(direct - model) > tol + 1e-12) {
        std::ostringstream msg;
        msg << "negative-lag response route mismatch at l = " << l << ": " << model << " vs " << direct;
        throw Error(ErrorKind::Validation, "tim", msg.str());
      }
      if (std::abs(model) > tol && std::abs(direct) > tol && (model > 0) != (direct > 0)) {
        std::ostringstream msg;
        msg << "sign of R(-" << l << ") disagrees with -sum dG C";
        throw Error(ErrorKind::Validation, "tim", msg.str());
      }
    }
  }
}

}  // namespace

TimKernel calibrate_tim1(const CorrelationSet& corr, const ResponseSet& resp, int L, const CalibrationOptions& options) {
  return calibrate(CorrelationView::pooled(corr), resp, L, options, TimVariant::TIM1);
}

TimKernel calibrate_tim2(const CorrelationSet& corr, const ResponseSet& resp, int L, const CalibrationOptions& options) {
  if (!resp.has_conditional())
    throw Error(ErrorKind::InvalidInput, "tim", "conditional responses required for the two-type model");
  for (auto t : kEventTypes)
    if (!(corr.probs[index(t)] > 0.0))
      throw Error(ErrorKind::DegenerateType, "tim", "event type " + std::string(to_string(t)) + " never occurs");
  return calibrate(CorrelationView::typed(corr), resp, L, options, TimVariant::TIM2);
}

long tim_required_horizon(const TimKernel& kernel, int L_neg, int L_pos) {
  return std::max({static_cast<long>(kernel.L) + L_neg, static_cast<long>(kernel.L), static_cast<long>(L_pos)});
}

ResponsePrediction predict_response_tim(const TimKernel& kernel, const CorrelationSet& corr, int L_neg, int L_pos) {
  kernel.validate();
  if (L_neg < 0 || L_pos < 0) throw Error(ErrorKind::InvalidInput, "tim", "lag counts must be >= 0");
  const CorrelationView view = view_for(kernel, corr);
  const long need = tim_required_horizon(kernel, L_neg, L_pos);
  check_horizon(view, need);
  const CcTable cc(view, need);
  const KernelTable kt(kernel);
  const bool single = view.single();

  ResponsePrediction out;
  out.R = make_lags(L_neg, L_pos);
  out.S = make_lags(L_neg, L_pos);
  if (!single)
    for (std::size_t p = 0; p < kTypeCount; ++p) {
      out.R_cond[p] = make_lags(L_neg, L_pos);
      out.S_cond[p] = make_lags(L_neg, L_pos);
    }
  for (std::size_t p : cc.active) {
    LagSeries& S = single ? out.S : out.S_cond[p];
    LagSeries& R = single ? out.R : out.R_cond[p];
    for (long i = 1; i <= L_neg; ++i) {
      CompensatedSum s;
      for (std::size_t p2 : cc.active) {
        const double* c = cc.row(p2, p);
        double part = 0.0;
        for (int n = 0; n <= kt.L; ++n) part += kt.dG[p2][static_cast<std::size_t>(n)] * c[n + i];
        s.add(cc.P[p2] * part);
      }
      S.at(-i) = s.value();
    }
    for (long i = 0; i <= L_pos; ++i) {
      CompensatedSum s;
      for (std::size_t p2 : cc.active) {
        const double* c = cc.row(p, p2);
        double part = 0.0;
        for (int n = 0; n <= kt.L; ++n) part += kt.dG[p2][static_cast<std::size_t>(n)] * c[i - n];
        s.add(cc.P[p2] * part);
      }
      S.at(i) = s.value();
    }
    cumulate(S, R, L_neg, L_pos);
  }
  if (!single) {
    for (long l = -L_neg; l <= L_pos; ++l) {
      double r = 0.0, s = 0.0;
      for (std::size_t p : cc.active) {
        r += cc.P[p] * out.R_cond[p].at(l);
        s += cc.P[p] * out.S_cond[p].at(l);
      }
      out.R.at(l) = r;
      out.S.at(l) = s;
    }
  }
  check_negative_lag_signs(cc, kt, out, single, L_neg);
  return out;
}

ResponsePrediction predict_response_tim_constant(const TimKernel& kernel, const CorrelationSet& corr, int L_neg,
                                                 int L_pos) {
  kernel.validate();
  if (!kernel.is_constant())
    throw Error(ErrorKind::InvalidInput, "tim", "constant-kernel shortcut needs dG(n >= 1) = 0");
  const CorrelationView view = view_for(kernel, corr);
  const long need = std::max(L_neg, L_pos);
  check_horizon(view, need);
  const CcTable cc(view, need);
  const bool single = view.single();
  std::array<double, kTypeCount> g1{};
  for (auto t : kEventTypes) g1[index(t)] = kernel.g(t, 1);

  ResponsePrediction out;
  out.R = make_lags(L_neg, L_pos);
  out.S = make_lags(L_neg, L_pos);
  if (!single)
    for (std::size_t p = 0; p < kTypeCount; ++p) {
      out.R_cond[p] = make_lags(L_neg, L_pos);
      out.S_cond[p] = make_lags(L_neg, L_pos);
    }
  for (std::size_t p : cc.active) {
    LagSeries& S = single ? out.S : out.S_cond[p];
    LagSeries& R = single ? out.R : out.R_cond[p];
    // S_p(i) = sum_p1 P(p1) G_p1(1) C_{p,p1}(i) for i >= 0, C_{p1,p}(-i) for i < 0
    for (long i = -L_neg; i <= L_pos; ++i) {
      double s = 0.0;
      for (std::size_t p1 : cc.active) s += cc.P[p1] * g1[p1] * (i >= 0 ? cc(p, p1, i) : cc(p1, p, -i));
      S.at(i) = s;
    }
    R.at(0) = 0.0;
    double acc = 0.0;
    for (long l = 1; l <= L_pos; ++l) R.at(l) = (acc += S.at(l - 1));
    acc = 0.0;
    for (long l = 1; l <= L_neg; ++l) R.at(-l) = -(acc += S.at(-l));
  }
  if (!single)
    for (long l = -L_neg; l <= L_pos; ++l) {
      double r = 0.0, s = 0.0;
      for (std::size_t p : cc.active) {
        r += cc.P[p] * out.R_cond[p].at(l);
        s += cc.P[p] * out.S_cond[p].at(l);
      }
      out.R.at(l) = r;
      out.S.at(l) = s;
    }
  return out;
}

namespace {

std::vector<double> signature_tim(const TimKernel& kernel, const CorrelationView& view, const NoiseParams& noise,
                                  std::span<const long> lags) {
  kernel.validate();
  noise.validate();
  long lmax = 0;
  for (long l : lags) {
    if (l < 1) throw Error(ErrorKind::InvalidInput, "tim", "signature lags must be >= 1");
    lmax = std::max(lmax, l);
  }
  if (lags.empty()) return {};
  const int L = kernel.L;
  const long need = std::max(0L, lmax + L - 1);
  check_horizon(view, need);
  const CcTable cc(view, need);
  const KernelTable kt(kernel);
  const auto& types = cc.active;

  // S_AA(l) = sum_{1 <= v < u <= l} G_p1(u) G_p2(v) C_{p1,p2}(u - v), and sum_{u <= l} G_p(u)^2,
  // both cumulated over l.
  std::vector<double> aa(static_cast<std::size_t>(lmax) + 1, 0.0), a2(static_cast<std::size_t>(lmax) + 1, 0.0);
  {
    CompensatedSum acc_aa, acc_a2;
    for (long u = 1; u <= lmax; ++u) {
      for (std::size_t p1 : types) {
        const double gu = kt.g(p1, u);
        acc_a2.add(cc.P[p1] * gu * gu);
        for (std::size_t p2 : types) {
          const double* c = cc.row(p1, p2);
          double s = 0.0;
          for (long v = 1; v < u; ++v) s += kt.g(p2, v) * c[u - v];
          acc_aa.add(cc.P[p1] * cc.P[p2] * gu * s);
        }
      }
      aa[static_cast<std::size_t>(u)] = acc_aa.value();
      a2[static_cast<std::size_t>(u)] = acc_a2.value();
    }
  }

  std::vector<double> out;
  out.reserve(lags.size());
  std::array<std::vector<double>, kTypeCount> H;
  for (long l : lags) {
    // H_p(n) = G_p(l + n) - G_p(n), zero for n > L
    for (std::size_t p : types) {
      H[p].assign(static_cast<std::size_t>(L) + 1, 0.0);
      for (int n = 1; n <= L; ++n) H[p][static_cast<std::size_t>(n)] = kt.g(p, l + n) - kt.g(p, n);
    }
    CompensatedSum total;
    total.add(noise.D_LF * static_cast<double>(l));
    total.add(noise.D_HF);
    total.add(a2[static_cast<std::size_t>(l)]);
    total.add(2.0 * aa[static_cast<std::size_t>(l)]);
    for (std::size_t p : types)
      for (int n = 1; n <= L; ++n) total.add(cc.P[p] * H[p][static_cast<std::size_t>(n)] * H[p][static_cast<std::size_t>(n)]);
    // B-B cross terms: positions t-n, t-m with 0 < n < m, t-m earlier
    for (std::size_t p1 : types)
      for (std::size_t p2 : types) {
        const double* c = cc.row(p2, p1);
        double s = 0.0;
        for (int n = 1; n <= L; ++n) {
          double inner = 0.0;
          for (int m = n + 1; m <= L; ++m) inner += H[p2][static_cast<std::size_t>(m)] * c[m - n];
          s += H[p1][static_cast<std::size_t>(n)] * inner;
        }
        total.add(2.0 * cc.P[p1] * cc.P[p2] * s);
      }
    // A-B cross terms: positions t+n (0 <= n < l) and t-m (m >= 1)
    for (std::size_t p1 : types)
      for (std::size_t p2 : types) {
        const double* c = cc.row(p2, p1);
        CompensatedSum s;
        for (long n = 0; n < l; ++n) {
          double inner = 0.0;
          for (int m = 1; m <= L; ++m) inner += H[p2][static_cast<std::size_t>(m)] * c[m + n];
          s.add(kt.g(p1, l - n) * inner);
        }
        total.add(2.0 * cc.P[p1] * cc.P[p2] * s.value());
      }
    out.push_back(total.value() / static_cast<double>(l));
  }
  return out;
}

}  // namespace

std::vector<double> signature_tim1(const TimKernel& kernel, const CorrelationSet& corr, const NoiseParams& noise,
                                   std::span<const long> lags) {
  return signature_tim(kernel, CorrelationView::pooled(corr), noise, lags);
}

std::vector<double> signature_tim2(const TimKernel& kernel, const CorrelationSet& corr, const NoiseParams& noise,
                                   std::span<const long> lags) {
  if (kernel.variant == TimVariant::TIM1) return signature_tim1(kernel, corr, noise, lags);
  return signature_tim(kernel, CorrelationView::typed(corr), noise, lags);
}

std::vector<double> signature_tim2_constant(const TimKernel& kernel, const CorrelationSet& corr,
                                            const NoiseParams& noise, std::span<const long> lags) {
  kernel.validate();
  noise.validate();
  if (!kernel.is_constant())
    throw Error(ErrorKind::InvalidInput, "tim", "constant-kernel shortcut needs dG(n >= 1) = 0");
  long lmax = 0;
  for (long l : lags) {
    if (l < 1) throw Error(ErrorKind::InvalidInput, "tim", "signature lags must be >= 1");
    lmax = std::max(lmax, l);
  }
  const CorrelationView view = view_for(kernel, corr);
  check_horizon(view, std::max(0L, lmax - 1));
  const CcTable cc(view, std::max(0L, lmax - 1));
  std::array<double, kTypeCount> g{};
  for (auto t : kEventTypes) g[index(t)] = kernel.g(t, 1);
  double base = 0.0;
  for (std::size_t p : cc.active) base += cc.P[p] * g[p] * g[p];
  std::vector<double> out;
  for (long l : lags) {
    CompensatedSum s;
    for (long k = 1; k < l; ++k) {
      double c = 0.0;
      for (std::size_t p1 : cc.active)
        for (std::size_t p2 : cc.active) c += cc.P[p1] * cc.P[p2] * g[p1] * g[p2] * cc(p1, p2, k);
      s.add(static_cast<double>(l - k) * c);
    }
    const double ld = static_cast<double>(l);
    out.push_back(noise.D_LF + noise.D_HF / ld + base + 2.0 * s.value() / ld);
  }
  return out;
}

std::vector<long> lag_range(long first, long last) {
  std::vector<long> v;
  for (long l = first; l <= last; ++l) v.push_back(l);
  return v;
}

}  // namespace propkit
