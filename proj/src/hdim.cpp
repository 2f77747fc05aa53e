#include "propkit/hdim.hpp"

#include <algorithm>
#include <cmath>

#include "model_common.hpp"
#include "numeric.hpp"
#include "propkit/error.hpp"
#include "propkit/linalg.hpp"

namespace propkit {

using detail::CcTable;
using detail::CompensatedSum;

namespace {

constexpr std::size_t kC = index(EventType::C);

CorrelationView view_for(const InfluenceKernel& k, const CorrelationSet& corr) {
  return k.pooled ? CorrelationView::pooled(corr) : CorrelationView::typed(corr);
}

InfluenceKernel calibrate(const CorrelationView& view, const ResponseSet& resp, int L, const HdimOptions& options,
                          const CorrelationSet& corr) {
  if (L < 1) throw Error(ErrorKind::InvalidInput, "hdim", "influence kernel truncation must be >= 1");
  const int n_eq = options.n_equations < 0 ? L : options.n_equations;
  if (n_eq < L) throw Error(ErrorKind::Underdetermined, "hdim", "need at least L pair-response equations per type");
  if (std::max(n_eq, L) > view.max_lag())
    throw Error(ErrorKind::InvalidInput, "hdim",
                "correlations measured to lag " + std::to_string(view.max_lag()) + ", calibration needs " +
                    std::to_string(std::max(n_eq, L)));
  const bool single = view.single();
  if (single) {
    if (resp.S.max_lag() < n_eq || !resp.S.contains(0))
      throw Error(ErrorKind::InvalidInput, "hdim", "responses measured to too short a lag");
  } else {
    if (!resp.has_pair() || static_cast<int>(resp.S_pair[0][0].size()) <= n_eq)
      throw Error(ErrorKind::InvalidInput, "hdim",
                  "pair responses needed to lag " + std::to_string(n_eq));
    if (!resp.has_conditional() || !std::isfinite(resp.S_cond[kC].at(0)))
      throw Error(ErrorKind::InvalidInput, "hdim", "conditional response S_C(0) unavailable");
  }

  const CcTable cc(view, std::max(n_eq, L));
  const auto& types = cc.active;
  const Eigen::Index nt = static_cast<Eigen::Index>(types.size());
  const Eigen::Index cols = 1 + nt * L;
  const Eigen::Index rows = 1 + nt * n_eq;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd b(rows);
  auto col = [&](Eigen::Index j, int n) { return 1 + j * L + (n - 1); };

  // equal-time row: S_C(0) = G_C + sum_n sum_p P(p) kappa_{p,C}(n) C_{p,C}(n)
  b(0) = single ? resp.S.at(0) : resp.S_cond[kC].at(0);
  A(0, 0) = 1.0;
  for (Eigen::Index j = 0; j < nt; ++j)
    for (int n = 1; n <= L; ++n) A(0, col(j, n)) = cc.P[types[j]] * cc(types[j], kC, n);

  // S_{p1,C}(l) = G_C C_{p1,C}(l) + sum_n sum_p P(p) kappa_{p,C}(n) C_{p,p1}(n - l)
  for (Eigen::Index i = 0; i < nt; ++i) {
    const std::size_t p1 = types[i];
    for (int l = 1; l <= n_eq; ++l) {
      const Eigen::Index r = 1 + i * n_eq + (l - 1);
      b(r) = single ? resp.S.at(l) : resp.S_pair[p1][kC][static_cast<std::size_t>(l)];
      A(r, 0) = cc(p1, kC, l);
      for (Eigen::Index j = 0; j < nt; ++j)
        for (int n = 1; n <= L; ++n) A(r, col(j, n)) = cc.P[types[j]] * cc(types[j], p1, n - l);
    }
  }
  const auto sol = solve_dense(A, b, "hdim", options.rcond_floor);

  InfluenceKernel k = InfluenceKernel::zero(L);
  k.pooled = single;
  k.G1[kC] = sol.x(0);
  for (Eigen::Index j = 0; j < nt; ++j)
    for (int n = 1; n <= L; ++n) k.kappa[types[j]][kC][static_cast<std::size_t>(n)] = sol.x(col(j, n));
  k.residual = sol.residual;
  if (options.series != nullptr) k.factorization_residual = factorization_residual(*options.series, corr, options.factorization_lags);
  k.validate();
  return k;
}

LagSeries make_lags(int L_neg, int L_pos) {
  LagSeries s;
  s.min_lag = -L_neg;
  s.values.assign(static_cast<std::size_t>(L_neg + L_pos) + 1, 0.0);
  return s;
}

}  // namespace

InfluenceKernel calibrate_hdim2(const CorrelationSet& corr, const ResponseSet& resp, int L, const HdimOptions& options) {
  for (auto t : kEventTypes)
    if (!(corr.probs[index(t)] > 0.0))
      throw Error(ErrorKind::DegenerateType, "hdim", "event type " + std::string(to_string(t)) + " never occurs");
  return calibrate(CorrelationView::typed(corr), resp, L, options, corr);
}

InfluenceKernel calibrate_hdim1(const CorrelationSet& corr, const ResponseSet& resp, int L, const HdimOptions& options) {
  HdimOptions o = options;
  o.series = nullptr;  // the three-point diagnostic is a two-type quantity
  return calibrate(CorrelationView::pooled(corr), resp, L, o, corr);
}

InfluenceKernel embed_tim_as_hdim(const TimKernel& kernel) {
  kernel.validate();
  InfluenceKernel k = InfluenceKernel::zero(kernel.L);
  k.unconstrained = true;
  k.pooled = kernel.variant == TimVariant::TIM1;
  for (auto past : kEventTypes) {
    k.G1[index(past)] = kernel.dg(past, 0);
    for (auto present : kEventTypes)
      for (int n = 1; n <= kernel.L; ++n) k.kappa[index(past)][index(present)][static_cast<std::size_t>(n)] = kernel.dg(past, n);
  }
  k.residual = kernel.residual;
  return k;
}

ResponsePrediction predict_response_hdim2(const InfluenceKernel& kernel, const CorrelationSet& corr, int L_neg,
                                          int L_pos) {
  kernel.validate();
  if (L_neg < 0 || L_pos < 0) throw Error(ErrorKind::InvalidInput, "hdim", "lag counts must be >= 0");
  const CorrelationView view = view_for(kernel, corr);
  const long need = std::max({static_cast<long>(kernel.L) + L_neg, static_cast<long>(kernel.L), static_cast<long>(L_pos)});
  view.require(need, "hdim");
  const CcTable cc(view, need);
  const bool single = view.single();
  const auto& types = cc.active;
  const int L = kernel.L;
  auto kap = [&](std::size_t a, std::size_t b, int n) { return kernel.kappa[a][b][static_cast<std::size_t>(n)]; };

  ResponsePrediction out;
  out.R = make_lags(L_neg, L_pos);
  out.S = make_lags(L_neg, L_pos);
  if (!single)
    for (std::size_t p = 0; p < kTypeCount; ++p) {
      out.R_cond[p] = make_lags(L_neg, L_pos);
      out.S_cond[p] = make_lags(L_neg, L_pos);
    }

  // kbar_p(n) = sum_p1 P(p1) kappa_{p,p1}(n): average influence of a past p event
  std::array<std::vector<double>, kTypeCount> kbar;
  for (std::size_t p : types) {
    kbar[p].assign(static_cast<std::size_t>(L) + 1, 0.0);
    for (int n = 1; n <= L; ++n)
      for (std::size_t p1 : types) kbar[p][static_cast<std::size_t>(n)] += cc.P[p1] * kap(p, p1, n);
  }

  for (std::size_t p0 : types) {
    LagSeries& S = single ? out.S : out.S_cond[p0];
    LagSeries& R = single ? out.R : out.R_cond[p0];
    for (long i = 1; i <= L_neg; ++i) {
      CompensatedSum s;
      for (std::size_t p1 : types) s.add(cc.P[p1] * kernel.G1[p1] * cc(p1, p0, i));
      for (std::size_t p : types) {
        const double* c = cc.row(p, p0);
        double part = 0.0;
        for (int n = 1; n <= L; ++n) part += kbar[p][static_cast<std::size_t>(n)] * c[n + i];
        s.add(cc.P[p] * part);
      }
      S.at(-i) = s.value();
    }
    {
      CompensatedSum s;
      s.add(kernel.G1[p0]);
      for (std::size_t p : types)
        for (int n = 1; n <= L; ++n) s.add(cc.P[p] * kap(p, p0, n) * cc(p, p0, n));
      if (L_pos >= 0) S.at(0) = s.value();
    }
    for (long l = 1; l <= L_pos; ++l) {
      CompensatedSum s;
      for (std::size_t p2 : types) {
        double part = kernel.G1[p2] * cc(p0, p2, l);
        for (std::size_t p : types) {
          const double* c = cc.row(p, p0);
          double inner = 0.0;
          for (int n = 1; n <= L; ++n) inner += kap(p, p2, n) * c[n - l];
          part += cc.P[p] * inner;
        }
        s.add(cc.P[p2] * part);
      }
      S.at(l) = s.value();
    }
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
  if (!single)
    for (long l = -L_neg; l <= L_pos; ++l) {
      double r = 0.0, s = 0.0;
      for (std::size_t p : types) {
        r += cc.P[p] * out.R_cond[p].at(l);
        s += cc.P[p] * out.S_cond[p].at(l);
      }
      out.R.at(l) = r;
      out.S.at(l) = s;
    }
  return out;
}

std::vector<double> signature_hdim2(const InfluenceKernel& kernel, const CorrelationSet& corr,
                                    const NoiseParams& noise, std::span<const long> lags) {
  kernel.validate();
  noise.validate();
  if (lags.empty()) return {};
  long lmax = 0;
  for (long l : lags) {
    if (l < 1) throw Error(ErrorKind::InvalidInput, "hdim", "signature lags must be >= 1");
    lmax = std::max(lmax, l);
  }
  const CorrelationView view = view_for(kernel, corr);
  const int L = kernel.L;
  const long need = std::max<long>(lmax - 1 + L, L);
  view.require(need, "hdim");
  const CcTable cc(view, need, true);
  const auto& T = cc.active;
  const auto& P = cc.P;
  const auto& G = kernel.G1;
  auto kap = [&](std::size_t a, std::size_t b, long n) {
    return n >= 1 && n <= L ? kernel.kappa[a][b][static_cast<std::size_t>(n)] : 0.0;
  };
  auto occ1 = [&](std::size_t a, std::size_t b, long n) { return cc.occ(a, b, n) + 1.0; };

  // equal-time variance per event
  CompensatedSum A;
  for (std::size_t p : T) A.add(P[p] * G[p] * G[p]);
  for (int n = 1; n <= L; ++n)
    for (std::size_t p1 : T)
      for (std::size_t p2 : T) A.add(P[p1] * P[p2] * kap(p1, p2, n) * kap(p1, p2, n) * occ1(p1, p2, n));
  for (std::size_t p3 : T)
    for (std::size_t p1 : T)
      for (std::size_t p2 : T) {
        const double* c = cc.row(p1, p2);
        double s = 0.0;
        for (int m = 2; m <= L; ++m) {
          double inner = 0.0;
          for (int n = 1; n < m; ++n) inner += kap(p2, p3, n) * c[m - n];
          s += kap(p1, p3, m) * inner;
        }
        A.add(2.0 * P[p1] * P[p2] * P[p3] * s);
      }
  for (int n = 1; n <= L; ++n)
    for (std::size_t p1 : T)
      for (std::size_t p2 : T) A.add(2.0 * P[p1] * P[p2] * G[p2] * kap(p1, p2, n) * cc(p1, p2, n));

  // kbar_p(i) = sum_p3 P(p3) kappa_{p,p3}(i)
  std::array<std::vector<double>, kTypeCount> kbar;
  for (std::size_t p : T) {
    kbar[p].assign(static_cast<std::size_t>(L) + 1, 0.0);
    for (int i = 1; i <= L; ++i)
      for (std::size_t p3 : T) kbar[p][static_cast<std::size_t>(i)] += P[p3] * kap(p, p3, i);
  }
  // W_p2 = sum_p1 P(p1) sum_i kappa_{p1,p2}(i) C_{p1,p2}(i)
  std::array<double, kTypeCount> W{};
  for (std::size_t p2 : T)
    for (std::size_t p1 : T)
      for (int i = 1; i <= L; ++i) W[p2] += P[p1] * kap(p1, p2, i) * cc(p1, p2, i);
  // U_{p1,p3,p4}(m) = sum_{j=1..L} kappa_{p3,p4}(j) C_{p1,p3}(m - j) for m = 1..lmax + L
  const long mmax = lmax + L;
  std::array<std::array<std::array<std::vector<double>, kTypeCount>, kTypeCount>, kTypeCount> U;
  for (std::size_t p1 : T)
    for (std::size_t p3 : T)
      for (std::size_t p4 : T) {
        auto& u = U[p1][p3][p4];
        u.assign(static_cast<std::size_t>(mmax) + 1, 0.0);
        const double* c = cc.row(p1, p3);
        for (long m = 1; m <= mmax; ++m) {
          double s = 0.0;
          for (int j = 1; j <= L; ++j) {
            const long d = m - j;
            if (d > need || d < -need) continue;
            s += kap(p3, p4, j) * c[d];
          }
          u[static_cast<std::size_t>(m)] = s;
        }
      }

  // T(n) = E[r_t r_{t+n}] under the factorization, n = 1..lmax - 1
  std::vector<double> Tn(static_cast<std::size_t>(lmax), 0.0);
  for (long n = 1; n < lmax; ++n) {
    CompensatedSum s;
    for (std::size_t p1 : T)
      for (std::size_t p2 : T) {
        // immediate x immediate
        s.add(P[p1] * P[p2] * G[p1] * G[p2] * cc(p1, p2, n));
        // earlier history x later immediate impact
        double five = 0.0, six = 0.0;
        for (int i = 1; i <= L; ++i) {
          five += kbar[p2][static_cast<std::size_t>(i)] * cc(p2, p1, n + i);
          if (i != n) six += kbar[p2][static_cast<std::size_t>(i)] * cc(p1, p2, n - i);
        }
        s.add(P[p1] * P[p2] * G[p1] * (five + six));
        // the earlier event itself in the later event's history
        s.add(P[p1] * P[p2] * G[p1] * kap(p1, p2, n) * occ1(p1, p2, n));
      }
    // history x history
    for (std::size_t p2 : T)
      for (std::size_t p4 : T) {
        double inner = 0.0;
        for (std::size_t p1 : T)
          for (std::size_t p3 : T) {
            const auto& u = U[p1][p3][p4];
            double acc = 0.0;
            for (int i = 1; i <= L; ++i) {
              double v = u[static_cast<std::size_t>(n + i)];
              if (n <= L) v -= kap(p3, p4, n) * cc(p1, p3, i);
              acc += kap(p1, p2, i) * v;
            }
            inner += P[p1] * P[p3] * acc;
          }
        s.add(P[p2] * P[p4] * occ1(p2, p4, n) * inner);
      }
    // earlier event's history x earlier event as history of the later one
    for (std::size_t p2 : T)
      for (std::size_t p3 : T) s.add(P[p2] * P[p3] * kap(p2, p3, n) * W[p2]);
    Tn[static_cast<std::size_t>(n)] = s.value();
  }

  std::vector<double> out;
  out.reserve(lags.size());
  for (long l : lags) {
    CompensatedSum s;
    const double ld = static_cast<double>(l);
    s.add(ld * (noise.D_LF + A.value()));
    s.add(noise.D_HF);
    for (long n = 1; n < l; ++n) s.add(2.0 * static_cast<double>(l - n) * Tn[static_cast<std::size_t>(n)]);
    out.push_back(s.value() / ld);
  }
  return out;
}

}  // namespace propkit
