#include "propkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "numeric.hpp"
#include "propkit/error.hpp"

namespace propkit {

using detail::CompensatedSum;

double LagSeries::at(long lag) const {
  if (!contains(lag))
    throw Error(ErrorKind::Horizon, "stats", "lag " + std::to_string(lag) + " outside [" +
                                                 std::to_string(min_lag) + ", " + std::to_string(max_lag()) + "]");
  return values[static_cast<std::size_t>(lag - min_lag)];
}

double& LagSeries::at(long lag) {
  if (!contains(lag))
    throw Error(ErrorKind::Horizon, "stats", "lag " + std::to_string(lag) + " outside [" +
                                                 std::to_string(min_lag) + ", " + std::to_string(max_lag()) + "]");
  return values[static_cast<std::size_t>(lag - min_lag)];
}

double CorrelationSet::unconditional(long lag) const {
  const auto k = static_cast<std::size_t>(std::labs(lag));
  if (k >= C.size())
    throw Error(ErrorKind::Horizon, "stats",
                "need C up to lag " + std::to_string(k) + ", have " + std::to_string(max_lag));
  return C[k];
}

double CorrelationSet::conditional(EventType first, EventType second, long lag) const {
  if (!two_type()) throw Error(ErrorKind::DegenerateType, "stats", "conditional correlations unavailable");
  if (lag < 0) return conditional(second, first, -lag);
  const auto& arr = C_cond[index(first)][index(second)];
  if (static_cast<std::size_t>(lag) >= arr.size())
    throw Error(ErrorKind::Horizon, "stats",
                "need C_cond up to lag " + std::to_string(lag) + ", have " + std::to_string(max_lag));
  return arr[static_cast<std::size_t>(lag)];
}

double CorrelationSet::occurrence(EventType first, EventType second, long lag) const {
  if (!two_type()) throw Error(ErrorKind::DegenerateType, "stats", "occurrence correlations unavailable");
  if (lag < 0) return occurrence(second, first, -lag);
  const auto& arr = Pi[index(first)][index(second)];
  if (static_cast<std::size_t>(lag) >= arr.size())
    throw Error(ErrorKind::Horizon, "stats",
                "need Pi up to lag " + std::to_string(lag) + ", have " + std::to_string(max_lag));
  return arr[static_cast<std::size_t>(lag)];
}

double batch_means_stderr(std::span<const double> values, std::span<const double> weights) {
  double wsum = 0.0;
  std::size_t batches = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (weights[i] > 0) {
      wsum += weights[i];
      ++batches;
    }
  if (batches < 2) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (weights[i] > 0) mean += weights[i] / wsum * values[i];
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (weights[i] > 0) {
      const double w = weights[i] / wsum;
      acc += w * w * (values[i] - mean) * (values[i] - mean);
    }
  return std::sqrt(acc * static_cast<double>(batches) / static_cast<double>(batches - 1));
}

namespace {

/// Column views of a series prepared for the lag loops.
struct Columns {
  std::vector<std::int8_t> eps;
  std::array<std::vector<std::int8_t>, kTypeCount> signed_ind;  // eps * I(type)
  std::array<std::vector<std::int8_t>, kTypeCount> ind;
  std::array<std::vector<double>, kTypeCount> signed_ind_d;
  std::array<std::vector<double>, kTypeCount> type_returns;  // I(type) * r
  std::array<double, kTypeCount> probs{};
  std::array<bool, kTypeCount> present{};

  explicit Columns(const EventSeries& s, bool need_double) {
    const std::size_t n = s.size();
    eps.assign(s.signs().begin(), s.signs().end());
    for (auto t : kEventTypes) {
      const auto k = index(t);
      probs[k] = static_cast<double>(s.count(t)) / static_cast<double>(n);
      present[k] = s.count(t) > 0;
      signed_ind[k].resize(n);
      ind[k].resize(n);
      if (need_double) {
        signed_ind_d[k].resize(n);
        type_returns[k].resize(n);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = index(s.types()[i]);
      for (std::size_t j = 0; j < kTypeCount; ++j) {
        const bool on = j == k;
        signed_ind[j][i] = on ? s.signs()[i] : 0;
        ind[j][i] = on ? 1 : 0;
        if (need_double) {
          signed_ind_d[j][i] = on ? static_cast<double>(s.signs()[i]) : 0.0;
          type_returns[j][i] = on ? s.returns()[i] : 0.0;
        }
      }
    }
  }
};

void require_non_empty(const EventSeries& s, const char* what) {
  if (s.empty()) throw Error(ErrorKind::EmptySeries, "stats", std::string(what) + " of an empty series");
}

void require_lag_fits(const EventSeries& s, long L) {
  if (L < 0) throw Error(ErrorKind::InvalidInput, "stats", "lag count must be non-negative");
  if (static_cast<std::size_t>(L) >= s.longest_day())
    throw Error(ErrorKind::InvalidInput, "stats",
                "lag " + std::to_string(L) + " exceeds the longest day segment (" +
                    std::to_string(s.longest_day()) + " events)");
}

void require_types(const EventSeries& s) {
  for (auto t : kEventTypes)
    if (s.count(t) == 0)
      throw Error(ErrorKind::DegenerateType, "stats",
                  "event type " + std::string(to_string(t)) + " never occurs");
}

/// Per-day accumulator for one estimator over a lag range.
struct DayTable {
  std::size_t days = 0, lags = 0;
  std::vector<double> sums;    // [day][lag]
  std::vector<double> counts;  // [day][lag]

  DayTable(std::size_t d, std::size_t l) : days(d), lags(l), sums(d * l, 0.0), counts(d * l, 0.0) {}
  double& sum(std::size_t d, std::size_t l) { return sums[d * lags + l]; }
  double& count(std::size_t d, std::size_t l) { return counts[d * lags + l]; }

  /// Pooled value and batch-means stderr of sum/(count * norm) at lag index l.
  std::pair<double, double> pooled(std::size_t l, double norm) const {
    CompensatedSum s, c;
    std::vector<double> vals(days), wts(days);
    for (std::size_t d = 0; d < days; ++d) {
      const double cnt = counts[d * lags + l];
      s.add(sums[d * lags + l]);
      c.add(cnt);
      wts[d] = cnt;
      vals[d] = cnt > 0 ? sums[d * lags + l] / (cnt * norm) : 0.0;
    }
    const double total = c.value();
    const double value = total > 0 ? s.value() / (total * norm) : std::numeric_limits<double>::quiet_NaN();
    return {value, batch_means_stderr(vals, wts)};
  }
};

}  // namespace

CorrelationSet estimate_correlations(const EventSeries& series, int L) {
  require_non_empty(series, "correlations");
  require_lag_fits(series, L);
  Columns cols(series, false);
  const std::size_t days = series.day_count();
  const std::size_t lags = static_cast<std::size_t>(L) + 1;
  const bool two = cols.present[0] && cols.present[1];

  DayTable total(days, lags);
  std::array<std::array<DayTable, 2>, 2> signed_tab{{{DayTable(days, lags), DayTable(days, lags)},
                                                     {DayTable(days, lags), DayTable(days, lags)}}};
  std::array<std::array<DayTable, 2>, 2> occ_tab = signed_tab;

  for (std::size_t d = 0; d < days; ++d) {
    auto [b, e] = series.day_range(d);
    const std::size_t n = e - b;
    for (std::size_t l = 0; l < lags && l < n; ++l) {
      const std::size_t m = n - l;
      std::int64_t all = 0;
      for (std::size_t p1 = 0; p1 < 2; ++p1) {
        if (!cols.present[p1]) continue;
        for (std::size_t p2 = 0; p2 < 2; ++p2) {
          if (!cols.present[p2]) continue;
          const auto v = detail::dot_i8(cols.signed_ind[p1].data() + b, cols.signed_ind[p2].data() + b + l, m);
          all += v;
          if (two) {
            signed_tab[p1][p2].sum(d, l) = static_cast<double>(v);
            signed_tab[p1][p2].count(d, l) = static_cast<double>(m);
            occ_tab[p1][p2].sum(d, l) =
                static_cast<double>(detail::dot_i8(cols.ind[p1].data() + b, cols.ind[p2].data() + b + l, m));
            occ_tab[p1][p2].count(d, l) = static_cast<double>(m);
          }
        }
      }
      total.sum(d, l) = static_cast<double>(all);
      total.count(d, l) = static_cast<double>(m);
    }
  }

  CorrelationSet out;
  out.instrument = series.instrument();
  out.max_lag = L;
  out.probs = cols.probs;
  out.n_events = series.size();
  out.C.resize(lags);
  out.C_se.resize(lags);
  for (std::size_t l = 0; l < lags; ++l) std::tie(out.C[l], out.C_se[l]) = total.pooled(l, 1.0);
  out.C[0] = 1.0;
  out.C_se[0] = 0.0;

  if (two) {
    for (std::size_t p1 = 0; p1 < 2; ++p1)
      for (std::size_t p2 = 0; p2 < 2; ++p2) {
        const double norm = cols.probs[p1] * cols.probs[p2];
        auto& cc = out.C_cond[p1][p2];
        auto& cse = out.C_cond_se[p1][p2];
        auto& pi = out.Pi[p1][p2];
        cc.resize(lags);
        cse.resize(lags);
        pi.resize(lags);
        for (std::size_t l = 0; l < lags; ++l) {
          std::tie(cc[l], cse[l]) = signed_tab[p1][p2].pooled(l, norm);
          pi[l] = occ_tab[p1][p2].pooled(l, norm).first - 1.0;
        }
        // equal-time convention: an event is its own type with its own sign
        cc[0] = p1 == p2 ? 1.0 / cols.probs[p1] : 0.0;
        cse[0] = 0.0;
        pi[0] = (p1 == p2 ? 1.0 / cols.probs[p1] : 0.0) - 1.0;
      }
  }
  return out;
}

ResponseSet estimate_responses(const EventSeries& series, const ResponseOptions& options) {
  require_non_empty(series, "responses");
  const int L_sig = options.L_sig < 0 ? options.L_pos : options.L_sig;
  require_lag_fits(series, std::max({options.L_pos, options.L_neg, options.L_pair, L_sig}));
  if (options.L_pos < 0 || options.L_neg < 0)
    throw Error(ErrorKind::InvalidInput, "stats", "response lag counts must be non-negative");
  if (options.L_pair >= 0) require_types(series);

  Columns cols(series, true);
  const std::size_t days = series.day_count();
  const long Ln = options.L_neg, Lp = options.L_pos;
  const std::size_t span = static_cast<std::size_t>(Ln + Lp + 1);
  const auto r = series.returns();

  std::array<DayTable, 2> cond_tab{DayTable(days, span), DayTable(days, span)};
  DayTable total(days, span);
  for (std::size_t d = 0; d < days; ++d) {
    auto [b, e] = series.day_range(d);
    const long n = static_cast<long>(e - b);
    for (long lag = -Ln; lag <= Lp; ++lag) {
      const long m = n - std::labs(lag);
      if (m <= 0) continue;
      const std::size_t li = static_cast<std::size_t>(lag + Ln);
      // reference trade at t, return at t + lag
      const std::size_t t0 = b + static_cast<std::size_t>(lag < 0 ? -lag : 0);
      const std::size_t r0 = static_cast<std::size_t>(static_cast<long>(t0) + lag);
      double all = 0.0;
      for (std::size_t p = 0; p < 2; ++p) {
        if (!cols.present[p]) continue;
        const double v = detail::dot(cols.signed_ind_d[p].data() + t0, r.data() + r0, static_cast<std::size_t>(m));
        cond_tab[p].sum(d, li) = v;
        cond_tab[p].count(d, li) = static_cast<double>(m);
        all += v;
      }
      total.sum(d, li) = all;
      total.count(d, li) = static_cast<double>(m);
    }
  }

  ResponseSet out;
  out.instrument = series.instrument();
  out.L_pos = options.L_pos;
  out.L_neg = options.L_neg;
  out.probs = cols.probs;
  out.n_events = series.size();

  auto init = [&](LagSeries& s) {
    s.min_lag = -Ln;
    s.values.assign(span, 0.0);
  };
  for (auto* s : {&out.R, &out.S, &out.R_se, &out.S_se}) init(*s);
  for (std::size_t l = 0; l < span; ++l) std::tie(out.S.values[l], out.S_se.values[l]) = total.pooled(l, 1.0);

  // day weights for cumulated responses
  std::vector<double> weights(days);
  for (std::size_t d = 0; d < days; ++d) {
    auto [b, e] = series.day_range(d);
    weights[d] = static_cast<double>(e - b);
  }

  // R(l>0) = sum_{0<=i<l} S(i), R(-l) = -sum_{0<i<=l} S(-i), also per day for the error bars
  auto cumulate = [&](const LagSeries& S, LagSeries& R, LagSeries& R_se, DayTable& tab, double norm) {
    R.at(0) = 0.0;
    R_se.at(0) = 0.0;
    CompensatedSum acc;
    std::vector<CompensatedSum> day_acc(days);
    std::vector<double> day_vals(days);
    auto day_s = [&](std::size_t d, long lag) {
      const auto li = static_cast<std::size_t>(lag + Ln);
      const double cnt = tab.count(d, li);
      return cnt > 0 ? tab.sum(d, li) / (cnt * norm) : 0.0;
    };
    for (long l = 1; l <= Lp; ++l) {
      acc.add(S.at(l - 1));
      R.at(l) = acc.value();
      for (std::size_t d = 0; d < days; ++d) {
        day_acc[d].add(day_s(d, l - 1));
        day_vals[d] = day_acc[d].value();
      }
      R_se.at(l) = batch_means_stderr(day_vals, weights);
    }
    acc = CompensatedSum();
    day_acc.assign(days, CompensatedSum());
    for (long l = 1; l <= Ln; ++l) {
      acc.add(S.at(-l));
      R.at(-l) = -acc.value();
      for (std::size_t d = 0; d < days; ++d) {
        day_acc[d].add(day_s(d, -l));
        day_vals[d] = -day_acc[d].value();
      }
      R_se.at(-l) = batch_means_stderr(day_vals, weights);
    }
  };
  cumulate(out.S, out.R, out.R_se, total, 1.0);

  for (std::size_t p = 0; p < 2; ++p) {
    for (auto* s : {&out.R_cond[p], &out.S_cond[p], &out.R_cond_se[p], &out.S_cond_se[p]}) init(*s);
    if (!cols.present[p]) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      for (auto* s : {&out.R_cond[p], &out.S_cond[p], &out.R_cond_se[p], &out.S_cond_se[p]})
        s->values.assign(span, nan);
      continue;
    }
    for (std::size_t l = 0; l < span; ++l)
      std::tie(out.S_cond[p].values[l], out.S_cond_se[p].values[l]) = cond_tab[p].pooled(l, cols.probs[p]);
    cumulate(out.S_cond[p], out.R_cond[p], out.R_cond_se[p], cond_tab[p], cols.probs[p]);
  }

  if (options.L_pair >= 0) {
    const std::size_t lags = static_cast<std::size_t>(options.L_pair) + 1;
    for (std::size_t p1 = 0; p1 < 2; ++p1)
      for (std::size_t p2 = 0; p2 < 2; ++p2) {
        DayTable tab(days, lags);
        for (std::size_t d = 0; d < days; ++d) {
          auto [b, e] = series.day_range(d);
          const std::size_t n = e - b;
          for (std::size_t l = 1; l < lags && l < n; ++l) {
            const std::size_t m = n - l;
            tab.sum(d, l) = detail::dot(cols.signed_ind_d[p1].data() + b, cols.type_returns[p2].data() + b + l, m);
            tab.count(d, l) = static_cast<double>(m);
          }
        }
        auto& sp = out.S_pair[p1][p2];
        auto& se = out.S_pair_se[p1][p2];
        sp.assign(lags, 0.0);
        se.assign(lags, 0.0);
        const double norm = cols.probs[p1] * cols.probs[p2];
        for (std::size_t l = 1; l < lags; ++l) std::tie(sp[l], se[l]) = tab.pooled(l, norm);
      }
  }

  // signature plot from per-day prefix sums of returns
  {
    const std::size_t lags = static_cast<std::size_t>(L_sig) + 1;
    DayTable tab(days, lags);
    std::vector<double> prefix;
    for (std::size_t d = 0; d < days; ++d) {
      auto [b, e] = series.day_range(d);
      const std::size_t n = e - b;
      prefix.assign(n + 1, 0.0);
      CompensatedSum run;
      for (std::size_t i = 0; i < n; ++i) {
        run.add(r[b + i]);
        prefix[i + 1] = run.value();
      }
      std::vector<double> diff(n + 1);
      for (std::size_t l = 1; l < lags && l <= n; ++l) {
        const std::size_t m = n - l + 1;
#pragma omp simd
        for (std::size_t t = 0; t < m; ++t) diff[t] = prefix[t + l] - prefix[t];
        tab.sum(d, l) = detail::sum_squares(diff.data(), m);
        tab.count(d, l) = static_cast<double>(m);
      }
    }
    out.D.assign(lags, 0.0);
    out.D_se.assign(lags, 0.0);
    for (std::size_t l = 1; l < lags; ++l) std::tie(out.D[l], out.D_se[l]) = tab.pooled(l, static_cast<double>(l));
  }
  {
    CompensatedSum sq;
    for (double v : r) sq.add(v * v);
    out.sigma_trade = std::sqrt(sq.value() / static_cast<double>(r.size()));
  }
  return out;
}

std::vector<double> sign_autocorrelation(const EventSeries& series, int L) {
  return estimate_correlations(series, L).C;
}

PairArray conditional_sign_correlation(const EventSeries& series, int L) {
  require_non_empty(series, "conditional correlation");
  require_types(series);
  return estimate_correlations(series, L).C_cond;
}

PairArray occurrence_correlation(const EventSeries& series, int L) {
  require_non_empty(series, "occurrence correlation");
  require_types(series);
  return estimate_correlations(series, L).Pi;
}

ResponseSet response(const EventSeries& series, int L_pos, int L_neg) {
  ResponseOptions o;
  o.L_pos = L_pos;
  o.L_neg = L_neg;
  o.L_sig = 1;
  return estimate_responses(series, o);
}

PairArray pair_response(const EventSeries& series, int L) {
  ResponseOptions o;
  o.L_pos = 0;
  o.L_neg = 0;
  o.L_pair = L;
  o.L_sig = 0;
  return estimate_responses(series, o).S_pair;
}

std::vector<double> signature_plot(const EventSeries& series, int L) {
  ResponseOptions o;
  o.L_pos = 0;
  o.L_neg = 0;
  o.L_sig = L;
  return estimate_responses(series, o).D;
}

double three_point_correlation(const EventSeries& series, EventType p, EventType p1, EventType p2, int k,
                               int l) {
  require_non_empty(series, "three-point correlation");
  require_types(series);
  if (k < 1 || l < 1 || k == l)
    throw Error(ErrorKind::InvalidInput, "stats", "three-point lags must be distinct and >= 1");
  const std::size_t far = static_cast<std::size_t>(std::max(k, l));
  require_lag_fits(series, static_cast<long>(far));
  const auto eps = series.signs();
  const auto types = series.types();
  std::int64_t sum = 0, count = 0;
  for (std::size_t d = 0; d < series.day_count(); ++d) {
    auto [b, e] = series.day_range(d);
    for (std::size_t t = b + far; t < e; ++t) {
      ++count;
      if (types[t] != p2 || types[t - k] != p || types[t - l] != p1) continue;
      sum += eps[t - k] * eps[t - l];
    }
  }
  const double norm = event_probability(series, p) * event_probability(series, p1) * event_probability(series, p2);
  return static_cast<double>(sum) / (static_cast<double>(count) * norm);
}

double factorization_residual(const EventSeries& series, const CorrelationSet& corr, std::span<const int> lags) {
  double worst = 0.0;
  for (int k : lags)
    for (int l : lags) {
      if (k == l) continue;
      for (auto p : kEventTypes)
        for (auto p1 : kEventTypes)
          for (auto p2 : kEventTypes) {
            const double exact = three_point_correlation(series, p, p1, p2, k, l);
            const double factorized = corr.conditional(p, p1, k - l);
            worst = std::max(worst, std::abs(exact - factorized));
          }
    }
  return worst;
}

std::vector<double> deviation_ratio(const ResponseSet& emp, const LagSeries& model_R, std::span<const long> lags) {
  if (!(emp.sigma_trade > 0.0))
    throw Error(ErrorKind::InvalidInput, "stats", "volatility per trade must be positive");
  std::vector<double> out;
  out.reserve(lags.size());
  for (long l : lags) out.push_back((emp.R.at(-l) - model_R.at(-l)) / emp.sigma_trade);
  return out;
}

}  // namespace propkit

namespace propkit {

CorrelationView CorrelationView::typed(const CorrelationSet& corr) {
  if (!corr.two_type())
    throw Error(ErrorKind::DegenerateType, "stats", "two-type correlations requested but one type never occurs");
  CorrelationView v;
  v.corr_ = &corr;
  v.probs_ = corr.probs;
  return v;
}

CorrelationView CorrelationView::pooled(const CorrelationSet& corr) {
  CorrelationView v;
  v.corr_ = &corr;
  v.single_ = true;
  v.probs_ = {0.0, 1.0};
  return v;
}

double CorrelationView::cc(EventType first, EventType second, long lag) const {
  if (!single_) return corr_->conditional(first, second, lag);
  if (first != EventType::C || second != EventType::C) return 0.0;
  return corr_->unconditional(lag);
}

double CorrelationView::pi(EventType first, EventType second, long lag) const {
  if (!single_) return corr_->occurrence(first, second, lag);
  return 0.0;
}

void CorrelationView::require(long lag, const char* module) const {
  if (lag > corr_->max_lag)
    throw Error(ErrorKind::Horizon, module,
                "correlations needed up to lag " + std::to_string(lag) + " but measured only to " +
                    std::to_string(corr_->max_lag));
}

}  // namespace propkit
