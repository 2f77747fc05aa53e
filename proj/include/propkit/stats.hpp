#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "propkit/events.hpp"

namespace propkit {

/// Values over a contiguous range of integer lags [min_lag, min_lag + size).
struct LagSeries {
  long min_lag = 0;
  std::vector<double> values;

  long max_lag() const { return min_lag + static_cast<long>(values.size()) - 1; }
  bool contains(long lag) const { return lag >= min_lag && lag <= max_lag(); }
  double at(long lag) const;
  double& at(long lag);
};

/// [first-in-time type][later type] -> array over lags 0..L.
using PairArray = std::array<std::array<std::vector<double>, kTypeCount>, kTypeCount>;

/// Two-point order-flow statistics.
///
/// `C_cond` and `Pi` are empty when one event type never occurs. Index 0 of
/// `C_cond` holds the equal-time convention delta(p1,p2) / P(p1), and index 0
/// of `Pi` the exact value delta(p1,p2) / P(p1) - 1.
struct CorrelationSet {
  std::string instrument;
  int max_lag = 0;
  std::vector<double> C;
  std::vector<double> C_se;
  PairArray C_cond;
  PairArray C_cond_se;
  PairArray Pi;
  std::array<double, kTypeCount> probs{};
  std::size_t n_events = 0;

  bool two_type() const { return !C_cond[0][0].empty(); }
  /// C at any signed lag, using C(-l) = C(l).
  double unconditional(long lag) const;
  /// C_{first,second} at any signed lag, using C_{a,b}(-l) = C_{b,a}(l).
  double conditional(EventType first, EventType second, long lag) const;
  double occurrence(EventType first, EventType second, long lag) const;
};

/// Price response statistics. Conditional arrays are indexed by the type of
/// the event at time t (the reference trade).
struct ResponseSet {
  std::string instrument;
  int L_pos = 0;
  int L_neg = 0;
  LagSeries R, S, R_se, S_se;
  std::array<LagSeries, kTypeCount> R_cond, S_cond, R_cond_se, S_cond_se;
  /// S_{p1,p2}(l) for l in 0..L_pair; index 0 unused (zero). Empty unless requested.
  PairArray S_pair;
  PairArray S_pair_se;
  /// Signature plot D(l) for l in 0..L_sig; index 0 unused (zero).
  std::vector<double> D;
  std::vector<double> D_se;
  double sigma_trade = 0.0;
  std::array<double, kTypeCount> probs{};
  std::size_t n_events = 0;

  bool has_pair() const { return !S_pair[0][0].empty(); }
  bool has_conditional() const { return !S_cond[0].values.empty(); }
};

struct ResponseOptions {
  int L_pos = 1000;
  int L_neg = 1000;
  /// Largest lag of the pair-response matrix; negative disables it.
  int L_pair = -1;
  /// Largest lag of the signature plot; negative uses L_pos.
  int L_sig = -1;
};

/// C(0..L), C_cond, Pi with day-batch standard errors.
CorrelationSet estimate_correlations(const EventSeries& series, int L);
ResponseSet estimate_responses(const EventSeries& series, const ResponseOptions& options);

std::vector<double> sign_autocorrelation(const EventSeries& series, int L);
/// Entries for lags 1..L (index 0 carries the equal-time convention).
PairArray conditional_sign_correlation(const EventSeries& series, int L);
PairArray occurrence_correlation(const EventSeries& series, int L);
ResponseSet response(const EventSeries& series, int L_pos, int L_neg);
PairArray pair_response(const EventSeries& series, int L);
/// D(0..L) with D(0) = 0.
std::vector<double> signature_plot(const EventSeries& series, int L);

/// C_{p,p1,p2}(k, l) = E[a^p_{t-k} a^{p1}_{t-l} I(p_t = p2)] / (P P1 P2), where
/// a^p_t = eps_t I(p_t = p). Diagnostic only.
double three_point_correlation(const EventSeries& series, EventType p, EventType p1, EventType p2, int k,
                               int l);

/// Worst absolute gap between the three-point correlation and its Gaussian
/// factorization C_{p,p1}(k - l), over all type triples and the given lag pairs.
double factorization_residual(const EventSeries& series, const CorrelationSet& corr,
                              std::span<const int> lags);

/// (R_emp(-l) - R_model(-l)) / sigma_trade for each l.
std::vector<double> deviation_ratio(const ResponseSet& emp, const LagSeries& model_R,
                                    std::span<const long> lags);

/// Batch-means standard error over day estimates `values` with weights `weights`.
double batch_means_stderr(std::span<const double> values, std::span<const double> weights);

}  // namespace propkit

namespace propkit {

/// Read-only adapter giving the model code one interface over correlations.
///
/// `typed` exposes the measured two-type family. `pooled` treats every event
/// as type C (P(NC) = 0, C_{C,C} = C), which turns the two-type formulas into
/// their single-type counterparts.
class CorrelationView {
 public:
  static CorrelationView typed(const CorrelationSet& corr);
  static CorrelationView pooled(const CorrelationSet& corr);

  bool single() const { return single_; }
  int max_lag() const { return corr_->max_lag; }
  double prob(EventType t) const { return probs_[index(t)]; }
  /// C_{first,second}(lag) for any signed lag; lag 0 gives delta / P(first).
  double cc(EventType first, EventType second, long lag) const;
  /// Pi_{first,second}(lag), first-in-time type first.
  double pi(EventType first, EventType second, long lag) const;
  /// Throws Horizon naming `module` unless correlations reach `lag`.
  void require(long lag, const char* module) const;

 private:
  const CorrelationSet* corr_ = nullptr;
  bool single_ = false;
  std::array<double, kTypeCount> probs_{};
};

}  // namespace propkit
