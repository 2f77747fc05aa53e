#pragma once

// Brute-force estimators and small builders shared by the unit tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "propkit/error.hpp"
#include "propkit/events.hpp"
#include "propkit/synth.hpp"

namespace testsupport {

using namespace propkit;

/// Series from signs and returns, one day per `per_day` events, mids from 100.
inline EventSeries make_series(const std::vector<int>& signs, const std::vector<double>& returns,
                               std::size_t per_day = 0, const std::vector<EventType>* types = nullptr) {
  const std::size_t n = signs.size();
  if (per_day == 0) per_day = n;
  std::vector<MarketEvent> ev(n);
  std::vector<std::size_t> starts;
  double mid = 100.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % per_day == 0) starts.push_back(i);
    const std::int64_t day = 15000 + static_cast<std::int64_t>(i / per_day);
    ev[i].timestamp_ns = day * kNanosPerDay + 36'000'000'000'000LL + static_cast<std::int64_t>(i % per_day) * 1000;
    ev[i].sign = signs[i];
    ev[i].mid_before = mid;
    ev[i].mid_after = returns[i] == 0.0 ? mid : mid + returns[i];
    mid = ev[i].mid_after;
  }
  if (types != nullptr) return EventSeries::labeled("T", ev, *types, starts);
  return EventSeries::classified("T", ev, starts);
}

/// Visits every same-day pair (t, t + lag) with both inside the series.
template <class F>
void for_pairs(const EventSeries& s, long lag, F&& f) {
  for (std::size_t d = 0; d < s.day_count(); ++d) {
    auto [b, e] = s.day_range(d);
    for (std::size_t t = b; t < e; ++t) {
      const long u = static_cast<long>(t) + lag;
      if (u < static_cast<long>(b) || u >= static_cast<long>(e)) continue;
      f(t, static_cast<std::size_t>(u));
    }
  }
}

inline double frac(const EventSeries& s, EventType p) {
  return static_cast<double>(s.count(p)) / static_cast<double>(s.size());
}

inline double is(const EventSeries& s, std::size_t t, EventType p) { return s.types()[t] == p ? 1.0 : 0.0; }

inline double brute_C(const EventSeries& s, long lag) {
  double num = 0, cnt = 0;
  for_pairs(s, lag, [&](std::size_t t, std::size_t u) {
    num += s.signs()[t] * s.signs()[u];
    cnt += 1;
  });
  return num / cnt;
}

inline double brute_Ccond(const EventSeries& s, EventType a, EventType b, long lag) {
  double num = 0, cnt = 0;
  for_pairs(s, lag, [&](std::size_t t, std::size_t u) {
    num += s.signs()[t] * is(s, t, a) * s.signs()[u] * is(s, u, b);
    cnt += 1;
  });
  return num / cnt / (frac(s, a) * frac(s, b));
}

inline double brute_Pi(const EventSeries& s, EventType a, EventType b, long lag) {
  double num = 0, cnt = 0;
  for_pairs(s, lag, [&](std::size_t t, std::size_t u) {
    num += is(s, t, a) * is(s, u, b);
    cnt += 1;
  });
  return num / cnt / (frac(s, a) * frac(s, b)) - 1.0;
}

/// S(lag) = mean eps_t r_{t+lag}; conditional on the reference type when `given` is set.
inline double brute_S(const EventSeries& s, long lag, const EventType* given = nullptr) {
  double num = 0, cnt = 0;
  for_pairs(s, lag, [&](std::size_t t, std::size_t u) {
    const double w = given ? is(s, t, *given) : 1.0;
    num += w * s.signs()[t] * s.returns()[u];
    cnt += 1;
  });
  return num / cnt / (given ? frac(s, *given) : 1.0);
}

inline double brute_Spair(const EventSeries& s, EventType a, EventType b, long lag) {
  double num = 0, cnt = 0;
  for_pairs(s, lag, [&](std::size_t t, std::size_t u) {
    num += is(s, t, a) * s.signs()[t] * is(s, u, b) * s.returns()[u];
    cnt += 1;
  });
  return num / cnt / (frac(s, a) * frac(s, b));
}

/// (1/l) mean (m_{t+l} - m_t)^2 over same-day windows, from the mids directly.
inline double brute_D(const EventSeries& s, long lag) {
  double num = 0, cnt = 0;
  for (std::size_t d = 0; d < s.day_count(); ++d) {
    auto [b, e] = s.day_range(d);
    for (std::size_t t = b; t + static_cast<std::size_t>(lag) <= e; ++t) {
      const double dm = s.mid_after()[t + static_cast<std::size_t>(lag) - 1] - s.mid_before()[t];
      num += dm * dm;
      cnt += 1;
    }
  }
  return num / cnt / static_cast<double>(lag);
}

/// Kind of the library error raised by f, or nullopt when nothing is thrown.
inline std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline double rel_rms(const std::vector<double>& est, const std::vector<double>& truth) {
  double e = 0.0, t = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    e += (est[i] - truth[i]) * (est[i] - truth[i]);
    t += truth[i] * truth[i];
  }
  return std::sqrt(e / t);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testsupport
