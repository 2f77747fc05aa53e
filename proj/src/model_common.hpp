#pragma once

#include <array>
#include <vector>

#include "propkit/stats.hpp"

namespace propkit::detail {

/// Dense copy of C_{p1,p2}(k) for k in [-K, K] so that inner loops avoid the
/// view's branching.
struct CcTable {
  long K = 0;
  std::array<std::array<std::vector<double>, kTypeCount>, kTypeCount> v;
  std::array<std::array<std::vector<double>, kTypeCount>, kTypeCount> pi;  // Pi for k in [0, K]
  std::array<double, kTypeCount> P{};
  std::vector<std::size_t> active;  // types with P > 0

  CcTable(const CorrelationView& view, long horizon, bool with_pi = false) : K(horizon) {
    for (auto t : kEventTypes) {
      P[index(t)] = view.prob(t);
      if (P[index(t)] > 0.0) active.push_back(index(t));
    }
    for (auto a : kEventTypes)
      for (auto b : kEventTypes) {
        auto& arr = v[index(a)][index(b)];
        arr.assign(static_cast<std::size_t>(2 * K + 1), 0.0);
        if (P[index(a)] == 0.0 || P[index(b)] == 0.0) continue;
        for (long k = -K; k <= K; ++k) arr[static_cast<std::size_t>(k + K)] = view.cc(a, b, k);
        if (with_pi) {
          auto& p = pi[index(a)][index(b)];
          p.assign(static_cast<std::size_t>(K) + 1, 0.0);
          for (long k = 0; k <= K; ++k) p[static_cast<std::size_t>(k)] = view.pi(a, b, k);
        }
      }
  }

  double operator()(std::size_t a, std::size_t b, long k) const { return v[a][b][static_cast<std::size_t>(k + K)]; }
  /// Pointer such that ptr[k] = C_{a,b}(k) for k in [-K, K].
  const double* row(std::size_t a, std::size_t b) const { return v[a][b].data() + K; }
  double occ(std::size_t a, std::size_t b, long k) const { return pi[a][b][static_cast<std::size_t>(k)]; }
};

}  // namespace propkit::detail
