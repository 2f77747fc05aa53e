#include "propkit/noisefit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "numeric.hpp"
#include "propkit/error.hpp"

namespace propkit {

namespace {

struct Design {
  // model y_i = a * u_i + b * v_i; a = D_LF, b = D_HF
  std::vector<double> u, v, y;

  double sse(double a, double b) const {
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double e = y[i] - a * u[i] - b * v[i];
      s.add(e * e);
    }
    return s.value();
  }
};

double one_param(const std::vector<double>& x, const std::vector<double>& y) {
  detail::CompensatedSum xy, xx;
  for (std::size_t i = 0; i < y.size(); ++i) {
    xy.add(x[i] * y[i]);
    xx.add(x[i] * x[i]);
  }
  return xy.value() / xx.value();
}

}  // namespace

NoiseFitResult fit_noise(std::span<const double> D_emp, std::span<const double> D_base, std::span<const long> lags,
                         const NoiseFitOptions& options) {
  if (D_emp.size() != lags.size() || D_base.size() != lags.size())
    throw Error(ErrorKind::InvalidInput, "noisefit", "curves and lags must be aligned");
  std::set<long> distinct;
  for (long l : lags) {
    if (l < 1) throw Error(ErrorKind::InvalidInput, "noisefit", "lags must be >= 1");
    distinct.insert(l);
  }
  if (distinct.size() < 2)
    throw Error(ErrorKind::Underdetermined, "noisefit", "need at least two distinct lags to separate D_LF and D_HF");

  Design d;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const double l = static_cast<double>(lags[i]);
    const double diff = D_emp[i] - D_base[i];
    if (!std::isfinite(diff)) throw Error(ErrorKind::InvalidInput, "noisefit", "non-finite signature value");
    if (options.fit_on_ld) {
      d.u.push_back(l);
      d.v.push_back(1.0);
      d.y.push_back(l * diff);
    } else {
      d.u.push_back(1.0);
      d.v.push_back(1.0 / l);
      d.y.push_back(diff);
    }
  }

  // normal equations of the unconstrained problem
  detail::CompensatedSum suu, suv, svv, suy, svy;
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    suu.add(d.u[i] * d.u[i]);
    suv.add(d.u[i] * d.v[i]);
    svv.add(d.v[i] * d.v[i]);
    suy.add(d.u[i] * d.y[i]);
    svy.add(d.v[i] * d.y[i]);
  }
  const double det = suu.value() * svv.value() - suv.value() * suv.value();
  const double a = (svv.value() * suy.value() - suv.value() * svy.value()) / det;
  const double b = (suu.value() * svy.value() - suv.value() * suy.value()) / det;

  NoiseFitResult out;
  out.l_min = *distinct.begin();
  out.l_max = *distinct.rbegin();
  out.fit_on_ld = options.fit_on_ld;
  if (a >= 0.0 && b >= 0.0) {
    out.params = {a, b};
    out.sse = d.sse(a, b);
    return out;
  }
  // active set: best feasible point with one or both parameters at zero
  struct Candidate {
    double a, b;
    std::array<bool, 2> clamped;
  };
  std::vector<Candidate> cands;
  cands.push_back({std::max(0.0, one_param(d.u, d.y)), 0.0, {false, true}});
  cands.push_back({0.0, std::max(0.0, one_param(d.v, d.y)), {true, false}});
  double best = std::numeric_limits<double>::infinity();
  for (auto& c : cands) {
    if (c.a == 0.0) c.clamped[0] = true;
    if (c.b == 0.0) c.clamped[1] = true;
    const double s = d.sse(c.a, c.b);
    if (s < best) {
      best = s;
      out.params = {c.a, c.b};
      out.clamped = c.clamped;
    }
  }
  out.sse = best;
  return out;
}

}  // namespace propkit
