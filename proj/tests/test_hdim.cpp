#include <random>

#include "doctest.h"
#include "propkit/dar.hpp"
#include "propkit/hdim.hpp"
#include "propkit/stats.hpp"
#include "propkit/synth.hpp"
#include "propkit/tim.hpp"
#include "support.hpp"

using namespace propkit;
using namespace testsupport;

namespace {

constexpr auto NC = EventType::NC;
constexpr auto C = EventType::C;

ResponseOptions resp_options(int L_pos, int L_neg, int L_sig, int L_pair = -1) {
  ResponseOptions o;
  o.L_pos = L_pos;
  o.L_neg = L_neg;
  o.L_sig = L_sig;
  o.L_pair = L_pair;
  return o;
}

const CorrelationSet& measured_corr() {
  static const CorrelationSet c = [] {
    GeneratorSpec spec = preset("small-tick");
    spec.n = 200'000;
    spec.seed = 51;
    return estimate_correlations(generate(spec), 300);
  }();
  return c;
}

InfluenceKernel test_influence(int L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  auto k = InfluenceKernel::zero(L);
  k.G1[index(C)] = 0.9;
  for (int n = 1; n <= L; ++n) {
    k.kappa[index(NC)][index(C)][n] = 0.15 * std::pow(n, -0.6) + u(rng);
    k.kappa[index(C)][index(C)][n] = -0.3 * std::pow(n, -0.8) + 0.02 + u(rng);
  }
  return k;
}

/// Factorized pair response S_{p1,C}(l) and equal-time S_C(0).
double factorized_S(const InfluenceKernel& k, const CorrelationSet& corr, EventType p1, long l) {
  double acc = k.G1[index(C)] * corr.conditional(p1, C, l);
  for (long n = 1; n <= k.L; ++n)
    for (auto p : kEventTypes) acc += corr.probs[index(p)] * k.k(p, C, n) * corr.conditional(p, p1, n - l);
  return acc;
}

double factorized_S0(const InfluenceKernel& k, const CorrelationSet& corr) {
  double acc = k.G1[index(C)];
  for (long n = 1; n <= k.L; ++n)
    for (auto p : kEventTypes) acc += corr.probs[index(p)] * k.k(p, C, n) * corr.conditional(p, C, n);
  return acc;
}

ResponseSet pair_responses(const InfluenceKernel& k, const CorrelationSet& corr, int n_eq) {
  ResponseSet r;
  r.L_pos = n_eq;
  for (std::size_t p = 0; p < 2; ++p) {
    r.S_cond[p] = LagSeries{0, std::vector<double>(static_cast<std::size_t>(n_eq) + 1, 0.0)};
    for (std::size_t q = 0; q < 2; ++q) r.S_pair[p][q].assign(static_cast<std::size_t>(n_eq) + 1, 0.0);
  }
  r.S_cond[index(C)].at(0) = factorized_S0(k, corr);
  for (auto p1 : kEventTypes)
    for (long l = 1; l <= n_eq; ++l) r.S_pair[index(p1)][index(C)][l] = factorized_S(k, corr, p1, l);
  return r;
}

/// Two-type correlations with independent types (Pi = 0) and the given conditional family.
CorrelationSet independent_types(const CorrelationSet& base) {
  CorrelationSet c = base;
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t l = 1; l < c.Pi[a][b].size(); ++l) c.Pi[a][b][l] = 0.0;
  return c;
}

CorrelationSet iid_corr(int L, double pc) {
  CorrelationSet c;
  c.max_lag = L;
  c.C.assign(static_cast<std::size_t>(L) + 1, 0.0);
  c.C[0] = 1.0;
  c.probs = {1.0 - pc, pc};
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      c.C_cond[a][b].assign(c.C.size(), 0.0);
      c.Pi[a][b].assign(c.C.size(), 0.0);
      c.C_cond[a][b][0] = a == b ? 1.0 / c.probs[a] : 0.0;
      c.Pi[a][b][0] = c.C_cond[a][b][0] - 1.0;
    }
  return c;
}

struct HdimMc {
  GeneratorSpec spec;
  EventSeries series;
  CorrelationSet corr;
  ResponseSet resp;
};

HdimMc make_hdim2_mc(NoiseParams noise, std::uint64_t seed) {
  HdimMc m;
  {
    m.spec.signs = power_law_dar(0.5, 1000, 0.9);
    m.spec.types.kind = TypeProcess::Kind::Iid;
    m.spec.types.p_c = 0.4;
    auto k = InfluenceKernel::zero(50);
    k.G1[index(C)] = 1.0;
    for (int n = 1; n <= 50; ++n) {
      k.kappa[index(NC)][index(C)][n] = 0.15 * std::pow(n, -0.6);
      k.kappa[index(C)][index(C)][n] = -0.3 * std::pow(n, -0.8) + 0.02;
    }
    m.spec.impact = k;
    m.spec.noise = noise;
    m.spec.n = 1'000'000;
    m.spec.seed = seed;
    m.series = generate(m.spec);
    m.corr = estimate_correlations(m.series, 200);
    m.resp = estimate_responses(m.series, resp_options(100, 100, 100, 50));
  }
  return m;
}

const HdimMc& hdim2_mc() {
  static const HdimMc d = make_hdim2_mc({0.3, 0.2}, 3101);
  return d;
}

const HdimMc& hdim2_mc_quiet() {
  static const HdimMc d = make_hdim2_mc({0.0, 0.0}, 3105);
  return d;
}

/// Noise missing from C-only generation relative to per-event noise, iid types:
/// LF on the NC share, HF when the window holds no C event.
double c_only_noise_shortfall(const NoiseParams& n, double pc, long l) {
  return (1.0 - pc) * n.D_LF + n.D_HF * std::pow(1.0 - pc, static_cast<double>(l)) / static_cast<double>(l);
}

}  // namespace

TEST_CASE("factorized calibration inverts the forward pair responses") {
  const auto& corr = measured_corr();
  for (int L : {1, 10, 50, 100}) {
    CAPTURE(L);
    const auto truth = test_influence(L, static_cast<std::uint64_t>(L));
    const auto k = calibrate_hdim2(corr, pair_responses(truth, corr, L), L);
    CHECK(std::abs(k.G1[index(C)] - truth.G1[index(C)]) <= 1e-10);
    for (auto p : kEventTypes) CHECK(max_abs_diff(k.kappa[index(p)][index(C)], truth.kappa[index(p)][index(C)]) <= 1e-10);
    CHECK_FALSE(k.pooled);
    CHECK_FALSE(k.unconstrained);
  }
  // more equations than unknowns
  const auto truth = test_influence(20, 3);
  HdimOptions o;
  o.n_equations = 60;
  const auto k = calibrate_hdim2(corr, pair_responses(truth, corr, 60), 20, o);
  CHECK(max_abs_diff(k.kappa[index(C)][index(C)], truth.kappa[index(C)][index(C)]) <= 1e-10);
}

TEST_CASE("calibrated kernels never act on NC events") {
  const auto& d = hdim2_mc();
  const auto k = calibrate_hdim2(d.corr, d.resp, 50);
  CHECK(k.G1[index(NC)] == 0.0);
  for (auto p : kEventTypes)
    for (int n = 0; n <= 50; ++n) REQUIRE(k.kappa[index(p)][index(NC)][n] == 0.0);
  auto bad = k;
  bad.kappa[index(C)][index(NC)][3] = 0.1;
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::Validation);
  bad = k;
  bad.G1[index(NC)] = 0.2;
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::Validation);
  bad.unconstrained = true;
  CHECK_FALSE(kind_of([&] { bad.validate(); }));
}

TEST_CASE("zero influence data recovers the immediate impact") {
  GeneratorSpec spec;
  spec.signs = DarSpec{{1.0}, 0.5};
  spec.types.kind = TypeProcess::Kind::Iid;
  spec.types.p_c = 0.4;
  auto zero = InfluenceKernel::zero(20);
  const double g = 0.8;
  zero.G1[index(C)] = g;
  spec.impact = zero;
  spec.noise = {0.2, 0.1};
  spec.n = 1'000'000;
  spec.seed = 3102;
  const auto s = generate(spec);
  const auto corr = estimate_correlations(s, 40);
  const auto resp = estimate_responses(s, resp_options(20, 0, 1, 20));
  const auto k = calibrate_hdim2(corr, resp, 20);
  CHECK(std::abs(k.G1[index(C)] - g) <= 3.0 * resp.S_cond_se[index(C)].at(0));
  for (auto p : kEventTypes)
    for (int n = 1; n <= 20; ++n) {
      CAPTURE(n);
      CHECK(std::abs(k.k(p, C, n)) <= 3.0 * resp.S_pair_se[index(p)][index(C)][n]);
    }
}

TEST_CASE("HDIM2 fit of TIM2 data recovers the TIM kernel") {
  GeneratorSpec spec = preset("small-tick");
  spec.n = 1'000'000;
  spec.seed = 3103;
  const auto s = generate(spec);
  const auto corr = estimate_correlations(s, 200);
  const auto resp = estimate_responses(s, resp_options(100, 0, 1, 100));
  const auto k = calibrate_hdim2(corr, resp, 100);
  const auto& tim = std::get<TimKernel>(spec.impact);
  std::vector<double> est, tru;
  for (auto p : kEventTypes)
    for (long n = 1; n <= 20; ++n) {
      est.push_back(k.k(p, C, n));
      tru.push_back(tim.dg(p, n));
    }
  CHECK(rel_rms(est, tru) <= 0.10);
  CHECK(k.G1[index(C)] == doctest::Approx(tim.dg(C, 0)).epsilon(0.05));
}

TEST_CASE("single-type calibration equals the TIM1 calibration") {
  GeneratorSpec spec;
  spec.signs = power_law_dar(0.5, 100, 0.9);
  spec.types.kind = TypeProcess::Kind::Classified;
  spec.impact = TimKernel::tim1({1.0, -0.2, -0.1, -0.05});
  spec.noise = {0.1, 0.1};
  spec.n = 200'000;
  spec.seed = 3104;
  const auto s = generate(spec);
  const auto corr = estimate_correlations(s, 40);
  const auto resp = estimate_responses(s, resp_options(41, 0, 1));
  const auto h = calibrate_hdim1(corr, resp, 30);
  const auto t = calibrate_tim1(corr, resp, 30);
  CHECK(h.pooled);
  CHECK(h.G1[index(C)] == doctest::Approx(t.dg(C, 0)).epsilon(1e-10));
  for (int n = 1; n <= 30; ++n) CHECK(h.k(C, C, n) == doctest::Approx(t.dg(C, n)).epsilon(1e-9).scale(1e-10));
}

TEST_CASE("zero influence on one type reduces to permanent impact") {
  const auto& corr = measured_corr();
  auto k = InfluenceKernel::zero(10);
  k.pooled = true;
  k.G1[index(C)] = 0.6;
  const auto h = predict_response_hdim2(k, corr, 100, 100);
  const auto t = predict_response_tim(TimKernel::tim1({0.6}), corr, 100, 100);
  CHECK(max_abs_diff(h.R.values, t.R.values) <= 1e-12);
  CHECK(max_abs_diff(h.S.values, t.S.values) <= 1e-12);
}

TEST_CASE("embedded TIM kernels reproduce the TIM predictions") {
  const auto& corr = measured_corr();
  const auto k2 = std::get<TimKernel>(preset("small-tick").impact);
  const auto e2 = embed_tim_as_hdim(k2);
  CHECK(e2.unconstrained);
  CHECK_FALSE(e2.pooled);
  for (auto p : kEventTypes)
    for (auto q : kEventTypes)
      for (int n = 1; n <= k2.L; ++n) REQUIRE(e2.k(p, q, n) == k2.dg(p, n));
  const auto a = predict_response_tim(k2, corr, 100, 100);
  const auto b = predict_response_hdim2(e2, corr, 100, 100);
  CHECK(max_abs_diff(a.R.values, b.R.values) <= 1e-10);
  for (auto p : kEventTypes) CHECK(max_abs_diff(a.R_cond[index(p)].values, b.R_cond[index(p)].values) <= 1e-10);

  const auto k1 = TimKernel::tim1({1.0, -0.3, -0.1, 0.05});
  const auto e1 = embed_tim_as_hdim(k1);
  CHECK(e1.pooled);
  CHECK(max_abs_diff(predict_response_tim(k1, corr, 50, 50).R.values,
                     predict_response_hdim2(e1, corr, 50, 50).R.values) <= 1e-10);
}

TEST_CASE("zero influence diffusion under iid flow") {
  const double g = 0.7, pc = 0.3;
  auto k = InfluenceKernel::zero(5);
  k.G1[index(C)] = g;
  const NoiseParams noise{0.4, 0.9};
  const auto lags = lag_range(1, 50);
  const auto D = signature_hdim2(k, iid_corr(100, pc), noise, lags);
  for (std::size_t i = 0; i < lags.size(); ++i)
    CHECK(D[i] == doctest::Approx(0.4 + 0.9 / static_cast<double>(lags[i]) + g * g * pc).epsilon(1e-12));
}

TEST_CASE("embedded constant TIM2 diffusion matches the shortcut for independent types") {
  const auto corr = independent_types(measured_corr());
  const NoiseParams noise{0.3, 0.5};
  const auto lags = lag_range(1, 150);
  for (const char* name : {"large-tick", "iid-null"}) {
    const auto spec = preset(name);
    auto k = std::get<TimKernel>(spec.impact);
    if (k.variant == TimVariant::TIM1) k = TimKernel::tim2({0.4}, {1.1});
    REQUIRE(k.is_constant());
    const auto h = signature_hdim2(embed_tim_as_hdim(k), corr, noise, lags);
    const auto s = signature_tim2_constant(k, corr, noise, lags);
    CHECK(max_abs_diff(h, s) <= 1e-8);
  }
}

TEST_CASE("HDIM2 Monte Carlo: responses and diffusion") {
  const auto& d = hdim2_mc_quiet();
  HdimOptions o;
  o.series = &d.series;
  const auto fit = calibrate_hdim2(d.corr, d.resp, 50, o);
  CHECK(std::isfinite(fit.factorization_residual));
  MESSAGE("factorization residual " << fit.factorization_residual);
  const auto& truth = std::get<InfluenceKernel>(d.spec.impact);
  const auto pred = predict_response_hdim2(truth, d.corr, 100, 100);
  for (long l : {1L, 10L, 100L}) {
    CAPTURE(l);
    CHECK(std::abs(pred.R_cond[index(C)].at(-l) - d.resp.R_cond[index(C)].at(-l)) <=
          3.0 * d.resp.R_cond_se[index(C)].at(-l));
  }
  const std::vector<long> lags{1, 10, 100};
  const auto D = signature_hdim2(truth, d.corr, d.spec.noise, lags);
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const double gap = std::abs(D[i] - d.resp.D[lags[i]]);
    MESSAGE("l = " << lags[i] << ": relative factorization bias " << gap / d.resp.D[lags[i]]);
    CHECK(gap <= 3.0 * d.resp.D_se[lags[i]]);
  }
}

TEST_CASE("HDIM2 Monte Carlo with noise on C events only") {
  const auto& d = hdim2_mc();
  const auto& truth = std::get<InfluenceKernel>(d.spec.impact);
  const auto pred = predict_response_hdim2(truth, d.corr, 100, 100);
  for (long l : {1L, 10L, 100L}) {
    CAPTURE(l);
    CHECK(std::abs(pred.R_cond[index(C)].at(-l) - d.resp.R_cond[index(C)].at(-l)) <=
          3.0 * d.resp.R_cond_se[index(C)].at(-l));
  }
  const std::vector<long> lags{1, 10, 100};
  const auto D = signature_hdim2(truth, d.corr, d.spec.noise, lags);
  const double pc = d.corr.probs[index(C)];
  for (std::size_t i = 0; i < lags.size(); ++i) {
    CAPTURE(lags[i]);
    const double expected = D[i] - c_only_noise_shortfall(d.spec.noise, pc, lags[i]);
    CHECK(std::abs(expected - d.resp.D[lags[i]]) <= 3.0 * d.resp.D_se[lags[i]]);
  }
}

TEST_CASE("HDIM errors") {
  const auto& corr = measured_corr();
  const auto k = test_influence(20, 1);
  CHECK(kind_of([&] { predict_response_hdim2(k, corr, 290, 10); }) == ErrorKind::Horizon);
  CHECK(kind_of([&] { signature_hdim2(k, corr, {}, std::vector<long>{300}); }) == ErrorKind::Horizon);
  CHECK(kind_of([&] { signature_hdim2(k, corr, {}, std::vector<long>{0}); }) == ErrorKind::InvalidInput);
  HdimOptions o;
  o.n_equations = 10;
  CHECK(kind_of([&] { calibrate_hdim2(corr, pair_responses(k, corr, 20), 20, o); }) == ErrorKind::Underdetermined);
  CHECK(kind_of([&] { calibrate_hdim2(corr, pair_responses(k, corr, 10), 20); }) == ErrorKind::InvalidInput);

  CorrelationSet single;
  single.max_lag = 30;
  single.C.assign(31, 0.0);
  single.C[0] = 1.0;
  single.probs = {0.0, 1.0};
  CHECK(kind_of([&] { calibrate_hdim2(single, pair_responses(k, corr, 20), 20); }) == ErrorKind::DegenerateType);

  // identical columns for both past types: the system is singular
  auto flat = iid_corr(30, 0.5);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t l = 1; l <= 30; ++l) flat.C_cond[a][b][l] = 1.0;
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) flat.C_cond[a][b][0] = 1.0;
  CHECK(kind_of([&] { calibrate_hdim2(flat, pair_responses(k, flat, 20), 20); }) == ErrorKind::Conditioning);
}
