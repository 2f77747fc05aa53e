#include <numeric>

#include "doctest.h"
#include "propkit/hdim.hpp"
#include "propkit/stats.hpp"
#include "propkit/synth.hpp"
#include "support.hpp"

using namespace propkit;
using testsupport::kind_of;

namespace {

constexpr auto NC = EventType::NC;
constexpr auto C = EventType::C;

GeneratorSpec iid_spec(std::size_t n, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.signs = DarSpec{{1.0}, 0.5};
  spec.types.kind = TypeProcess::Kind::Iid;
  spec.types.p_c = 0.5;
  spec.impact = TimKernel::tim1({1.0});
  spec.n = n;
  spec.seed = seed;
  return spec;
}

ResponseOptions sig_only(int L_sig) {
  ResponseOptions o;
  o.L_pos = 1;
  o.L_neg = 0;
  o.L_sig = L_sig;
  return o;
}

double fraction_c(const EventSeries& s) { return static_cast<double>(s.count(C)) / static_cast<double>(s.size()); }

}  // namespace

TEST_CASE("generation is reproducible from the seed") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    auto spec = preset(name);
    spec.n = 20'000;
    spec.seed = 5;
    const auto a = generate(spec);
    CHECK(a == generate(spec));
    spec.seed = 6;
    CHECK_FALSE(a == generate(spec));
  }
}

TEST_CASE("unit impulse kernel makes the mid a random walk of the signs") {
  const auto s = generate(iid_spec(200'000, 21));
  const auto r = s.returns();
  const auto e = s.signs();
  for (std::size_t i = 0; i < s.size(); ++i) REQUIRE(r[i] == static_cast<double>(e[i]));
  CHECK(s.mid_before()[0] == 100.0);
  CHECK(s.mid_after()[s.size() - 1] - 100.0 ==
        doctest::Approx(std::accumulate(r.begin(), r.end(), 0.0)).epsilon(1e-12));
  const auto resp = estimate_responses(s, sig_only(50));
  for (long l : {1L, 5L, 50L}) {
    CAPTURE(l);
    CHECK(std::abs(resp.D[l] - 1.0) <= 3.0 * resp.D_se[l]);
  }
}

TEST_CASE("pure noise has the two-scale signature") {
  auto spec = iid_spec(1'000'000, 22);
  spec.impact = TimKernel::tim1({0.0});
  spec.noise = {0.3, 0.2};
  const auto resp = estimate_responses(generate(spec), sig_only(100));
  for (long l : {1L, 2L, 10L, 100L}) {
    CAPTURE(l);
    const double expected = 0.3 + 0.2 / static_cast<double>(l);
    CHECK(std::abs(resp.D[l] - expected) <= 3.0 * resp.D_se[l]);
  }
}

TEST_CASE("HDIM generation leaves NC events at zero return") {
  GeneratorSpec spec = iid_spec(100'000, 23);
  spec.signs = power_law_dar(0.5, 50, 0.9);
  spec.types.p_c = 0.3;
  auto k = InfluenceKernel::zero(10);
  k.G1[index(C)] = 0.8;
  spec.impact = k;
  spec.noise = {0.2, 0.1};
  const auto s = generate(spec);
  REQUIRE(s.is_labeled());
  std::size_t c = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.types()[i] == NC) {
      REQUIRE(s.returns()[i] == 0.0);
      REQUIRE(s.mid_after()[i] == s.mid_before()[i]);
    } else {
      ++c;
    }
  }
  CHECK(c == s.count(C));

  // without noise C returns are the immediate impact and the tape classification recovers the labels
  spec.noise = {0.0, 0.0};
  const auto q = generate(spec);
  std::vector<MarketEvent> ev;
  for (std::size_t i = 0; i < q.size(); ++i) ev.push_back(q.event(i));
  const auto cls = EventSeries::classified("x", ev, q.day_starts());
  for (std::size_t i = 0; i < q.size(); ++i) {
    REQUIRE(cls.types()[i] == q.types()[i]);
    if (q.types()[i] == C) REQUIRE(q.returns()[i] == doctest::Approx(0.8 * q.signs()[i]).epsilon(1e-12));
  }
}

TEST_CASE("embedded TIM2 kernel generates the TIM2 path") {
  auto spec = preset("small-tick");
  spec.n = 50'000;
  spec.seed = 24;
  const auto tim = generate_tim(spec);
  auto emb = spec;
  emb.impact = embed_tim_as_hdim(std::get<TimKernel>(spec.impact));
  const auto hdim = generate_hdim2(emb);
  REQUIRE(tim.size() == hdim.size());
  CHECK(std::equal(tim.signs().begin(), tim.signs().end(), hdim.signs().begin()));
  CHECK(std::equal(tim.types().begin(), tim.types().end(), hdim.types().begin()));
  double worst = 0.0;
  for (std::size_t i = 0; i < tim.size(); ++i) worst = std::max(worst, std::abs(tim.returns()[i] - hdim.returns()[i]));
  CHECK(worst <= 1e-12);
}

TEST_CASE("negative C-C influence damps repeated same-sign C impact") {
  GeneratorSpec spec = iid_spec(100'000, 25);
  auto k = InfluenceKernel::zero(1);
  k.G1[index(C)] = 1.0;
  k.kappa[index(C)][index(C)][1] = -0.5;
  spec.impact = k;
  const auto s = generate(spec);
  std::size_t same = 0, opposite = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s.types()[i] != C || s.types()[i - 1] != C) continue;
    const double a = std::abs(s.returns()[i]);
    if (s.signs()[i] == s.signs()[i - 1]) {
      ++same;
      REQUIRE(a == doctest::Approx(0.5));
    } else {
      ++opposite;
      REQUIRE(a == doctest::Approx(1.5));
    }
  }
  CHECK(same > 1000);
  CHECK(opposite > 1000);
}

TEST_CASE("preset type frequencies and large-tick reversals") {
  auto lt = preset("large-tick");
  CHECK(lt.types.stationary_pc() == doctest::Approx(0.08).epsilon(1e-14));
  lt.n = 1'000'000;
  lt.seed = 26;
  const auto a = generate(lt);
  // types are Markov with negative lag-1 correlation, so the binomial se is an upper bound
  CHECK(std::abs(fraction_c(a) - 0.08) <= 3.0 * std::sqrt(0.08 * 0.92 / 1e6));
  const auto corr = estimate_correlations(a, 5);
  CHECK(corr.C_cond[index(C)][index(C)][1] < 0.0);

  auto st = preset("small-tick");
  CHECK(st.types.stationary_pc() == 0.7);
  st.n = 200'000;
  st.seed = 27;
  CHECK(std::abs(fraction_c(generate(st)) - 0.7) <= 3.0 * std::sqrt(0.7 * 0.3 / 2e5));

  CHECK(kind_of([] { preset("mid-tick"); }) == ErrorKind::InvalidInput);
}

TEST_CASE("certain reversal after C flips every following sign") {
  auto spec = iid_spec(50'000, 28);
  spec.signs = power_law_dar(0.5, 100, 0.95);
  spec.types.reversal_after_c = 1.0;
  const auto s = generate(spec);
  std::size_t n = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s.types()[i - 1] == C) {
      REQUIRE(s.signs()[i] == -s.signs()[i - 1]);
      ++n;
    }
  CHECK(n > 20'000);
}

TEST_CASE("Markov types reach the stationary frequency") {
  GeneratorSpec spec = iid_spec(400'000, 29);
  spec.types.kind = TypeProcess::Kind::Markov;
  spec.types.transition = {{{0.9, 0.1}, {0.3, 0.7}}};
  CHECK(spec.types.stationary_pc() == doctest::Approx(0.25));
  const auto s = generate(spec);
  // lag-1 type correlation 0.6 inflates the variance by (1 + 0.6) / (1 - 0.6)
  CHECK(std::abs(fraction_c(s) - 0.25) <= 3.0 * std::sqrt(0.25 * 0.75 * 4.0 / 4e5));
  std::size_t cc = 0, c = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s.types()[i - 1] == C) {
      ++c;
      cc += s.types()[i] == C;
    }
  const double pcc = static_cast<double>(cc) / static_cast<double>(c);
  CHECK(std::abs(pcc - 0.7) <= 3.0 * std::sqrt(0.21 / static_cast<double>(c)));
}

TEST_CASE("external signs are used verbatim after the warm-up") {
  GeneratorSpec spec = iid_spec(10'000, 30);
  spec.impact = TimKernel::tim1({1.0, -0.2, -0.1});
  std::vector<std::int8_t> ext(10'002);
  for (std::size_t i = 0; i < ext.size(); ++i) ext[i] = (i / 3) % 2 == 0 ? 1 : -1;
  spec.external_signs = ext;
  const auto s = generate(spec);
  for (std::size_t i = 0; i < s.size(); ++i) REQUIRE(s.signs()[i] == ext[i + 2]);
  // r_t = e_t - 0.2 e_{t-1} - 0.1 e_{t-2}
  for (std::size_t i = 0; i < s.size(); ++i)
    REQUIRE(s.returns()[i] == doctest::Approx(ext[i + 2] - 0.2 * ext[i + 1] - 0.1 * ext[i]));

  spec.external_signs.resize(10'001);
  CHECK(kind_of([&] { generate(spec); }) == ErrorKind::Validation);
  spec.external_signs = ext;
  spec.types.reversal_after_c = 0.5;
  CHECK(kind_of([&] { generate(spec); }) == ErrorKind::Validation);
  spec.types.reversal_after_c = 0.0;
  spec.external_signs[7] = 0;
  CHECK(kind_of([&] { generate(spec); }) == ErrorKind::Validation);
}

TEST_CASE("synthetic timestamps fill whole sessions") {
  GeneratorSpec spec = iid_spec(50'000, 31);
  const auto s = generate(spec);
  CHECK(s.day_count() == 3);
  CHECK(s.day_starts() == std::vector<std::size_t>{0, 21600, 43200});
  const auto ts = s.timestamps();
  CHECK(ts[1] - ts[0] == 1'000'000'000LL);
  CHECK(ts[21600] - ts[0] == 86'400'000'000'000LL);
  spec.events_per_day = 1000;
  CHECK(generate(spec).day_count() == 50);
}

TEST_CASE("generator spec validation") {
  const auto bad = [](auto edit) {
    GeneratorSpec spec = iid_spec(20'000, 1);
    edit(spec);
    return kind_of([&] { generate(spec); });
  };
  CHECK(bad([](GeneratorSpec& s) { s.n = 9'999; }) == ErrorKind::Validation);
  CHECK(bad([](GeneratorSpec& s) { s.types.p_c = 1.0; }) == ErrorKind::Validation);
  CHECK(bad([](GeneratorSpec& s) {
          s.types.kind = TypeProcess::Kind::Markov;
          s.types.transition = {{{0.5, 0.6}, {0.5, 0.5}}};
        }) == ErrorKind::Validation);
  CHECK(bad([](GeneratorSpec& s) {
          s.types.kind = TypeProcess::Kind::Markov;
          s.types.transition = {{{1.0, 0.0}, {1.0, 0.0}}};
        }) == ErrorKind::Validation);
  CHECK(bad([](GeneratorSpec& s) { s.types.reversal_after_c = 1.5; }) == ErrorKind::Validation);
  CHECK(bad([](GeneratorSpec& s) { s.events_per_day = 0; }) == ErrorKind::Validation);
  CHECK(bad([](GeneratorSpec& s) { s.events_per_day = 21601; }) == ErrorKind::Validation);
  CHECK(bad([](GeneratorSpec& s) { s.noise.D_LF = -0.1; }) == ErrorKind::Validation);
  CHECK(bad([](GeneratorSpec& s) { s.signs.rho = 1.0; }) == ErrorKind::Validation);
  CHECK(bad([](GeneratorSpec& s) {
          s.types.kind = TypeProcess::Kind::Classified;
          s.impact = TimKernel::tim2({0.1}, {1.0});
        }) == ErrorKind::Validation);
  CHECK(bad([](GeneratorSpec& s) {
          auto k = InfluenceKernel::zero(3);
          k.kappa[index(C)][index(NC)][2] = 0.1;
          s.impact = k;
        }) == ErrorKind::Validation);
  CHECK(bad([](GeneratorSpec& s) {
          s.types.kind = TypeProcess::Kind::Scripted;
          s.types.script.clear();
        }) == ErrorKind::Validation);
  CHECK_FALSE(bad([](GeneratorSpec&) {}));
  GeneratorSpec wrong = iid_spec(20'000, 1);
  wrong.impact = InfluenceKernel::zero(2);
  CHECK(kind_of([&] { generate_tim(wrong); }) == ErrorKind::InvalidInput);
  wrong.impact = TimKernel::tim1({1.0});
  CHECK(kind_of([&] { generate_hdim2(wrong); }) == ErrorKind::InvalidInput);
}

TEST_CASE("scripted types repeat the script") {
  GeneratorSpec spec = iid_spec(20'000, 32);
  spec.types.kind = TypeProcess::Kind::Scripted;
  spec.types.script = {C, NC, NC, C};
  CHECK(spec.types.stationary_pc() == 0.5);
  const auto s = generate(spec);
  // the warm-up of the length-1 kernel is zero events, so the script starts at index 0
  for (std::size_t i = 0; i < s.size(); ++i) REQUIRE(s.types()[i] == spec.types.script[i % 4]);
}
