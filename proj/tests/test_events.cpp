#include <sstream>

#include "doctest.h"
#include "propkit/error.hpp"
#include "propkit/events.hpp"
#include "propkit/synth.hpp"
#include "support.hpp"

using namespace propkit;
using testsupport::kind_of;

namespace {

constexpr std::int64_t kDay = 15707LL * 86'400'000'000'000LL;
constexpr std::int64_t kSec = 1'000'000'000LL;

std::int64_t at(int h, int m, int s = 0) { return kDay + ((h * 60LL + m) * 60 + s) * kSec; }

EventSeries parse(const std::string& text, TapeOptions o = {}) {
  std::istringstream in(text);
  return parse_tape(in, o);
}

}  // namespace

TEST_CASE("three-row tape is classified NC, C, NC") {
  std::ostringstream t;
  t << "ts_ns,sign,mid_before,mid_after\n"
    << at(10, 0) << ",1,100.00,100.00\n"
    << at(10, 1) << ",-1,100.00,100.01\n"
    << at(10, 2) << ",1,100.01,100.01\n";
  for (bool tick : {false, true}) {
    TapeOptions o;
    if (tick) o.tick_size = "0.01";
    const auto s = parse(t.str(), o);
    REQUIRE(s.size() == 3);
    CHECK(s.types()[0] == EventType::NC);
    CHECK(s.types()[1] == EventType::C);
    CHECK(s.types()[2] == EventType::NC);
    CHECK(s.returns()[1] == doctest::Approx(0.01));
  }
}

TEST_CASE("session window is half-open and drops early rows") {
  std::ostringstream t;
  t << "ts_ns,sign,mid_before,mid_after\n"
    << at(9, 0) << ",1,100,100\n"
    << at(9, 30) << ",1,100,100.5\n"
    << at(15, 29, 59) << ",-1,100.5,100\n"
    << at(15, 30) << ",1,100,100\n";
  const auto s = parse(t.str());
  REQUIRE(s.size() == 2);
  CHECK(s.timestamps()[0] == at(9, 30));
  CHECK(s.timestamps()[1] == at(15, 29, 59));
}

TEST_CASE("days become segments with recorded boundaries") {
  std::ostringstream t;
  t << "ts_ns,sign,mid_before,mid_after\n";
  for (int d = 0; d < 3; ++d)
    for (int i = 0; i < 4; ++i) t << at(10, i) + d * 86'400 * kSec << ",1,100,100.25\n";
  const auto s = parse(t.str());
  REQUIRE(s.day_count() == 3);
  CHECK(s.day_starts() == std::vector<std::size_t>{0, 4, 8});
  CHECK(s.longest_day() == 4);
}

TEST_CASE("malformed input raises typed errors") {
  const std::string head = "ts_ns,sign,mid_before,mid_after\n";
  CHECK(kind_of([&] { parse("a,b,c,d\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse(head + std::to_string(at(10, 0)) + ",2,100,100\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse(head + std::to_string(at(10, 0)) + ",1,abc,100\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse(head + std::to_string(at(10, 0)) + ",1,100\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse(head); }) == ErrorKind::EmptySeries);
  CHECK(kind_of([&] { parse(head + std::to_string(at(9, 0)) + ",1,100,100\n"); }) == ErrorKind::EmptySeries);
  CHECK(kind_of([&] {
          parse(head + std::to_string(at(10, 1)) + ",1,100,100\n" + std::to_string(at(10, 0)) + ",1,100,100\n");
        }) == ErrorKind::DataIntegrity);
  TapeOptions o;
  o.tick_size = "0.01";
  CHECK(kind_of([&] { parse(head + std::to_string(at(10, 0)) + ",1,100.003,100\n", o); }) == ErrorKind::Parse);
}

TEST_CASE("parse error names the row") {
  try {
    parse("ts_ns,sign,mid_before,mid_after\n" + std::to_string(at(10, 0)) + ",1,100,100\n" +
          std::to_string(at(10, 1)) + ",0,100,100\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    CHECK(e.module() == "events");
  }
}

TEST_CASE("classify follows the zero tolerance") {
  CHECK(classify(0.0) == EventType::NC);
  CHECK(classify(0.01) == EventType::C);
  CHECK(classify(-0.005) == EventType::C);
  CHECK(classify(1e-12) == EventType::NC);
  CHECK_THROWS_AS(classify(std::nan("")), Error);
  CHECK_THROWS_AS(classify(INFINITY), Error);
}

TEST_CASE("event probabilities count types") {
  const std::vector<EventType> types{EventType::NC, EventType::C, EventType::NC, EventType::NC};
  const auto s = testsupport::make_series({1, 1, -1, 1}, {0.0, 0.5, 0.0, 0.0}, 0, &types);
  CHECK(event_probability(s, EventType::C) == 0.25);
  CHECK(event_probability(s, EventType::NC) + event_probability(s, EventType::C) == 1.0);
  CHECK_THROWS_AS(event_probability(EventSeries{}, EventType::C), Error);
}

TEST_CASE("iid Bernoulli types give P(C) within the binomial bound") {
  GeneratorSpec spec = preset("iid-null");
  spec.types.p_c = 0.3;
  spec.n = 1'000'000;
  spec.seed = 12;
  const auto s = generate(spec);
  CHECK(std::abs(event_probability(s, EventType::C) - 0.3) < 3 * std::sqrt(0.3 * 0.7 / 1e6));
}

TEST_CASE("indicators partition every event") {
  GeneratorSpec spec = preset("small-tick");
  spec.n = 20'000;
  const auto s = generate(spec);
  for (std::size_t t = 0; t < s.size(); ++t) {
    double sum = 0.0, pick = 0.0;
    const double X[2] = {3.5, -1.25};
    for (EventType p : kEventTypes) {
      const double i = s.types()[t] == p ? 1.0 : 0.0;
      sum += i;
      pick += X[index(p)] * i;
    }
    REQUIRE(sum == 1.0);
    REQUIRE(pick == X[index(s.types()[t])]);
  }
}

TEST_CASE("series invariants: returns equal mid differences") {
  std::vector<GeneratorSpec> specs;
  for (const auto& name : preset_names()) specs.push_back(preset(name));
  specs.push_back(preset("iid-null"));
  specs.back().types.kind = TypeProcess::Kind::Classified;
  specs.back().signs = power_law_dar(0.5, 100, 0.9);
  specs.back().impact = TimKernel::tim1({1.0, -0.2, -0.1});
  std::size_t classified = 0;
  for (auto spec : specs) {
    spec.n = 20'000;
    const auto s = generate(spec);
    for (std::size_t t = 0; t < s.size(); ++t) REQUIRE(s.returns()[t] == s.mid_after()[t] - s.mid_before()[t]);
    if (s.is_labeled()) continue;
    ++classified;
    for (std::size_t t = 0; t < s.size(); ++t) REQUIRE(s.types()[t] == classify(s.returns()[t]));
  }
  CHECK(classified == 1);
}

TEST_CASE("synthetic two-day tape survives write and ingest exactly") {
  for (const char* name : {"small-tick", "large-tick"}) {
    GeneratorSpec spec = preset(name);
    spec.n = 20'000;
    spec.events_per_day = 10'000;
    spec.seed = 3;
    const auto s = generate(spec);
    REQUIRE(s.day_count() == 2);
    std::ostringstream out;
    write_tape(s, out);
    TapeOptions o;
    o.instrument = s.instrument();
    std::istringstream in(out.str());
    const auto back = parse_tape(in, o);
    CHECK(back == s);
    std::ostringstream again;
    write_tape(back, again);
    CHECK(again.str() == out.str());
  }
}

TEST_CASE("ingest of a missing file is an io error") {
  CHECK(kind_of([] { ingest_tape("/nonexistent/tape.csv", TapeOptions{}); }) == ErrorKind::Io);
}

TEST_CASE("session parsing") {
  const auto w = SessionWindow::parse("09:30-15:30");
  CHECK(w.start_ns == (9 * 3600 + 1800) * kSec);
  CHECK(w.end_ns == 15 * 3600 * kSec + 1800 * kSec);
  CHECK(SessionWindow::parse("09:30:15-10:00").start_ns == (9 * 3600 + 1815) * kSec);
  CHECK_THROWS_AS(SessionWindow::parse("15:30-09:30"), Error);
  CHECK_THROWS_AS(SessionWindow::parse("0930-1530"), Error);
}

TEST_CASE("decimal parsing is exact") {
  auto d = parse_decimal("100.015");
  REQUIRE(d);
  CHECK(d->mantissa == 100015);
  CHECK(d->scale == 3);
  CHECK(parse_decimal("-0.5")->mantissa == -5);
  CHECK_FALSE(parse_decimal("1e3"));
  CHECK_FALSE(parse_decimal("1.2.3"));
}
