#include "propkit/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "propkit/error.hpp"

namespace propkit {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void parse_fail(std::size_t row, const std::string& what) {
  throw Error(ErrorKind::Parse, "events", "row " + std::to_string(row) + ": " + what);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Number of half-ticks represented by `value`, or nullopt when off-grid.
std::optional<std::int64_t> to_half_ticks(const Decimal& value, const Decimal& tick) {
  // value / (tick / 2) = 2 * v * 10^tick.scale / (t * 10^value.scale)
  __int128 num = static_cast<__int128>(value.mantissa) * 2;
  __int128 den = tick.mantissa;
  for (int i = 0; i < tick.scale; ++i) num *= 10;
  for (int i = 0; i < value.scale; ++i) den *= 10;
  if (den == 0 || num % den != 0) return std::nullopt;
  return static_cast<std::int64_t>(num / den);
}

}  // namespace

std::string_view to_string(EventType t) { return t == EventType::C ? "C" : "NC"; }

EventType event_type_from_string(std::string_view s) {
  if (s == "C") return EventType::C;
  if (s == "NC") return EventType::NC;
  throw Error(ErrorKind::InvalidInput, "events", "unknown event type '" + std::string(s) + "'");
}

EventType classify(double r, double tolerance) {
  if (!std::isfinite(r)) throw Error(ErrorKind::InvalidInput, "events", "non-finite return");
  return std::abs(r) <= tolerance ? EventType::NC : EventType::C;
}

EventSeries EventSeries::classified(std::string instrument, std::span<const MarketEvent> events,
                                    std::vector<std::size_t> day_starts, double tolerance) {
  std::vector<EventType> types;
  types.reserve(events.size());
  for (const auto& e : events) types.push_back(classify(e.ret(), tolerance));
  auto s = labeled(std::move(instrument), events, std::move(types), std::move(day_starts));
  s.labeled_ = false;
  return s;
}

EventSeries EventSeries::labeled(std::string instrument, std::span<const MarketEvent> events,
                                 std::vector<EventType> types, std::vector<std::size_t> day_starts) {
  if (types.size() != events.size())
    throw Error(ErrorKind::InvalidInput, "events", "type array length differs from event count");
  EventSeries s;
  s.instrument_ = std::move(instrument);
  s.labeled_ = true;
  const std::size_t n = events.size();
  s.timestamps_.reserve(n);
  s.signs_.reserve(n);
  s.mid_before_.reserve(n);
  s.mid_after_.reserve(n);
  s.returns_.reserve(n);
  for (const auto& e : events) {
    s.timestamps_.push_back(e.timestamp_ns);
    s.signs_.push_back(static_cast<std::int8_t>(e.sign));
    s.mid_before_.push_back(e.mid_before);
    s.mid_after_.push_back(e.mid_after);
    s.returns_.push_back(e.mid_after - e.mid_before);
  }
  s.types_ = std::move(types);
  s.day_starts_ = std::move(day_starts);
  if (s.day_starts_.empty() && n > 0) s.day_starts_.push_back(0);
  s.validate_and_index("events");
  return s;
}

void EventSeries::validate_and_index(const char* module) {
  const std::size_t n = signs_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (signs_[i] != 1 && signs_[i] != -1)
      throw Error(ErrorKind::InvalidInput, module, "sign at index " + std::to_string(i) + " is not +-1");
    if (!std::isfinite(mid_before_[i]) || !std::isfinite(mid_after_[i]))
      throw Error(ErrorKind::InvalidInput, module, "non-finite mid at index " + std::to_string(i));
  }
  if (n > 0 && day_starts_.front() != 0)
    throw Error(ErrorKind::InvalidInput, module, "first day must start at index 0");
  for (std::size_t d = 1; d < day_starts_.size(); ++d)
    if (day_starts_[d] <= day_starts_[d - 1] || day_starts_[d] >= n)
      throw Error(ErrorKind::InvalidInput, module, "day boundaries must be strictly increasing and in range");
  for (std::size_t d = 0; d < day_starts_.size(); ++d) {
    auto [b, e] = day_range(d);
    for (std::size_t i = b + 1; i < e; ++i)
      if (timestamps_[i] < timestamps_[i - 1])
        throw Error(ErrorKind::DataIntegrity, module,
                    "timestamps decrease within a day at index " + std::to_string(i));
  }
  type_counts_ = {};
  for (auto t : types_) ++type_counts_[index(t)];
}

MarketEvent EventSeries::event(std::size_t i) const {
  return MarketEvent{timestamps_.at(i), signs_.at(i), mid_before_.at(i), mid_after_.at(i)};
}

std::pair<std::size_t, std::size_t> EventSeries::day_range(std::size_t d) const {
  const std::size_t b = day_starts_.at(d);
  const std::size_t e = d + 1 < day_starts_.size() ? day_starts_[d + 1] : size();
  return {b, e};
}

std::size_t EventSeries::longest_day() const {
  std::size_t best = 0;
  for (std::size_t d = 0; d < day_count(); ++d) {
    auto [b, e] = day_range(d);
    best = std::max(best, e - b);
  }
  return best;
}

double event_probability(const EventSeries& series, EventType t) {
  if (series.empty()) throw Error(ErrorKind::EmptySeries, "events", "event probability of an empty series");
  return static_cast<double>(series.count(t)) / static_cast<double>(series.size());
}

SessionWindow SessionWindow::parse(std::string_view text) {
  auto parse_clock = [&](std::string_view s) -> std::int64_t {
    s = trim(s);
    int h = 0, m = 0, sec = 0;
    auto bad = [&]() { throw Error(ErrorKind::InvalidInput, "events", "bad session time '" + std::string(s) + "'"); };
    auto field = [&](std::string_view f, int& out) {
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), out);
      if (ec != std::errc() || p != f.data() + f.size()) bad();
    };
    auto c1 = s.find(':');
    if (c1 == std::string_view::npos) bad();
    field(s.substr(0, c1), h);
    auto rest = s.substr(c1 + 1);
    auto c2 = rest.find(':');
    if (c2 == std::string_view::npos) {
      field(rest, m);
    } else {
      field(rest.substr(0, c2), m);
      field(rest.substr(c2 + 1), sec);
    }
    if (h < 0 || h > 24 || m < 0 || m > 59 || sec < 0 || sec > 59) bad();
    return ((h * 60LL + m) * 60LL + sec) * 1'000'000'000LL;
  };
  auto dash = text.find('-');
  if (dash == std::string_view::npos)
    throw Error(ErrorKind::InvalidInput, "events", "session window must look like 09:30-15:30");
  SessionWindow w{parse_clock(text.substr(0, dash)), parse_clock(text.substr(dash + 1))};
  if (w.start_ns >= w.end_ns)
    throw Error(ErrorKind::InvalidInput, "events", "session window start must precede its end");
  return w;
}

std::optional<Decimal> parse_decimal(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  bool neg = false;
  if (text.front() == '-' || text.front() == '+') {
    neg = text.front() == '-';
    text.remove_prefix(1);
  }
  Decimal d;
  bool seen_point = false, seen_digit = false;
  for (char c : text) {
    if (c == '.') {
      if (seen_point) return std::nullopt;
      seen_point = true;
    } else if (c >= '0' && c <= '9') {
      if (d.mantissa > (INT64_MAX - 9) / 10) return std::nullopt;
      d.mantissa = d.mantissa * 10 + (c - '0');
      if (seen_point) ++d.scale;
      seen_digit = true;
    } else {
      return std::nullopt;
    }
  }
  if (!seen_digit) return std::nullopt;
  if (neg) d.mantissa = -d.mantissa;
  return d;
}

EventSeries parse_tape(std::istream& in, const TapeOptions& options) {
  std::optional<Decimal> tick;
  if (options.tick_size) {
    tick = parse_decimal(*options.tick_size);
    if (!tick || tick->mantissa <= 0)
      throw Error(ErrorKind::InvalidInput, "events", "tick size must be a positive decimal");
  }

  std::string line;
  std::size_t row = 0;
  bool have_header = false, has_type = false;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cols = split_csv(line);
    if (cols.size() >= 4 && cols[0] == "ts_ns" && cols[1] == "sign" && cols[2] == "mid_before" &&
        cols[3] == "mid_after" && (cols.size() == 4 || (cols.size() == 5 && cols[4] == "type"))) {
      has_type = cols.size() == 5;
      have_header = true;
      break;
    }
    parse_fail(row, "missing header ts_ns,sign,mid_before,mid_after");
  }
  if (!have_header) throw Error(ErrorKind::Parse, "events", "row 1: missing header");

  const std::size_t ncols = has_type ? 5 : 4;
  std::vector<MarketEvent> events;
  std::vector<EventType> types;
  std::vector<std::size_t> day_starts;
  std::int64_t prev_ts = 0, prev_day = 0;
  bool first = true;
  std::int64_t kept_day = INT64_MIN;

  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cols = split_csv(line);
    if (cols.size() != ncols)
      parse_fail(row, "expected " + std::to_string(ncols) + " columns, found " + std::to_string(cols.size()));

    MarketEvent ev;
    {
      auto f = cols[0];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), ev.timestamp_ns);
      if (ec != std::errc() || p != f.data() + f.size()) parse_fail(row, "bad ts_ns '" + std::string(f) + "'");
    }
    {
      auto f = cols[1];
      int s = 0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), s);
      if (ec != std::errc() || p != f.data() + f.size() || (s != 1 && s != -1))
        parse_fail(row, "sign must be -1 or 1, got '" + std::string(f) + "'");
      ev.sign = s;
    }
    std::int64_t half_ticks[2] = {0, 0};
    for (int k = 0; k < 2; ++k) {
      auto f = cols[2 + k];
      double v = 0.0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(v))
        parse_fail(row, "bad mid '" + std::string(f) + "'");
      if (tick) {
        auto dec = parse_decimal(f);
        if (!dec) parse_fail(row, "mid '" + std::string(f) + "' is not a plain decimal");
        auto h = to_half_ticks(*dec, *tick);
        if (!h) parse_fail(row, "mid '" + std::string(f) + "' is off the half-tick grid");
        half_ticks[k] = *h;
      }
      (k == 0 ? ev.mid_before : ev.mid_after) = v;
    }
    EventType type = EventType::NC;
    if (has_type) {
      try {
        type = event_type_from_string(cols[4]);
      } catch (const Error&) {
        parse_fail(row, "bad type '" + std::string(cols[4]) + "'");
      }
    } else if (tick) {
      type = half_ticks[0] == half_ticks[1] ? EventType::NC : EventType::C;
    } else {
      type = classify(ev.ret());
    }

    const std::int64_t day = floor_div(ev.timestamp_ns, kNanosPerDay);
    if (!first) {
      if (day < prev_day)
        throw Error(ErrorKind::DataIntegrity, "events", "row " + std::to_string(row) + ": day out of order");
      if (day == prev_day && ev.timestamp_ns < prev_ts)
        throw Error(ErrorKind::DataIntegrity, "events",
                    "row " + std::to_string(row) + ": timestamp decreases within a day");
    }
    first = false;
    prev_ts = ev.timestamp_ns;
    prev_day = day;

    if (!options.session.contains(ev.timestamp_ns - day * kNanosPerDay)) continue;
    if (day != kept_day) {
      day_starts.push_back(events.size());
      kept_day = day;
    }
    events.push_back(ev);
    types.push_back(type);
  }

  if (events.empty()) throw Error(ErrorKind::EmptySeries, "events", "no events inside the session window");
  if (has_type) return EventSeries::labeled(options.instrument, events, std::move(types), std::move(day_starts));
  auto series = EventSeries::classified(options.instrument, events, std::move(day_starts));
  if (tick) {
    // the integer test and the tolerance test agree on any grid coarser than the tolerance
    for (std::size_t i = 0; i < types.size(); ++i)
      if (types[i] != series.types()[i])
        throw Error(ErrorKind::DataIntegrity, "events", "tick size too fine for the zero-return tolerance");
  }
  return series;
}

EventSeries ingest_tape(const std::filesystem::path& path, const TapeOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "events", "cannot open tape " + path.string());
  TapeOptions opts = options;
  if (opts.instrument.empty()) opts.instrument = path.stem().string();
  return parse_tape(in, opts);
}

namespace {
void append_double(std::string& out, double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, p);
}
}  // namespace

void write_tape(const EventSeries& series, std::ostream& out) {
  const bool with_type = series.is_labeled();
  out << (with_type ? "ts_ns,sign,mid_before,mid_after,type\n" : "ts_ns,sign,mid_before,mid_after\n");
  std::string line;
  for (std::size_t i = 0; i < series.size(); ++i) {
    line.clear();
    line += std::to_string(series.timestamps()[i]);
    line += series.signs()[i] > 0 ? ",1," : ",-1,";
    append_double(line, series.mid_before()[i]);
    line += ',';
    append_double(line, series.mid_after()[i]);
    if (with_type) {
      line += ',';
      line += to_string(series.types()[i]);
    }
    line += '\n';
    out << line;
  }
}

void write_tape(const EventSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "events", "cannot write tape " + path.string());
  write_tape(series, out);
}

}  // namespace propkit
