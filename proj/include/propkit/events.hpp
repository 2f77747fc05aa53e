#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace propkit {

/// Market-order event type: NC leaves the mid unchanged until the next trade,
/// C moves it.
enum class EventType : std::uint8_t { NC = 0, C = 1 };

inline constexpr std::array<EventType, 2> kEventTypes{EventType::NC, EventType::C};
inline constexpr std::size_t kTypeCount = 2;

constexpr std::size_t index(EventType t) { return static_cast<std::size_t>(t); }
std::string_view to_string(EventType t);
EventType event_type_from_string(std::string_view s);

/// |r| at or below this is a zero return (price units).
inline constexpr double kZeroTolerance = 1e-9;

/// NC iff |r| <= tolerance. Throws InvalidInput on a non-finite return.
EventType classify(double r, double tolerance = kZeroTolerance);

struct MarketEvent {
  std::int64_t timestamp_ns = 0;
  int sign = 1;
  double mid_before = 0.0;
  double mid_after = 0.0;

  double ret() const { return mid_after - mid_before; }
  friend bool operator==(const MarketEvent&, const MarketEvent&) = default;
};

/// Immutable, time-ordered series of signed trades split into trading days.
///
/// Storage is column-wise so that the estimators can stream over signs,
/// returns and types without touching the other fields. Types either come
/// from classifying each return (`labeled() == false`, the tape case) or are
/// supplied by a generator whose model allows non-zero returns on NC events.
class EventSeries {
 public:
  EventSeries() = default;

  /// Classifies every event from its own return.
  static EventSeries classified(std::string instrument, std::span<const MarketEvent> events,
                                std::vector<std::size_t> day_starts,
                                double tolerance = kZeroTolerance);

  /// Uses the supplied types as-is.
  static EventSeries labeled(std::string instrument, std::span<const MarketEvent> events,
                             std::vector<EventType> types, std::vector<std::size_t> day_starts);

  std::size_t size() const { return signs_.size(); }
  bool empty() const { return signs_.empty(); }
  const std::string& instrument() const { return instrument_; }
  bool is_labeled() const { return labeled_; }

  std::span<const std::int64_t> timestamps() const { return timestamps_; }
  std::span<const std::int8_t> signs() const { return signs_; }
  std::span<const double> mid_before() const { return mid_before_; }
  std::span<const double> mid_after() const { return mid_after_; }
  std::span<const double> returns() const { return returns_; }
  std::span<const EventType> types() const { return types_; }

  MarketEvent event(std::size_t i) const;

  /// First index of every day; always starts with 0 for a non-empty series.
  const std::vector<std::size_t>& day_starts() const { return day_starts_; }
  std::size_t day_count() const { return day_starts_.size(); }
  /// Half-open index range [first, second) of day d.
  std::pair<std::size_t, std::size_t> day_range(std::size_t d) const;
  std::size_t longest_day() const;

  std::size_t count(EventType t) const { return type_counts_[index(t)]; }

  friend bool operator==(const EventSeries&, const EventSeries&) = default;

 private:
  void validate_and_index(const char* module);

  std::string instrument_;
  std::vector<std::int64_t> timestamps_;
  std::vector<std::int8_t> signs_;
  std::vector<double> mid_before_;
  std::vector<double> mid_after_;
  std::vector<double> returns_;
  std::vector<EventType> types_;
  std::vector<std::size_t> day_starts_;
  std::array<std::size_t, kTypeCount> type_counts_{};
  bool labeled_ = false;
};

/// Fraction of events of type t. Throws EmptySeries on an empty series.
double event_probability(const EventSeries& series, EventType t);

/// Wall-clock window inside each day, as nanoseconds after midnight.
/// Membership is half-open: start <= time-of-day < end.
struct SessionWindow {
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 24LL * 3600 * 1'000'000'000;

  /// Parses "HH:MM-HH:MM" (seconds optional: "HH:MM:SS").
  static SessionWindow parse(std::string_view text);
  bool contains(std::int64_t time_of_day_ns) const {
    return time_of_day_ns >= start_ns && time_of_day_ns < end_ns;
  }
};

inline constexpr std::int64_t kNanosPerDay = 24LL * 3600 * 1'000'000'000;

struct TapeOptions {
  SessionWindow session = SessionWindow::parse("09:30-15:30");
  /// Decimal tick size such as "0.01". When set, mids are parsed exactly as
  /// integer half-ticks and must sit on that grid.
  std::optional<std::string> tick_size;
  std::string instrument;
};

/// Reads the CSV tape `ts_ns,sign,mid_before,mid_after[,type]`.
EventSeries parse_tape(std::istream& in, const TapeOptions& options);
EventSeries ingest_tape(const std::filesystem::path& path, const TapeOptions& options);

/// Writes the canonical tape. A `type` column is added for labeled series so
/// that ingesting the output reproduces the series exactly.
void write_tape(const EventSeries& series, std::ostream& out);
void write_tape(const EventSeries& series, const std::filesystem::path& path);

/// Exact decimal used for tick-grid parsing: value = mantissa * 10^-scale.
struct Decimal {
  std::int64_t mantissa = 0;
  int scale = 0;
};
std::optional<Decimal> parse_decimal(std::string_view text);

}  // namespace propkit
