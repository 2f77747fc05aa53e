#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "propkit/dar.hpp"
#include "propkit/events.hpp"
#include "propkit/kernels.hpp"

namespace propkit {

/// How event types are drawn.
///
/// `Classified` draws nothing: types come from classifying the generated
/// returns, which is the natural choice for single-type TIM data.
/// `reversal_after_c` couples signs to types: right after a C event the sign
/// reverses the previous one with this probability (otherwise the DAR draw is
/// used). Zero keeps types independent of signs.
struct TypeProcess {
  enum class Kind { Iid, Markov, Scripted, Classified };
  Kind kind = Kind::Iid;
  double p_c = 0.5;
  /// transition[from][to], indexed by EventType
  std::array<std::array<double, 2>, 2> transition{{{0.5, 0.5}, {0.5, 0.5}}};
  std::vector<EventType> script;
  double reversal_after_c = 0.0;

  void validate() const;
  /// P(C) in the stationary regime.
  double stationary_pc() const;
};

std::string_view to_string(TypeProcess::Kind k);

struct GeneratorSpec {
  DarSpec signs;
  TypeProcess types;
  std::variant<TimKernel, InfluenceKernel> impact;
  NoiseParams noise;
  std::size_t n = 1'000'000;
  std::uint64_t seed = 1;
  std::string instrument = "SYNTH";
  double start_mid = 100.0;
  /// One event per second from 09:30; 21600 fills the 09:30-15:30 session.
  std::size_t events_per_day = 21600;
  /// Replaces the DAR draws when non-empty; must cover n plus the warm-up
  /// (the kernel length).
  std::vector<std::int8_t> external_signs;

  void validate() const;
};

/// Signs and types only, after burn-in; shared by the generators.
struct FlowSample {
  std::vector<std::int8_t> signs;
  std::vector<EventType> types;
};
FlowSample generate_flow(const GeneratorSpec& spec, std::size_t length);

EventSeries generate_tim(const GeneratorSpec& spec);
EventSeries generate_hdim2(const GeneratorSpec& spec);
/// Dispatches on the impact kernel type.
EventSeries generate(const GeneratorSpec& spec);

/// Builds the series from signs, types and returns with synthetic timestamps.
EventSeries assemble_series(const GeneratorSpec& spec, std::span<const std::int8_t> signs,
                            std::span<const EventType> types, std::span<const double> returns, bool labeled);

/// "iid-null", "large-tick" or "small-tick".
GeneratorSpec preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace propkit
