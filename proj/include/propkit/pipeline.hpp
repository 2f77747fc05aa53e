#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "propkit/io.hpp"

namespace propkit {

enum class ModelVariant { Tim1, Tim2, Hdim2 };
std::string_view to_string(ModelVariant v);
ModelVariant model_variant_from_string(std::string_view s);

struct RunConfig {
  std::vector<std::filesystem::path> tapes;
  std::string session = "09:30-15:30";
  std::optional<std::string> tick_size;
  /// Synthetic input when no tape is given: a preset name or a generator spec file.
  std::optional<std::string> preset;
  std::optional<std::filesystem::path> spec_file;
  std::optional<std::size_t> n;
  /// Overrides the generator seed.
  std::optional<std::uint64_t> seed;

  ModelVariant variant = ModelVariant::Tim1;
  int L = 100;
  int L_pos = 100;
  int L_neg = 100;
  int L_sig = 100;
  int n_equations = -1;
  bool fit_noise = true;
  bool fit_on_ld = false;
  int noise_l_min = 1;
  std::vector<long> deviation_lags;  // empty: 1..L_neg

  std::filesystem::path out_root = "out";

  /// Throws Validation or Io before any computation.
  void validate() const;
  json to_json() const;
  static RunConfig from_json(const json& j);
  /// 16 hex digits over the canonical JSON form.
  std::string hash() const;
};

/// The series a config describes, keyed by instrument.
std::vector<EventSeries> load_inputs(const RunConfig& config);
/// Generator spec of the synthetic source with n and seed applied.
GeneratorSpec synthetic_spec(const RunConfig& config);

struct InstrumentReport {
  std::string instrument;
  std::filesystem::path directory;
  json summary;
};

/// Writes out/<instrument>/<variant>/ for every input. Instruments run
/// concurrently; each directory appears complete or not at all.
std::vector<InstrumentReport> run_pipeline(const RunConfig& config);

struct RoundtripCheck {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct RoundtripReport {
  std::vector<RoundtripCheck> checks;
  bool pass() const;
  json to_json() const;
};

/// Generates from the configured synthetic source, recalibrates with the
/// configured variant and compares with the generating kernel and the
/// empirical curves.
RoundtripReport run_roundtrip(const RunConfig& config);

}  // namespace propkit
