#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "json.hpp"
#include "propkit/dar.hpp"
#include "propkit/hdim.hpp"
#include "propkit/kernels.hpp"
#include "propkit/noisefit.hpp"
#include "propkit/stats.hpp"
#include "propkit/synth.hpp"
#include "propkit/tim.hpp"

namespace propkit {

using json = nlohmann::json;

std::string_view library_version();

json to_json(const CorrelationSet& c);
json to_json(const ResponseSet& r);
json to_json(const TimKernel& k);
json to_json(const InfluenceKernel& k);
json to_json(const DarSpec& s);
json to_json(const NoiseParams& n);
json to_json(const NoiseFitResult& f);
json to_json(const TypeProcess& t);
json to_json(const GeneratorSpec& g);

CorrelationSet correlations_from_json(const json& j);
ResponseSet responses_from_json(const json& j);
TimKernel tim_kernel_from_json(const json& j);
InfluenceKernel influence_kernel_from_json(const json& j);
DarSpec dar_spec_from_json(const json& j);
NoiseParams noise_from_json(const json& j);
TypeProcess type_process_from_json(const json& j);
/// Accepts an optional "preset" key whose spec the other keys override.
GeneratorSpec generator_spec_from_json(const json& j);

/// Plot-ready tables; `provenance` (if non-empty) is written first as a
/// '#'-prefixed line.
void write_correlations_csv(const CorrelationSet& c, std::ostream& out, std::string_view provenance = {});
void write_responses_csv(const ResponseSet& r, std::ostream& out, std::string_view provenance = {});
void write_signature_csv(const ResponseSet& r, std::ostream& out, std::string_view provenance = {});

json read_json_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace propkit
