#pragma once

// Scenario files and the end-to-end run: generate, impair, filter, acquire,
// track, analyze, compare. A run is a pure function of the scenario and its
// seed; every emitted file is listed in the manifest with its SHA-256.
//
// JSON layout (schema_version 1); keys not listed are rejected:
//
//   name, rng_seed, prn, code_mode, prn_table, duration_s, outputs
//   signal     { scale: "full" (100 Msps, IF 7.8 MHz) | "desk", <SignalConfig fields> }
//   channel    { code_delay_chips, doppler_hz, carrier_phase_rad,
//                cn0_dbhz (null = no thermal noise),
//                multipath: [{ extra_delay_chips, amplitude_ratio, phase_rad }] }
//   mult_noise { component_count, component_sigma }          optional
//   filter     { order, cutoff_hz (0 = 0.8 Nyquist), family } optional
//   acq        { <AcqConfig fields>, sideband: "lower" | "upper" }
//   loop       { <LoopConfig fields>, discriminator, normalized, nemlp_form }
//   tracking   { duration_s (0 = everything after acquisition) }
//   analysis   { scurve, jitter, envelope, comparison }
//
// Component seeds (navigation data, thermal noise, multiplicative noise)
// are derived from rng_seed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "altboc/acquisition.hpp"
#include "altboc/analysis.hpp"
#include "altboc/channel.hpp"
#include "altboc/common.hpp"
#include "altboc/io.hpp"
#include "altboc/tracking.hpp"
#include "altboc/waveform.hpp"

namespace altboc::scenario {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// A rejected scenario field. what() starts with the field path.
class ValidationError : public ConfigurationError {
public:
    ValidationError(std::string field_path, const std::string& message);
    const std::string& field_path() const { return path_; }

private:
    std::string path_;
};

struct SCurveSettings {
    double half_span_chips = 0.75;
    std::size_t points_per_side = 15;
    std::size_t epochs = 10;
};

struct JitterSettings {
    double band_hz = 0.0;  // 0 selects the main-lobe bandwidth
    double cn0_min_dbhz = 25.0;
    double cn0_max_dbhz = 55.0;
    double cn0_step_db = 1.0;
    std::vector<double> spacings{0.1, 0.2, 0.5};
    spectrum::PilotAcfView view = spectrum::PilotAcfView::single_sideband;
};

struct EnvelopeSettings {
    double amplitude_ratio = 0.5;
    double max_delay_chips = 2.5;
    double step_chips = 0.01;
    double band_hz = 0.0;  // 0 selects the unfiltered triangle
};

struct ComparisonSettings {
    double track_duration_s = 0.0;  // 0 = the scenario tracking duration
    std::size_t scatter_skip_epochs = 100;
    std::size_t scurve_epochs = 10;
    double acf_span_chips = 0.75;
    std::size_t acf_segments = 10;
    std::size_t bit_skip = 2;
};

struct Scenario {
    std::string name = "scenario";
    std::uint64_t rng_seed = 1;
    int prn = 17;
    waveform::CodeMode code_mode = waveform::CodeMode::icd_register;
    std::string prn_table;  // CSV of register start values, empty = built in

    waveform::SignalConfig signal;
    std::string signal_scale = "full";
    double code_delay_chips = 0.0;
    channel::ChannelSpec channel;  // code_delay in seconds, derived from chips
    std::optional<channel::MultiplicativeNoiseSpec> mult_noise;
    std::optional<channel::FilterSpec> filter;
    acquisition::AcqConfig acq;
    tracking::LoopConfig loop;
    double duration = 0.1;        // s
    double track_duration = 0.0;  // s, 0 = rest of the buffer
    std::vector<std::string> outputs;

    SCurveSettings scurve;
    JitterSettings jitter;
    EnvelopeSettings envelope;
    ComparisonSettings comparison;

    bool wants(const std::string& output) const;
    /// Tracking span actually used: the buffer minus one code period.
    double effective_track_duration() const;
    /// Nested invariants, rethrown as ValidationError with the section path.
    void validate() const;
};

/// Output selectors understood by run_scenario.
const std::vector<std::string>& known_outputs();

Scenario from_json_text(const std::string& text);
Scenario load(const std::filesystem::path& path, const std::vector<std::string>& overrides = {},
              std::optional<std::uint64_t> seed = std::nullopt);
/// Normalized document: every field, defaults filled in.
std::string to_json_text(const Scenario& s);
/// SHA-256 of the normalized document.
std::string scenario_hash(const Scenario& s);

/// Applies "a.b.c=value" to a JSON document; the value is parsed as JSON
/// and taken as a string when that fails. Throws ValidationError on a
/// malformed override.
std::string apply_override(const std::string& json_text, const std::string& assignment);

/// Known-truth synthesis of the scenario signal before noise.
struct Synthesis {
    waveform::SatelliteSignal satellite;
    IqBuffer clean;
    tracking::TrackingState truth;  // loop state matching the signal at sample 0
};
Synthesis synthesize(const Scenario& s);

/// Thermal noise, then multiplicative noise, each when configured.
IqBuffer impair(const IqBuffer& clean, const Scenario& s);

/// Truth state after the scenario's filter (unchanged without one).
tracking::TrackingState filtered_truth(const tracking::TrackingState& truth, const Scenario& s);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct StageError {
    std::string stage;
    std::string message;
};

struct RunManifest {
    std::string scenario_name;
    std::string scenario_hash;
    std::string tool_version = kToolVersion;
    std::uint64_t rng_seed = 0;
    std::vector<std::string> overrides;
    std::vector<StageTiming> timings;
    std::vector<StageError> stage_errors;
    std::vector<io::OutputFile> outputs;

    bool ok() const { return stage_errors.empty(); }
    std::string to_json() const;
};

struct RunOptions {
    std::filesystem::path out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
};

/// Runs the scenario, writes the selected artifacts plus `manifest.json`
/// to the output directory and returns the manifest. Stage failures are
/// recorded, not thrown; an unwritable output throws IoError.
RunManifest run_scenario(const std::filesystem::path& scenario_file, const RunOptions& options);
RunManifest run_scenario(const Scenario& s, const RunOptions& options);

}  // namespace altboc::scenario
