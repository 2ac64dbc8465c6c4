#pragma once

// IQ sample files with a JSON sidecar, CSV curve emitters and SHA-256
// checksums for the run inventory.
//
// Raw files hold interleaved I/Q, little-endian, either float32 or int16.
// int16 maps +-full_scale to +-32767 (values beyond full scale clip), so a
// round trip is exact to half a step, full_scale / 65534, per component.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "altboc/acquisition.hpp"
#include "altboc/analysis.hpp"
#include "altboc/common.hpp"

namespace altboc::io {

enum class SampleFormat { float32, int16 };

std::string to_string(SampleFormat f);
SampleFormat sample_format_from_string(const std::string& name);

struct IqMetadata {
    double sample_rate_hz = 0.0;
    double if_hz = 0.0;
    double start_time = 0.0;
    SampleFormat format = SampleFormat::float32;
    std::size_t sample_count = 0;
    double full_scale = 1.0;  // int16 only
};

/// `<data path>.json`.
std::filesystem::path default_sidecar(const std::filesystem::path& data_path);

/// Writes the raw file and its sidecar. Throws IoError when either cannot be
/// written.
void write_iq(const IqBuffer& iq, const std::filesystem::path& path, SampleFormat format = SampleFormat::float32,
              double if_hz = 0.0, double full_scale = 1.0);

IqMetadata read_metadata(const std::filesystem::path& sidecar);

/// Missing or malformed sidecar: MetadataError. A raw file whose size is
/// not a whole number of samples, or shorter than the declared count:
/// IoError naming the byte offset where the data ends.
IqBuffer read_iq(const std::filesystem::path& path, const std::filesystem::path& sidecar);
IqBuffer read_iq(const std::filesystem::path& path, const std::filesystem::path& sidecar, IqMetadata& meta);

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Curve emitters. Every header names its unit.
// ---------------------------------------------------------------------------

void write_scurve_csv(const analysis::SCurve& curve, const std::filesystem::path& path);
/// Rows are Doppler bins, columns code phases; the axes go to
/// `<path>.axes.json` (doppler_hz list, code phase count and spacing).
void write_surface_csv(const acquisition::SearchSurface& surface, double sample_rate_hz,
                       const std::filesystem::path& path);
void write_envelope_csv(const analysis::MultipathEnvelopeResult& env, const std::filesystem::path& path);
void write_acf_csv(const analysis::AcfCut& acf, const std::filesystem::path& path);
void write_series_csv(const std::string& header, const std::vector<std::vector<double>>& columns,
                      const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

/// One emitted file in a run inventory.
struct OutputFile {
    std::string id;
    std::filesystem::path path;  // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

/// Names files `<prefix>_<id>.<ext>` under one directory and keeps the
/// inventory. Re-emitting an id replaces its entry.
class OutputSet {
public:
    OutputSet(std::filesystem::path dir, std::string prefix);

    std::filesystem::path path_for(const std::string& id, const std::string& ext) const;
    /// Checksums an already written file and records it. Sidecars need
    /// their own call.
    const OutputFile& record(const std::string& id, const std::filesystem::path& file);

    const std::vector<OutputFile>& files() const { return files_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::string prefix_;
    std::vector<OutputFile> files_;
};

}  // namespace altboc::io
