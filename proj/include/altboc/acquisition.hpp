#pragma once

// Parallel code-phase search on one AltBOC sideband. The sideband is
// shifted to zero frequency and treated as a BPSK signal carrying that
// sideband's pilot (or data) code.

#include <optional>
#include <vector>

#include "altboc/common.hpp"
#include "altboc/waveform.hpp"

namespace altboc::acquisition {

enum class Sideband { lower, upper };  // E5a at -f_sc, E5b at +f_sc

struct AcqConfig {
    double doppler_min_hz = -5000.0;
    double doppler_max_hz = 5000.0;
    double doppler_step_hz = 0.0;  // 0 selects 2 / (3 T)
    double coherent_t_int = 1e-3;
    int noncoherent_sums = 1;
    double detection_threshold = 2.5;
    int prn_id = 17;
    Sideband sideband = Sideband::lower;
    bool use_data_channel = false;  // pilot (Q) code unless set
    bool keep_surface = true;

    double step() const { return doppler_step_hz > 0.0 ? doppler_step_hz : 2.0 / (3.0 * coherent_t_int); }
    std::vector<double> doppler_grid() const;
    void validate(double sample_rate_hz) const;
};

/// Metric grid, row-major: rows are Doppler bins, columns code-phase samples.
struct SearchSurface {
    std::vector<double> doppler_hz;
    std::size_t code_phases = 0;
    std::vector<double> values;

    std::size_t rows() const { return doppler_hz.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row * code_phases + col]; }
};

struct AcquisitionResult {
    double code_phase_samples = 0.0;
    double doppler_hz = 0.0;
    std::size_t doppler_bin = 0;
    double peak_metric = 0.0;  // peak over the surface mean
    double peak_to_second_ratio = 0.0;
    bool detected = false;
    std::optional<SearchSurface> search_surface;
};

/// Channel the acquisition correlates against, given the sideband and flag.
waveform::ChannelLabel acquisition_channel(const AcqConfig& cfg);

/// Carrier wipe at if - f_sc + doppler (lower sideband) or if + f_sc +
/// doppler (upper), circular FFT correlation over exactly
/// coherent_t_int * fs samples against the point-sampled local code, and
/// noncoherent accumulation of |.|^2. The peak-to-second ratio takes the
/// second peak from the peak's own Doppler row, outside +-1 chip. Ties go
/// to the lowest (doppler, code phase) pair.
AcquisitionResult acquire(const IqBuffer& iq, const waveform::ChipSequence& code, const waveform::SignalConfig& sig,
                          const AcqConfig& cfg);

/// Throws StateError when the surface was not retained.
const SearchSurface& export_search_surface(const AcquisitionResult& result);

}  // namespace altboc::acquisition
