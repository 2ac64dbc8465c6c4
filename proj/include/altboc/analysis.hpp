#pragma once

// Code-tracking performance: thermal-noise jitter (closed and integral
// forms), S-curves, the multipath error envelope and the clean / noisy /
// filtered comparison.

#include <array>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "altboc/acquisition.hpp"
#include "altboc/common.hpp"
#include "altboc/spectrum.hpp"
#include "altboc/tracking.hpp"
#include "altboc/waveform.hpp"

namespace altboc::analysis {

// ---------------------------------------------------------------------------
// Jitter
// ---------------------------------------------------------------------------

struct JitterParams {
    double front_end_bandwidth_hz = 51.15e6;
    double loop_bandwidth_hz = 1.0;  // B_n
    double spacing_d = 0.2;          // chips, early-to-late
    double cn0 = 31622.776601683792; // ratio per Hz (45 dB-Hz)
    double t_int = 1e-3;
    double chip_rate_hz = 10.23e6;
    double subcarrier_hz = 15.345e6;
    spectrum::PilotAcfView view = spectrum::PilotAcfView::single_sideband;
    /// |dR/dtau| at -d/2 and R at d, both from the band-limited pilot
    /// correlation; filled by make().
    double acf_slope_alpha = 0.0;
    double acf_at_d = 0.0;

    void validate() const;

    static JitterParams make(const waveform::SignalConfig& sig, double band_hz, double bn_hz, double spacing_d,
                             double cn0_dbhz, double t_int,
                             spectrum::PilotAcfView view = spectrum::PilotAcfView::single_sideband);
};

/// Central-difference slope magnitude of the band-limited correlation at
/// -d/2. Throws DomainError when d/2 reaches the first zero of the main
/// peak (or the slope there is not positive).
double acf_slope_alpha(const waveform::SignalConfig& sig, double band_hz, double spacing_d,
                       spectrum::PilotAcfView view = spectrum::PilotAcfView::single_sideband, double step = 1e-4);

/// [B_n (1 - R(d)) / (2 alpha^2 C/N0)] (1 + 2 / ((2 - alpha d) C/N0 T)).
/// Throws DomainError when 2 - alpha d <= 0.
double jitter_nemlp(const JitterParams& p);
/// Same leading term times (1 + 1 / (C/N0 T)).
double jitter_dp(const JitterParams& p);
double jitter_leading_term(const JitterParams& p);

/// The power spectrum the integral forms use for these parameters: the
/// sideband sinc^2 over B - 2 f_sc for single_sideband, the AltBOC envelope
/// over B for full_band, unit power either way.
spectrum::SpectrumModel jitter_model(const JitterParams& p);

enum class JitterTerm { sin2, f_sin, cos2, cos };

/// Integrand of each quadrature (G(f) times sin^2(pi f D), f sin(pi f D),
/// cos^2(pi f D) or cos(pi f D), with D = d / f_p), for inspection.
double jitter_integrand(const JitterParams& p, const spectrum::SpectrumModel& model, JitterTerm term, double f);

struct IntegralJitter {
    double nemlp = 0.0;  // chips^2
    double dp = 0.0;
    double beta = 0.0;
    double psi = 0.0;
};

/// sigma^2 = B_n int G sin^2(pi f D) / (C/N0 (2 pi int f G sin(pi f D))^2)
/// times beta (NEMLP) or psi (DP), converted to chips^2, with
///   beta = 1 + int G cos^2(pi f D) / (T C/N0 (int G cos(pi f D))^2)
///   psi  = 1 + 1 / (T C/N0 int G)
/// over [-B/2, B/2] of the model band. Adaptive Gauss-Kronrod at relative
/// tolerance 1e-8; NumericalError when a quadrature does not converge.
IntegralJitter jitter_integral_forms(const JitterParams& p, const spectrum::SpectrumModel& model);

// ---------------------------------------------------------------------------
// S-curves
// ---------------------------------------------------------------------------

enum class DatasetLabel { clean, noisy, filtered };
std::string to_string(DatasetLabel label);

struct SCurve {
    std::vector<double> offsets;  // chips, local minus true delay
    std::vector<double> responses;
    tracking::DiscriminatorKind kind;
    DatasetLabel dataset_label = DatasetLabel::clean;
    std::size_t epochs_averaged = 0;

    double range() const;
    /// Linear interpolation of the sign change nearest zero offset.
    double zero_crossing() const;
    /// max |D(e) + D(-e)| over the grid, divided by max |D|.
    double odd_symmetry_defect() const;
};

/// 2 n + 1 offsets spaced half_span / n, symmetric about zero.
std::vector<double> symmetric_grid(double half_span, std::size_t n);

/// Open-loop discriminator output at each forced offset with the carrier
/// and code held at `truth`, averaged over the buffer's epochs (or the
/// first `max_epochs`). Without truth the dataset is acquired and the
/// carrier phase taken from the zero-offset prompt of each epoch; an
/// undetected acquisition throws StateError.
SCurve s_curve(const tracking::DiscriminatorKind& kind, const tracking::LoopConfig& cfg, const IqBuffer& dataset,
               const waveform::ChipSequence& pilot_code, const waveform::SignalConfig& sig,
               std::span<const double> offsets, const std::optional<tracking::TrackingState>& truth,
               DatasetLabel label = DatasetLabel::clean, std::size_t max_epochs = 0,
               const acquisition::AcqConfig& acq = {});

/// Truth state moved through a causal filter: later by the group delay and
/// rotated by the filter phase, both taken at the tracked sideband centre.
tracking::TrackingState delayed_truth(const tracking::TrackingState& truth, const waveform::SignalConfig& sig,
                                      double group_delay_s, double phase_rad);

// ---------------------------------------------------------------------------
// Multipath
// ---------------------------------------------------------------------------

struct MultipathEnvelopeResult {
    std::vector<double> mp_delays;   // chips
    std::vector<double> upper_bias;  // in-phase ray, chips
    std::vector<double> lower_bias;  // anti-phase ray, chips
    std::vector<bool> upper_saturated;
    std::vector<bool> lower_saturated;
    double amplitude_ratio = 0.0;
};

/// Lock point of the configured discriminator on the composite correlation
/// R(x) + a cos(theta) R(x - delta), theta = 0 and pi, found by scanning out
/// from zero and bisecting to 1e-5 chips. band_hz = +infinity (the default)
/// uses the unfiltered triangle. No crossing within +-(1 + d) chips marks
/// the point saturated. Throws ArgumentError unless 0 <= a < 1.
MultipathEnvelopeResult multipath_envelope(const tracking::LoopConfig& cfg, double amplitude_ratio,
                                           std::span<const double> mp_delays, const waveform::SignalConfig& sig = {},
                                           double band_hz = std::numeric_limits<double>::infinity(),
                                           spectrum::PilotAcfView view = spectrum::PilotAcfView::single_sideband);

// ---------------------------------------------------------------------------
// Dataset comparison
// ---------------------------------------------------------------------------

struct AcfCut {
    std::vector<double> delays_chips;
    std::vector<double> magnitude;  // mean |ACF| over segments, 1 at the peak
    double side_lobe_prominence = 0.0;
};

/// Mean |ACF| of the full-band pilot correlation over `segments` one-code
/// windows starting at the acquired code phase, with the staircase
/// reference. Side-lobe prominence is (side peak - adjacent null) / main
/// peak averaged over both sides.
AcfCut acquisition_acf(const IqBuffer& iq, const acquisition::AcquisitionResult& acq,
                       const waveform::ChipSequence& code_aQ, const waveform::ChipSequence& code_bQ,
                       const waveform::SignalConfig& sig, double span_chips, std::size_t segments);

struct ScatterStats {
    double mean_abs_ip = 0.0;
    double var_abs_ip = 0.0;
    double dispersion = 0.0;  // var / mean^2
    std::size_t epochs = 0;
};
ScatterStats tracking_scatter(const tracking::TrackRecord& rec, std::size_t skip_epochs);

struct BitComparison {
    std::size_t compared = 0;
    std::size_t errors = 0;  // gaps count as errors
    std::size_t shift = 0;   // truth symbol index of bits[0]
    double ber() const { return compared ? static_cast<double>(errors) / static_cast<double>(compared) : 0.0; }
};

/// Known-injection comparison: best alignment of `bits` against `truth`,
/// ignoring the first `skip` extracted bits.
BitComparison compare_bits(const tracking::NavBits& bits, std::span<const std::int8_t> truth, std::size_t skip = 1);

struct ComparisonSetup {
    waveform::SignalConfig sig;
    acquisition::AcqConfig acq;
    tracking::LoopConfig loop;
    double track_duration = 0.3;
    std::size_t scatter_skip_epochs = 100;
    std::vector<double> scurve_offsets;
    std::size_t scurve_epochs = 10;
    double acf_span_chips = 0.75;
    std::size_t acf_segments = 10;
    double symbol_period = 0.02;
    std::size_t bit_skip = 2;
};

struct ComparisonTruth {
    std::array<waveform::ChipSequence, 4> codes;  // E5a-I, E5a-Q, E5b-I, E5b-Q
    std::vector<std::int8_t> symbols;             // E5a-I navigation symbols
    /// Alignment for the open-loop S-curves, one per dataset.
    std::array<std::optional<tracking::TrackingState>, 3> alignment;
};

struct DatasetResult {
    DatasetLabel label = DatasetLabel::clean;
    std::vector<std::string> errors;  // stage failures, in order
    std::optional<acquisition::AcquisitionResult> acquisition;
    std::optional<AcfCut> acf;
    std::optional<ScatterStats> scatter;
    std::optional<BitComparison> bits;
    std::optional<SCurve> s_curve;
    std::optional<tracking::TrackRecord> track;
};

struct ComparisonReport {
    std::array<DatasetResult, 3> datasets;  // clean, noisy, filtered
    bool normalized_discriminator = true;

    const DatasetResult& get(DatasetLabel label) const { return datasets[static_cast<int>(label)]; }
    /// Structured text document: per-dataset metrics and cross-dataset deltas.
    std::string to_json() const;
};

/// Acquisition, ACF, tracking, bit extraction and S-curve on each dataset.
/// A failing stage is recorded on its dataset and the report is still built.
ComparisonReport compare_datasets(const IqBuffer& clean, const IqBuffer& noisy, const IqBuffer& filtered,
                                  const ComparisonSetup& setup, const ComparisonTruth& truth);

}  // namespace altboc::analysis
