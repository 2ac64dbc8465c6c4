#pragma once

// Analytic AltBOC spectrum, band-power accounting, pilot correlation
// functions and the empirical estimators they are checked against.

#include <vector>

#include "altboc/common.hpp"
#include "altboc/waveform.hpp"

namespace altboc::spectrum {

enum class Normalization { raw, unit_power };

/// altboc_closed_form is the closed-form AltBOC(15,10) envelope; bpsk_sideband is
/// sinc^2(f/f_p)/f_p, the spectrum one sideband presents after it has been
/// shifted to zero frequency.
enum class SpectrumShape { altboc_closed_form, bpsk_sideband };

struct SpectrumModel {
    double chip_rate_hz = 10.23e6;
    double subcarrier_hz = 15.345e6;
    double band_hz = 51.15e6;  // normalization band, [-B/2, B/2]
    Normalization normalization = Normalization::unit_power;
    SpectrumShape shape = SpectrumShape::altboc_closed_form;
    double scale = 1.0;  // set by make_model

    void validate() const;
};

/// Builds a model and, for unit_power, computes the scale that makes the
/// integral over the band 1.
SpectrumModel make_model(double chip_rate_hz, double subcarrier_hz, double band_hz,
                         Normalization normalization = Normalization::unit_power,
                         SpectrumShape shape = SpectrumShape::altboc_closed_form);
SpectrumModel make_model(const waveform::SignalConfig& cfg, double band_hz,
                         Normalization normalization = Normalization::unit_power,
                         SpectrumShape shape = SpectrumShape::altboc_closed_form);

/// The closed form before scaling. The removable singularities at f = 0 and
/// at a = cos(pi f / 2 f_sc) = 0 are replaced by the mean of the values 1 Hz
/// either side; small negative excursions of the bracket are clamped to 0.
double psd_raw(const SpectrumModel& model, double f);
double psd(const SpectrumModel& model, double f);

/// Integral of psd over [f_lo, f_hi]. Throws ArgumentError for f_lo > f_hi.
double band_power_fraction(const SpectrumModel& model, double f_lo, double f_hi);

/// Power shares from the Fourier series of the subcarrier tables: share of
/// the single and product terms, first-harmonic share of the single
/// subcarrier and third-harmonic share of the product subcarrier.
struct HarmonicShares {
    double single_power = 0.0;
    double product_power = 0.0;
    double single_first_harmonic = 0.0;
    double product_third_harmonic = 0.0;

    double main_lobes() const { return single_power * single_first_harmonic; }
    double third_harmonics() const { return product_power * product_third_harmonic; }
};
HarmonicShares harmonic_shares(const waveform::SubcarrierTables& tables);

/// Zero-Doppler pilot correlation (R(tau) e^{-j 2 pi f_sc tau} + R(tau) e^{+j 2 pi f_sc tau}) / 2,
/// with R the unit triangle of half-width one chip. Halving puts the zero-delay
/// value at 1; the shape is 2 R(tau) cos(2 pi f_sc tau) up to that factor.
cplx pilot_acf_analytic(const waveform::SignalConfig& cfg, double tau);

/// Which correlation the receiver sees. single_sideband: the E5a-Q replica
/// against one sideband, a triangle envelope band-limited to the symmetric
/// part of the front-end band (B - 2 f_sc). full_band: the two-sideband
/// pilot correlation R(tau) cos(2 pi f_sc tau), band-limited to B.
enum class PilotAcfView { single_sideband, full_band };

/// Band-limited, unit-peak correlation at offset `tau_chips`. band_hz may be
/// +infinity for the ideal (unfiltered) curve.
double bandlimited_pilot_acf(const waveform::SignalConfig& cfg, double band_hz, PilotAcfView view,
                             double tau_chips);

/// Tabulated band-limited correlation for repeated evaluation, linear
/// interpolation on a fine grid over [-span, span] chips, zero outside.
class AcfTable {
public:
    AcfTable(const waveform::SignalConfig& cfg, double band_hz, PilotAcfView view, double span_chips = 3.0,
             double step_chips = 1.0 / 2048.0);
    double operator()(double tau_chips) const;
    double span() const { return span_; }

private:
    std::vector<double> values_;
    double span_ = 0.0;
    double step_ = 0.0;
};

struct AcfCurve {
    std::vector<double> delays;  // seconds
    std::vector<cplx> values;    // unit modulus at the peak, peak phase removed
};

/// Brute-force circular cross-correlation of `iq` against `replica` on a
/// one-sample lag grid over [-max_lag, max_lag]. Values are normalized by
/// the buffer energies and de-rotated by the phase of the largest one, so a
/// clean self-correlation reads 1 at lag 0. Throws ShapeError on a
/// sample-rate mismatch or a replica longer than the signal.
AcfCurve empirical_acf(const IqBuffer& iq, const IqBuffer& replica, double max_lag);

struct PsdEstimate {
    std::vector<double> freqs;    // Hz, ascending, [-fs/2, fs/2)
    std::vector<double> density;  // power per Hz
    double resolution_hz = 0.0;

    double integral() const;
};

/// Mean of Hann-tapered periodograms, 50% overlap. The density integrates to
/// the buffer mean power.
PsdEstimate welch_psd(const IqBuffer& iq, std::size_t segment = 16384);

/// Least-squares decomposition of a PSD into aliased sinc^2(f/f_p) lobes
/// centred on the odd subcarrier harmonics +-n f_sc. fractions[k] is the
/// power of harmonic pair n = 2k + 1 over the PSD's total power.
struct LobeFit {
    std::vector<int> harmonics;
    std::vector<double> fractions;
    double residual_rms = 0.0;
};
LobeFit harmonic_lobe_fit(const PsdEstimate& psd, double chip_rate_hz, double subcarrier_hz, double sample_rate_hz,
                          int max_harmonic = 9);

/// Centroid sum f P(f) / sum P(f) of an estimate.
double spectral_centroid(const PsdEstimate& psd);

}  // namespace altboc::spectrum
