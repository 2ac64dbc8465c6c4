#pragma once

// Propagation and receiver-chain impairments: delay, Doppler, multipath
// rays, thermal noise at a given C/N0, multiplicative noise and the
// Butterworth recovery filter.

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "altboc/common.hpp"

namespace altboc::channel {

struct MultipathRay {
    double extra_delay = 0.0;      // seconds, >= 0
    double amplitude_ratio = 0.0;  // relative to line of sight, [0, 1]
    double phase = 0.0;            // radians
};

struct ChannelSpec {
    double code_delay = 0.0;  // seconds
    double doppler_hz = 0.0;
    double carrier_phase = 0.0;
    /// Applied by add_awgn; +infinity disables thermal noise.
    double cn0_dbhz = std::numeric_limits<double>::infinity();
    std::vector<MultipathRay> multipath_rays;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct MultiplicativeNoiseSpec {
    int component_count = 3;
    double component_sigma = 0.2;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

enum class FilterFamily { butterworth };

struct FilterSpec {
    int order = 8;
    double cutoff_hz = 0.0;  // 0 selects 0.8 x Nyquist
    FilterFamily family = FilterFamily::butterworth;

    double effective_cutoff(double sample_rate_hz) const;
    void validate(double sample_rate_hz) const;
};

/// x(t - delay) on the same sample grid. Integer delays shift exactly;
/// fractional parts use a 16-tap Hann-windowed sinc. Samples before the
/// start are zero. Throws ArgumentError for negative delays or delays
/// longer than the buffer.
IqBuffer fractional_delay(const IqBuffer& iq, double delay_samples);

/// Line of sight delayed by code_delay and rotated by
/// exp(j (2 pi doppler t + carrier_phase)), plus each ray as a further
/// delayed, scaled and phase-rotated copy. Noise is not added here.
IqBuffer apply_channel(const IqBuffer& iq, const ChannelSpec& spec);

/// Complex white Gaussian noise with N0 = mean signal power / C/N0, i.e.
/// per-sample variance N0 * fs. cn0_dbhz = +infinity returns the input.
IqBuffer add_awgn(const IqBuffer& iq, double cn0_dbhz, std::uint64_t rng_seed);

/// out(n) = in(n) (1 + sum_k w_k(n)), w_k real zero-mean Gaussian.
IqBuffer apply_multiplicative_noise(const IqBuffer& iq, const MultiplicativeNoiseSpec& spec);

struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

/// Causal cascade of second-order sections (direct form II transposed).
class SosFilter {
public:
    /// Bilinear-transform Butterworth low-pass with prewarped cutoff; each
    /// section has unit DC gain. Throws ConfigurationError when a pole lands
    /// on or outside the unit circle.
    static SosFilter butterworth(const FilterSpec& spec, double sample_rate_hz);

    const std::vector<Biquad>& sections() const { return sections_; }
    double sample_rate() const { return fs_; }

    IqBuffer apply(const IqBuffer& iq) const;
    cplx response(double f_hz) const;
    /// -d(phase)/d(omega) in seconds at f_hz.
    double group_delay(double f_hz) const;

private:
    std::vector<Biquad> sections_;
    double fs_ = 0.0;
};

IqBuffer lowpass_filter(const IqBuffer& iq, const FilterSpec& spec);

/// Ideal brickwall: keeps |f - centre_hz| <= band_hz / 2 through one FFT.
IqBuffer bandlimit(const IqBuffer& iq, double band_hz, double centre_hz = 0.0);

}  // namespace altboc::channel
