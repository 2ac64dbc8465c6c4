#include "altboc/channel.hpp"

#include <cmath>

#include "altboc/fft.hpp"

namespace altboc::channel {

namespace {

constexpr int kHalfTaps = 8;  // 16 taps, m = -7..8

double windowed_sinc(double x)
{
    if (std::abs(x) >= kHalfTaps) return 0.0;
    const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * x / kHalfTaps));
    if (std::abs(x) < 1e-15) return 1.0;
    const double px = std::numbers::pi * x;
    return w * std::sin(px) / px;
}

// exp(j (2 pi f t_n + phi)) with t_n = t0 + n / fs, cycles reduced before
// scaling so long buffers keep full phase precision
cplx rotor(double f_hz, double fs, double t0, std::size_t n, double phi)
{
    const double cycles = std::fmod(static_cast<double>(n) * f_hz, fs) / fs + std::fmod(t0 * f_hz, 1.0);
    return std::polar(1.0, kTwoPi * (cycles - std::floor(cycles)) + phi);
}

}  // namespace

void ChannelSpec::validate() const
{
    if (!(code_delay >= 0.0) || !std::isfinite(code_delay))
        throw ArgumentError("ChannelSpec: code_delay must be finite and non-negative");
    if (!std::isfinite(doppler_hz) || !std::isfinite(carrier_phase))
        throw ArgumentError("ChannelSpec: doppler_hz and carrier_phase must be finite");
    if (std::isnan(cn0_dbhz)) throw ArgumentError("ChannelSpec: cn0_dbhz is NaN");
    for (std::size_t i = 0; i < multipath_rays.size(); ++i) {
        const auto& r = multipath_rays[i];
        if (!(r.extra_delay >= 0.0))
            throw ArgumentError("ChannelSpec: multipath_rays[" + std::to_string(i) + "].extra_delay must be >= 0");
        if (!(r.amplitude_ratio >= 0.0 && r.amplitude_ratio <= 1.0))
            throw ArgumentError("ChannelSpec: multipath_rays[" + std::to_string(i) + "].amplitude_ratio must be in [0, 1]");
    }
}

void MultiplicativeNoiseSpec::validate() const
{
    if (component_count < 1) throw ArgumentError("MultiplicativeNoiseSpec: component_count must be >= 1");
    if (!(component_sigma >= 0.0)) throw ArgumentError("MultiplicativeNoiseSpec: component_sigma must be >= 0");
}

double FilterSpec::effective_cutoff(double sample_rate_hz) const
{
    return cutoff_hz > 0.0 ? cutoff_hz : 0.8 * 0.5 * sample_rate_hz;
}

void FilterSpec::validate(double sample_rate_hz) const
{
    if (order < 2 || order % 2 != 0) throw ConfigurationError("FilterSpec: order must be even and >= 2");
    const double fc = effective_cutoff(sample_rate_hz);
    if (!(fc > 0.0 && fc < 0.5 * sample_rate_hz))
        throw ConfigurationError("FilterSpec: cutoff must lie in (0, fs/2)");
}

IqBuffer fractional_delay(const IqBuffer& iq, double delay_samples)
{
    if (!(delay_samples >= 0.0) || !std::isfinite(delay_samples))
        throw ArgumentError("fractional_delay: delay must be finite and non-negative");
    if (delay_samples >= static_cast<double>(iq.size()))
        throw ArgumentError("fractional_delay: delay exceeds the buffer length");
    IqBuffer out;
    out.sample_rate_hz = iq.sample_rate_hz;
    out.start_time = iq.start_time;
    out.samples.assign(iq.size(), cplx{});
    const auto whole = static_cast<std::size_t>(std::floor(delay_samples));
    const double mu = delay_samples - static_cast<double>(whole);
    const std::size_t n = iq.size();
    if (mu == 0.0) {
        for (std::size_t i = whole; i < n; ++i) out.samples[i] = iq.samples[i - whole];
        return out;
    }
    std::array<double, 2 * kHalfTaps> taps{};
    for (int m = -kHalfTaps + 1; m <= kHalfTaps; ++m) taps[m + kHalfTaps - 1] = windowed_sinc(m - mu);
    for (std::size_t i = 0; i < n; ++i) {
        cplx acc{};
        // out[i] = sum_m in[i - whole - m] h(m - mu)
        for (int m = -kHalfTaps + 1; m <= kHalfTaps; ++m) {
            const long src = static_cast<long>(i) - static_cast<long>(whole) - m;
            if (src < 0 || src >= static_cast<long>(n)) continue;
            acc += iq.samples[static_cast<std::size_t>(src)] * taps[m + kHalfTaps - 1];
        }
        out.samples[i] = acc;
    }
    return out;
}

IqBuffer apply_channel(const IqBuffer& iq, const ChannelSpec& spec)
{
    iq.validate();
    spec.validate();
    const double fs = iq.sample_rate_hz;
    auto path = [&](double delay, double amplitude, double phase) {
        IqBuffer d = fractional_delay(iq, delay * fs);
        for (std::size_t n = 0; n < d.size(); ++n)
            d.samples[n] *= amplitude * rotor(spec.doppler_hz, fs, iq.start_time, n, spec.carrier_phase + phase);
        return d;
    };
    IqBuffer out = path(spec.code_delay, 1.0, 0.0);
    for (const auto& ray : spec.multipath_rays) {
        if (ray.amplitude_ratio == 0.0) continue;
        const IqBuffer r = path(spec.code_delay + ray.extra_delay, ray.amplitude_ratio, ray.phase);
        for (std::size_t n = 0; n < out.size(); ++n) out.samples[n] += r.samples[n];
    }
    return out;
}

IqBuffer add_awgn(const IqBuffer& iq, double cn0_dbhz, std::uint64_t rng_seed)
{
    iq.validate();
    if (std::isinf(cn0_dbhz) && cn0_dbhz > 0) return iq;
    if (std::isnan(cn0_dbhz)) throw ArgumentError("add_awgn: cn0 is NaN");
    const double power = mean_power(iq.samples);
    if (!(power > 0.0)) throw ArgumentError("add_awgn: signal power must be positive");
    const double n0 = power / db_to_ratio(cn0_dbhz);
    const double sigma = std::sqrt(0.5 * n0 * iq.sample_rate_hz);  // per real component
    auto eng = make_engine(rng_seed, 0xA3);
    std::normal_distribution<double> g(0.0, sigma);
    IqBuffer out = iq;
    for (auto& s : out.samples) {
        const double re = g(eng);
        const double im = g(eng);
        s += cplx(re, im);
    }
    return out;
}

IqBuffer apply_multiplicative_noise(const IqBuffer& iq, const MultiplicativeNoiseSpec& spec)
{
    iq.validate();
    spec.validate();
    IqBuffer out = iq;
    if (spec.component_sigma == 0.0) return out;
    auto eng = make_engine(spec.rng_seed, 0x4D);
    std::normal_distribution<double> g(0.0, spec.component_sigma);
    for (auto& s : out.samples) {
        double w = 0.0;
        for (int k = 0; k < spec.component_count; ++k) w += g(eng);
        s *= 1.0 + w;
    }
    return out;
}

SosFilter SosFilter::butterworth(const FilterSpec& spec, double sample_rate_hz)
{
    spec.validate(sample_rate_hz);
    const double fc = spec.effective_cutoff(sample_rate_hz);
    const double K = 2.0 * sample_rate_hz;
    const double wc = K * std::tan(std::numbers::pi * fc / sample_rate_hz);
    SosFilter f;
    f.fs_ = sample_rate_hz;
    const int N = spec.order;
    for (int k = 0; k < N / 2; ++k) {
        // left-half-plane pole pair at angle pi (2k + N + 1) / (2N)
        const double re = std::cos(std::numbers::pi * (2.0 * k + N + 1) / (2.0 * N));
        const double a0 = K * K - 2.0 * re * wc * K + wc * wc;
        Biquad b;
        b.b0 = wc * wc / a0;
        b.b1 = 2.0 * b.b0;
        b.b2 = b.b0;
        b.a1 = (2.0 * wc * wc - 2.0 * K * K) / a0;
        b.a2 = (K * K + 2.0 * re * wc * K + wc * wc) / a0;
        // poles of z^2 + a1 z + a2; both inside iff |a2| < 1 and |a1| < 1 + a2
        if (!(std::abs(b.a2) < 1.0 - 1e-14 && std::abs(b.a1) < 1.0 + b.a2 - 1e-14) || !std::isfinite(b.a1))
            throw ConfigurationError("SosFilter: section " + std::to_string(k) + " is not stable at this cutoff");
        f.sections_.push_back(b);
    }
    return f;
}

IqBuffer SosFilter::apply(const IqBuffer& iq) const
{
    if (std::abs(iq.sample_rate_hz - fs_) > 1e-9 * fs_) throw ShapeError("SosFilter: sample rate mismatch");
    IqBuffer out = iq;
    for (const auto& s : sections_) {
        cplx z1{}, z2{};
        for (auto& x : out.samples) {
            const cplx y = s.b0 * x + z1;
            z1 = s.b1 * x - s.a1 * y + z2;
            z2 = s.b2 * x - s.a2 * y;
            x = y;
        }
    }
    return out;
}

cplx SosFilter::response(double f_hz) const
{
    const cplx z1 = std::polar(1.0, -kTwoPi * f_hz / fs_);
    const cplx z2 = z1 * z1;
    cplx h(1.0, 0.0);
    for (const auto& s : sections_) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return h;
}

double SosFilter::group_delay(double f_hz) const
{
    const double df = 1e-6 * fs_;
    const double dphi = std::arg(response(f_hz + df) / response(f_hz - df));
    return -dphi / (kTwoPi * 2.0 * df);
}

IqBuffer lowpass_filter(const IqBuffer& iq, const FilterSpec& spec)
{
    iq.validate();
    return SosFilter::butterworth(spec, iq.sample_rate_hz).apply(iq);
}

IqBuffer bandlimit(const IqBuffer& iq, double band_hz, double centre_hz)
{
    iq.validate();
    if (!(band_hz > 0.0)) throw ArgumentError("bandlimit: band must be positive");
    auto X = fft(iq.samples);
    const std::size_t n = X.size();
    const double fs = iq.sample_rate_hz;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = (k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n)) * fs /
                         static_cast<double>(n);
        if (std::abs(wrap_symmetric(f - centre_hz, fs)) > 0.5 * band_hz) X[k] = 0.0;
    }
    IqBuffer out;
    out.sample_rate_hz = fs;
    out.start_time = iq.start_time;
    out.samples = ifft(X);
    return out;
}

}  // namespace altboc::channel
