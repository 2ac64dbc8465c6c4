#include "doctest.h"

#include "altboc/channel.hpp"
#include "altboc/spectrum.hpp"
#include "altboc/waveform.hpp"

using namespace altboc;
using namespace altboc::channel;
using waveform::SignalConfig;

namespace {

IqBuffer desk_signal(double duration, double fs = 6e6, int prn = 4)
{
    SignalConfig cfg = SignalConfig::desk_scale();
    cfg.sample_rate_hz = fs;
    const auto sat = waveform::make_satellite(prn, cfg, duration, {.code_mode = waveform::CodeMode::synthetic});
    return waveform::modulate_exact(sat.components, waveform::SubcarrierTables::icd(), cfg, duration);
}

IqBuffer tone(double f, double fs, std::size_t n, double amp = 1.0)
{
    IqBuffer t;
    t.sample_rate_hz = fs;
    for (std::size_t i = 0; i < n; ++i) t.samples.push_back(std::polar(amp, kTwoPi * f * i / fs));
    return t;
}

// C/N0 from the known clean signal: project, then measure the residual.
double measured_cn0_dbhz(const IqBuffer& rx, const IqBuffer& clean)
{
    cplx num{};
    double den = 0.0;
    for (std::size_t n = 0; n < rx.size(); ++n) {
        num += rx.samples[n] * std::conj(clean.samples[n]);
        den += std::norm(clean.samples[n]);
    }
    const cplx a = num / den;
    double noise = 0.0;
    for (std::size_t n = 0; n < rx.size(); ++n) noise += std::norm(rx.samples[n] - a * clean.samples[n]);
    noise /= static_cast<double>(rx.size());
    const double c = std::norm(a) * den / static_cast<double>(rx.size());
    return ratio_to_db(c / (noise / rx.sample_rate_hz));
}

}  // namespace

TEST_CASE("identity channel and zero-amplitude rays")
{
    const auto x = desk_signal(1e-3);
    const auto y = apply_channel(x, {});
    double err = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) err = std::max(err, std::abs(y.samples[n] - x.samples[n]));
    CHECK(err < 1e-9);

    ChannelSpec with_ray;
    with_ray.code_delay = 3.3 / x.sample_rate_hz;
    with_ray.doppler_hz = 1200.0;
    ChannelSpec no_ray = with_ray;
    with_ray.multipath_rays.push_back({.extra_delay = 1e-7, .amplitude_ratio = 0.0, .phase = 1.0});
    CHECK(apply_channel(x, with_ray).samples == apply_channel(x, no_ray).samples);
}

TEST_CASE("fractional delay is recovered by the correlation peak")
{
    const auto x = desk_signal(1e-3);
    ChannelSpec spec;
    spec.code_delay = 1000.5 / x.sample_rate_hz;
    const auto y = apply_channel(x, spec);
    IqBuffer rep = x;
    rep.samples.resize(4000);
    const auto curve = spectrum::empirical_acf(y, rep, 1100.0 / x.sample_rate_hz);
    std::size_t best = 0;
    for (std::size_t i = 0; i < curve.values.size(); ++i)
        if (std::abs(curve.values[i]) > std::abs(curve.values[best])) best = i;
    const long lag = std::lround(curve.delays[best] * x.sample_rate_hz);
    CHECK((lag == 1000 || lag == 1001));

    // integer delay is an exact shift
    const auto d = fractional_delay(x, 7.0);
    CHECK(d.samples[6] == cplx{});
    CHECK(d.samples[100] == x.samples[93]);
    CHECK_THROWS_AS(fractional_delay(x, static_cast<double>(x.size()) + 1.0), ArgumentError);
    spec.code_delay = 2.0 * x.duration();
    CHECK_THROWS_AS(apply_channel(x, spec), ArgumentError);
    CHECK_THROWS_AS(fractional_delay(x, -1.0), ArgumentError);
}

TEST_CASE("channel linearity, determinism and energy")
{
    const auto x = desk_signal(1e-3);
    ChannelSpec spec;
    spec.code_delay = 12.25 / x.sample_rate_hz;
    spec.doppler_hz = -3300.0;
    spec.carrier_phase = 0.4;
    spec.multipath_rays.push_back({.extra_delay = 0.3e-6, .amplitude_ratio = 0.5, .phase = 2.0});
    IqBuffer ax = x;
    const cplx a(1.7, -0.3);
    for (auto& s : ax.samples) s *= a;
    const auto y = apply_channel(x, spec);
    const auto ya = apply_channel(ax, spec);
    double err = 0.0;
    for (std::size_t n = 0; n < y.size(); ++n) err = std::max(err, std::abs(ya.samples[n] - a * y.samples[n]));
    CHECK(err < 1e-12);
    CHECK(apply_channel(x, spec).samples == y.samples);

    ChannelSpec rot;
    rot.doppler_hz = 2500.0;
    rot.carrier_phase = 1.0;
    CHECK(mean_power(apply_channel(x, rot).samples) == doctest::Approx(mean_power(x.samples)).epsilon(1e-6));

    ChannelSpec bad;
    bad.multipath_rays.push_back({.extra_delay = 0.0, .amplitude_ratio = 1.5});
    CHECK_THROWS_AS(apply_channel(x, bad), ArgumentError);
}

TEST_CASE("thermal noise at the requested C/N0")
{
    const auto x = desk_signal(0.1);
    CHECK(add_awgn(x, std::numeric_limits<double>::infinity(), 1).samples == x.samples);
    const auto y = add_awgn(x, 45.0, 11);
    CHECK(std::abs(measured_cn0_dbhz(y, x) - 45.0) < 0.5);

    const auto z = add_awgn(x, 45.0, 12);
    CHECK(z.samples != y.samples);
    CHECK(add_awgn(x, 45.0, 11).samples == y.samples);
    double py = 0.0, pz = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        py += std::norm(y.samples[n] - x.samples[n]);
        pz += std::norm(z.samples[n] - x.samples[n]);
    }
    CHECK(py / pz == doctest::Approx(1.0).epsilon(0.01));

    IqBuffer empty = x;
    for (auto& s : empty.samples) s = 0.0;
    CHECK_THROWS_AS(add_awgn(empty, 40.0, 1), ArgumentError);
}

TEST_CASE("multiplicative noise moments")
{
    SignalConfig cfg;  // 60 Msps, 1 ms code
    const auto sat = waveform::make_satellite(17, cfg, 1e-3);
    const auto x = waveform::modulate_exact(sat.components, waveform::SubcarrierTables::icd(), cfg, 1e-3);
    MultiplicativeNoiseSpec off;
    off.component_sigma = 0.0;
    CHECK(apply_multiplicative_noise(x, off).samples == x.samples);

    MultiplicativeNoiseSpec spec{.component_count = 3, .component_sigma = 0.2, .rng_seed = 9};
    const auto y = apply_multiplicative_noise(x, spec);
    CHECK(mean_power(y.samples) / mean_power(x.samples) == doctest::Approx(1.0 + 3 * 0.04).epsilon(0.02));
    CHECK(apply_multiplicative_noise(x, spec).samples == y.samples);
    spec.component_count = 0;
    CHECK_THROWS_AS(apply_multiplicative_noise(x, spec), ArgumentError);
}

TEST_CASE("Butterworth low-pass response")
{
    const double fs = 10e6;
    FilterSpec spec{.order = 8, .cutoff_hz = 1e6};
    const auto f = SosFilter::butterworth(spec, fs);
    REQUIRE(f.sections().size() == 4);
    CHECK(std::abs(f.response(0.0) - 1.0) < 1e-12);
    CHECK(std::abs(f.response(1e6)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
    CHECK(ratio_to_db(std::norm(f.response(2e6))) < -40.0);
    CHECK(f.group_delay(0.0) > 0.0);

    // constant input settles to the same constant
    IqBuffer dc;
    dc.sample_rate_hz = fs;
    dc.samples.assign(4000, cplx(0.3, -1.1));
    const auto y = lowpass_filter(dc, spec);
    CHECK(std::abs(y.samples.back() - cplx(0.3, -1.1)) < 1e-6);

    // tone at twice the cutoff, measured after the transient
    const auto t = lowpass_filter(tone(2e6, fs, 20000), spec);
    double p = 0.0;
    for (std::size_t n = 10000; n < t.size(); ++n) p += std::norm(t.samples[n]);
    CHECK(ratio_to_db(p / 10000.0) < -40.0);

    // default cutoff is 0.8 x Nyquist
    CHECK(FilterSpec{}.effective_cutoff(fs) == doctest::Approx(4e6));
    CHECK_THROWS_AS(SosFilter::butterworth({.order = 7, .cutoff_hz = 1e6}, fs), ConfigurationError);
    CHECK_THROWS_AS(SosFilter::butterworth({.order = 8, .cutoff_hz = 6e6}, fs), ConfigurationError);
    CHECK_THROWS_AS(SosFilter::butterworth({.order = 8, .cutoff_hz = 1e-10}, 1e6), ConfigurationError);
}

TEST_CASE("group delay matches the measured delay of a narrowband pulse")
{
    const double fs = 10e6;
    const auto f = SosFilter::butterworth({.order = 8, .cutoff_hz = 2e6}, fs);
    // Gaussian envelope on a 0.5 MHz carrier; centroid of |y|^2 minus centroid of |x|^2
    IqBuffer x;
    x.sample_rate_hz = fs;
    for (int n = 0; n < 8192; ++n) {
        const double t = (n - 2000) / 300.0;
        x.samples.push_back(std::exp(-0.5 * t * t) * std::polar(1.0, kTwoPi * 0.5e6 * n / fs));
    }
    const auto y = f.apply(x);
    auto centre = [](const IqBuffer& b) {
        double num = 0.0, den = 0.0;
        for (std::size_t n = 0; n < b.size(); ++n) num += n * std::norm(b.samples[n]), den += std::norm(b.samples[n]);
        return num / den;
    };
    CHECK((centre(y) - centre(x)) / fs == doctest::Approx(f.group_delay(0.5e6)).epsilon(0.02));
}

TEST_CASE("brickwall band limit")
{
    const double fs = 8e6;
    IqBuffer x = tone(1e6, fs, 8000);
    const auto far = tone(3e6, fs, 8000, 0.5);
    for (std::size_t n = 0; n < x.size(); ++n) x.samples[n] += far.samples[n];
    const auto y = bandlimit(x, 4e6);
    CHECK(mean_power(y.samples) == doctest::Approx(1.0).epsilon(1e-9));
    const auto z = bandlimit(x, 2e6, 3e6);
    CHECK(mean_power(z.samples) == doctest::Approx(0.25).epsilon(1e-9));
}
