#include "doctest.h"

#include <algorithm>

#include "altboc/spectrum.hpp"

using namespace altboc;
using namespace altboc::spectrum;
using waveform::SignalConfig;

TEST_CASE("closed-form PSD is even and peaks near the subcarrier")
{
    const auto m = make_model(10.23e6, 15.345e6, 51.15e6);
    for (double f : {1.0, 1.2e6, 7.7e6, 15.345e6, 22e6, 46.035e6, 60e6}) CHECK(psd(m, f) == doctest::Approx(psd(m, -f)));
    double best_f = 0.0, best = -1.0;
    for (double f = 0.0; f < 40e6; f += 5e3) {
        const double g = psd(m, f);
        if (g > best) best = g, best_f = f;
    }
    CHECK(std::abs(best_f - 15.345e6) < 0.2 * 10.23e6);
    for (double f : {0.0, 15.345e6, -15.345e6, 46.035e6}) {
        CHECK(std::isfinite(psd(m, f)));
        CHECK(psd(m, f) >= 0.0);
    }
}

TEST_CASE("unit-power normalization and band fractions")
{
    const auto m = make_model(10.23e6, 15.345e6, 51.15e6);
    CHECK(band_power_fraction(m, -25.575e6, 25.575e6) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(band_power_fraction(m, 3e6, 3e6) == 0.0);
    CHECK_THROWS_AS(band_power_fraction(m, 2.0, 1.0), ArgumentError);

    // wide normalization band: partition into the main-lobe and third-harmonic regions
    const double fsc = 15.345e6;
    const auto wide = make_model(10.23e6, fsc, 40.0 * fsc);
    const double main = band_power_fraction(wide, -2 * fsc, 2 * fsc);
    const double third = band_power_fraction(wide, 2 * fsc, 4 * fsc) + band_power_fraction(wide, -4 * fsc, -2 * fsc);
    CHECK(main == doctest::Approx(0.81).epsilon(0.025));
    CHECK(third == doctest::Approx(0.11).epsilon(0.2));
    CHECK_THROWS_AS(make_model(10.23e6, fsc, 0.0), ConfigurationError);
}

TEST_CASE("harmonic shares of the subcarrier tables")
{
    const auto h = harmonic_shares(waveform::SubcarrierTables::icd());
    CHECK(h.single_power == doctest::Approx(0.853553).epsilon(1e-5));
    CHECK(h.product_power == doctest::Approx(0.146447).epsilon(1e-5));
    CHECK(h.single_first_harmonic == doctest::Approx(0.949641).epsilon(1e-5));
    CHECK(h.product_third_harmonic == doctest::Approx(0.614990).epsilon(1e-5));
    CHECK(h.main_lobes() == doctest::Approx(0.81).epsilon(0.005));
    CHECK(h.third_harmonics() == doctest::Approx(0.09).epsilon(0.01));
}

TEST_CASE("analytic pilot correlation")
{
    SignalConfig cfg;
    CHECK(pilot_acf_analytic(cfg, 0.0).real() == doctest::Approx(1.0));
    const double zero = 1.0 / (4.0 * cfg.subcarrier_hz);
    CHECK(zero == doctest::Approx(16.29e-9).epsilon(1e-3));
    CHECK(std::abs(pilot_acf_analytic(cfg, zero)) < 1e-12);
    CHECK(pilot_acf_analytic(cfg, 0.9 * zero).real() > 0.0);
    CHECK(pilot_acf_analytic(cfg, 1.1 * zero).real() < 0.0);
    const double chip = 1.0 / cfg.chip_rate_hz;
    CHECK(std::abs(pilot_acf_analytic(cfg, chip)) == 0.0);
    CHECK(std::abs(pilot_acf_analytic(cfg, -1.7 * chip)) == 0.0);

    int changes = 0;
    double prev = pilot_acf_analytic(cfg, -chip + 1e-12).real();
    double peak = 0.0;
    for (int i = -999; i <= 999; ++i) {
        const double tau = i * chip / 1000.0;
        const cplx v = pilot_acf_analytic(cfg, tau);
        const cplx w = pilot_acf_analytic(cfg, -tau);
        CHECK(std::abs(w - std::conj(v)) < 1e-9);
        if ((v.real() > 0) != (prev > 0) && v.real() != 0.0) ++changes;
        if (v.real() != 0.0) prev = v.real();
        peak = std::max(peak, std::abs(v));
    }
    CHECK(changes >= 2 * static_cast<int>(std::floor(cfg.subcarrier_hz / cfg.chip_rate_hz)));
    CHECK(peak == doctest::Approx(1.0));
}

TEST_CASE("band-limited correlation views")
{
    SignalConfig cfg;
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(bandlimited_pilot_acf(cfg, inf, PilotAcfView::single_sideband, 0.25) == doctest::Approx(0.75));
    CHECK(bandlimited_pilot_acf(cfg, inf, PilotAcfView::full_band, 1.0 / 6.0) == doctest::Approx(0.0).epsilon(1e-12));
    const double b = cfg.main_lobe_bandwidth_hz();
    CHECK(bandlimited_pilot_acf(cfg, b, PilotAcfView::single_sideband, 0.0) == doctest::Approx(1.0));
    CHECK(bandlimited_pilot_acf(cfg, b, PilotAcfView::full_band, 0.0) == doctest::Approx(1.0));
    // band-limiting rounds the peak: below 1 but above the ideal triangle near the tip
    const double r01 = bandlimited_pilot_acf(cfg, b, PilotAcfView::single_sideband, 0.1);
    CHECK(r01 < 1.0);
    CHECK(r01 > 0.9);
    CHECK(bandlimited_pilot_acf(cfg, b, PilotAcfView::single_sideband, 0.3) ==
          doctest::Approx(bandlimited_pilot_acf(cfg, b, PilotAcfView::single_sideband, -0.3)));
    CHECK_THROWS_AS(bandlimited_pilot_acf(cfg, 20e6, PilotAcfView::single_sideband, 0.0), DomainError);

    const AcfTable table(cfg, b, PilotAcfView::single_sideband, 2.0, 1.0 / 1024.0);
    for (double x : {0.0, 0.013, -0.41, 0.9, 1.7})
        CHECK(table(x) == doctest::Approx(bandlimited_pilot_acf(cfg, b, PilotAcfView::single_sideband, x)).epsilon(1e-5));
    CHECK(table(2.5) == 0.0);
}

TEST_CASE("empirical correlation on a self-correlation")
{
    IqBuffer x;
    x.sample_rate_hz = 1e6;
    auto eng = make_engine(3);
    std::normal_distribution<double> g;
    for (int i = 0; i < 4096; ++i) x.samples.emplace_back(g(eng), g(eng));
    const auto curve = empirical_acf(x, x, 5e-6);
    REQUIRE(curve.values.size() == 11);
    CHECK(curve.values[5].real() == doctest::Approx(1.0));
    CHECK(curve.delays[5] == 0.0);
    for (std::size_t i = 0; i < 11; ++i)
        if (i != 5) CHECK(std::abs(curve.values[i]) < 0.1);
    IqBuffer y = x;
    y.sample_rate_hz = 2e6;
    CHECK_THROWS_AS(empirical_acf(x, y, 1e-6), ShapeError);
}

TEST_CASE("Welch estimate obeys Parseval")
{
    IqBuffer x;
    x.sample_rate_hz = 4e6;
    auto eng = make_engine(8);
    std::normal_distribution<double> g;
    for (int i = 0; i < 1 << 17; ++i)
        x.samples.push_back(cplx(g(eng), g(eng)) * 0.7 + std::polar(1.0, kTwoPi * 0.13 * i));
    const auto p = welch_psd(x, 4096);
    CHECK(p.integral() == doctest::Approx(mean_power(x.samples)).epsilon(1e-3));
    CHECK(p.freqs.front() == doctest::Approx(-2e6));
    CHECK(spectral_centroid(p) == doctest::Approx(0.13 * 4e6 / (1.0 + 0.98)).epsilon(0.05));
    CHECK_THROWS_AS(welch_psd(x, 1 << 20), ShapeError);
}

TEST_CASE("lobe decomposition recovers known lobe powers")
{
    const double fp = 1.023e6, fsc = 1.5345e6, fs = 8 * fsc * 2;
    PsdEstimate p;
    p.resolution_hz = fs / 4096;
    const double truth[3] = {0.7, 0.2, 0.1};
    for (int i = 0; i < 4096; ++i) {
        const double f = (i - 2048) * p.resolution_hz;
        double v = 0.0;
        for (int h = 0; h < 3; ++h)
            for (double s : {1.0, -1.0})
                for (int k = -6; k <= 6; ++k) {
                    const double u = (f - s * (2 * h + 1) * fsc + k * fs) / fp;
                    const double sn = u == 0.0 ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
                    v += 0.5 * truth[h] * sn * sn / fp;
                }
        p.freqs.push_back(f);
        p.density.push_back(v);
    }
    const auto fit = harmonic_lobe_fit(p, fp, fsc, fs, 5);
    REQUIRE(fit.fractions.size() == 3);
    // the grid integral of the aliased lobes replaces the continuous one; agreement to 1e-3
    for (int h = 0; h < 3; ++h) CHECK(fit.fractions[h] == doctest::Approx(truth[h]).epsilon(2e-3));
    CHECK(fit.residual_rms < 1e-12);
}
