#include "doctest.h"

#include <algorithm>
#include <set>

#include "altboc/fft.hpp"
#include "altboc/waveform.hpp"

using namespace altboc;
using namespace altboc::waveform;

namespace {

std::array<ChipSequence, 4> constant_codes(const SignalConfig& cfg, std::int8_t v = 1)
{
    std::array<ChipSequence, 4> codes;
    const ChannelLabel labels[4] = {ChannelLabel::E5aI, ChannelLabel::E5aQ, ChannelLabel::E5bI, ChannelLabel::E5bQ};
    for (int c = 0; c < 4; ++c) {
        codes[c].chips.assign(cfg.primary_code_length, v);
        codes[c].channel_label = labels[c];
    }
    return codes;
}

SignalConfig small_config()
{
    SignalConfig cfg = SignalConfig::desk_scale();
    cfg.sample_rate_hz = 8.0 * cfg.subcarrier_hz;  // one sample per subcarrier slot
    return cfg;
}

// Brickwall |f| <= half_band applied through a full-length FFT.
std::vector<cplx> brickwall(const std::vector<cplx>& x, double fs, double half_band)
{
    auto X = fft(x);
    const std::size_t n = X.size();
    for (std::size_t k = 0; k < n; ++k) {
        const double f = (k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - n) * fs / n;
        if (std::abs(f) > half_band) X[k] = 0.0;
    }
    return ifft(X);
}

double centroid(const std::vector<cplx>& x, double fs)
{
    auto X = fft(x);
    const std::size_t n = X.size();
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = (k < n / 2 ? static_cast<double>(k) : static_cast<double>(k) - n) * fs / n;
        num += f * std::norm(X[k]);
        den += std::norm(X[k]);
    }
    return num / den;
}

// Counts distinct n-bit windows over one period: 2^n - 1 means maximal length.
bool is_maximal(std::uint32_t poly)
{
    const int deg = std::bit_width(poly) - 1;
    const std::size_t period = (std::size_t{1} << deg) - 1;
    const auto seq = lfsr_sequence(poly, 1, period + deg);
    std::vector<bool> seen(period + 1, false);
    for (std::size_t k = 0; k < period; ++k) {
        std::uint32_t w = 0;
        for (int i = 0; i < deg; ++i) w |= static_cast<std::uint32_t>(seq[k + i]) << i;
        if (w == 0 || seen[w]) return false;
        seen[w] = true;
    }
    return true;
}

}  // namespace

TEST_CASE("primary code PRN 17 E5a-Q matches the standalone register oracle")
{
    SignalConfig cfg;
    const auto code = generate_primary_code(17, ChannelLabel::E5aQ, cfg);
    REQUIRE(code.size() == 10230);
    CHECK(PrnRegistry::builtin().start_value(ChannelLabel::E5aQ, 17) == 010671);
    // logic-1 chips (bipolar -1) of the first 32, and the chip sum over the period
    const std::string expected = "01100010011101001101101101110100";
    std::string got;
    for (int k = 0; k < 32; ++k) got += code[k] < 0 ? '1' : '0';
    CHECK(got == expected);
    int sum = 0;
    for (auto c : code.chips) sum += c;
    CHECK(sum == -14);
    for (auto c : code.chips) REQUIRE((c == 1 || c == -1));
}

TEST_CASE("primary codes are deterministic and quasi-orthogonal")
{
    SignalConfig cfg;
    const auto a = generate_primary_code(17, ChannelLabel::E5aQ, cfg);
    const auto b = generate_primary_code(17, ChannelLabel::E5aQ, cfg);
    CHECK(a.chips == b.chips);
    const auto i = generate_primary_code(17, ChannelLabel::E5aI, cfg);
    double rho = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) rho += a[k] * i[k];
    rho /= static_cast<double>(a.size());
    CHECK(std::abs(rho) < 0.05);
}

TEST_CASE("code registry and label errors")
{
    SignalConfig cfg;
    CHECK_THROWS_AS(generate_primary_code(99, ChannelLabel::E5aQ, cfg), RegistryError);
    CHECK_THROWS_AS(channel_from_string("L1-CA"), ArgumentError);
    CHECK(channel_from_string("E5b-Q") == ChannelLabel::E5bQ);
    CHECK(to_string(ChannelLabel::E5aI) == "E5a-I");
}

TEST_CASE("register and synthetic polynomials are maximal length")
{
    for (auto label : {ChannelLabel::E5aI, ChannelLabel::E5bI, ChannelLabel::E5bQ}) {
        const auto [p1, p2] = register_polynomials(label);
        CHECK(is_maximal(p1));
        CHECK(is_maximal(p2));
    }
    for (int deg = 5; deg <= 18; ++deg)
        for (int idx : {0, 1}) CHECK_MESSAGE(is_maximal(synthetic_polynomial(deg, idx)), "degree " << deg);
    CHECK_THROWS_AS(synthetic_polynomial(4), ArgumentError);
}

TEST_CASE("synthetic codes have the requested length and balance")
{
    SignalConfig cfg = SignalConfig::desk_scale();
    const auto c = generate_primary_code(3, ChannelLabel::E5aQ, cfg, CodeMode::synthetic);
    REQUIRE(c.size() == 1023);
    int sum = 0;
    for (auto v : c.chips) sum += v;
    CHECK(std::abs(sum) <= 65);  // family bound 2^((n+2)/2) + 1 for n = 10
    const auto d = generate_primary_code(4, ChannelLabel::E5aQ, cfg, CodeMode::synthetic);
    CHECK(c.chips != d.chips);
    // distinct channels of one PRN are not cyclic shifts: peak circular cross-correlation stays small
    const auto e = generate_primary_code(3, ChannelLabel::E5aI, cfg, CodeMode::synthetic);
    int worst = 0;
    for (std::size_t lag = 0; lag < c.size(); ++lag) {
        int acc = 0;
        for (std::size_t k = 0; k < c.size(); ++k) acc += c[k] * e[(k + lag) % c.size()];
        worst = std::max(worst, std::abs(acc));
    }
    CHECK(worst < 0.25 * c.size());
}

TEST_CASE("build_components identity, data flips and product closure")
{
    SignalConfig cfg = small_config();
    auto codes = constant_codes(cfg);
    auto data_a = make_nav_stream(ChannelLabel::E5aI, 3, cfg.code_period(), 1);
    auto data_b = make_nav_stream(ChannelLabel::E5bI, 3, cfg.code_period(), 2);
    std::fill(data_a.symbols.begin(), data_a.symbols.end(), 1);
    std::fill(data_b.symbols.begin(), data_b.symbols.end(), 1);
    auto comp = build_components(codes, data_a, data_b, cfg);
    for (auto* v : {&comp.e_aI, &comp.e_aQ, &comp.e_bI, &comp.e_bQ, &comp.ebar_aI, &comp.ebar_aQ, &comp.ebar_bI,
                    &comp.ebar_bQ})
        CHECK(std::all_of(v->begin(), v->end(), [](auto x) { return x == 1; }));

    data_a.symbols[1] = -1;
    comp = build_components(codes, data_a, data_b, cfg);
    const std::size_t L = cfg.primary_code_length;
    for (std::size_t k = 0; k < comp.chip_count(); ++k) CHECK(comp.e_aI[k] == ((k / L == 1) ? -1 : 1));

    // all 16 sign patterns
    for (int m = 0; m < 16; ++m) {
        auto c2 = constant_codes(cfg);
        for (int b = 0; b < 4; ++b)
            if (m & (1 << b)) std::fill(c2[b].chips.begin(), c2[b].chips.end(), static_cast<std::int8_t>(-1));
        std::fill(data_a.symbols.begin(), data_a.symbols.end(), 1);
        auto cs = build_components(c2, data_a, data_b, cfg);
        for (auto* v : {&cs.ebar_aI, &cs.ebar_aQ, &cs.ebar_bI, &cs.ebar_bQ}) CHECK(((*v)[0] == 1 || (*v)[0] == -1));
        CHECK(cs.ebar_aI[0] == cs.e_aQ[0] * cs.e_bI[0] * cs.e_bQ[0]);
        CHECK(cs.ebar_bQ[0] == cs.e_bI[0] * cs.e_aI[0] * cs.e_aQ[0]);
    }

    auto short_codes = codes;
    short_codes[2].chips.pop_back();
    CHECK_THROWS_AS(build_components(short_codes, data_a, data_b, cfg), ShapeError);
    auto odd = data_a;
    odd.symbol_period = 1.5 * cfg.code_period();
    CHECK_THROWS_AS(build_components(codes, odd, data_b, cfg), ShapeError);
}

TEST_CASE("pilot channels carry the constant stream")
{
    const auto nav = make_nav_stream(ChannelLabel::E5aQ, 10, 0.02, 5);
    CHECK(std::all_of(nav.symbols.begin(), nav.symbols.end(), [](auto s) { return s == 1; }));
    const auto data = make_nav_stream(ChannelLabel::E5aI, 200, 0.02, 5);
    const int plus = static_cast<int>(std::count(data.symbols.begin(), data.symbols.end(), 1));
    CHECK(plus > 60);
    CHECK(plus < 140);
}

TEST_CASE("exact modulator has constant envelope and eight phases")
{
    SignalConfig cfg = SignalConfig::desk_scale();
    cfg.sample_rate_hz = 30e6;
    const auto sat = make_satellite(11, cfg, 2e-3, {.code_mode = CodeMode::synthetic});
    const auto iq = modulate_exact(sat.components, SubcarrierTables::icd(), cfg, 2e-3);
    REQUIRE(iq.size() == 60000);
    std::vector<double> mags;
    for (const auto& s : iq.samples) mags.push_back(std::abs(s));
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
    const double med = mags[mags.size() / 2];
    double dev = 0.0;
    for (const auto& s : iq.samples) dev = std::max(dev, std::abs(std::abs(s) - med) / med);
    CHECK(dev < 1e-9);
    CHECK(med == doctest::Approx(1.0).epsilon(1e-12));

    // 16 patterns x 8 slots -> exactly 8 distinct phases
    SignalConfig one = small_config();
    std::set<long> phases;
    for (int m = 0; m < 16; ++m) {
        auto codes = constant_codes(one);
        for (int b = 0; b < 4; ++b)
            if (m & (1 << b)) std::fill(codes[b].chips.begin(), codes[b].chips.end(), static_cast<std::int8_t>(-1));
        const auto da = make_nav_stream(ChannelLabel::E5aQ, 1, one.code_period(), 0);
        const auto db = make_nav_stream(ChannelLabel::E5bQ, 1, one.code_period(), 0);
        const auto comp = build_components(codes, da, db, one);
        const auto out = modulate_exact(comp, SubcarrierTables::icd(), one, 8.0 / (8.0 * one.subcarrier_hz));
        REQUIRE(out.size() == 8);
        for (const auto& s : out.samples) phases.insert(std::lround(std::arg(s) * 1e6));
    }
    CHECK(phases.size() == 8);
}

TEST_CASE("modulators reject durations that are not whole subcarrier slots")
{
    SignalConfig cfg = small_config();
    const auto sat = make_satellite(2, cfg, cfg.code_period(), {.code_mode = CodeMode::synthetic});
    const double slot = 1.0 / (8.0 * cfg.subcarrier_hz);
    CHECK_THROWS_AS(modulate_exact(sat.components, SubcarrierTables::icd(), cfg, 2.5 * slot), ArgumentError);
    CHECK_THROWS_AS(modulate_approx(sat.components, cfg, -1.0), ArgumentError);
    CHECK_NOTHROW(modulate_exact(sat.components, SubcarrierTables::icd(), cfg, 16 * slot));
}

TEST_CASE("subcarrier tables take four values")
{
    const auto t = SubcarrierTables::icd();
    std::set<long> s, p;
    for (double v : t.single) s.insert(std::lround(v * 1e9));
    for (double v : t.product) p.insert(std::lround(v * 1e9));
    CHECK(s.size() == 4);
    CHECK(p.size() == 4);
}

TEST_CASE("exact signal without product terms approaches the approximate model after band-limiting")
{
    SignalConfig cfg = SignalConfig::desk_scale();
    cfg.sample_rate_hz = 8.0 * cfg.subcarrier_hz * 4.0;
    const double dur = cfg.code_period();
    auto sat = make_satellite(5, cfg, dur, {.code_mode = CodeMode::synthetic});
    const auto full = modulate_exact(sat.components, SubcarrierTables::icd(), cfg, dur);
    auto comp = sat.components;
    for (auto* v : {&comp.ebar_aI, &comp.ebar_aQ, &comp.ebar_bI, &comp.ebar_bQ}) std::fill(v->begin(), v->end(), 0);
    const auto exact = modulate_exact(comp, SubcarrierTables::icd(), cfg, dur);
    const auto approx = modulate_approx(sat.components, cfg, dur);
    const double half_band = 0.5 * cfg.main_lobe_bandwidth_hz();

    // the staircase subcarrier's first harmonic is 4/pi times the unit exponential
    const auto e = brickwall(exact.samples, cfg.sample_rate_hz, half_band);
    const auto a = brickwall(approx.samples, cfg.sample_rate_hz, half_band);
    double diff = 0.0, ref = 0.0;
    for (std::size_t n = 0; n < e.size(); ++n) {
        diff += std::norm(e[n] - (4.0 / std::numbers::pi) * a[n]);
        ref += std::norm(e[n]);
    }
    CHECK(diff / ref < 0.02);

    // removed product terms plus out-of-band harmonics
    const auto f = brickwall(full.samples, cfg.sample_rate_hz, half_band);
    double d2 = 0.0, tot = 0.0;
    for (std::size_t n = 0; n < f.size(); ++n) {
        d2 += std::norm(f[n] - (4.0 / std::numbers::pi) * a[n]);
        tot += std::norm(full.samples[n]);
    }
    CHECK(d2 / tot < 0.1464);
}

TEST_CASE("approximate model sidebands")
{
    SignalConfig cfg = SignalConfig::desk_scale();
    cfg.sample_rate_hz = 8.0 * cfg.subcarrier_hz;
    const double dur = cfg.code_period();
    auto sat = make_satellite(7, cfg, dur, {.code_mode = CodeMode::synthetic});
    auto only_a = sat.components;
    std::fill(only_a.e_bI.begin(), only_a.e_bI.end(), 0);
    std::fill(only_a.e_bQ.begin(), only_a.e_bQ.end(), 0);
    const auto lo = modulate_approx(only_a, cfg, dur);
    CHECK(centroid(lo.samples, cfg.sample_rate_hz) == doctest::Approx(-cfg.subcarrier_hz).epsilon(0.1));

    auto swapped = only_a;
    std::swap(swapped.e_aI, swapped.e_bI);
    std::swap(swapped.e_aQ, swapped.e_bQ);
    const auto hi = modulate_approx(swapped, cfg, dur);
    CHECK(centroid(hi.samples, cfg.sample_rate_hz) ==
          doctest::Approx(-centroid(lo.samples, cfg.sample_rate_hz)).epsilon(0.01));
    CHECK(mean_power(hi.samples) == doctest::Approx(mean_power(lo.samples)));
}

TEST_CASE("upconversion")
{
    SignalConfig cfg = SignalConfig::desk_scale();
    cfg.sample_rate_hz = 30e6;
    const double dur = cfg.code_period();
    const auto sat = make_satellite(9, cfg, dur, {.code_mode = CodeMode::synthetic});
    auto bb = modulate_approx(sat.components, cfg, dur);
    bb.samples = brickwall(bb.samples, cfg.sample_rate_hz, 0.5 * cfg.main_lobe_bandwidth_hz());
    const auto same = upconvert_to_if(bb, 0.0, cfg.main_lobe_bandwidth_hz());
    CHECK(same.samples == bb.samples);
    const auto up = upconvert_to_if(bb, 2e6, cfg.main_lobe_bandwidth_hz());
    CHECK(mean_power(up.samples) == doctest::Approx(mean_power(bb.samples)).epsilon(1e-12));
    CHECK(centroid(up.samples, cfg.sample_rate_hz) - centroid(bb.samples, cfg.sample_rate_hz) ==
          doctest::Approx(2e6).epsilon(1e-3));
    CHECK_THROWS_AS(upconvert_to_if(bb, 13e6, cfg.main_lobe_bandwidth_hz()), ConfigurationError);
}

TEST_CASE("chip and slot clocks carry no accumulated phase error")
{
    SignalConfig cfg;  // 60 Msps, 10.23 Mchip/s: 1023 chips per 6000 samples
    for (std::size_t n : {std::size_t{0}, std::size_t{5999}, std::size_t{6000}, std::size_t{59'999'999},
                          std::size_t{600'000'001}, std::size_t{3'600'000'007}}) {
        const std::int64_t exact = static_cast<std::int64_t>((static_cast<unsigned __int128>(n) * 1023u) / 6000u);
        CHECK(clock_index(n, cfg.chip_rate_hz, cfg.sample_rate_hz) == exact);
        const std::int64_t slots = static_cast<std::int64_t>((static_cast<unsigned __int128>(n) * 12276u) / 6000u);
        CHECK(clock_index(n, 8.0 * cfg.subcarrier_hz, cfg.sample_rate_hz) == slots);
    }
}

TEST_CASE("configuration invariants")
{
    SignalConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.subcarrier_period() * cfg.subcarrier_hz == doctest::Approx(1.0).epsilon(1e-15));
    auto bad = cfg;
    bad.subcarrier_hz = 14e6;
    CHECK_THROWS_AS(bad.validate(), ConfigurationError);
    bad = cfg;
    bad.sample_rate_hz = 50e6;
    CHECK_THROWS_AS(bad.validate(), ConfigurationError);
}

TEST_CASE("secondary overlays apply on pilots")
{
    SignalConfig cfg = SignalConfig::desk_scale();
    const auto ov = make_secondary_overlay(ChannelLabel::E5aQ, 3, 150, cfg);
    CHECK(ov.symbols.size() == 150);
    CHECK(ov.symbols[0] == ov.symbols[100]);
    CHECK_THROWS_AS(make_secondary_overlay(ChannelLabel::E5aI, 3, 10, cfg), ArgumentError);
    const auto sat = make_satellite(3, cfg, 0.02, {.code_mode = CodeMode::synthetic, .secondary_codes = true});
    const std::size_t L = cfg.primary_code_length;
    bool differs = false;
    for (std::size_t p = 0; p < 20; ++p)
        differs |= sat.components.e_aQ[p * L] * sat.codes[1][0] != ov.symbols[p];
    CHECK_FALSE(differs);
}
