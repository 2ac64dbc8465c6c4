#include "altboc/waveform.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace altboc::waveform {

namespace {

constexpr double kInvTwoSqrt2 = 0.35355339059327376220;  // 1 / (2 sqrt 2)

std::uint64_t splitmix(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int label_index(ChannelLabel label) { return static_cast<int>(label); }

void check_duration(const ComponentSet& comp, const SignalConfig& cfg, double duration)
{
    cfg.validate();
    if (!(duration > 0.0))
        throw ArgumentError("modulate: duration must be positive");
    const double slots = duration * 8.0 * cfg.subcarrier_hz;
    if (std::abs(slots - std::round(slots)) > 1e-6 * std::max(1.0, slots) || std::round(slots) < 1.0)
        throw ArgumentError("modulate: duration must be a positive multiple of one subcarrier slot (T_s/8)");
    const double chips_needed = duration * cfg.chip_rate_hz;
    if (static_cast<double>(comp.chip_count()) + 1e-9 < chips_needed)
        throw ShapeError("modulate: component set shorter than requested duration");
    if (std::abs(comp.chip_rate_hz - cfg.chip_rate_hz) > 1e-9 * cfg.chip_rate_hz)
        throw ShapeError("modulate: component chip rate differs from configuration");
}

std::size_t sample_count_for(const SignalConfig& cfg, double duration)
{
    return static_cast<std::size_t>(std::llround(duration * cfg.sample_rate_hz));
}

}  // namespace

std::int64_t clock_index(std::size_t n, double rate_hz, double sample_rate_hz)
{
    return static_cast<std::int64_t>(std::floor(static_cast<double>(n) * rate_hz / sample_rate_hz));
}

std::string to_string(ChannelLabel label)
{
    switch (label) {
    case ChannelLabel::E5aI: return "E5a-I";
    case ChannelLabel::E5aQ: return "E5a-Q";
    case ChannelLabel::E5bI: return "E5b-I";
    case ChannelLabel::E5bQ: return "E5b-Q";
    }
    return "?";
}

ChannelLabel channel_from_string(std::string_view name)
{
    if (name == "E5a-I") return ChannelLabel::E5aI;
    if (name == "E5a-Q") return ChannelLabel::E5aQ;
    if (name == "E5b-I") return ChannelLabel::E5bI;
    if (name == "E5b-Q") return ChannelLabel::E5bQ;
    throw ArgumentError("unsupported channel label '" + std::string(name) + "'");
}

void SignalConfig::validate() const
{
    if (!(chip_rate_hz > 0.0) || !(subcarrier_hz > 0.0) || !(sample_rate_hz > 0.0))
        throw ConfigurationError("SignalConfig: rates must be positive");
    if (std::abs(subcarrier_hz - 1.5 * chip_rate_hz) > 1e-9 * subcarrier_hz)
        throw ConfigurationError("SignalConfig: AltBOC(15,10) requires f_sc = 1.5 f_p");
    if (!(sample_rate_hz > main_lobe_bandwidth_hz()))
        throw ConfigurationError("SignalConfig: sample rate must exceed 2 (f_sc + f_p)");
    if (primary_code_length <= 0)
        throw ConfigurationError("SignalConfig: primary_code_length must be positive");
    if (!(amplitude > 0.0) || !std::isfinite(amplitude))
        throw ConfigurationError("SignalConfig: amplitude must be positive");
}

SignalConfig SignalConfig::desk_scale()
{
    SignalConfig cfg;
    cfg.subcarrier_hz = 1.5345e6;
    cfg.chip_rate_hz = 1.023e6;
    cfg.sample_rate_hz = 6e6;
    cfg.if_hz = 0.0;
    cfg.primary_code_length = 1023;
    return cfg;
}

// ---------------------------------------------------------------------------
// Codes
// ---------------------------------------------------------------------------

const PrnRegistry& PrnRegistry::builtin()
{
    static const PrnRegistry registry = [] {
        PrnRegistry r;
        for (int c = 0; c < 4; ++c) {
            for (int prn = 1; prn <= 50; ++prn) {
                auto v = static_cast<std::uint16_t>(splitmix(0xE5000000ULL + 64ULL * c + prn) & 0x3FFF);
                if (v == 0) v = 1;
                r.set(static_cast<ChannelLabel>(c), prn, v);
            }
        }
        return r;
    }();
    return registry;
}

PrnRegistry PrnRegistry::from_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("PrnRegistry: cannot open " + path.string());
    PrnRegistry r;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string channel, prn, start;
        if (!std::getline(ss, channel, ',') || !std::getline(ss, prn, ',') || !std::getline(ss, start))
            throw RegistryError("PrnRegistry: malformed row at line " + std::to_string(line_no));
        const auto v = static_cast<std::uint32_t>(std::stoul(start, nullptr, 8));
        if (v == 0 || v > 0x3FFF)
            throw RegistryError("PrnRegistry: start value out of range at line " + std::to_string(line_no));
        r.set(channel_from_string(channel), std::stoi(prn), static_cast<std::uint16_t>(v));
    }
    return r;
}

std::uint16_t PrnRegistry::start_value(ChannelLabel label, int prn) const
{
    auto it = table_.find({label_index(label), prn});
    if (it == table_.end())
        throw RegistryError("PRN " + std::to_string(prn) + " not in registry for " + to_string(label));
    return it->second;
}

bool PrnRegistry::contains(ChannelLabel label, int prn) const
{
    return table_.contains({label_index(label), prn});
}

void PrnRegistry::set(ChannelLabel label, int prn, std::uint16_t start)
{
    table_[{label_index(label), prn}] = start;
}

std::pair<std::uint32_t, std::uint32_t> register_polynomials(ChannelLabel label)
{
    switch (label) {
    case ChannelLabel::E5aI: return {040503, 050661};
    case ChannelLabel::E5aQ: return {040503, 050661};
    case ChannelLabel::E5bI: return {064021, 051445};
    case ChannelLabel::E5bQ: return {064021, 043143};
    }
    throw ArgumentError("register_polynomials: bad channel");
}

std::vector<std::uint8_t> lfsr_sequence(std::uint32_t poly, std::uint32_t state, std::size_t length)
{
    const int degree = std::bit_width(poly) - 1;
    if (degree < 2 || degree > 31) throw ArgumentError("lfsr_sequence: unsupported degree");
    const std::uint32_t mask = poly & ((1u << degree) - 1u);
    state &= (1u << degree) - 1u;
    if (state == 0) throw ArgumentError("lfsr_sequence: zero start state");
    std::vector<std::uint8_t> out(length);
    for (std::size_t k = 0; k < length; ++k) {
        out[k] = static_cast<std::uint8_t>(state & 1u);
        const std::uint32_t fb = static_cast<std::uint32_t>(std::popcount(state & mask) & 1);
        state = (state >> 1) | (fb << (degree - 1));
    }
    return out;
}

std::uint32_t synthetic_polynomial(int degree, int index)
{
    // two distinct maximal-length polynomials per degree (neither is the
    // reciprocal of the other)
    static const std::map<int, std::array<std::uint32_t, 2>> table = {
        {5, {051, 057}},             {6, {0141, 0147}},           {7, {0301, 0211}},
        {8, {0561, 0607}},           {9, {01041, 01207}},         {10, {02201, 02047}},
        {11, {05001, 04027}},        {12, {010123, 010407}},      {13, {020033, 020047}},
        {14, {040053, 050007}},      {15, {0140001, 0100021}},    {16, {0320021, 0200123}},
        {17, {0440001, 0400041}},    {18, {01004001, 01000047}},  {19, {02000107, 02000047}},
        {20, {04400001, 04000123}},
    };
    auto it = table.find(degree);
    if (it == table.end()) throw ArgumentError("synthetic_polynomial: degree must be in 5..20");
    if (index < 0 || index > 1) throw ArgumentError("synthetic_polynomial: index must be 0 or 1");
    return it->second[static_cast<std::size_t>(index)];
}

ChipSequence generate_primary_code(int prn_id, ChannelLabel label, const SignalConfig& cfg, CodeMode mode,
                                   const PrnRegistry& registry)
{
    const auto length = static_cast<std::size_t>(cfg.primary_code_length);
    if (length == 0) throw ArgumentError("generate_primary_code: zero code length");
    ChipSequence seq;
    seq.channel_label = label;
    seq.prn_id = prn_id;
    seq.chips.resize(length);

    if (mode == CodeMode::icd_register) {
        if (length > 16383) throw ArgumentError("generate_primary_code: ICD register codes are at most 16383 chips");
        const std::uint16_t start2 = registry.start_value(label, prn_id);
        const auto [p1, p2] = register_polynomials(label);
        const auto r1 = lfsr_sequence(p1, 0x3FFF, length);
        const auto r2 = lfsr_sequence(p2, start2, length);
        for (std::size_t k = 0; k < length; ++k)
            seq.chips[k] = static_cast<std::int8_t>((r1[k] ^ r2[k]) ? -1 : 1);
        return seq;
    }

    if (prn_id <= 0) throw RegistryError("generate_primary_code: synthetic PRN ids must be positive");
    int degree = 5;
    while (degree < 20 && ((std::size_t{1} << degree) - 1) < length) ++degree;
    if (((std::size_t{1} << degree) - 1) < length)
        throw ArgumentError("generate_primary_code: synthetic codes are at most 2^20 - 1 chips");
    // XOR of two seeded m-sequences from distinct polynomials: every
    // (prn, channel) pair picks a different member of the same family, so
    // codes are not cyclic shifts of one another
    const std::uint64_t h = splitmix(static_cast<std::uint64_t>(prn_id) * 8 + label_index(label));
    const std::uint32_t low = (1u << degree) - 1u;
    std::uint32_t s1 = static_cast<std::uint32_t>(h) & low;
    std::uint32_t s2 = static_cast<std::uint32_t>(h >> 32) & low;
    if (s1 == 0) s1 = 1;
    if (s2 == 0) s2 = 1;
    const auto b1 = lfsr_sequence(synthetic_polynomial(degree, 0), s1, length);
    const auto b2 = lfsr_sequence(synthetic_polynomial(degree, 1), s2, length);
    for (std::size_t k = 0; k < length; ++k) seq.chips[k] = static_cast<std::int8_t>((b1[k] ^ b2[k]) ? -1 : 1);
    return seq;
}

NavDataStream make_nav_stream(ChannelLabel label, std::size_t symbol_count, double symbol_period,
                              std::uint64_t seed)
{
    NavDataStream nav;
    nav.channel_label = label;
    nav.symbol_period = symbol_period;
    nav.symbols.assign(symbol_count, 1);
    if (!is_data_channel(label)) return nav;
    auto eng = make_engine(seed, 0x4E4156ULL + static_cast<std::uint64_t>(label_index(label)));
    std::bernoulli_distribution coin(0.5);
    for (auto& s : nav.symbols) s = coin(eng) ? 1 : -1;
    return nav;
}

NavDataStream make_secondary_overlay(ChannelLabel label, int prn_id, std::size_t code_periods,
                                     const SignalConfig& cfg)
{
    if (is_data_channel(label))
        throw ArgumentError("make_secondary_overlay: overlays apply to pilot channels only");
    const auto base = lfsr_sequence(synthetic_polynomial(7),
                                    static_cast<std::uint32_t>(splitmix(prn_id * 4 + label_index(label)) & 0x7F) | 1u,
                                    100);
    NavDataStream nav;
    nav.channel_label = label;
    nav.symbol_period = cfg.code_period();
    nav.symbols.resize(code_periods);
    for (std::size_t k = 0; k < code_periods; ++k) nav.symbols[k] = base[k % base.size()] ? -1 : 1;
    return nav;
}

// ---------------------------------------------------------------------------
// Components
// ---------------------------------------------------------------------------

namespace {

std::size_t chips_per_symbol(const NavDataStream& nav, const SignalConfig& cfg)
{
    const double per_code = nav.symbol_period / cfg.code_period();
    if (!(nav.symbol_period > 0.0) || std::abs(per_code - std::round(per_code)) > 1e-9 || std::round(per_code) < 1)
        throw ShapeError("build_components: symbol period must be an integer multiple of the code period");
    return static_cast<std::size_t>(std::llround(per_code)) * static_cast<std::size_t>(cfg.primary_code_length);
}

void spread(std::vector<std::int8_t>& out, const ChipSequence& code, const NavDataStream* nav,
            std::size_t per_symbol)
{
    const std::size_t L = code.size();
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::int8_t v = code.chips[k % L];
        if (nav) v = static_cast<std::int8_t>(v * nav->symbols[k / per_symbol]);
        out[k] = v;
    }
}

}  // namespace

ComponentSet build_components(const std::array<ChipSequence, 4>& codes, const NavDataStream& data_a,
                              const NavDataStream& data_b, const SignalConfig& cfg,
                              const NavDataStream* pilot_a, const NavDataStream* pilot_b)
{
    const std::size_t L = codes[0].size();
    for (const auto& c : codes)
        if (c.size() != L || L != static_cast<std::size_t>(cfg.primary_code_length))
            throw ShapeError("build_components: all codes must have the configured length");

    const std::size_t per_a = chips_per_symbol(data_a, cfg);
    const std::size_t per_b = chips_per_symbol(data_b, cfg);
    const std::size_t span = per_a * data_a.symbols.size();
    if (span == 0 || span != per_b * data_b.symbols.size())
        throw ShapeError("build_components: data streams must cover the same nonzero span");

    ComponentSet comp;
    comp.chip_rate_hz = cfg.chip_rate_hz;
    for (auto* v : {&comp.e_aI, &comp.e_aQ, &comp.e_bI, &comp.e_bQ, &comp.ebar_aI, &comp.ebar_aQ, &comp.ebar_bI,
                    &comp.ebar_bQ})
        v->resize(span);

    spread(comp.e_aI, codes[0], &data_a, per_a);
    spread(comp.e_bI, codes[2], &data_b, per_b);
    auto pilot = [&](std::vector<std::int8_t>& out, const ChipSequence& code, const NavDataStream* overlay) {
        if (!overlay) {
            spread(out, code, nullptr, 1);
            return;
        }
        const std::size_t per = chips_per_symbol(*overlay, cfg);
        if (per * overlay->symbols.size() < span) throw ShapeError("build_components: pilot overlay too short");
        spread(out, code, overlay, per);
    };
    pilot(comp.e_aQ, codes[1], pilot_a);
    pilot(comp.e_bQ, codes[3], pilot_b);

    for (std::size_t k = 0; k < span; ++k) {
        const int aI = comp.e_aI[k], aQ = comp.e_aQ[k], bI = comp.e_bI[k], bQ = comp.e_bQ[k];
        comp.ebar_aI[k] = static_cast<std::int8_t>(aQ * bI * bQ);
        comp.ebar_aQ[k] = static_cast<std::int8_t>(aI * bI * bQ);
        comp.ebar_bI[k] = static_cast<std::int8_t>(bQ * aI * aQ);
        comp.ebar_bQ[k] = static_cast<std::int8_t>(bI * aI * aQ);
    }
    return comp;
}

SubcarrierTables SubcarrierTables::icd()
{
    const double r2 = std::sqrt(2.0);
    SubcarrierTables t;
    t.single = {(r2 + 1) / 2, 0.5, -0.5, -(r2 + 1) / 2, -(r2 + 1) / 2, -0.5, 0.5, (r2 + 1) / 2};
    t.product = {(-r2 + 1) / 2, 0.5, -0.5, (r2 - 1) / 2, (r2 - 1) / 2, -0.5, 0.5, (-r2 + 1) / 2};
    return t;
}

// ---------------------------------------------------------------------------
// Modulators
// ---------------------------------------------------------------------------

IqBuffer modulate_exact(const ComponentSet& comp, const SubcarrierTables& tables, const SignalConfig& cfg,
                        double duration)
{
    check_duration(comp, cfg, duration);
    const std::size_t n_samples = sample_count_for(cfg, duration);
    IqBuffer out;
    out.sample_rate_hz = cfg.sample_rate_hz;
    out.samples.resize(n_samples);

    const double slot_rate = 8.0 * cfg.subcarrier_hz;
    const double scale = kInvTwoSqrt2 * cfg.amplitude;
    for (std::size_t n = 0; n < n_samples; ++n) {
        const auto chip = static_cast<std::size_t>(clock_index(n, cfg.chip_rate_hz, cfg.sample_rate_hz));
        const auto slot = clock_index(n, slot_rate, cfg.sample_rate_hz);
        const auto i0 = static_cast<std::size_t>(slot & 7);
        const auto i1 = static_cast<std::size_t>((slot + 6) & 7);  // t - T_s/4 is two slots back
        const double ss = tables.single[i0], ssd = tables.single[i1];
        const double sp = tables.product[i0], spd = tables.product[i1];

        const cplx ea(comp.e_aI[chip], comp.e_aQ[chip]);
        const cplx eb(comp.e_bI[chip], comp.e_bQ[chip]);
        const cplx pa(comp.ebar_aI[chip], comp.ebar_aQ[chip]);
        const cplx pb(comp.ebar_bI[chip], comp.ebar_bQ[chip]);
        out.samples[n] = scale * (ea * cplx(ss, -ssd) + eb * cplx(ss, ssd) + pa * cplx(sp, -spd) + pb * cplx(sp, spd));
    }
    return out;
}

IqBuffer modulate_approx(const ComponentSet& comp, const SignalConfig& cfg, double duration)
{
    check_duration(comp, cfg, duration);
    const std::size_t n_samples = sample_count_for(cfg, duration);
    IqBuffer out;
    out.sample_rate_hz = cfg.sample_rate_hz;
    out.samples.resize(n_samples);
    const double scale = kInvTwoSqrt2 * cfg.amplitude;
    for (std::size_t n = 0; n < n_samples; ++n) {
        const auto chip = static_cast<std::size_t>(clock_index(n, cfg.chip_rate_hz, cfg.sample_rate_hz));
        // fractional subcarrier cycles, computed from the exact integer product
        const double cycles = std::fmod(static_cast<double>(n) * cfg.subcarrier_hz, cfg.sample_rate_hz) / cfg.sample_rate_hz;
        const cplx rot = std::polar(1.0, kTwoPi * cycles);
        const cplx ea(comp.e_aI[chip], comp.e_aQ[chip]);
        const cplx eb(comp.e_bI[chip], comp.e_bQ[chip]);
        out.samples[n] = scale * (ea * std::conj(rot) + eb * rot);
    }
    return out;
}

IqBuffer upconvert_to_if(const IqBuffer& iq, double if_hz, double signal_bandwidth_hz)
{
    iq.validate();
    if (std::abs(if_hz) + 0.5 * signal_bandwidth_hz >= 0.5 * iq.sample_rate_hz)
        throw ConfigurationError("upconvert_to_if: IF plus half the signal bandwidth must stay below fs/2");
    IqBuffer out = iq;
    if (if_hz == 0.0) return out;
    const double start_cycles = iq.start_time * if_hz;
    for (std::size_t n = 0; n < out.samples.size(); ++n) {
        const double cycles = std::fmod(static_cast<double>(n) * if_hz, iq.sample_rate_hz) / iq.sample_rate_hz + start_cycles;
        out.samples[n] *= std::polar(1.0, kTwoPi * (cycles - std::floor(cycles)));
    }
    return out;
}

std::vector<double> code_replica(const ChipSequence& code, double chip_rate_hz, double sample_rate_hz,
                                 std::size_t sample_count, double code_phase0)
{
    const double L = static_cast<double>(code.size());
    std::vector<double> out(sample_count);
    for (std::size_t n = 0; n < sample_count; ++n) {
        const double phase = wrap_positive(code_phase0 + static_cast<double>(n) * chip_rate_hz / sample_rate_hz, L);
        out[n] = code.chips[static_cast<std::size_t>(phase) % code.size()];
    }
    return out;
}

IqBuffer pilot_reference(const ChipSequence& code_aQ, const ChipSequence& code_bQ, const SignalConfig& cfg,
                         std::size_t sample_count, const SubcarrierTables* staircase)
{
    if (code_aQ.size() != code_bQ.size()) throw ShapeError("pilot_reference: code lengths differ");
    const auto ca = code_replica(code_aQ, cfg.chip_rate_hz, cfg.sample_rate_hz, sample_count);
    const auto cb = code_replica(code_bQ, cfg.chip_rate_hz, cfg.sample_rate_hz, sample_count);
    IqBuffer out;
    out.sample_rate_hz = cfg.sample_rate_hz;
    out.samples.resize(sample_count);
    const double slot_rate = 8.0 * cfg.subcarrier_hz;
    for (std::size_t n = 0; n < sample_count; ++n) {
        if (staircase) {
            const auto slot = clock_index(n, slot_rate, cfg.sample_rate_hz);
            const double ss = staircase->single[static_cast<std::size_t>(slot & 7)];
            const double ssd = staircase->single[static_cast<std::size_t>((slot + 6) & 7)];
            out.samples[n] = ca[n] * cplx(ss, -ssd) + cb[n] * cplx(ss, ssd);
            continue;
        }
        const double cycles = std::fmod(static_cast<double>(n) * cfg.subcarrier_hz, cfg.sample_rate_hz) / cfg.sample_rate_hz;
        const cplx rot = std::polar(1.0, kTwoPi * cycles);
        out.samples[n] = ca[n] * std::conj(rot) + cb[n] * rot;
    }
    return out;
}

SatelliteSignal make_satellite(int prn_id, const SignalConfig& cfg, double duration,
                               const SatelliteOptions& options, const PrnRegistry& registry)
{
    cfg.validate();
    SatelliteSignal sat;
    const ChannelLabel labels[4] = {ChannelLabel::E5aI, ChannelLabel::E5aQ, ChannelLabel::E5bI, ChannelLabel::E5bQ};
    for (int c = 0; c < 4; ++c) sat.codes[c] = generate_primary_code(prn_id, labels[c], cfg, options.code_mode, registry);

    const auto symbols = static_cast<std::size_t>(std::ceil(duration / options.symbol_period - 1e-9));
    const std::size_t n_sym = std::max<std::size_t>(symbols, 1);
    sat.data_a = make_nav_stream(ChannelLabel::E5aI, n_sym, options.symbol_period, options.seed);
    sat.data_b = make_nav_stream(ChannelLabel::E5bI, n_sym, options.symbol_period, options.seed);
    if (options.secondary_codes) {
        const auto periods = static_cast<std::size_t>(std::llround(n_sym * options.symbol_period / cfg.code_period()));
        sat.pilot_a = make_secondary_overlay(ChannelLabel::E5aQ, prn_id, periods, cfg);
        sat.pilot_b = make_secondary_overlay(ChannelLabel::E5bQ, prn_id, periods, cfg);
    }
    sat.components = build_components(sat.codes, sat.data_a, sat.data_b, cfg,
                                      sat.pilot_a ? &*sat.pilot_a : nullptr,
                                      sat.pilot_b ? &*sat.pilot_b : nullptr);
    return sat;
}

}  // namespace altboc::waveform
