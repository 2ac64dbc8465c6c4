#include "altboc/tracking.hpp"

#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>

namespace altboc::tracking {

using acquisition::Sideband;

bool CorrelatorBank::finite() const
{
    return std::isfinite(I_E) && std::isfinite(I_P) && std::isfinite(I_L) && std::isfinite(Q_E) &&
           std::isfinite(Q_P) && std::isfinite(Q_L);
}

CorrelatorBank CorrelatorBank::flipped() const { return scaled(-1.0); }

CorrelatorBank CorrelatorBank::scaled(double a) const
{
    CorrelatorBank b = *this;
    b.I_E *= a, b.I_P *= a, b.I_L *= a;
    b.Q_E *= a, b.Q_P *= a, b.Q_L *= a;
    return b;
}

std::string to_string(Discriminator d)
{
    switch (d) {
    case Discriminator::EML: return "EML";
    case Discriminator::NEMLP: return "NEMLP";
    case Discriminator::DP: return "DP";
    }
    return "?";
}

Discriminator discriminator_from_string(std::string_view name)
{
    if (name == "EML") return Discriminator::EML;
    if (name == "NEMLP") return Discriminator::NEMLP;
    if (name == "DP") return Discriminator::DP;
    throw ArgumentError("unknown discriminator '" + std::string(name) + "' (EML, NEMLP, DP)");
}

double discriminate_raw(const CorrelatorBank& b, const DiscriminatorKind& kind)
{
    switch (kind.kind) {
    case Discriminator::EML: return b.I_E - b.I_L;
    case Discriminator::NEMLP:
        if (kind.nemlp_form == NemlpForm::as_printed) return (b.I_E * b.I_E - b.I_L * b.I_L) - (b.Q_E * b.Q_E - b.Q_L * b.Q_L);
        return (b.I_E * b.I_E + b.Q_E * b.Q_E) - (b.I_L * b.I_L + b.Q_L * b.Q_L);
    case Discriminator::DP: return (b.I_E - b.I_L) * b.I_P + (b.Q_E - b.Q_L) * b.Q_P;
    }
    return 0.0;
}

double discriminate(const CorrelatorBank& b, const DiscriminatorKind& kind, double d)
{
    const double raw = discriminate_raw(b, kind);
    if (!kind.normalized) return raw;
    double norm = 0.0, gain = 1.0;
    switch (kind.kind) {
    case Discriminator::EML:
        norm = b.I_E + b.I_L;
        gain = (2.0 - d) / 2.0;
        break;
    case Discriminator::NEMLP:
        norm = (b.I_E * b.I_E + b.Q_E * b.Q_E) + (b.I_L * b.I_L + b.Q_L * b.Q_L);
        gain = (2.0 - d) / 4.0;
        break;
    case Discriminator::DP:
        norm = b.I_P * b.I_P + b.Q_P * b.Q_P;
        gain = 0.5;
        break;
    }
    if (norm == 0.0) throw DegenerateInputError("discriminate: normalizer is zero");
    return gain * raw / norm;
}

void LoopConfig::validate() const
{
    if (!(correlator_spacing_d > 0.0 && correlator_spacing_d <= 2.0))
        throw ConfigurationError("LoopConfig: correlator_spacing_d must lie in (0, 2] chips");
    if (!(t_int > 0.0)) throw ConfigurationError("LoopConfig: t_int must be positive");
    if (!(dll_bn_hz > 0.0) || !(pll_bn_hz > 0.0)) throw ConfigurationError("LoopConfig: loop bandwidths must be positive");
    if (dll_bn_hz * t_int >= 0.1) throw ConfigurationError("LoopConfig: dll_bn_hz x t_int must stay below 0.1");
    if (pll_bn_hz * t_int >= 0.1) throw ConfigurationError("LoopConfig: pll_bn_hz x t_int must stay below 0.1");
    if (loop_order != 1 && loop_order != 2) throw ConfigurationError("LoopConfig: loop_order must be 1 or 2");
    if (fll_epochs < 0) throw ConfigurationError("LoopConfig: fll_epochs must be >= 0");
    if (lock_window < 1 || lock_loss_epochs < 1) throw ConfigurationError("LoopConfig: lock window and loss count must be >= 1");
    if (!(lock_floor >= 0.0)) throw ConfigurationError("LoopConfig: lock_floor must be >= 0");
}

double sideband_phase(Sideband sideband)
{
    // harmonic -1 of S - j S_d: slot DFT bin 7 times the half-slot hold e^{+j pi / 8}
    static const double lower = [] {
        const auto t = waveform::SubcarrierTables::icd();
        cplx acc{};
        for (int k = 0; k < 8; ++k) acc += cplx(t.single[k], -t.single[(k + 6) % 8]) * std::polar(1.0, -kTwoPi * 7.0 * k / 8.0);
        return std::arg(acc) + std::numbers::pi / 8.0;
    }();
    return sideband == Sideband::lower ? lower : -lower;
}

double sideband_centre_hz(const waveform::SignalConfig& sig, Sideband sideband)
{
    return sig.if_hz + (sideband == Sideband::lower ? -sig.subcarrier_hz : sig.subcarrier_hz);
}

namespace {

// Running chip sum, so the mean of the code over any chip interval is two lookups.
class BoxReplica {
public:
    explicit BoxReplica(const waveform::ChipSequence& code) : chips_(code.chips), prefix_(code.size() + 1, 0.0)
    {
        for (std::size_t i = 0; i < chips_.size(); ++i) prefix_[i + 1] = prefix_[i] + chips_[i];
        len_ = static_cast<double>(chips_.size());
    }

    // integral of the code from chip 0 to x
    double integral(double x) const
    {
        const double q = std::floor(x / len_);
        const double r = x - q * len_;
        auto k = static_cast<std::size_t>(r);
        if (k >= chips_.size()) k = chips_.size() - 1;
        return q * prefix_.back() + prefix_[k] + (r - static_cast<double>(k)) * chips_[k];
    }

    double mean(double centre, double width) const
    {
        return (integral(centre + 0.5 * width) - integral(centre - 0.5 * width)) / width;
    }

    double length() const { return len_; }

private:
    std::vector<std::int8_t> chips_;
    std::vector<double> prefix_;
    double len_ = 0.0;
};

void check_segment(std::size_t n, double fs, double t_int)
{
    const double want = t_int * fs;
    if (std::abs(static_cast<double>(n) - want) > 1e-6)
        throw ShapeError("correlate_epl: segment has " + std::to_string(n) + " samples, epoch needs " +
                         std::to_string(std::llround(want)));
}

// Carrier wipe rotor for sample 0 and the per-sample step.
std::pair<cplx, cplx> wipe_rotor(const TrackingState& st, const LoopConfig& cfg, const waveform::SignalConfig& sig, double fs)
{
    const double f = sideband_centre_hz(sig, cfg.sideband) + st.doppler_hz;
    const cplx start = std::polar(1.0, -(st.carrier_phase + sideband_phase(cfg.sideband)));
    const cplx step = std::polar(1.0, -kTwoPi * f / fs);
    return {start, step};
}

CorrelatorBank correlate_with(const BoxReplica& rep, std::span<const cplx> seg, double fs, const TrackingState& st,
                              const LoopConfig& cfg, const waveform::SignalConfig& sig)
{
    check_segment(seg.size(), fs, cfg.t_int);
    auto [rot, step] = wipe_rotor(st, cfg, sig, fs);
    const double chip_step = st.code_rate / fs;
    const double half_d = 0.5 * cfg.correlator_spacing_d;
    cplx e{}, p{}, l{};
    for (std::size_t n = 0; n < seg.size(); ++n) {
        const cplx x = seg[n] * rot;
        const double phase = st.code_phase + static_cast<double>(n) * chip_step;
        e += x * rep.mean(phase + half_d, chip_step);
        p += x * rep.mean(phase, chip_step);
        l += x * rep.mean(phase - half_d, chip_step);
        rot *= step;
        if ((n & 1023) == 1023) rot /= std::abs(rot);
    }
    // the pilot rides on the quadrature arm of the sideband
    const cplx to_i(0.0, -1.0 / static_cast<double>(seg.size()));
    e *= to_i, p *= to_i, l *= to_i;
    CorrelatorBank b;
    b.I_E = e.real(), b.Q_E = e.imag();
    b.I_P = p.real(), b.Q_P = p.imag();
    b.I_L = l.real(), b.Q_L = l.imag();
    b.t_int = cfg.t_int;
    return b;
}

cplx prompt_with(const BoxReplica& rep, std::span<const cplx> seg, double fs, const TrackingState& st,
                 const LoopConfig& cfg, const waveform::SignalConfig& sig)
{
    check_segment(seg.size(), fs, cfg.t_int);
    auto [rot, step] = wipe_rotor(st, cfg, sig, fs);
    const double chip_step = st.code_rate / fs;
    cplx p{};
    for (std::size_t n = 0; n < seg.size(); ++n) {
        p += seg[n] * rot * rep.mean(st.code_phase + static_cast<double>(n) * chip_step, chip_step);
        rot *= step;
        if ((n & 1023) == 1023) rot /= std::abs(rot);
    }
    return p / static_cast<double>(seg.size());
}

}  // namespace

CorrelatorBank correlate_epl(std::span<const cplx> segment, double fs, const TrackingState& state, const LoopConfig& cfg,
                             const waveform::ChipSequence& code, const waveform::SignalConfig& sig)
{
    if (code.size() == 0) throw ArgumentError("correlate_epl: empty code");
    return correlate_with(BoxReplica(code), segment, fs, state, cfg, sig);
}

CorrelatorBank correlate_epl(const IqBuffer& segment, const TrackingState& state, const LoopConfig& cfg,
                             const waveform::ChipSequence& code, const waveform::SignalConfig& sig)
{
    return correlate_epl(segment.samples, segment.sample_rate_hz, state, cfg, code, sig);
}

cplx correlate_prompt(std::span<const cplx> segment, double fs, const TrackingState& state, const LoopConfig& cfg,
                      const waveform::ChipSequence& code, const waveform::SignalConfig& sig)
{
    if (code.size() == 0) throw ArgumentError("correlate_prompt: empty code");
    return prompt_with(BoxReplica(code), segment, fs, state, cfg, sig);
}

LoopFilter::LoopFilter(int order, double bn_hz, double t_int) : order_(order), t_(t_int)
{
    if (order != 1 && order != 2) throw ConfigurationError("LoopFilter: order must be 1 or 2");
    if (!(bn_hz > 0.0) || !(t_int > 0.0)) throw ConfigurationError("LoopFilter: bandwidth and period must be positive");
    w_ = order == 1 ? 4.0 * bn_hz : bn_hz / 0.53;
}

double LoopFilter::step(double e)
{
    if (order_ == 1) return w_ * e;
    integ_ += w_ * w_ * e * t_;
    return integ_ + 1.414 * w_ * e;
}

std::size_t NavBits::gaps() const
{
    std::size_t g = 0;
    for (auto b : bits) g += b == 0 ? 1 : 0;
    return g;
}

void TrackRecord::write_csv(std::ostream& os) const
{
    os << "time_s,I_E,I_P,I_L,Q_E,Q_P,Q_L,data_I,data_Q,code_discriminator,carrier_discriminator,"
          "code_phase_chips,code_rate_chips_per_s,carrier_phase_rad,doppler_hz,lock_metric,pll_active,locked\n";
    os << std::setprecision(17);
    for (const auto& e : epochs) {
        const auto& b = e.bank;
        const auto& s = e.state;
        os << e.time << ',' << b.I_E << ',' << b.I_P << ',' << b.I_L << ',' << b.Q_E << ',' << b.Q_P << ',' << b.Q_L << ','
           << e.data_prompt.real() << ',' << e.data_prompt.imag() << ',' << e.code_discriminator << ','
           << e.carrier_discriminator << ',' << s.code_phase << ',' << s.code_rate << ',' << s.carrier_phase << ','
           << s.doppler_hz << ',' << s.lock_metric << ',' << (e.pll_active ? 1 : 0) << ',' << (e.locked ? 1 : 0) << '\n';
    }
}

TrackingState state_from_seed(const acquisition::AcquisitionResult& seed, const waveform::SignalConfig& sig)
{
    TrackingState st;
    const double len = static_cast<double>(sig.primary_code_length);
    // the code starts at sample code_phase_samples, so sample 0 carries chip -start * f_p / fs
    st.code_phase = wrap_positive(-seed.code_phase_samples * sig.chip_rate_hz / sig.sample_rate_hz, len);
    st.code_rate = sig.chip_rate_hz;
    st.doppler_hz = seed.doppler_hz;
    return st;
}

TrackRecord run_tracking(const IqBuffer& iq, const acquisition::AcquisitionResult& seed, const LoopConfig& cfg,
                         const waveform::ChipSequence& pilot_code, const waveform::SignalConfig& sig, double duration,
                         const waveform::ChipSequence* data_code)
{
    TrackingState st = state_from_seed(seed, sig);
    st.code_rate = sig.chip_rate_hz * (cfg.carrier_aiding ? 1.0 + st.doppler_hz / sig.carrier_hz : 1.0);
    return run_tracking(iq, st, cfg, pilot_code, sig, duration, data_code);
}

TrackRecord run_tracking(const IqBuffer& iq, const TrackingState& initial, const LoopConfig& cfg,
                         const waveform::ChipSequence& pilot_code, const waveform::SignalConfig& sig, double duration,
                         const waveform::ChipSequence* data_code)
{
    cfg.validate();
    iq.validate();
    if (pilot_code.size() == 0) throw ArgumentError("run_tracking: empty pilot code");
    const double fs = iq.sample_rate_hz;
    const double n_real = cfg.t_int * fs;
    if (std::abs(n_real - std::round(n_real)) > 1e-6) throw ConfigurationError("run_tracking: t_int x fs must be an integer");
    const auto N = static_cast<std::size_t>(std::llround(n_real));
    const auto epochs = static_cast<std::size_t>(std::floor(duration / cfg.t_int + 1e-9));
    if (epochs == 0) throw ArgumentError("run_tracking: duration shorter than one epoch");
    if (epochs * N > iq.size()) throw ArgumentError("run_tracking: buffer shorter than the requested duration");

    const BoxReplica pilot(pilot_code);
    std::optional<BoxReplica> data;
    if (data_code) data.emplace(*data_code);

    TrackRecord rec;
    rec.t_int = cfg.t_int;
    rec.samples_per_epoch = N;
    rec.has_data_channel = data.has_value();
    rec.epochs.reserve(epochs);

    TrackingState st = initial;
    if (!(st.code_rate > 0.0)) st.code_rate = sig.chip_rate_hz;
    LoopFilter dll(cfg.loop_order, cfg.dll_bn_hz, cfg.t_int);
    LoopFilter pll(2, cfg.pll_bn_hz, cfg.t_int);
    const double len = pilot.length();
    const double centre = sideband_centre_hz(sig, cfg.sideband);
    const double T = static_cast<double>(N) / fs;

    double pll_base = st.doppler_hz;
    cplx prev_prompt{};
    std::deque<cplx> window;
    cplx window_sum{};
    double window_power = 0.0;
    int low_run = 0;
    const std::size_t warmup = static_cast<std::size_t>(cfg.fll_epochs + cfg.lock_window);

    for (std::size_t k = 0; k < epochs; ++k) {
        const std::span<const cplx> seg(iq.samples.data() + k * N, N);
        EpochRecord ep;
        ep.time = static_cast<double>(k * N) / fs;
        ep.bank = correlate_with(pilot, seg, fs, st, cfg, sig);
        if (data) ep.data_prompt = prompt_with(*data, seg, fs, st, cfg, sig);
        const cplx P = ep.bank.prompt();

        double D = 0.0;
        try {
            D = discriminate(ep.bank, cfg.discriminator, cfg.correlator_spacing_d);
        } catch (const DegenerateInputError&) {
            D = 0.0;
        }
        if (cfg.discriminator.kind == Discriminator::EML && ep.bank.I_P < 0.0) D = -D;
        ep.code_discriminator = D;

        // lock metric: narrowband over wideband power of the last lock_window prompts
        window.push_back(P);
        window_sum += P;
        window_power += std::norm(P);
        if (window.size() > static_cast<std::size_t>(cfg.lock_window)) {
            window_sum -= window.front();
            window_power -= std::norm(window.front());
            window.pop_front();
        }
        st.lock_metric = window_power > 0.0 ? std::norm(window_sum) / window_power : 0.0;
        if (k >= warmup) {
            ep.locked = st.lock_metric >= cfg.lock_floor;
            low_run = ep.locked ? 0 : low_run + 1;
            if (low_run >= cfg.lock_loss_epochs && !rec.lock_lost_epoch) rec.lock_lost_epoch = k + 1 - static_cast<std::size_t>(low_run);
        }
        ep.state = st;

        // carrier
        const bool fll = k < static_cast<std::size_t>(cfg.fll_epochs);
        double new_doppler = st.doppler_hz;
        if (cfg.hold_carrier) {
            ep.carrier_discriminator = 0.0;
        } else if (fll) {
            if (k > 0) {
                const double ferr = std::arg(P * std::conj(prev_prompt)) / (kTwoPi * T);
                new_doppler += ferr / static_cast<double>(k);
                ep.carrier_discriminator = ferr;
            }
            pll_base = new_doppler;
        } else {
            ep.pll_active = true;
            double e;
            if (P.real() != 0.0) e = std::atan(P.imag() / P.real());
            else e = P.imag() >= 0.0 ? std::numbers::pi / 2 : -std::numbers::pi / 2;
            ep.carrier_discriminator = e;
            new_doppler = pll_base + pll.step(e) / kTwoPi;
        }
        prev_prompt = P;

        // code
        const double aid = cfg.carrier_aiding ? 1.0 + new_doppler / sig.carrier_hz : 1.0;
        const double new_rate = sig.chip_rate_hz * aid + dll.step(D);

        rec.epochs.push_back(ep);

        st.doppler_hz = new_doppler;
        st.code_rate = new_rate;
        st.carrier_phase = wrap_positive(st.carrier_phase + kTwoPi * std::fmod((centre + new_doppler) * T, 1.0), kTwoPi);
        st.code_phase = wrap_positive(st.code_phase + new_rate * T, len);
    }
    if (rec.lock_lost_epoch)
        for (std::size_t k = *rec.lock_lost_epoch; k < rec.epochs.size(); ++k) rec.epochs[k].locked = false;
    return rec;
}

NavBits extract_nav_bits(const TrackRecord& record, double symbol_period)
{
    if (!record.has_data_channel) throw StateError("extract_nav_bits: record carries no data-channel correlations");
    if (!(record.t_int > 0.0) || !(symbol_period > 0.0)) throw ArgumentError("extract_nav_bits: periods must be positive");
    const double ratio = symbol_period / record.t_int;
    const auto E = static_cast<std::size_t>(std::llround(ratio));
    if (E == 0 || std::abs(ratio - static_cast<double>(E)) > 1e-6) throw ArgumentError("extract_nav_bits: t_int must divide the symbol period");

    std::vector<double> v(record.size());
    for (std::size_t k = 0; k < record.size(); ++k) {
        const auto& ep = record.epochs[k];
        const cplx P = ep.bank.prompt();
        const double mag = std::abs(P);
        v[k] = mag > 0.0 ? (ep.data_prompt * std::conj(P)).real() / mag : 0.0;
    }

    // symbol sync: the offset whose symbol sums carry the most energy
    std::size_t best_off = 0;
    double best = -1.0;
    for (std::size_t off = 0; off < E && off < v.size(); ++off) {
        double energy = 0.0;
        for (std::size_t s = off; s + E <= v.size(); s += E) {
            double acc = 0.0;
            for (std::size_t k = s; k < s + E; ++k) acc += v[k];
            energy += std::abs(acc);
        }
        if (energy > best) best = energy, best_off = off;
    }

    NavBits out;
    out.first_epoch = best_off;
    out.epochs_per_symbol = E;
    out.polarity_resolved = true;
    for (std::size_t s = best_off; s + E <= v.size(); s += E) {
        double acc = 0.0;
        bool locked = true;
        for (std::size_t k = s; k < s + E; ++k) {
            acc += v[k];
            locked = locked && record.epochs[k].locked;
        }
        out.bits.push_back(!locked || acc == 0.0 ? 0 : (acc > 0.0 ? 1 : -1));
    }
    return out;
}

}  // namespace altboc::tracking
