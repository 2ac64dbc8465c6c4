#include "altboc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include "json.hpp"

#include "altboc/channel.hpp"
#include "altboc/fft.hpp"

namespace altboc::analysis {

namespace {

using boost::math::quadrature::gauss_kronrod;
using acquisition::Sideband;

constexpr double kPi = std::numbers::pi;

// 2 x integral over [0, half] in pieces of `piece`, each converged to 1e-8
// relative (with an absolute floor for integrands that vanish).
double even_integral(const std::function<double(double)>& f, double half, double piece, const char* what)
{
    const int n = std::max(1, static_cast<int>(std::ceil(half / piece)));
    const double h = half / n;
    double acc = 0.0, err_acc = 0.0, mag_acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double lo = i * h;
        const double hi = (i + 1 == n) ? half : lo + h;
        double err = 0.0, l1 = 0.0;
        acc += gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-10, &err, &l1);
        err_acc += err;
        mag_acc += l1;
    }
    if (!std::isfinite(acc) || err_acc > 1e-8 * std::max(std::abs(acc), 1e-6 * mag_acc) + 1e-300)
        throw NumericalError(std::string("jitter_integral_forms: quadrature of ") + what +
                             " did not converge (value " + std::to_string(acc) + ", error estimate " +
                             std::to_string(err_acc) + ")");
    return 2.0 * acc;
}

// Extent of the main correlation peak: the first offset where the curve
// reaches zero, scanning outward in 1e-3 chip steps.
double main_peak_halfwidth(const std::function<double(double)>& R)
{
    constexpr double step = 1e-3;
    for (double t = step; t < 4.0; t += step)
        if (R(t) <= 0.0) return t;
    return 4.0;
}

const waveform::ChipSequence& pilot_of(const std::array<waveform::ChipSequence, 4>& codes, Sideband sb)
{
    return codes[sb == Sideband::lower ? 1 : 3];
}

const waveform::ChipSequence& data_of(const std::array<waveform::ChipSequence, 4>& codes, Sideband sb)
{
    return codes[sb == Sideband::lower ? 0 : 2];
}

// Open-loop output with the carrier known, so no Costas sign correction.
double safe_discriminate(const tracking::CorrelatorBank& bank, const tracking::DiscriminatorKind& kind, double d)
{
    try {
        return tracking::discriminate(bank, kind, d);
    } catch (const DegenerateInputError&) {
        return 0.0;
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Jitter
// ---------------------------------------------------------------------------

void JitterParams::validate() const
{
    if (!(front_end_bandwidth_hz > 0.0)) throw ConfigurationError("JitterParams: front-end bandwidth must be positive");
    if (!(loop_bandwidth_hz > 0.0)) throw ConfigurationError("JitterParams: loop bandwidth must be positive");
    if (!(spacing_d > 0.0 && spacing_d <= 2.0)) throw ConfigurationError("JitterParams: spacing must lie in (0, 2]");
    if (!(cn0 > 0.0)) throw ConfigurationError("JitterParams: C/N0 must be positive");
    if (!(t_int > 0.0)) throw ConfigurationError("JitterParams: t_int must be positive");
    if (!(chip_rate_hz > 0.0)) throw ConfigurationError("JitterParams: chip rate must be positive");
    if (!(acf_slope_alpha > 0.0) || !std::isfinite(acf_slope_alpha))
        throw DomainError("JitterParams: correlation slope must be positive (spacing inside the main peak)");
}

JitterParams JitterParams::make(const waveform::SignalConfig& sig, double band_hz, double bn_hz, double spacing_d,
                                double cn0_dbhz, double t_int, spectrum::PilotAcfView view)
{
    JitterParams p;
    p.front_end_bandwidth_hz = band_hz;
    p.loop_bandwidth_hz = bn_hz;
    p.spacing_d = spacing_d;
    p.cn0 = db_to_ratio(cn0_dbhz);
    p.t_int = t_int;
    p.chip_rate_hz = sig.chip_rate_hz;
    p.subcarrier_hz = sig.subcarrier_hz;
    p.view = view;
    if (!(spacing_d > 0.0 && spacing_d <= 2.0)) throw ConfigurationError("JitterParams: spacing must lie in (0, 2]");
    p.acf_slope_alpha = analysis::acf_slope_alpha(sig, band_hz, spacing_d, view);
    p.acf_at_d = spectrum::bandlimited_pilot_acf(sig, band_hz, view, spacing_d);
    p.validate();
    return p;
}

double acf_slope_alpha(const waveform::SignalConfig& sig, double band_hz, double spacing_d,
                       spectrum::PilotAcfView view, double step)
{
    if (!(spacing_d > 0.0)) throw DomainError("acf_slope_alpha: spacing must be positive");
    if (!(step > 0.0)) throw ArgumentError("acf_slope_alpha: step must be positive");
    auto R = [&](double t) { return spectrum::bandlimited_pilot_acf(sig, band_hz, view, t); };
    const double x = -0.5 * spacing_d;
    if (0.5 * spacing_d + step >= main_peak_halfwidth(R))
        throw DomainError("acf_slope_alpha: d/2 = " + std::to_string(0.5 * spacing_d) +
                          " chips lies outside the correlation main peak");
    const double slope = (R(x + step) - R(x - step)) / (2.0 * step);
    if (!(slope > 0.0)) throw DomainError("acf_slope_alpha: correlation is not rising at -d/2");
    return slope;
}

double jitter_leading_term(const JitterParams& p)
{
    p.validate();
    const double a = p.acf_slope_alpha;
    return p.loop_bandwidth_hz * (1.0 - p.acf_at_d) / (2.0 * a * a * p.cn0);
}

double jitter_nemlp(const JitterParams& p)
{
    const double lead = jitter_leading_term(p);
    const double x = 2.0 - p.acf_slope_alpha * p.spacing_d;
    if (!(x > 0.0)) throw DomainError("jitter_nemlp: 2 - alpha d = " + std::to_string(x) + " is not positive");
    return lead * (1.0 + 2.0 / (x * p.cn0 * p.t_int));
}

double jitter_dp(const JitterParams& p)
{
    return jitter_leading_term(p) * (1.0 + 1.0 / (p.cn0 * p.t_int));
}

spectrum::SpectrumModel jitter_model(const JitterParams& p)
{
    if (p.view == spectrum::PilotAcfView::single_sideband)
        return spectrum::make_model(p.chip_rate_hz, p.subcarrier_hz, p.front_end_bandwidth_hz - 2.0 * p.subcarrier_hz,
                                    spectrum::Normalization::unit_power, spectrum::SpectrumShape::bpsk_sideband);
    return spectrum::make_model(p.chip_rate_hz, p.subcarrier_hz, p.front_end_bandwidth_hz,
                                spectrum::Normalization::unit_power, spectrum::SpectrumShape::altboc_closed_form);
}

double jitter_integrand(const JitterParams& p, const spectrum::SpectrumModel& model, JitterTerm term, double f)
{
    const double D = p.spacing_d / p.chip_rate_hz;
    const double G = spectrum::psd(model, f);
    const double s = std::sin(kPi * f * D), c = std::cos(kPi * f * D);
    switch (term) {
    case JitterTerm::sin2: return G * s * s;
    case JitterTerm::f_sin: return f * G * s;
    case JitterTerm::cos2: return G * c * c;
    case JitterTerm::cos: return G * c;
    }
    return 0.0;
}

IntegralJitter jitter_integral_forms(const JitterParams& p, const spectrum::SpectrumModel& model)
{
    p.validate();
    model.validate();
    const double half = 0.5 * model.band_hz;
    const double piece = p.chip_rate_hz / 8.0;
    auto term = [&](JitterTerm t) { return [&p, &model, t](double f) { return jitter_integrand(p, model, t, f); }; };

    const double s2 = even_integral(term(JitterTerm::sin2), half, piece, "G sin^2");
    const double fs = even_integral(term(JitterTerm::f_sin), half, piece, "f G sin");
    const double c2 = even_integral(term(JitterTerm::cos2), half, piece, "G cos^2");
    const double c1 = even_integral(term(JitterTerm::cos), half, piece, "G cos");
    const double g = even_integral([&](double f) { return spectrum::psd(model, f); }, half, piece, "G");
    if (!(fs != 0.0) || !(c1 != 0.0) || !(g > 0.0)) throw NumericalError("jitter_integral_forms: degenerate spectrum");

    IntegralJitter out;
    const double base_s2 = p.loop_bandwidth_hz * s2 / (p.cn0 * (kTwoPi * fs) * (kTwoPi * fs));
    const double chips2 = p.chip_rate_hz * p.chip_rate_hz;
    out.beta = 1.0 + c2 / (p.t_int * p.cn0 * c1 * c1);
    out.psi = 1.0 + 1.0 / (p.t_int * p.cn0 * g);
    out.nemlp = base_s2 * chips2 * out.beta;
    out.dp = base_s2 * chips2 * out.psi;
    return out;
}

// ---------------------------------------------------------------------------
// S-curves
// ---------------------------------------------------------------------------

std::string to_string(DatasetLabel label)
{
    switch (label) {
    case DatasetLabel::clean: return "clean";
    case DatasetLabel::noisy: return "noisy";
    case DatasetLabel::filtered: return "filtered";
    }
    return "unknown";
}

double SCurve::range() const
{
    if (responses.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(responses.begin(), responses.end());
    return *hi - *lo;
}

double SCurve::zero_crossing() const
{
    double best = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
        const double a = responses[i], b = responses[i + 1];
        double z;
        if (a == 0.0) z = offsets[i];
        else if (b == 0.0) z = offsets[i + 1];
        else if ((a < 0.0) != (b < 0.0)) z = offsets[i] + (offsets[i + 1] - offsets[i]) * a / (a - b);
        else continue;
        if (std::isnan(best) || std::abs(z) < std::abs(best)) best = z;
    }
    return best;
}

double SCurve::odd_symmetry_defect() const
{
    double peak = 0.0, defect = 0.0;
    const std::size_t n = responses.size();
    for (std::size_t i = 0; i < n; ++i) {
        peak = std::max(peak, std::abs(responses[i]));
        defect = std::max(defect, std::abs(responses[i] + responses[n - 1 - i]));
    }
    return peak > 0.0 ? defect / peak : 0.0;
}

std::vector<double> symmetric_grid(double half_span, std::size_t n)
{
    if (!(half_span > 0.0) || n == 0) throw ArgumentError("symmetric_grid: span and count must be positive");
    std::vector<double> g(2 * n + 1);
    for (std::size_t i = 0; i <= 2 * n; ++i)
        g[i] = half_span * (static_cast<double>(i) - static_cast<double>(n)) / static_cast<double>(n);
    return g;
}

SCurve s_curve(const tracking::DiscriminatorKind& kind, const tracking::LoopConfig& cfg, const IqBuffer& dataset,
               const waveform::ChipSequence& pilot_code, const waveform::SignalConfig& sig,
               std::span<const double> offsets, const std::optional<tracking::TrackingState>& truth,
               DatasetLabel label, std::size_t max_epochs, const acquisition::AcqConfig& acq)
{
    cfg.validate();
    dataset.validate();
    if (offsets.empty()) throw ArgumentError("s_curve: empty offset grid");
    for (std::size_t i = 0; i < offsets.size(); ++i)
        if (std::abs(offsets[i] + offsets[offsets.size() - 1 - i]) > 1e-9)
            throw ArgumentError("s_curve: offset grid must be symmetric about zero");

    const double fs = dataset.sample_rate_hz;
    const auto N = static_cast<std::size_t>(std::llround(cfg.t_int * fs));
    std::size_t epochs = N ? dataset.size() / N : 0;
    if (max_epochs) epochs = std::min(epochs, max_epochs);
    if (epochs == 0) throw ArgumentError("s_curve: dataset shorter than one integration period");

    const double len = static_cast<double>(pilot_code.size());
    const double centre = tracking::sideband_centre_hz(sig, cfg.sideband);
    const double T = static_cast<double>(N) / fs;

    tracking::TrackingState st;
    bool estimate_phase = false;
    if (truth) {
        st = *truth;
    } else {
        auto a = acq;
        a.sideband = cfg.sideband;
        a.keep_surface = false;
        const auto res = acquisition::acquire(dataset, pilot_code, sig, a);
        if (!res.detected) throw StateError("s_curve: dataset not acquired and no truth alignment given");
        st = tracking::state_from_seed(res, sig);
        estimate_phase = true;
    }
    if (!(st.code_rate > 0.0)) st.code_rate = sig.chip_rate_hz;

    SCurve out;
    out.offsets.assign(offsets.begin(), offsets.end());
    out.responses.assign(offsets.size(), 0.0);
    out.kind = kind;
    out.dataset_label = label;
    out.epochs_averaged = epochs;

    for (std::size_t k = 0; k < epochs; ++k) {
        const std::span<const cplx> seg(dataset.samples.data() + k * N, N);
        const double t = static_cast<double>(k) * T;
        tracking::TrackingState ek = st;
        ek.code_phase = wrap_positive(st.code_phase + st.code_rate * t, len);
        ek.carrier_phase = wrap_positive(st.carrier_phase + kTwoPi * std::fmod((centre + st.doppler_hz) * t, 1.0), kTwoPi);
        if (estimate_phase) {
            ek.carrier_phase = 0.0;
            const auto b0 = tracking::correlate_epl(seg, fs, ek, cfg, pilot_code, sig);
            ek.carrier_phase = wrap_positive(std::atan2(b0.Q_P, b0.I_P), kTwoPi);
        }
        for (std::size_t i = 0; i < offsets.size(); ++i) {
            auto local = ek;
            local.code_phase = wrap_positive(ek.code_phase - offsets[i], len);
            const auto bank = tracking::correlate_epl(seg, fs, local, cfg, pilot_code, sig);
            out.responses[i] += safe_discriminate(bank, kind, cfg.correlator_spacing_d);
        }
    }
    for (auto& r : out.responses) r /= static_cast<double>(epochs);
    return out;
}

tracking::TrackingState delayed_truth(const tracking::TrackingState& truth, const waveform::SignalConfig& sig,
                                      double group_delay_s, double phase_rad)
{
    auto st = truth;
    const double rate = truth.code_rate > 0.0 ? truth.code_rate : sig.chip_rate_hz;
    st.code_phase = wrap_positive(truth.code_phase - group_delay_s * rate, sig.primary_code_length);
    st.carrier_phase = wrap_positive(truth.carrier_phase + phase_rad, kTwoPi);
    return st;
}

// ---------------------------------------------------------------------------
// Multipath
// ---------------------------------------------------------------------------

MultipathEnvelopeResult multipath_envelope(const tracking::LoopConfig& cfg, double amplitude_ratio,
                                           std::span<const double> mp_delays, const waveform::SignalConfig& sig,
                                           double band_hz, spectrum::PilotAcfView view)
{
    cfg.validate();
    if (!(amplitude_ratio >= 0.0 && amplitude_ratio < 1.0))
        throw ArgumentError("multipath_envelope: amplitude ratio must lie in [0, 1)");
    const double d = cfg.correlator_spacing_d;
    double max_delay = 0.0;
    for (double m : mp_delays) {
        if (!(m >= 0.0) || !std::isfinite(m)) throw ArgumentError("multipath_envelope: delays must be finite and >= 0");
        max_delay = std::max(max_delay, m);
    }

    std::function<double(double)> R;
    std::optional<spectrum::AcfTable> table;
    if (!std::isfinite(band_hz) && view == spectrum::PilotAcfView::single_sideband) {
        R = [](double x) {
            const double a = std::abs(x);
            return a < 1.0 ? 1.0 - a : 0.0;
        };
    } else {
        table.emplace(sig, band_hz, view, max_delay + 2.0 * d + 2.0);
        R = [&table](double x) { return (*table)(x); };
    }

    MultipathEnvelopeResult out;
    out.amplitude_ratio = amplitude_ratio;
    out.mp_delays.assign(mp_delays.begin(), mp_delays.end());

    const double window = 1.0 + d;
    constexpr double scan = 1e-3, tol = 1e-5;

    auto lock_point = [&](double delta, double sign) -> std::optional<double> {
        const double ac = sign * amplitude_ratio;
        auto Rc = [&](double x) { return R(x) + ac * R(x - delta); };
        auto D = [&](double e) {
            tracking::CorrelatorBank b;
            b.I_E = Rc(e - 0.5 * d);
            b.I_L = Rc(e + 0.5 * d);
            b.I_P = Rc(e);
            b.t_int = cfg.t_int;
            return tracking::discriminate_raw(b, cfg.discriminator);
        };
        auto bisect = [&](double lo, double hi) {
            double flo = D(lo);
            while (hi - lo > tol) {
                const double mid = 0.5 * (lo + hi);
                const double fm = D(mid);
                if (fm == 0.0) return mid;
                if ((fm < 0.0) == (flo < 0.0)) lo = mid, flo = fm;
                else hi = mid;
            }
            return 0.5 * (lo + hi);
        };
        const double d0 = D(0.0);
        if (d0 == 0.0) return 0.0;
        double prev_p = d0, prev_n = d0;
        for (int i = 1; i * scan <= window + 1e-12; ++i) {
            const double r = i * scan;
            const double fp = D(r), fn = D(-r);
            std::optional<double> zp, zn;
            if (fp == 0.0) zp = r;
            else if ((fp < 0.0) != (prev_p < 0.0)) zp = bisect(r - scan, r);
            if (fn == 0.0) zn = -r;
            else if ((fn < 0.0) != (prev_n < 0.0)) zn = bisect(-r, -r + scan);
            if (zp && zn) return std::abs(*zp) <= std::abs(*zn) ? *zp : *zn;
            if (zp) return zp;
            if (zn) return zn;
            prev_p = fp, prev_n = fn;
        }
        return std::nullopt;
    };

    for (double delta : out.mp_delays) {
        const auto up = lock_point(delta, 1.0);
        const auto lo = lock_point(delta, -1.0);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        out.upper_bias.push_back(up.value_or(nan));
        out.lower_bias.push_back(lo.value_or(nan));
        out.upper_saturated.push_back(!up);
        out.lower_saturated.push_back(!lo);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset comparison
// ---------------------------------------------------------------------------

AcfCut acquisition_acf(const IqBuffer& iq, const acquisition::AcquisitionResult& acq,
                       const waveform::ChipSequence& code_aQ, const waveform::ChipSequence& code_bQ,
                       const waveform::SignalConfig& sig, double span_chips, std::size_t segments)
{
    iq.validate();
    if (segments == 0 || !(span_chips > 0.0)) throw ArgumentError("acquisition_acf: segments and span must be positive");
    const double fs = iq.sample_rate_hz;
    auto cfg = sig;
    cfg.sample_rate_hz = fs;
    const auto N = static_cast<std::size_t>(std::llround(cfg.samples_per_code()));
    if (N == 0 || N > iq.size()) throw ShapeError("acquisition_acf: buffer shorter than one code period");

    const auto tables = waveform::SubcarrierTables::icd();
    const IqBuffer ref = waveform::pilot_reference(code_aQ, code_bQ, cfg, N, &tables);
    const auto start0 = static_cast<std::size_t>(wrap_positive(std::round(acq.code_phase_samples), static_cast<double>(N)));
    const double wipe_hz = sig.if_hz + acq.doppler_hz;

    // circular cross-correlation by FFT, zero-padded in frequency so lags
    // fall every 1 / (kInterp fs): the 1/6-chip null and 1/3-chip side peak
    // are narrower than a sample at these rates
    constexpr std::size_t kInterp = 8;
    const std::size_t M = kInterp * N;
    const auto R = fft(ref.samples);
    double ref_energy = 0.0;
    for (const auto& v : ref.samples) ref_energy += std::norm(v);
    const auto K = static_cast<std::size_t>(std::floor(span_chips / sig.chip_rate_hz * fs * kInterp + 1e-9));
    if (K >= M / 2) throw ArgumentError("acquisition_acf: span longer than half a code period");
    const FftPlan inv(M);

    AcfCut cut;
    cut.magnitude.assign(2 * K + 1, 0.0);
    for (std::size_t i = 0; i <= 2 * K; ++i)
        cut.delays_chips.push_back((static_cast<double>(i) - static_cast<double>(K)) / (kInterp * fs) * sig.chip_rate_hz);
    std::size_t used = 0;
    std::vector<cplx> z(M);
    for (std::size_t s = 0; s < segments; ++s) {
        const std::size_t start = start0 + s * N;
        if (start + N > iq.size()) break;
        std::vector<cplx> x(N);
        double energy = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const double ph = kTwoPi * std::fmod(wipe_hz * static_cast<double>(start + n) / fs, 1.0);
            x[n] = iq.samples[start + n] * std::polar(1.0, -ph);
            energy += std::norm(x[n]);
        }
        if (!(energy > 0.0)) continue;
        const auto X = fft(std::move(x));
        std::fill(z.begin(), z.end(), cplx{});
        const std::size_t pos = (N + 1) / 2;
        for (std::size_t k = 0; k < pos; ++k) z[k] = X[k] * std::conj(R[k]);
        for (std::size_t k = pos; k < N; ++k) z[M - N + k] = X[k] * std::conj(R[k]);
        inv.inverse(z);
        const double norm = static_cast<double>(N) * std::sqrt(energy * ref_energy);
        for (std::size_t i = 0; i <= 2 * K; ++i) {
            const std::size_t m = (i + M - K) % M;
            cut.magnitude[i] += std::abs(z[m]) / norm;
        }
        ++used;
    }
    if (used == 0) throw ShapeError("acquisition_acf: no complete code period after the acquired start");

    const std::size_t mid = cut.magnitude.size() / 2;
    const double main = cut.magnitude[mid];
    if (main > 0.0)
        for (auto& v : cut.magnitude) v /= main;

    double prom = 0.0;
    for (int side : {-1, 1}) {
        double null = std::numeric_limits<double>::infinity(), peak = 0.0;
        for (std::size_t i = 0; i < cut.delays_chips.size(); ++i) {
            const double t = side * cut.delays_chips[i];
            if (t >= 0.08 && t <= 0.25) null = std::min(null, cut.magnitude[i]);
            if (t >= 0.2 && t <= 0.5) peak = std::max(peak, cut.magnitude[i]);
        }
        if (std::isfinite(null)) prom += 0.5 * (peak - null);
    }
    cut.side_lobe_prominence = prom;
    return cut;
}

ScatterStats tracking_scatter(const tracking::TrackRecord& rec, std::size_t skip_epochs)
{
    ScatterStats s;
    if (skip_epochs >= rec.size()) return s;
    std::vector<double> v;
    for (std::size_t k = skip_epochs; k < rec.size(); ++k) v.push_back(std::abs(rec.epochs[k].bank.I_P));
    s.epochs = v.size();
    s.mean_abs_ip = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - s.mean_abs_ip) * (x - s.mean_abs_ip);
    s.var_abs_ip = acc / static_cast<double>(v.size());
    s.dispersion = s.mean_abs_ip > 0.0 ? s.var_abs_ip / (s.mean_abs_ip * s.mean_abs_ip)
                                       : std::numeric_limits<double>::infinity();
    return s;
}

BitComparison compare_bits(const tracking::NavBits& bits, std::span<const std::int8_t> truth, std::size_t skip)
{
    BitComparison best;
    if (skip >= bits.bits.size()) return best;
    const std::size_t n = bits.bits.size() - skip;
    if (n > truth.size()) throw ArgumentError("compare_bits: more extracted bits than truth symbols");
    best.errors = std::numeric_limits<std::size_t>::max();
    for (std::size_t shift = 0; shift + n <= truth.size(); ++shift) {
        std::size_t err = 0;
        for (std::size_t i = 0; i < n && err < best.errors; ++i)
            err += bits.bits[skip + i] != truth[shift + i];
        if (err < best.errors) {
            best.errors = err;
            best.shift = shift >= skip ? shift - skip : 0;
        }
    }
    best.compared = n;
    return best;
}

ComparisonReport compare_datasets(const IqBuffer& clean, const IqBuffer& noisy, const IqBuffer& filtered,
                                  const ComparisonSetup& setup, const ComparisonTruth& truth)
{
    ComparisonReport report;
    report.normalized_discriminator = setup.loop.discriminator.normalized;
    const std::array<const IqBuffer*, 3> inputs{&clean, &noisy, &filtered};
    const Sideband sb = setup.loop.sideband;
    const auto& pilot = pilot_of(truth.codes, sb);
    const auto& data = data_of(truth.codes, sb);

    for (int i = 0; i < 3; ++i) {
        auto& r = report.datasets[i];
        r.label = static_cast<DatasetLabel>(i);
        const IqBuffer& iq = *inputs[i];
        auto stage = [&](const char* name, auto&& fn) {
            try {
                fn();
                return true;
            } catch (const std::exception& e) {
                r.errors.push_back(std::string(name) + ": " + e.what());
                return false;
            }
        };

        stage("acquisition", [&] {
            auto acq = setup.acq;
            acq.sideband = sb;
            acq.use_data_channel = false;
            acq.keep_surface = false;
            r.acquisition = acquisition::acquire(iq, pilot, setup.sig, acq);
            if (!r.acquisition->detected) throw StateError("signal not detected");
        });
        if (r.acquisition) {
            stage("acf", [&] {
                r.acf = acquisition_acf(iq, *r.acquisition, truth.codes[1], truth.codes[3], setup.sig,
                                        setup.acf_span_chips, setup.acf_segments);
            });
        }
        if (r.acquisition && r.acquisition->detected) {
            const bool tracked = stage("tracking", [&] {
                r.track = tracking::run_tracking(iq, *r.acquisition, setup.loop, pilot, setup.sig,
                                                 setup.track_duration, &data);
                r.scatter = tracking_scatter(*r.track, setup.scatter_skip_epochs);
            });
            if (tracked) {
                stage("bits", [&] {
                    const auto bits = tracking::extract_nav_bits(*r.track, setup.symbol_period);
                    r.bits = compare_bits(bits, truth.symbols, setup.bit_skip);
                });
            }
        }
        if (!setup.scurve_offsets.empty()) {
            stage("s_curve", [&] {
                r.s_curve = s_curve(setup.loop.discriminator, setup.loop, iq, pilot, setup.sig, setup.scurve_offsets,
                                    truth.alignment[i], r.label, setup.scurve_epochs, setup.acq);
            });
        }
    }
    return report;
}

std::string ComparisonReport::to_json() const
{
    using nlohmann::json;
    json doc;
    doc["normalized_discriminator"] = normalized_discriminator;
    json sets = json::object();
    for (const auto& r : datasets) {
        json j;
        j["errors"] = r.errors;
        if (r.acquisition) {
            j["acquisition"] = {{"code_phase_samples", r.acquisition->code_phase_samples},
                                {"doppler_hz", r.acquisition->doppler_hz},
                                {"peak_metric", r.acquisition->peak_metric},
                                {"peak_to_second_ratio", r.acquisition->peak_to_second_ratio},
                                {"detected", r.acquisition->detected}};
        }
        if (r.acf) {
            j["acf"] = {{"delays_chips", r.acf->delays_chips},
                        {"magnitude", r.acf->magnitude},
                        {"side_lobe_prominence", r.acf->side_lobe_prominence}};
        }
        if (r.scatter) {
            j["tracking_scatter"] = {{"mean_abs_ip", r.scatter->mean_abs_ip},
                                     {"var_abs_ip", r.scatter->var_abs_ip},
                                     {"dispersion", r.scatter->dispersion},
                                     {"epochs", r.scatter->epochs}};
        }
        if (r.track && r.track->lock_lost_epoch) j["lock_lost_epoch"] = *r.track->lock_lost_epoch;
        if (r.bits) {
            j["bits"] = {{"compared", r.bits->compared},
                         {"errors", r.bits->errors},
                         {"ber", r.bits->ber()},
                         {"shift", r.bits->shift}};
        }
        if (r.s_curve) {
            j["s_curve"] = {{"discriminator", tracking::to_string(r.s_curve->kind.kind)},
                            {"normalized", r.s_curve->kind.normalized},
                            {"offsets_chips", r.s_curve->offsets},
                            {"responses", r.s_curve->responses},
                            {"zero_crossing_chips", r.s_curve->zero_crossing()},
                            {"odd_symmetry_defect", r.s_curve->odd_symmetry_defect()},
                            {"epochs_averaged", r.s_curve->epochs_averaged}};
        }
        sets[to_string(r.label)] = j;
    }
    doc["datasets"] = sets;

    auto metric = [&](const DatasetResult& r, const std::string& name) -> std::optional<double> {
        if (name == "peak_to_second_ratio" && r.acquisition) return r.acquisition->peak_to_second_ratio;
        if (name == "side_lobe_prominence" && r.acf) return r.acf->side_lobe_prominence;
        if (name == "scatter_dispersion" && r.scatter) return r.scatter->dispersion;
        if (name == "ber" && r.bits) return r.bits->ber();
        return std::nullopt;
    };
    json deltas = json::object();
    const std::array<std::pair<DatasetLabel, DatasetLabel>, 3> pairs{
        {{DatasetLabel::noisy, DatasetLabel::clean},
         {DatasetLabel::filtered, DatasetLabel::clean},
         {DatasetLabel::filtered, DatasetLabel::noisy}}};
    for (const auto& [a, b] : pairs) {
        json dj = json::object();
        for (const char* m : {"peak_to_second_ratio", "side_lobe_prominence", "scatter_dispersion", "ber"}) {
            const auto va = metric(get(a), m), vb = metric(get(b), m);
            dj[m] = (va && vb) ? json(*va - *vb) : json(nullptr);
        }
        deltas[to_string(a) + "_minus_" + to_string(b)] = dj;
    }
    doc["deltas"] = deltas;
    return doc.dump(2);
}

}  // namespace altboc::analysis
