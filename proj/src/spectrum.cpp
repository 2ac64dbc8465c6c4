#include "altboc/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "altboc/fft.hpp"

namespace altboc::spectrum {

namespace {

using boost::math::quadrature::gauss_kronrod;

double sinc(double x)
{
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

// Adaptive Gauss-Kronrod over [a, b] cut into pieces no wider than `piece`,
// so lobes and oscillations never straddle too much of one panel.
template <class F>
double integrate(F&& f, double a, double b, double piece, double tol = 1e-11)
{
    if (!(b > a)) return 0.0;
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / piece)));
    const double h = (b - a) / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double err = 0.0;
        const double lo = a + i * h;
        const double hi = (i + 1 == n) ? b : lo + h;
        acc += gauss_kronrod<double, 31>::integrate(f, lo, hi, 12, tol, &err);
        if (!std::isfinite(acc)) throw NumericalError("spectrum: quadrature produced a non-finite value");
    }
    return acc;
}

double closed_form_psd(double fp, double fsc, double f)
{
    const double a = std::cos(std::numbers::pi * f / (2.0 * fsc));
    const double c = std::cos(std::numbers::pi * f / fp);
    const double bracket = a * a - a - 2.0 * a * std::cos(std::numbers::pi * f / (4.0 * fsc)) + 2.0;
    const double pf = std::numbers::pi * f;
    return 4.0 * fp / (pf * pf) * (c * c) / (a * a) * bracket;
}

bool near_singularity(double fsc, double f)
{
    if (std::abs(f) < 0.5) return true;
    // a = 0 at odd multiples of f_sc
    const double m = f / fsc;
    const double odd = 2.0 * std::round((m - 1.0) / 2.0) + 1.0;
    return std::abs(f - odd * fsc) < 0.5;
}

}  // namespace

void SpectrumModel::validate() const
{
    if (!(chip_rate_hz > 0.0) || !(subcarrier_hz > 0.0))
        throw ConfigurationError("SpectrumModel: f_p and f_sc must be positive");
    if (normalization == Normalization::unit_power && !(band_hz > 0.0 && std::isfinite(band_hz)))
        throw ConfigurationError("SpectrumModel: unit-power normalization needs a finite positive band");
}

SpectrumModel make_model(double chip_rate_hz, double subcarrier_hz, double band_hz, Normalization normalization,
                         SpectrumShape shape)
{
    SpectrumModel m;
    m.chip_rate_hz = chip_rate_hz;
    m.subcarrier_hz = subcarrier_hz;
    m.band_hz = band_hz;
    m.normalization = normalization;
    m.shape = shape;
    m.validate();
    if (normalization == Normalization::unit_power) {
        const double total = integrate([&](double f) { return psd_raw(m, f); }, -0.5 * band_hz, 0.5 * band_hz,
                                       0.25 * std::min(chip_rate_hz, subcarrier_hz));
        if (!(total > 0.0)) throw NumericalError("make_model: PSD integrates to zero over the band");
        m.scale = 1.0 / total;
    }
    return m;
}

SpectrumModel make_model(const waveform::SignalConfig& cfg, double band_hz, Normalization normalization,
                         SpectrumShape shape)
{
    return make_model(cfg.chip_rate_hz, cfg.subcarrier_hz, band_hz, normalization, shape);
}

double psd_raw(const SpectrumModel& model, double f)
{
    const double fp = model.chip_rate_hz;
    if (model.shape == SpectrumShape::bpsk_sideband) {
        const double s = sinc(f / fp);
        return s * s / fp;
    }
    const double fsc = model.subcarrier_hz;
    double g;
    if (near_singularity(fsc, f)) {
        // nearest-neighbour limit on the 1 Hz grid around the singular point
        const double centre = std::abs(f) < 0.5 ? 0.0 : (2.0 * std::round((f / fsc - 1.0) / 2.0) + 1.0) * fsc;
        g = 0.5 * (closed_form_psd(fp, fsc, centre - 1.0) + closed_form_psd(fp, fsc, centre + 1.0));
    } else {
        g = closed_form_psd(fp, fsc, f);
    }
    return std::max(g, 0.0);
}

double psd(const SpectrumModel& model, double f) { return model.scale * psd_raw(model, f); }

double band_power_fraction(const SpectrumModel& model, double f_lo, double f_hi)
{
    if (f_lo > f_hi) throw ArgumentError("band_power_fraction: f_lo must not exceed f_hi");
    if (f_lo == f_hi) return 0.0;
    const double piece = 0.25 * std::min(model.chip_rate_hz, model.subcarrier_hz);
    return integrate([&](double f) { return psd(model, f); }, f_lo, f_hi, piece);
}

HarmonicShares harmonic_shares(const waveform::SubcarrierTables& tables)
{
    // Exponential e(k) = sc(k) - j sc(k - 2) over the eight slots. A
    // staircase with DFT coefficient C_m has continuous Fourier coefficient
    // C_m sinc(n / 8) at harmonic n = m (mod 8).
    auto dft_power = [](const std::array<double, 8>& t, std::array<double, 8>& out) {
        double mean = 0.0;
        for (int m = 0; m < 8; ++m) {
            cplx acc{};
            for (int k = 0; k < 8; ++k) {
                const cplx e(t[k], -t[(k + 6) % 8]);
                acc += e * std::polar(1.0, -kTwoPi * m * k / 8.0);
            }
            out[m] = std::norm(acc / 8.0);
        }
        for (int k = 0; k < 8; ++k) mean += t[k] * t[k] + t[(k + 6) % 8] * t[(k + 6) % 8];
        return mean / 8.0;
    };
    auto share = [](const std::array<double, 8>& pw, double total, int harmonic) {
        double s = 0.0;
        for (int n : {harmonic, -harmonic}) {
            const int m = ((n % 8) + 8) % 8;
            const double sn = sinc(n / 8.0);
            s += pw[m] * sn * sn;
        }
        return s / total;
    };
    std::array<double, 8> ps{}, pp{};
    const double s_pow = dft_power(tables.single, ps);
    const double p_pow = dft_power(tables.product, pp);
    HarmonicShares h;
    h.single_power = s_pow / (s_pow + p_pow);
    h.product_power = p_pow / (s_pow + p_pow);
    h.single_first_harmonic = share(ps, s_pow, 1);
    h.product_third_harmonic = share(pp, p_pow, 3);
    return h;
}

cplx pilot_acf_analytic(const waveform::SignalConfig& cfg, double tau)
{
    const double x = std::abs(tau) * cfg.chip_rate_hz;
    const double tri = x < 1.0 ? 1.0 - x : 0.0;
    const double w = kTwoPi * cfg.subcarrier_hz * tau;
    return 0.5 * (tri * std::polar(1.0, -w) + tri * std::polar(1.0, w));
}

double bandlimited_pilot_acf(const waveform::SignalConfig& cfg, double band_hz, PilotAcfView view, double tau_chips)
{
    const double r = cfg.subcarrier_hz / cfg.chip_rate_hz;
    const double ax = std::abs(tau_chips);
    if (!std::isfinite(band_hz)) {
        const double tri = ax < 1.0 ? 1.0 - ax : 0.0;
        return view == PilotAcfView::single_sideband ? tri : tri * std::cos(kTwoPi * r * tau_chips);
    }
    if (!(band_hz > 0.0)) throw DomainError("bandlimited_pilot_acf: band must be positive");

    // normalized frequency u = f / f_p
    if (view == PilotAcfView::single_sideband) {
        const double w = 0.5 * (band_hz - 2.0 * cfg.subcarrier_hz) / cfg.chip_rate_hz;
        if (!(w > 0.0)) throw DomainError("bandlimited_pilot_acf: band leaves no symmetric sideband");
        auto g = [](double u) {
            const double s = sinc(u);
            return s * s;
        };
        const double num = integrate([&](double u) { return g(u) * std::cos(kTwoPi * u * tau_chips); }, 0.0, w, 0.125);
        const double den = integrate(g, 0.0, w, 0.125);
        return num / den;
    }
    const double w = 0.5 * band_hz / cfg.chip_rate_hz;
    auto g = [r](double u) {
        const double a = sinc(u - r), b = sinc(u + r);
        return 0.5 * (a * a + b * b);
    };
    const double num = integrate([&](double u) { return g(u) * std::cos(kTwoPi * u * tau_chips); }, 0.0, w, 0.125);
    const double den = integrate(g, 0.0, w, 0.125);
    return num / den;
}

AcfTable::AcfTable(const waveform::SignalConfig& cfg, double band_hz, PilotAcfView view, double span_chips,
                   double step_chips)
    : span_(span_chips), step_(step_chips)
{
    if (!(span_chips > 0.0) || !(step_chips > 0.0)) throw ArgumentError("AcfTable: span and step must be positive");
    const auto n = static_cast<std::size_t>(std::ceil(span_chips / step_chips));
    values_.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        values_[i] = bandlimited_pilot_acf(cfg, band_hz, view, static_cast<double>(i) * step_chips);
}

double AcfTable::operator()(double tau_chips) const
{
    const double x = std::abs(tau_chips) / step_;
    const auto i = static_cast<std::size_t>(x);
    if (i + 1 >= values_.size()) return 0.0;
    const double frac = x - static_cast<double>(i);
    return values_[i] + frac * (values_[i + 1] - values_[i]);
}

AcfCurve empirical_acf(const IqBuffer& iq, const IqBuffer& replica, double max_lag)
{
    if (std::abs(iq.sample_rate_hz - replica.sample_rate_hz) > 1e-9 * iq.sample_rate_hz)
        throw ShapeError("empirical_acf: sample rates differ");
    if (replica.size() > iq.size() || replica.empty())
        throw ShapeError("empirical_acf: replica must be non-empty and no longer than the signal");
    if (!(max_lag >= 0.0)) throw ArgumentError("empirical_acf: max_lag must be non-negative");

    const std::size_t N = iq.size(), M = replica.size();
    const auto K = static_cast<long>(std::floor(max_lag * iq.sample_rate_hz + 1e-9));
    double rep_energy = 0.0;
    for (const auto& v : replica.samples) rep_energy += std::norm(v);
    if (!(rep_energy > 0.0)) throw DegenerateInputError("empirical_acf: replica has no energy");

    AcfCurve curve;
    curve.delays.reserve(2 * K + 1);
    curve.values.reserve(2 * K + 1);
    for (long k = -K; k <= K; ++k) {
        cplx acc{};
        double e = 0.0;
        const std::size_t off = static_cast<std::size_t>(((k % static_cast<long>(N)) + static_cast<long>(N)) % static_cast<long>(N));
        for (std::size_t n = 0; n < M; ++n) {
            const cplx x = iq.samples[(n + off) % N];
            acc += x * std::conj(replica.samples[n]);
            e += std::norm(x);
        }
        curve.delays.push_back(static_cast<double>(k) / iq.sample_rate_hz);
        curve.values.push_back(e > 0.0 ? acc / std::sqrt(e * rep_energy) : cplx{});
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < curve.values.size(); ++i)
        if (std::abs(curve.values[i]) > std::abs(curve.values[best])) best = i;
    const double mag = std::abs(curve.values[best]);
    if (mag > 0.0) {
        const cplx rot = std::conj(curve.values[best]) / mag;
        for (auto& v : curve.values) v *= rot;
    }
    return curve;
}

double PsdEstimate::integral() const
{
    double acc = 0.0;
    for (double v : density) acc += v;
    return acc * resolution_hz;
}

PsdEstimate welch_psd(const IqBuffer& iq, std::size_t segment)
{
    iq.validate();
    if (segment < 16 || iq.size() < segment) throw ShapeError("welch_psd: buffer shorter than one segment");
    std::vector<double> window(segment);
    double wpow = 0.0;
    for (std::size_t n = 0; n < segment; ++n) {
        window[n] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(n) / static_cast<double>(segment)));
        wpow += window[n] * window[n];
    }
    const std::size_t hop = segment / 2;
    FftPlan plan(segment);
    std::vector<double> acc(segment, 0.0);
    std::vector<cplx> buf(segment);
    std::size_t count = 0;
    for (std::size_t start = 0; start + segment <= iq.size(); start += hop, ++count) {
        for (std::size_t n = 0; n < segment; ++n) buf[n] = iq.samples[start + n] * window[n];
        plan.forward(buf);
        for (std::size_t n = 0; n < segment; ++n) acc[n] += std::norm(buf[n]);
    }
    PsdEstimate out;
    out.resolution_hz = iq.sample_rate_hz / static_cast<double>(segment);
    out.freqs.resize(segment);
    out.density.resize(segment);
    const double norm = 1.0 / (static_cast<double>(count) * iq.sample_rate_hz * wpow);
    const std::size_t half = segment / 2;
    for (std::size_t i = 0; i < segment; ++i) {
        const std::size_t bin = (i + half) % segment;  // fftshift
        out.freqs[i] = (static_cast<double>(i) - static_cast<double>(half)) * out.resolution_hz;
        out.density[i] = acc[bin] * norm;
    }
    return out;
}

LobeFit harmonic_lobe_fit(const PsdEstimate& psd, double chip_rate_hz, double subcarrier_hz, double sample_rate_hz,
                          int max_harmonic)
{
    if (psd.freqs.empty()) throw ShapeError("harmonic_lobe_fit: empty estimate");
    if (max_harmonic < 1) throw ArgumentError("harmonic_lobe_fit: max_harmonic must be at least 1");
    LobeFit fit;
    for (int n = 1; n <= max_harmonic; n += 2) fit.harmonics.push_back(n);
    const auto rows = static_cast<Eigen::Index>(psd.freqs.size());
    const auto cols = static_cast<Eigen::Index>(fit.harmonics.size());
    Eigen::MatrixXd A(rows, cols);
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double f = psd.freqs[static_cast<std::size_t>(i)];
        y(i) = psd.density[static_cast<std::size_t>(i)];
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double centre = fit.harmonics[static_cast<std::size_t>(c)] * subcarrier_hz;
            double g = 0.0;
            for (double sgn : {1.0, -1.0})
                for (int k = -6; k <= 6; ++k) {
                    const double s = sinc((f - sgn * centre + k * sample_rate_hz) / chip_rate_hz);
                    g += s * s / chip_rate_hz;
                }
            A(i, c) = g;
        }
    }
    const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(y);
    const double total = psd.integral();
    for (Eigen::Index c = 0; c < cols; ++c) fit.fractions.push_back(2.0 * coef(c) / total);
    fit.residual_rms = std::sqrt((A * coef - y).squaredNorm() / static_cast<double>(rows));
    return fit;
}

double spectral_centroid(const PsdEstimate& psd)
{
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < psd.freqs.size(); ++i) {
        num += psd.freqs[i] * psd.density[i];
        den += psd.density[i];
    }
    if (!(den > 0.0)) throw DegenerateInputError("spectral_centroid: zero power");
    return num / den;
}

}  // namespace altboc::spectrum
