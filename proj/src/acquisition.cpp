#include "altboc/acquisition.hpp"

#include <cmath>

#include "altboc/fft.hpp"

namespace altboc::acquisition {

using waveform::ChannelLabel;

std::vector<double> AcqConfig::doppler_grid() const
{
    std::vector<double> grid;
    const double s = step();
    const auto n = static_cast<long>(std::floor((doppler_max_hz - doppler_min_hz) / s + 1e-9));
    for (long i = 0; i <= n; ++i) grid.push_back(doppler_min_hz + static_cast<double>(i) * s);
    return grid;
}

void AcqConfig::validate(double sample_rate_hz) const
{
    if (!(doppler_min_hz < doppler_max_hz)) throw ConfigurationError("AcqConfig: doppler_min_hz must be below doppler_max_hz");
    if (doppler_step_hz < 0.0) throw ConfigurationError("AcqConfig: doppler_step_hz must be positive");
    if (!(coherent_t_int > 0.0)) throw ConfigurationError("AcqConfig: coherent_t_int must be positive");
    const double n = coherent_t_int * sample_rate_hz;
    if (std::abs(n - std::round(n)) > 1e-6) throw ConfigurationError("AcqConfig: coherent_t_int x fs must be an integer");
    if (noncoherent_sums < 1) throw ConfigurationError("AcqConfig: noncoherent_sums must be >= 1");
    if (!(detection_threshold > 0.0)) throw ConfigurationError("AcqConfig: detection_threshold must be positive");
    if (doppler_grid().empty()) throw ConfigurationError("AcqConfig: empty Doppler grid");
}

ChannelLabel acquisition_channel(const AcqConfig& cfg)
{
    if (cfg.sideband == Sideband::lower) return cfg.use_data_channel ? ChannelLabel::E5aI : ChannelLabel::E5aQ;
    return cfg.use_data_channel ? ChannelLabel::E5bI : ChannelLabel::E5bQ;
}

AcquisitionResult acquire(const IqBuffer& iq, const waveform::ChipSequence& code, const waveform::SignalConfig& sig,
                          const AcqConfig& cfg)
{
    iq.validate();
    cfg.validate(iq.sample_rate_hz);
    const double fs = iq.sample_rate_hz;
    const auto N = static_cast<std::size_t>(std::llround(cfg.coherent_t_int * fs));
    const auto K = static_cast<std::size_t>(cfg.noncoherent_sums);
    if (iq.size() < N * K) throw ArgumentError("acquire: buffer shorter than coherent_t_int x noncoherent_sums");
    if (code.size() == 0) throw ArgumentError("acquire: empty code");

    FftPlan plan(N);
    std::vector<cplx> local(N);
    const auto rep = waveform::code_replica(code, sig.chip_rate_hz, fs, N);
    for (std::size_t n = 0; n < N; ++n) local[n] = rep[n];
    plan.forward(local);
    for (auto& v : local) v = std::conj(v);

    const double offset = (cfg.sideband == Sideband::lower ? -1.0 : 1.0) * sig.subcarrier_hz + sig.if_hz;
    const auto grid = cfg.doppler_grid();
    SearchSurface surf;
    surf.doppler_hz = grid;
    surf.code_phases = N;
    surf.values.assign(grid.size() * N, 0.0);

    std::vector<cplx> wipe(N), buf(N);
    for (std::size_t row = 0; row < grid.size(); ++row) {
        // one wipe vector reused across blocks: block phase offsets vanish in |.|^2
        const double f = offset + grid[row];
        for (std::size_t n = 0; n < N; ++n) {
            const double cycles = std::fmod(static_cast<double>(n) * f, fs) / fs;
            wipe[n] = std::polar(1.0, -kTwoPi * cycles);
        }
        double* acc = &surf.values[row * N];
        for (std::size_t b = 0; b < K; ++b) {
            const cplx* x = &iq.samples[b * N];
            for (std::size_t n = 0; n < N; ++n) buf[n] = x[n] * wipe[n];
            plan.forward(buf);
            for (std::size_t n = 0; n < N; ++n) buf[n] *= local[n];
            plan.inverse(buf);
            for (std::size_t n = 0; n < N; ++n) acc[n] += std::norm(buf[n]);
        }
    }

    // lexicographic argmax: strict comparison keeps the first (lowest row, lowest column)
    std::size_t best_row = 0, best_col = 0;
    double best = -1.0, total = 0.0;
    for (std::size_t row = 0; row < grid.size(); ++row)
        for (std::size_t col = 0; col < N; ++col) {
            const double v = surf.values[row * N + col];
            total += v;
            if (v > best) best = v, best_row = row, best_col = col;
        }

    const auto exclusion = static_cast<long>(std::ceil(fs / sig.chip_rate_hz));
    double second = 0.0;
    for (std::size_t col = 0; col < N; ++col) {
        long dist = std::abs(static_cast<long>(col) - static_cast<long>(best_col));
        dist = std::min(dist, static_cast<long>(N) - dist);
        if (dist <= exclusion) continue;
        second = std::max(second, surf.values[best_row * N + col]);
    }

    AcquisitionResult res;
    res.code_phase_samples = static_cast<double>(best_col);
    res.doppler_bin = best_row;
    res.doppler_hz = grid[best_row];
    const double mean = total / static_cast<double>(surf.values.size());
    res.peak_metric = mean > 0.0 ? best / mean : 0.0;
    res.peak_to_second_ratio = second > 0.0 ? best / second : std::numeric_limits<double>::infinity();
    if (!(best > 0.0)) res.peak_to_second_ratio = 0.0;
    res.detected = res.peak_to_second_ratio >= cfg.detection_threshold;
    if (cfg.keep_surface) res.search_surface = std::move(surf);
    return res;
}

const SearchSurface& export_search_surface(const AcquisitionResult& result)
{
    if (!result.search_surface) throw StateError("export_search_surface: surface was not retained");
    return *result.search_surface;
}

}  // namespace altboc::acquisition
