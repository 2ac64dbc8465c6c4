#include "altboc/common.hpp"

#include <cmath>

namespace altboc {

void IqBuffer::validate() const
{
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
        throw ArgumentError("IqBuffer: sample_rate_hz must be positive");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i].real()) || !std::isfinite(samples[i].imag()))
            throw ArgumentError("IqBuffer: non-finite sample at index " + std::to_string(i));
    }
}

double mean_power(const std::vector<cplx>& x)
{
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& v : x) acc += std::norm(v);
    return acc / static_cast<double>(x.size());
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream)
{
    // splitmix64 over (seed, stream) so adjacent seeds give unrelated states
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t s = mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace altboc
