#pragma once

// Shared vocabulary for the AltBOC baseband library: sample type, the IQ
// buffer, error hierarchy and seeded random streams.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace altboc {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

// ---------------------------------------------------------------------------
// Errors. Each kind maps to one failure class named in the module contracts.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentError : public Error { public: using Error::Error; };
class ConfigurationError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class RegistryError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class DegenerateInputError : public Error { public: using Error::Error; };
class StateError : public Error { public: using Error::Error; };
class NumericalError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class MetadataError : public Error { public: using Error::Error; };

/// A uniformly sampled complex baseband (or IF) sample stream.
struct IqBuffer {
    std::vector<cplx> samples;
    double sample_rate_hz = 0.0;
    double start_time = 0.0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    double duration() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
    double time_of(std::size_t n) const { return start_time + static_cast<double>(n) / sample_rate_hz; }

    /// Throws ArgumentError when the rate is not positive or a sample is not finite.
    void validate() const;
};

/// Mean of |x|^2 over the buffer.
double mean_power(const std::vector<cplx>& x);

/// Deterministic 64-bit engine for a (seed, stream) pair. Streams let one
/// scenario seed drive independent generators without correlation.
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0);

/// x mod m folded into [0, m).
inline double wrap_positive(double x, double m)
{
    double r = std::fmod(x, m);
    if (r < 0.0) r += m;
    if (r >= m) r -= m;
    return r;
}

/// x mod m folded into [-m/2, m/2).
inline double wrap_symmetric(double x, double m)
{
    double r = wrap_positive(x + 0.5 * m, m);
    return r - 0.5 * m;
}

inline double db_to_ratio(double db) { return std::pow(10.0, db / 10.0); }
inline double ratio_to_db(double r) { return 10.0 * std::log10(r); }

}  // namespace altboc
