#pragma once

// Thin RAII wrapper over FFTW for in-place complex transforms of a fixed size.
// Plans use FFTW_ESTIMATE so the selected algorithm, and therefore every
// output bit, is the same on every run.

#include <span>

#include "altboc/common.hpp"

namespace altboc {

class FftPlan {
public:
    explicit FftPlan(std::size_t n);
    ~FftPlan();
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    FftPlan(FftPlan&& other) noexcept;
    FftPlan& operator=(FftPlan&& other) noexcept;

    std::size_t size() const { return n_; }

    /// Unnormalized forward transform, in place.
    void forward(std::span<cplx> data) const;
    /// Unnormalized inverse transform, in place (caller divides by n).
    void inverse(std::span<cplx> data) const;

private:
    void release();

    std::size_t n_ = 0;
    void* fwd_ = nullptr;
    void* inv_ = nullptr;
    cplx* scratch_ = nullptr;
};

/// Convenience forward transform returning a new vector.
std::vector<cplx> fft(std::vector<cplx> x);
/// Convenience inverse transform normalized by 1/n.
std::vector<cplx> ifft(std::vector<cplx> x);

}  // namespace altboc
