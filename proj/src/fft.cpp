#include "altboc/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <utility>

namespace altboc {

FftPlan::FftPlan(std::size_t n) : n_(n)
{
    if (n == 0) throw ArgumentError("FftPlan: size must be positive");
    scratch_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * n));
    auto* buf = reinterpret_cast<fftw_complex*>(scratch_);
    fwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!fwd_ || !inv_) {
        release();
        throw NumericalError("FftPlan: FFTW plan creation failed");
    }
}

FftPlan::~FftPlan() { release(); }

FftPlan::FftPlan(FftPlan&& other) noexcept
    : n_(std::exchange(other.n_, 0)),
      fwd_(std::exchange(other.fwd_, nullptr)),
      inv_(std::exchange(other.inv_, nullptr)),
      scratch_(std::exchange(other.scratch_, nullptr))
{
}

FftPlan& FftPlan::operator=(FftPlan&& other) noexcept
{
    if (this != &other) {
        release();
        n_ = std::exchange(other.n_, 0);
        fwd_ = std::exchange(other.fwd_, nullptr);
        inv_ = std::exchange(other.inv_, nullptr);
        scratch_ = std::exchange(other.scratch_, nullptr);
    }
    return *this;
}

void FftPlan::release()
{
    if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    if (inv_) fftw_destroy_plan(static_cast<fftw_plan>(inv_));
    if (scratch_) fftw_free(scratch_);
    fwd_ = inv_ = nullptr;
    scratch_ = nullptr;
}

namespace {

void run(void* plan, std::size_t n, cplx* scratch, std::span<cplx> data)
{
    if (data.size() != n) throw ShapeError("FftPlan: transform length mismatch");
    // plans were made for the aligned scratch buffer; new-array execute needs
    // matching alignment, so copy through scratch
    std::memcpy(scratch, data.data(), n * sizeof(cplx));
    auto* buf = reinterpret_cast<fftw_complex*>(scratch);
    fftw_execute_dft(static_cast<fftw_plan>(plan), buf, buf);
    std::memcpy(data.data(), scratch, n * sizeof(cplx));
}

}  // namespace

void FftPlan::forward(std::span<cplx> data) const { run(fwd_, n_, scratch_, data); }
void FftPlan::inverse(std::span<cplx> data) const { run(inv_, n_, scratch_, data); }

std::vector<cplx> fft(std::vector<cplx> x)
{
    FftPlan plan(x.size());
    plan.forward(x);
    return x;
}

std::vector<cplx> ifft(std::vector<cplx> x)
{
    FftPlan plan(x.size());
    plan.inverse(x);
    const double scale = 1.0 / static_cast<double>(x.size());
    for (auto& v : x) v *= scale;
    return x;
}

}  // namespace altboc
