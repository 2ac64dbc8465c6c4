#pragma once

// Code and carrier tracking of one AltBOC sideband. The pilot code of the
// selected sideband drives a DLL and a Costas carrier loop; the data code
// of the same sideband is correlated open loop for bit extraction.
//
// Sign convention: code error = local replica delay minus true delay, in
// chips. A positive discriminator output means the local code is late, and
// the early replica sits d/2 chips ahead of prompt.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "altboc/acquisition.hpp"
#include "altboc/common.hpp"
#include "altboc/waveform.hpp"

namespace altboc::tracking {

struct CorrelatorBank {
    double I_E = 0.0, I_P = 0.0, I_L = 0.0;
    double Q_E = 0.0, Q_P = 0.0, Q_L = 0.0;
    double t_int = 0.0;

    cplx prompt() const { return {I_P, Q_P}; }
    bool finite() const;
    /// All six values negated: the bank seen through a carrier offset of pi.
    CorrelatorBank flipped() const;
    CorrelatorBank scaled(double a) const;
};

enum class Discriminator { EML, NEMLP, DP };
enum class NemlpForm { standard, as_printed };

std::string to_string(Discriminator d);
Discriminator discriminator_from_string(std::string_view name);

/// Normalizers: EML / (I_E + I_L), NEMLP / ((I_E^2 + Q_E^2) + (I_L^2 + Q_L^2)),
/// DP / (I_P^2 + Q_P^2). Normalized outputs are further scaled so that the
/// slope at zero error is one for a unit triangle correlation at spacing d:
/// EML x (2 - d) / 2, NEMLP x (2 - d) / 4, DP x 1 / 2. The result then reads
/// in chips near lock.
struct DiscriminatorKind {
    Discriminator kind = Discriminator::NEMLP;
    bool normalized = true;
    NemlpForm nemlp_form = NemlpForm::standard;
};

/// Raw discriminator (no normalization) as a function of the bank alone.
///   EML   = I_E - I_L
///   NEMLP = (I_E^2 + Q_E^2) - (I_L^2 + Q_L^2)      standard
///         = (I_E^2 - I_L^2) - (Q_E^2 - Q_L^2)      as printed
///   DP    = (I_E - I_L) I_P + (Q_E - Q_L) Q_P
double discriminate_raw(const CorrelatorBank& bank, const DiscriminatorKind& kind);

/// Applies the selected normalization and gain. Throws DegenerateInputError
/// when the normalizer is zero.
double discriminate(const CorrelatorBank& bank, const DiscriminatorKind& kind, double spacing_d);

struct LoopConfig {
    double dll_bn_hz = 2.0;
    double pll_bn_hz = 15.0;
    double correlator_spacing_d = 0.5;  // early-to-late, chips
    double t_int = 1e-3;
    DiscriminatorKind discriminator;
    int loop_order = 1;  // DLL; the carrier loop is always second order

    /// Epochs of frequency-locked pull-in before the Costas PLL takes over.
    int fll_epochs = 40;
    int lock_window = 20;
    double lock_floor = 1.5;
    int lock_loss_epochs = 50;
    /// Scale the code rate with the carrier Doppler. Off by default because
    /// the channel model keeps the code delay constant.
    bool carrier_aiding = false;
    /// Run the carrier NCO open loop at the initial Doppler and phase, for
    /// truth-aided code-loop experiments.
    bool hold_carrier = false;
    acquisition::Sideband sideband = acquisition::Sideband::lower;

    /// Throws ConfigurationError unless 0 < d <= 2, B_n T < 0.1 for both
    /// loops and the order is 1 or 2.
    void validate() const;
};

struct TrackingState {
    double code_phase = 0.0;  // chips at the first sample of the epoch, [0, L)
    double code_rate = 0.0;   // chips per second
    double carrier_phase = 0.0;
    double doppler_hz = 0.0;  // relative to the sideband centre at IF
    double lock_metric = 0.0;
};

/// Phase of the selected sideband's fundamental in the ICD subcarrier
/// staircase (about +-pi/8 from the half-slot hold). Correlations remove it so
/// an in-phase carrier puts the pilot on the I arm.
double sideband_phase(acquisition::Sideband sideband);

/// Carrier frequency of the sideband at IF before Doppler.
double sideband_centre_hz(const waveform::SignalConfig& sig, acquisition::Sideband sideband);

/// Integrate-and-dump over one epoch: carrier wipe at the state's phase and
/// sideband frequency, then box-integrated (sample-centred) E/P/L replicas
/// of `code` at +d/2, 0, -d/2 chips. Pilot correlations are rotated by -j so
/// the pilot lands on I. Sums are divided by the sample count. Throws
/// ShapeError unless the segment holds exactly t_int x fs samples.
CorrelatorBank correlate_epl(std::span<const cplx> segment, double sample_rate_hz, const TrackingState& state,
                             const LoopConfig& cfg, const waveform::ChipSequence& code,
                             const waveform::SignalConfig& sig);
CorrelatorBank correlate_epl(const IqBuffer& segment, const TrackingState& state, const LoopConfig& cfg,
                             const waveform::ChipSequence& code, const waveform::SignalConfig& sig);

/// Prompt-only correlation with the same wipe; data codes are not rotated.
cplx correlate_prompt(std::span<const cplx> segment, double sample_rate_hz, const TrackingState& state,
                      const LoopConfig& cfg, const waveform::ChipSequence& code, const waveform::SignalConfig& sig);

/// Bandwidth-to-gain mapping (noise bandwidth B_n, loop update period T):
///
///   order | natural frequency     | per-epoch update
///   ------+-----------------------+------------------------------------------
///     1   | w0 = 4 B_n            | out = w0 e
///     2   | wn = B_n / 0.53       | integ += wn^2 e T; out = integ + 1.414 wn e
///
/// The second-order row is the zeta = 0.707 design. `out` is a rate in the
/// error's units per second.
class LoopFilter {
public:
    LoopFilter(int order, double bn_hz, double t_int);
    double step(double error);
    void reset(double integrator = 0.0) { integ_ = integrator; }
    double integrator() const { return integ_; }
    int order() const { return order_; }

private:
    int order_;
    double w_;
    double t_;
    double integ_ = 0.0;
};

struct EpochRecord {
    double time = 0.0;  // start of the epoch, seconds into the buffer
    TrackingState state;
    CorrelatorBank bank;
    cplx data_prompt{};
    double code_discriminator = 0.0;
    double carrier_discriminator = 0.0;  // rad (PLL) or Hz (FLL)
    bool pll_active = false;
    bool locked = true;
};

struct TrackRecord {
    std::vector<EpochRecord> epochs;
    double t_int = 0.0;
    std::size_t samples_per_epoch = 0;
    bool has_data_channel = false;
    std::optional<std::size_t> lock_lost_epoch;

    std::size_t size() const { return epochs.size(); }
    /// One row per epoch: time, six correlators, data prompt, discriminator
    /// outputs, state fields and lock metric.
    void write_csv(std::ostream& os) const;
};

/// Closed-loop tracking from an acquisition seed. The FLL runs for
/// fll_epochs, then the Costas PLL (two-quadrant arctangent) holds the
/// phase. Coherent EML is fed to the DLL with the sign of I_P, because the
/// Costas loop may settle half a cycle away. Loss of lock is recorded, not
/// thrown. Throws ArgumentError when the buffer holds fewer samples than
/// requested.
TrackRecord run_tracking(const IqBuffer& iq, const acquisition::AcquisitionResult& seed, const LoopConfig& cfg,
                         const waveform::ChipSequence& pilot_code, const waveform::SignalConfig& sig, double duration,
                         const waveform::ChipSequence* data_code = nullptr);

/// Same loops started from an explicit state (code rate taken from the
/// state when positive).
TrackRecord run_tracking(const IqBuffer& iq, const TrackingState& initial, const LoopConfig& cfg,
                         const waveform::ChipSequence& pilot_code, const waveform::SignalConfig& sig, double duration,
                         const waveform::ChipSequence* data_code = nullptr);

/// Initial state for a seed: chip phase at sample 0 given the code start sample.
TrackingState state_from_seed(const acquisition::AcquisitionResult& seed, const waveform::SignalConfig& sig);

struct NavBits {
    std::vector<std::int8_t> bits;  // +-1, 0 marks a symbol spanning unlocked epochs
    std::size_t first_epoch = 0;    // epoch where bits[0] starts
    std::size_t epochs_per_symbol = 0;
    /// True when the pilot resolved the polarity (bits are absolute).
    bool polarity_resolved = false;
    std::size_t gaps() const;
};

/// Pilot-referenced prompt Re(D conj(P)) / |P| summed per symbol after
/// energy-based symbol synchronization. Throws StateError without data
/// correlations and ArgumentError unless t_int divides the symbol period.
NavBits extract_nav_bits(const TrackRecord& record, double symbol_period);

}  // namespace altboc::tracking
