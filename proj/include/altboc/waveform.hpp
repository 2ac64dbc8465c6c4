#pragma once

// E5 AltBOC(15,10) signal synthesis.
//
// The exact modulator implements the four-term 8-PSK construction with the
// 1/(2*sqrt(2)) factor on every term and quarter-period (T_s/4) shifted
// subcarriers. With the ICD subcarrier tables and the product-signal rule
// below, every output sample has modulus exactly `amplitude`; that constant
// envelope is what fixes the scaling choice (the 1/(2*sqrt(2)) factor yields
// |s| = 1 for unit amplitude).
//
// Product-signal rule (complementary triple products):
//   ebar_aI = e_aQ e_bI e_bQ     ebar_aQ = e_aI e_bI e_bQ
//   ebar_bI = e_bQ e_aI e_aQ     ebar_bQ = e_bI e_aI e_aQ

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "altboc/common.hpp"

namespace altboc::waveform {

enum class ChannelLabel { E5aI, E5aQ, E5bI, E5bQ };

std::string to_string(ChannelLabel label);
/// Accepts "E5a-I", "E5a-Q", "E5b-I", "E5b-Q"; throws ArgumentError otherwise.
ChannelLabel channel_from_string(std::string_view name);
constexpr bool is_data_channel(ChannelLabel label)
{
    return label == ChannelLabel::E5aI || label == ChannelLabel::E5bI;
}

/// Physical constants of the E5 signal and of the sampled representation.
struct SignalConfig {
    double carrier_hz = 1191.795e6;
    double subcarrier_hz = 15.345e6;
    double chip_rate_hz = 10.23e6;
    double sample_rate_hz = 60e6;
    double if_hz = 7.8e6;
    int primary_code_length = 10230;
    double amplitude = 1.0;

    double subcarrier_period() const { return 1.0 / subcarrier_hz; }
    double code_period() const { return primary_code_length / chip_rate_hz; }
    double samples_per_code() const { return sample_rate_hz * code_period(); }
    double samples_per_chip() const { return sample_rate_hz / chip_rate_hz; }
    /// Span of the two main lobes, 2 (f_sc + f_p) = 51.15 MHz at full scale.
    double main_lobe_bandwidth_hz() const { return 2.0 * (subcarrier_hz + chip_rate_hz); }

    /// Checks f_sc = 1.5 f_p, positive rates and sample_rate > 2 (f_sc + f_p).
    void validate() const;

    /// All rates divided by ten and a 1023-chip code: same 1 ms code period
    /// and subcarrier/chip geometry at a tenth of the sample count.
    static SignalConfig desk_scale();
};

/// A primary spreading code in bipolar form.
struct ChipSequence {
    std::vector<std::int8_t> chips;
    ChannelLabel channel_label = ChannelLabel::E5aQ;
    int prn_id = 0;

    std::size_t size() const { return chips.size(); }
    std::int8_t operator[](std::size_t i) const { return chips[i]; }
};

enum class CodeMode { icd_register, synthetic };

/// Start values of the second shift register, keyed by (channel, PRN).
///
/// The register structure (14-stage base registers, their feedback
/// polynomials, all-ones first register) is fixed; the per-PRN start values
/// live in this table. The built-in table covers PRN 1..50 with
/// placeholder start values; load the published table with from_csv() for
/// bit-exact broadcast codes.
class PrnRegistry {
public:
    static const PrnRegistry& builtin();
    /// CSV rows: `channel,prn,start_octal` (e.g. `E5a-Q,17,12345`); '#' comments allowed.
    static PrnRegistry from_csv(const std::filesystem::path& path);

    /// Throws RegistryError when the (channel, prn) pair is absent.
    std::uint16_t start_value(ChannelLabel label, int prn) const;
    bool contains(ChannelLabel label, int prn) const;
    void set(ChannelLabel label, int prn, std::uint16_t start);

private:
    std::map<std::pair<int, int>, std::uint16_t> table_;
};

/// Feedback polynomial (octal notation, bit i = coefficient of x^i) of the
/// two base registers for a channel.
std::pair<std::uint32_t, std::uint32_t> register_polynomials(ChannelLabel label);

/// Output of a Fibonacci LFSR a_{k+n} = sum a_{k+i} over the set low
/// coefficients of `poly`, starting from `state` (LSB = a_0).
std::vector<std::uint8_t> lfsr_sequence(std::uint32_t poly, std::uint32_t state, std::size_t length);

/// Primitive polynomials (index 0 or 1) of a given degree (5..20). Synthetic
/// codes XOR the two sequences, Gold-family style, from seeded start states.
std::uint32_t synthetic_polynomial(int degree, int index = 0);

ChipSequence generate_primary_code(int prn_id, ChannelLabel label, const SignalConfig& cfg,
                                   CodeMode mode = CodeMode::icd_register,
                                   const PrnRegistry& registry = PrnRegistry::builtin());

/// Bipolar symbol stream (navigation data, or a pilot overlay).
struct NavDataStream {
    std::vector<std::int8_t> symbols;
    double symbol_period = 0.02;
    ChannelLabel channel_label = ChannelLabel::E5aI;
};

/// Random data symbols for data channels; the constant +1 stream for pilots.
NavDataStream make_nav_stream(ChannelLabel label, std::size_t symbol_count, double symbol_period,
                              std::uint64_t seed);

/// Synthetic 100-chip secondary overlay for a pilot channel, one chip per
/// primary code period, repeated over `code_periods`.
NavDataStream make_secondary_overlay(ChannelLabel label, int prn_id, std::size_t code_periods,
                                     const SignalConfig& cfg);

/// Chip-rate waveforms of the eight AltBOC components.
struct ComponentSet {
    std::vector<std::int8_t> e_aI, e_aQ, e_bI, e_bQ;
    std::vector<std::int8_t> ebar_aI, ebar_aQ, ebar_bI, ebar_bQ;
    double chip_rate_hz = 0.0;

    std::size_t chip_count() const { return e_aI.size(); }
    double duration() const { return static_cast<double>(chip_count()) / chip_rate_hz; }
};

/// Codes in order (E5a-I, E5a-Q, E5b-I, E5b-Q). The data streams set the
/// span; pilots carry +1 unless an overlay is supplied.
ComponentSet build_components(const std::array<ChipSequence, 4>& codes, const NavDataStream& data_a,
                              const NavDataStream& data_b, const SignalConfig& cfg,
                              const NavDataStream* pilot_a = nullptr,
                              const NavDataStream* pilot_b = nullptr);

/// Eight-slot subcarrier coefficients over one subcarrier period.
struct SubcarrierTables {
    std::array<double, 8> single{};
    std::array<double, 8> product{};

    /// Tables from the E5 interface control document.
    static SubcarrierTables icd();
};

IqBuffer modulate_exact(const ComponentSet& comp, const SubcarrierTables& tables, const SignalConfig& cfg,
                        double duration);

/// Single-sideband-pair approximation with pure complex exponentials in
/// place of the subcarrier tables; product terms are dropped.
IqBuffer modulate_approx(const ComponentSet& comp, const SignalConfig& cfg, double duration);

/// Multiplies by exp(+j 2 pi if_hz t). Requires if_hz + bandwidth/2 < fs/2.
IqBuffer upconvert_to_if(const IqBuffer& iq, double if_hz, double signal_bandwidth_hz);

/// floor(n * rate / fs): the chip (or subcarrier slot) active at sample n.
/// n * rate is an exact integer in double precision for integer-Hz rates and
/// n * rate < 2^53, so the index carries no accumulated phase error.
std::int64_t clock_index(std::size_t n, double rate_hz, double sample_rate_hz);

/// Point-sampled code replica: sample n carries chip floor(phase0 + n f_p / fs) mod L.
std::vector<double> code_replica(const ChipSequence& code, double chip_rate_hz, double sample_rate_hz,
                                 std::size_t sample_count, double code_phase0 = 0.0);

/// Full-band pilot reference c_aQ(t) e^{-j 2 pi f_sc t} + c_bQ(t) e^{+j 2 pi f_sc t}.
/// With `staircase`, the exponentials are replaced by the modulator's own
/// S -+ j S_d subcarriers, so the reference shares the signal's half-slot
/// timing and the correlation peak sits at zero lag.
IqBuffer pilot_reference(const ChipSequence& code_aQ, const ChipSequence& code_bQ, const SignalConfig& cfg,
                         std::size_t sample_count, const SubcarrierTables* staircase = nullptr);

/// Everything needed to synthesize one satellite's signal.
struct SatelliteSignal {
    std::array<ChipSequence, 4> codes;
    NavDataStream data_a;
    NavDataStream data_b;
    std::optional<NavDataStream> pilot_a;
    std::optional<NavDataStream> pilot_b;
    ComponentSet components;
};

struct SatelliteOptions {
    CodeMode code_mode = CodeMode::icd_register;
    double symbol_period = 0.02;
    bool secondary_codes = false;
    std::uint64_t seed = 1;
};

/// Codes, random navigation data and components covering at least `duration`.
SatelliteSignal make_satellite(int prn_id, const SignalConfig& cfg, double duration,
                               const SatelliteOptions& options = {},
                               const PrnRegistry& registry = PrnRegistry::builtin());

}  // namespace altboc::waveform
