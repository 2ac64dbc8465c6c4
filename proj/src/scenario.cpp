#include "altboc/scenario.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string_view>

#include "json.hpp"

#include "altboc/spectrum.hpp"

namespace altboc::scenario {

namespace fs = std::filesystem;
using nlohmann::json;
using acquisition::Sideband;

ValidationError::ValidationError(std::string field_path, const std::string& message)
    : ConfigurationError(field_path + ": " + message), path_(std::move(field_path))
{
}

namespace {

// ---------------------------------------------------------------------------
// Reading with field paths
// ---------------------------------------------------------------------------

std::string join(const std::string& path, std::string_view key)
{
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

void only_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> keys)
{
    if (!j.is_object()) throw ValidationError(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [k, v] : j.items())
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ValidationError(join(path, k), "unknown field");
}

double get_num(const json& j, const std::string& path, const char* key, double def)
{
    if (!j.contains(key)) return def;
    const auto& v = j.at(key);
    if (!v.is_number()) throw ValidationError(join(path, key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(join(path, key), "must be finite");
    return x;
}

long long get_int(const json& j, const std::string& path, const char* key, long long def)
{
    if (!j.contains(key)) return def;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ValidationError(join(path, key), "expected an integer");
    return v.get<long long>();
}

std::size_t get_count(const json& j, const std::string& path, const char* key, std::size_t def)
{
    const long long v = get_int(j, path, key, static_cast<long long>(def));
    if (v < 0) throw ValidationError(join(path, key), "must not be negative");
    return static_cast<std::size_t>(v);
}

bool get_bool(const json& j, const std::string& path, const char* key, bool def)
{
    if (!j.contains(key)) return def;
    if (!j.at(key).is_boolean()) throw ValidationError(join(path, key), "expected true or false");
    return j.at(key).get<bool>();
}

std::string get_str(const json& j, const std::string& path, const char* key, const std::string& def)
{
    if (!j.contains(key)) return def;
    if (!j.at(key).is_string()) throw ValidationError(join(path, key), "expected a string");
    return j.at(key).get<std::string>();
}

template <class F>
void within(const std::string& path, F&& f)
{
    try {
        f();
    } catch (const ValidationError&) {
        throw;
    } catch (const ConfigurationError& e) {
        throw ValidationError(path, e.what());
    } catch (const ArgumentError& e) {
        throw ValidationError(path, e.what());
    }
}

std::string code_mode_name(waveform::CodeMode m) { return m == waveform::CodeMode::synthetic ? "synthetic" : "icd_register"; }
std::string sideband_name(Sideband s) { return s == Sideband::lower ? "lower" : "upper"; }
std::string view_name(spectrum::PilotAcfView v)
{
    return v == spectrum::PilotAcfView::single_sideband ? "single_sideband" : "full_band";
}
std::string nemlp_form_name(tracking::NemlpForm f) { return f == tracking::NemlpForm::standard ? "standard" : "as_printed"; }

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

void read_signal(const json& j, Scenario& s)
{
    const std::string p = "signal";
    only_keys(j, p, {"scale", "carrier_hz", "subcarrier_hz", "chip_rate_hz", "sample_rate_hz", "if_hz",
                     "primary_code_length", "amplitude"});
    s.signal_scale = get_str(j, p, "scale", "full");
    if (s.signal_scale == "full") {
        s.signal = waveform::SignalConfig{};
        s.signal.sample_rate_hz = 100e6;  // room for the 7.8 MHz IF
    }
    else if (s.signal_scale == "desk")
        s.signal = waveform::SignalConfig::desk_scale();
    else
        throw ValidationError("signal.scale", "expected \"full\" or \"desk\"");
    auto& g = s.signal;
    g.carrier_hz = get_num(j, p, "carrier_hz", g.carrier_hz);
    g.subcarrier_hz = get_num(j, p, "subcarrier_hz", g.subcarrier_hz);
    g.chip_rate_hz = get_num(j, p, "chip_rate_hz", g.chip_rate_hz);
    g.sample_rate_hz = get_num(j, p, "sample_rate_hz", g.sample_rate_hz);
    g.if_hz = get_num(j, p, "if_hz", g.if_hz);
    g.primary_code_length = static_cast<int>(get_int(j, p, "primary_code_length", g.primary_code_length));
    g.amplitude = get_num(j, p, "amplitude", g.amplitude);
}

void read_channel(const json& j, Scenario& s)
{
    const std::string p = "channel";
    only_keys(j, p, {"code_delay_chips", "doppler_hz", "carrier_phase_rad", "cn0_dbhz", "multipath"});
    s.code_delay_chips = get_num(j, p, "code_delay_chips", 0.0);
    s.channel.doppler_hz = get_num(j, p, "doppler_hz", 0.0);
    s.channel.carrier_phase = get_num(j, p, "carrier_phase_rad", 0.0);
    if (j.contains("cn0_dbhz") && j.at("cn0_dbhz").is_null())
        s.channel.cn0_dbhz = std::numeric_limits<double>::infinity();
    else
        s.channel.cn0_dbhz = get_num(j, p, "cn0_dbhz", std::numeric_limits<double>::infinity());
    s.channel.multipath_rays.clear();
    if (j.contains("multipath")) {
        const auto& arr = j.at("multipath");
        if (!arr.is_array()) throw ValidationError("channel.multipath", "expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string rp = "channel.multipath[" + std::to_string(i) + "]";
            only_keys(arr[i], rp, {"extra_delay_chips", "amplitude_ratio", "phase_rad"});
            channel::MultipathRay ray;
            ray.extra_delay = get_num(arr[i], rp, "extra_delay_chips", 0.0);  // chips until resolved
            ray.amplitude_ratio = get_num(arr[i], rp, "amplitude_ratio", 0.0);
            ray.phase = get_num(arr[i], rp, "phase_rad", 0.0);
            s.channel.multipath_rays.push_back(ray);
        }
    }
}

void read_acq(const json& j, Scenario& s)
{
    const std::string p = "acq";
    only_keys(j, p, {"doppler_min_hz", "doppler_max_hz", "doppler_step_hz", "coherent_t_int", "noncoherent_sums",
                     "detection_threshold", "sideband", "use_data_channel"});
    auto& a = s.acq;
    a.doppler_min_hz = get_num(j, p, "doppler_min_hz", a.doppler_min_hz);
    a.doppler_max_hz = get_num(j, p, "doppler_max_hz", a.doppler_max_hz);
    a.doppler_step_hz = get_num(j, p, "doppler_step_hz", a.doppler_step_hz);
    a.coherent_t_int = get_num(j, p, "coherent_t_int", a.coherent_t_int);
    a.noncoherent_sums = static_cast<int>(get_int(j, p, "noncoherent_sums", a.noncoherent_sums));
    a.detection_threshold = get_num(j, p, "detection_threshold", a.detection_threshold);
    const std::string sb = get_str(j, p, "sideband", "lower");
    if (sb == "lower")
        a.sideband = Sideband::lower;
    else if (sb == "upper")
        a.sideband = Sideband::upper;
    else
        throw ValidationError("acq.sideband", "expected \"lower\" or \"upper\"");
    a.use_data_channel = get_bool(j, p, "use_data_channel", a.use_data_channel);
}

void read_loop(const json& j, Scenario& s)
{
    const std::string p = "loop";
    only_keys(j, p, {"dll_bn_hz", "pll_bn_hz", "correlator_spacing_d", "t_int", "discriminator", "normalized",
                     "nemlp_form", "loop_order", "fll_epochs", "lock_window", "lock_floor", "lock_loss_epochs",
                     "carrier_aiding", "hold_carrier"});
    auto& l = s.loop;
    l.dll_bn_hz = get_num(j, p, "dll_bn_hz", l.dll_bn_hz);
    l.pll_bn_hz = get_num(j, p, "pll_bn_hz", l.pll_bn_hz);
    l.correlator_spacing_d = get_num(j, p, "correlator_spacing_d", l.correlator_spacing_d);
    l.t_int = get_num(j, p, "t_int", l.t_int);
    within("loop.discriminator", [&] {
        l.discriminator.kind = tracking::discriminator_from_string(get_str(j, p, "discriminator", "NEMLP"));
    });
    l.discriminator.normalized = get_bool(j, p, "normalized", true);
    const std::string form = get_str(j, p, "nemlp_form", "standard");
    if (form == "standard")
        l.discriminator.nemlp_form = tracking::NemlpForm::standard;
    else if (form == "as_printed")
        l.discriminator.nemlp_form = tracking::NemlpForm::as_printed;
    else
        throw ValidationError("loop.nemlp_form", "expected \"standard\" or \"as_printed\"");
    l.loop_order = static_cast<int>(get_int(j, p, "loop_order", l.loop_order));
    l.fll_epochs = static_cast<int>(get_int(j, p, "fll_epochs", l.fll_epochs));
    l.lock_window = static_cast<int>(get_int(j, p, "lock_window", l.lock_window));
    l.lock_floor = get_num(j, p, "lock_floor", l.lock_floor);
    l.lock_loss_epochs = static_cast<int>(get_int(j, p, "lock_loss_epochs", l.lock_loss_epochs));
    l.carrier_aiding = get_bool(j, p, "carrier_aiding", l.carrier_aiding);
    l.hold_carrier = get_bool(j, p, "hold_carrier", l.hold_carrier);
}

void read_analysis(const json& j, Scenario& s)
{
    const std::string p = "analysis";
    only_keys(j, p, {"scurve", "jitter", "envelope", "comparison"});
    if (j.contains("scurve")) {
        const auto& c = j.at("scurve");
        const std::string q = "analysis.scurve";
        only_keys(c, q, {"half_span_chips", "points_per_side", "epochs"});
        s.scurve.half_span_chips = get_num(c, q, "half_span_chips", s.scurve.half_span_chips);
        s.scurve.points_per_side = get_count(c, q, "points_per_side", s.scurve.points_per_side);
        s.scurve.epochs = get_count(c, q, "epochs", s.scurve.epochs);
    }
    if (j.contains("jitter")) {
        const auto& c = j.at("jitter");
        const std::string q = "analysis.jitter";
        only_keys(c, q, {"band_hz", "cn0_min_dbhz", "cn0_max_dbhz", "cn0_step_db", "spacings", "view"});
        auto& t = s.jitter;
        t.band_hz = get_num(c, q, "band_hz", t.band_hz);
        t.cn0_min_dbhz = get_num(c, q, "cn0_min_dbhz", t.cn0_min_dbhz);
        t.cn0_max_dbhz = get_num(c, q, "cn0_max_dbhz", t.cn0_max_dbhz);
        t.cn0_step_db = get_num(c, q, "cn0_step_db", t.cn0_step_db);
        if (c.contains("spacings")) {
            const auto& a = c.at("spacings");
            if (!a.is_array()) throw ValidationError(q + ".spacings", "expected an array of numbers");
            t.spacings.clear();
            for (const auto& v : a) {
                if (!v.is_number()) throw ValidationError(q + ".spacings", "expected an array of numbers");
                t.spacings.push_back(v.get<double>());
            }
        }
        const std::string view = get_str(c, q, "view", "single_sideband");
        if (view == "single_sideband")
            t.view = spectrum::PilotAcfView::single_sideband;
        else if (view == "full_band")
            t.view = spectrum::PilotAcfView::full_band;
        else
            throw ValidationError(q + ".view", "expected \"single_sideband\" or \"full_band\"");
    }
    if (j.contains("envelope")) {
        const auto& c = j.at("envelope");
        const std::string q = "analysis.envelope";
        only_keys(c, q, {"amplitude_ratio", "max_delay_chips", "step_chips", "band_hz"});
        auto& e = s.envelope;
        e.amplitude_ratio = get_num(c, q, "amplitude_ratio", e.amplitude_ratio);
        e.max_delay_chips = get_num(c, q, "max_delay_chips", e.max_delay_chips);
        e.step_chips = get_num(c, q, "step_chips", e.step_chips);
        e.band_hz = get_num(c, q, "band_hz", e.band_hz);
    }
    if (j.contains("comparison")) {
        const auto& c = j.at("comparison");
        const std::string q = "analysis.comparison";
        only_keys(c, q, {"track_duration_s", "scatter_skip_epochs", "scurve_epochs", "acf_span_chips", "acf_segments",
                         "bit_skip"});
        auto& m = s.comparison;
        m.track_duration_s = get_num(c, q, "track_duration_s", m.track_duration_s);
        m.scatter_skip_epochs = get_count(c, q, "scatter_skip_epochs", m.scatter_skip_epochs);
        m.scurve_epochs = get_count(c, q, "scurve_epochs", m.scurve_epochs);
        m.acf_span_chips = get_num(c, q, "acf_span_chips", m.acf_span_chips);
        m.acf_segments = get_count(c, q, "acf_segments", m.acf_segments);
        m.bit_skip = get_count(c, q, "bit_skip", m.bit_skip);
    }
}

Scenario from_json(const json& j)
{
    only_keys(j, "", {"schema_version", "name", "rng_seed", "prn", "code_mode", "prn_table", "signal", "channel",
                      "mult_noise", "filter", "acq", "loop", "duration_s", "tracking", "outputs", "analysis"});
    const long long version = get_int(j, "", "schema_version", kSchemaVersion);
    if (version != kSchemaVersion)
        throw ValidationError("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                                    std::to_string(kSchemaVersion) + ")");
    Scenario s;
    s.name = get_str(j, "", "name", s.name);
    const long long seed = get_int(j, "", "rng_seed", 1);
    if (seed < 0) throw ValidationError("rng_seed", "must not be negative");
    s.rng_seed = static_cast<std::uint64_t>(seed);
    s.prn = static_cast<int>(get_int(j, "", "prn", s.prn));
    const std::string mode = get_str(j, "", "code_mode", "icd_register");
    if (mode == "icd_register")
        s.code_mode = waveform::CodeMode::icd_register;
    else if (mode == "synthetic")
        s.code_mode = waveform::CodeMode::synthetic;
    else
        throw ValidationError("code_mode", "expected \"icd_register\" or \"synthetic\"");
    s.prn_table = get_str(j, "", "prn_table", "");

    read_signal(j.value("signal", json::object()), s);
    read_channel(j.value("channel", json::object()), s);
    if (j.contains("mult_noise") && !j.at("mult_noise").is_null()) {
        const auto& m = j.at("mult_noise");
        only_keys(m, "mult_noise", {"component_count", "component_sigma"});
        channel::MultiplicativeNoiseSpec spec;
        spec.component_count = static_cast<int>(get_int(m, "mult_noise", "component_count", spec.component_count));
        spec.component_sigma = get_num(m, "mult_noise", "component_sigma", spec.component_sigma);
        s.mult_noise = spec;
    }
    if (j.contains("filter") && !j.at("filter").is_null()) {
        const auto& f = j.at("filter");
        only_keys(f, "filter", {"order", "cutoff_hz", "family"});
        channel::FilterSpec spec;
        spec.order = static_cast<int>(get_int(f, "filter", "order", spec.order));
        spec.cutoff_hz = get_num(f, "filter", "cutoff_hz", spec.cutoff_hz);
        if (get_str(f, "filter", "family", "butterworth") != "butterworth")
            throw ValidationError("filter.family", "only \"butterworth\" is supported");
        s.filter = spec;
    }
    read_acq(j.value("acq", json::object()), s);
    s.acq.prn_id = s.prn;
    read_loop(j.value("loop", json::object()), s);
    s.loop.sideband = s.acq.sideband;
    s.duration = get_num(j, "", "duration_s", s.duration);
    if (j.contains("tracking")) {
        only_keys(j.at("tracking"), "tracking", {"duration_s"});
        s.track_duration = get_num(j.at("tracking"), "tracking", "duration_s", 0.0);
    }
    if (j.contains("outputs")) {
        const auto& o = j.at("outputs");
        if (!o.is_array()) throw ValidationError("outputs", "expected an array of selectors");
        for (std::size_t i = 0; i < o.size(); ++i) {
            const std::string p = "outputs[" + std::to_string(i) + "]";
            if (!o[i].is_string()) throw ValidationError(p, "expected a string");
            s.outputs.push_back(o[i].get<std::string>());
        }
    }
    read_analysis(j.value("analysis", json::object()), s);

    // chip-valued delays to seconds
    s.channel.code_delay = s.code_delay_chips / s.signal.chip_rate_hz;
    for (auto& ray : s.channel.multipath_rays) ray.extra_delay /= s.signal.chip_rate_hz;
    s.validate();
    return s;
}

json to_json(const Scenario& s)
{
    json j;
    j["schema_version"] = kSchemaVersion;
    j["name"] = s.name;
    j["rng_seed"] = s.rng_seed;
    j["prn"] = s.prn;
    j["code_mode"] = code_mode_name(s.code_mode);
    j["prn_table"] = s.prn_table;
    const auto& g = s.signal;
    j["signal"] = {{"scale", s.signal_scale},
                   {"carrier_hz", g.carrier_hz},
                   {"subcarrier_hz", g.subcarrier_hz},
                   {"chip_rate_hz", g.chip_rate_hz},
                   {"sample_rate_hz", g.sample_rate_hz},
                   {"if_hz", g.if_hz},
                   {"primary_code_length", g.primary_code_length},
                   {"amplitude", g.amplitude}};
    json rays = json::array();
    for (const auto& r : s.channel.multipath_rays)
        rays.push_back({{"extra_delay_chips", r.extra_delay * g.chip_rate_hz},
                        {"amplitude_ratio", r.amplitude_ratio},
                        {"phase_rad", r.phase}});
    j["channel"] = {{"code_delay_chips", s.code_delay_chips},
                    {"doppler_hz", s.channel.doppler_hz},
                    {"carrier_phase_rad", s.channel.carrier_phase},
                    {"cn0_dbhz", std::isfinite(s.channel.cn0_dbhz) ? json(s.channel.cn0_dbhz) : json(nullptr)},
                    {"multipath", rays}};
    j["mult_noise"] = s.mult_noise ? json{{"component_count", s.mult_noise->component_count},
                                          {"component_sigma", s.mult_noise->component_sigma}}
                                   : json(nullptr);
    j["filter"] = s.filter ? json{{"order", s.filter->order}, {"cutoff_hz", s.filter->cutoff_hz}, {"family", "butterworth"}}
                           : json(nullptr);
    const auto& a = s.acq;
    j["acq"] = {{"doppler_min_hz", a.doppler_min_hz},
                {"doppler_max_hz", a.doppler_max_hz},
                {"doppler_step_hz", a.doppler_step_hz},
                {"coherent_t_int", a.coherent_t_int},
                {"noncoherent_sums", a.noncoherent_sums},
                {"detection_threshold", a.detection_threshold},
                {"sideband", sideband_name(a.sideband)},
                {"use_data_channel", a.use_data_channel}};
    const auto& l = s.loop;
    j["loop"] = {{"dll_bn_hz", l.dll_bn_hz},
                 {"pll_bn_hz", l.pll_bn_hz},
                 {"correlator_spacing_d", l.correlator_spacing_d},
                 {"t_int", l.t_int},
                 {"discriminator", tracking::to_string(l.discriminator.kind)},
                 {"normalized", l.discriminator.normalized},
                 {"nemlp_form", nemlp_form_name(l.discriminator.nemlp_form)},
                 {"loop_order", l.loop_order},
                 {"fll_epochs", l.fll_epochs},
                 {"lock_window", l.lock_window},
                 {"lock_floor", l.lock_floor},
                 {"lock_loss_epochs", l.lock_loss_epochs},
                 {"carrier_aiding", l.carrier_aiding},
                 {"hold_carrier", l.hold_carrier}};
    j["duration_s"] = s.duration;
    j["tracking"] = {{"duration_s", s.track_duration}};
    j["outputs"] = s.outputs;
    j["analysis"] = {
        {"scurve",
         {{"half_span_chips", s.scurve.half_span_chips},
          {"points_per_side", s.scurve.points_per_side},
          {"epochs", s.scurve.epochs}}},
        {"jitter",
         {{"band_hz", s.jitter.band_hz},
          {"cn0_min_dbhz", s.jitter.cn0_min_dbhz},
          {"cn0_max_dbhz", s.jitter.cn0_max_dbhz},
          {"cn0_step_db", s.jitter.cn0_step_db},
          {"spacings", s.jitter.spacings},
          {"view", view_name(s.jitter.view)}}},
        {"envelope",
         {{"amplitude_ratio", s.envelope.amplitude_ratio},
          {"max_delay_chips", s.envelope.max_delay_chips},
          {"step_chips", s.envelope.step_chips},
          {"band_hz", s.envelope.band_hz}}},
        {"comparison",
         {{"track_duration_s", s.comparison.track_duration_s},
          {"scatter_skip_epochs", s.comparison.scatter_skip_epochs},
          {"scurve_epochs", s.comparison.scurve_epochs},
          {"acf_span_chips", s.comparison.acf_span_chips},
          {"acf_segments", s.comparison.acf_segments},
          {"bit_skip", s.comparison.bit_skip}}}};
    return j;
}

const waveform::PrnRegistry& registry_for(const Scenario& s, std::optional<waveform::PrnRegistry>& holder)
{
    if (s.prn_table.empty()) return waveform::PrnRegistry::builtin();
    holder = waveform::PrnRegistry::from_csv(s.prn_table);
    return *holder;
}

std::size_t code_index(waveform::ChannelLabel label) { return static_cast<std::size_t>(label); }

}  // namespace

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

const std::vector<std::string>& known_outputs()
{
    static const std::vector<std::string> names{"iq",       "psd",     "acf",    "acquisition_surface",
                                                "code_cut", "frequency_cut", "tracking", "bits",
                                                "scurve",   "jitter",  "envelope", "comparison"};
    return names;
}

bool Scenario::wants(const std::string& output) const
{
    return std::find(outputs.begin(), outputs.end(), output) != outputs.end();
}

double Scenario::effective_track_duration() const
{
    const double avail = duration - signal.code_period();
    return track_duration > 0.0 ? track_duration : avail;
}

void Scenario::validate() const
{
    within("signal", [&] { signal.validate(); });
    if (!(signal.carrier_hz > 0.0)) throw ValidationError("signal.carrier_hz", "must be positive");
    if (!(signal.if_hz >= 0.0) || signal.if_hz + 0.5 * signal.main_lobe_bandwidth_hz() >= 0.5 * signal.sample_rate_hz)
        throw ValidationError("signal.if_hz", "IF plus half the main-lobe bandwidth must stay below Nyquist");
    if (prn <= 0) throw ValidationError("prn", "must be positive");
    if (code_mode == waveform::CodeMode::icd_register && prn_table.empty() &&
        !waveform::PrnRegistry::builtin().contains(waveform::ChannelLabel::E5aI, prn))
        throw ValidationError("prn", "PRN " + std::to_string(prn) + " is not in the built-in register table");
    if (!prn_table.empty() && !fs::exists(prn_table)) throw ValidationError("prn_table", "file not found: " + prn_table);
    if (code_delay_chips < 0.0 || code_delay_chips >= signal.primary_code_length)
        throw ValidationError("channel.code_delay_chips", "must lie in [0, code length)");
    within("channel", [&] { channel.validate(); });
    if (mult_noise) within("mult_noise", [&] { mult_noise->validate(); });
    if (filter) within("filter", [&] { filter->validate(signal.sample_rate_hz); });
    within("acq", [&] { acq.validate(signal.sample_rate_hz); });
    within("loop", [&] { loop.validate(); });

    if (!(duration > 0.0)) throw ValidationError("duration_s", "must be positive");
    const double acq_need = acq.coherent_t_int * acq.noncoherent_sums + signal.code_period();
    if (duration < acq_need)
        throw ValidationError("duration_s", "shorter than the acquisition needs (" + std::to_string(acq_need) + " s)");
    if (track_duration < 0.0) throw ValidationError("tracking.duration_s", "must not be negative");
    const double avail = duration - signal.code_period();
    if (track_duration > avail + 1e-12)
        throw ValidationError("tracking.duration_s", "exceeds the buffer after one code period (" + std::to_string(avail) + " s)");
    const double epochs = effective_track_duration() / loop.t_int;
    if (epochs + 1e-9 < loop.fll_epochs + loop.lock_window)
        throw ValidationError("tracking.duration_s", "shorter than the loop warm-up (fll_epochs + lock_window epochs)");

    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const auto& k = known_outputs();
        if (std::find(k.begin(), k.end(), outputs[i]) == k.end())
            throw ValidationError("outputs[" + std::to_string(i) + "]", "unknown selector '" + outputs[i] + "'");
    }
    if (!(scurve.half_span_chips > 0.0) || scurve.points_per_side == 0 || scurve.epochs == 0)
        throw ValidationError("analysis.scurve", "needs a positive span, points_per_side and epochs");
    if (!(jitter.band_hz >= 0.0)) throw ValidationError("analysis.jitter.band_hz", "must not be negative");
    if (!(jitter.cn0_step_db > 0.0) || jitter.cn0_max_dbhz < jitter.cn0_min_dbhz)
        throw ValidationError("analysis.jitter", "needs cn0_min <= cn0_max and a positive step");
    if (jitter.spacings.empty()) throw ValidationError("analysis.jitter.spacings", "must not be empty");
    for (double d : jitter.spacings)
        if (!(d > 0.0 && d <= 2.0)) throw ValidationError("analysis.jitter.spacings", "each spacing must lie in (0, 2]");
    if (!(envelope.amplitude_ratio >= 0.0 && envelope.amplitude_ratio < 1.0))
        throw ValidationError("analysis.envelope.amplitude_ratio", "must lie in [0, 1)");
    if (!(envelope.max_delay_chips > 0.0) || !(envelope.step_chips > 0.0))
        throw ValidationError("analysis.envelope", "needs a positive max_delay_chips and step_chips");
    if (!(envelope.band_hz >= 0.0)) throw ValidationError("analysis.envelope.band_hz", "must not be negative");
    if (comparison.track_duration_s < 0.0 || comparison.track_duration_s > avail + 1e-12)
        throw ValidationError("analysis.comparison.track_duration_s", "must lie in [0, duration - one code period]");
    if (comparison.acf_segments == 0 || !(comparison.acf_span_chips > 0.0))
        throw ValidationError("analysis.comparison", "needs acf_segments > 0 and a positive acf_span_chips");
}

Scenario from_json_text(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("<root>", std::string("not valid JSON: ") + e.what());
    }
    return from_json(j);
}

std::string apply_override(const std::string& json_text, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError(assignment, "override must look like key.path=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError("<root>", std::string("not valid JSON: ") + e.what());
    }
    json* node = &doc;
    std::stringstream ks(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ks, part, '.')) {
        if (part.empty()) throw ValidationError(key, "empty path component");
        parts.push_back(part);
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!node->is_object()) throw ValidationError(key, "'" + parts[i - 1] + "' is not an object");
        if (i + 1 == parts.size())
            (*node)[parts[i]] = value;
        else {
            if (!node->contains(parts[i]) || (*node)[parts[i]].is_null()) (*node)[parts[i]] = json::object();
            node = &(*node)[parts[i]];
        }
    }
    return doc.dump();
}

Scenario load(const fs::path& path, const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed)
{
    std::ifstream is(path);
    if (!is) throw IoError("cannot read scenario " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    std::string text = ss.str();
    for (const auto& o : overrides) text = apply_override(text, o);
    if (seed) text = apply_override(text, "rng_seed=" + std::to_string(*seed));
    // a relative register table is relative to the scenario file
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("<root>", std::string("not valid JSON: ") + e.what());
    }
    if (j.is_object() && j.contains("prn_table") && j["prn_table"].is_string()) {
        fs::path t = j["prn_table"].get<std::string>();
        if (!t.empty() && t.is_relative()) j["prn_table"] = (path.parent_path() / t).lexically_normal().string();
    }
    return from_json(j);
}

std::string to_json_text(const Scenario& s) { return to_json(s).dump(2); }

std::string scenario_hash(const Scenario& s)
{
    const std::string text = to_json(s).dump();
    return io::sha256_hex({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

Synthesis synthesize(const Scenario& s)
{
    const auto& cfg = s.signal;
    const double fs = cfg.sample_rate_hz;
    std::optional<waveform::PrnRegistry> holder;
    const auto& registry = registry_for(s, holder);

    // one code period is synthesized ahead and dropped, so the delayed
    // buffer starts with signal instead of zero fill
    const double lead = cfg.code_period();
    Synthesis out;
    out.satellite = waveform::make_satellite(s.prn, cfg, s.duration + lead,
                                             {.code_mode = s.code_mode, .symbol_period = 0.02, .seed = s.rng_seed},
                                             registry);
    auto bb = waveform::modulate_exact(out.satellite.components, waveform::SubcarrierTables::icd(), cfg,
                                       s.duration + lead);
    auto ifb = waveform::upconvert_to_if(bb, cfg.if_hz, cfg.main_lobe_bandwidth_hz());
    bb = {};
    channel::ChannelSpec ch = s.channel;
    ch.cn0_dbhz = std::numeric_limits<double>::infinity();
    auto delayed = channel::apply_channel(ifb, ch);
    ifb = {};
    const auto skip = static_cast<std::size_t>(std::llround(lead * fs));
    out.clean.sample_rate_hz = fs;
    out.clean.samples.assign(delayed.samples.begin() + static_cast<long>(skip), delayed.samples.end());

    const double delay_samples = s.channel.code_delay * fs;
    const double len = cfg.primary_code_length;
    auto& st = out.truth;
    st.code_phase = wrap_positive(-delay_samples * cfg.chip_rate_hz / fs, len);
    st.code_rate = cfg.chip_rate_hz;
    st.doppler_hz = s.channel.doppler_hz;
    const double centre = tracking::sideband_centre_hz(cfg, s.acq.sideband);
    const double lead_samples = static_cast<double>(skip);
    const double cyc = std::fmod(centre * (lead_samples - delay_samples) / fs, 1.0) +
                       std::fmod(s.channel.doppler_hz * lead_samples / fs, 1.0);
    st.carrier_phase = wrap_positive(s.channel.carrier_phase + kTwoPi * cyc, kTwoPi);
    return out;
}

IqBuffer impair(const IqBuffer& clean, const Scenario& s)
{
    IqBuffer out = std::isfinite(s.channel.cn0_dbhz) ? channel::add_awgn(clean, s.channel.cn0_dbhz, derive_seed(s.rng_seed, 1))
                                                     : clean;
    if (s.mult_noise) {
        auto spec = *s.mult_noise;
        spec.rng_seed = derive_seed(s.rng_seed, 2);
        out = channel::apply_multiplicative_noise(out, spec);
    }
    return out;
}

tracking::TrackingState filtered_truth(const tracking::TrackingState& truth, const Scenario& s)
{
    if (!s.filter) return truth;
    const auto sos = channel::SosFilter::butterworth(*s.filter, s.signal.sample_rate_hz);
    const double f = tracking::sideband_centre_hz(s.signal, s.acq.sideband) + truth.doppler_hz;
    return analysis::delayed_truth(truth, s.signal, sos.group_delay(f), std::arg(sos.response(f)));
}

// ---------------------------------------------------------------------------
// Run
// ---------------------------------------------------------------------------

std::string RunManifest::to_json() const
{
    json j;
    j["scenario_name"] = scenario_name;
    j["scenario_hash"] = scenario_hash;
    j["tool_version"] = tool_version;
    j["rng_seed"] = rng_seed;
    j["overrides"] = overrides;
    json t = json::array();
    for (const auto& s : timings) t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    j["timings"] = t;
    json e = json::array();
    for (const auto& s : stage_errors) e.push_back({{"stage", s.stage}, {"message", s.message}});
    j["stage_errors"] = e;
    json o = json::array();
    for (const auto& f : outputs)
        o.push_back({{"id", f.id}, {"path", f.path.generic_string()}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    j["outputs"] = o;
    j["ok"] = ok();
    return j.dump(2) + "\n";
}

namespace {

json acquisition_json(const acquisition::AcquisitionResult& r, const waveform::SignalConfig& sig)
{
    return {{"detected", r.detected},
            {"code_phase_samples", r.code_phase_samples},
            {"code_phase_chips", r.code_phase_samples * sig.chip_rate_hz / sig.sample_rate_hz},
            {"doppler_hz", r.doppler_hz},
            {"doppler_bin", r.doppler_bin},
            {"peak_metric", r.peak_metric},
            {"peak_to_second_ratio", r.peak_to_second_ratio}};
}

json state_json(const tracking::TrackingState& st)
{
    return {{"code_phase_chips", st.code_phase},
            {"code_rate_chips_per_s", st.code_rate},
            {"carrier_phase_rad", st.carrier_phase},
            {"doppler_hz", st.doppler_hz}};
}

void write_cuts(const acquisition::AcquisitionResult& acq, const waveform::SignalConfig& sig, io::OutputSet& out,
                bool code_cut, bool freq_cut)
{
    const auto& surf = acquisition::export_search_surface(acq);
    if (code_cut) {
        std::vector<double> x(surf.code_phases), y(surf.code_phases);
        for (std::size_t c = 0; c < surf.code_phases; ++c) {
            x[c] = static_cast<double>(c) * sig.chip_rate_hz / sig.sample_rate_hz;
            y[c] = surf.at(acq.doppler_bin, c);
        }
        const auto p = out.path_for("code_cut", "csv");
        io::write_series_csv("code_phase_chips,metric", {x, y}, p);
        out.record("code_cut", p);
    }
    if (freq_cut) {
        const auto col = static_cast<std::size_t>(std::llround(acq.code_phase_samples)) % surf.code_phases;
        std::vector<double> y(surf.rows());
        for (std::size_t r = 0; r < surf.rows(); ++r) y[r] = surf.at(r, col);
        const auto p = out.path_for("frequency_cut", "csv");
        io::write_series_csv("doppler_hz,metric", {surf.doppler_hz, y}, p);
        out.record("frequency_cut", p);
    }
}

}  // namespace

RunManifest run_scenario(const fs::path& scenario_file, const RunOptions& options)
{
    return run_scenario(load(scenario_file, options.overrides, options.seed), options);
}

RunManifest run_scenario(const Scenario& s_in, const RunOptions& options)
{
    Scenario s = s_in;
    if (options.seed) s.rng_seed = *options.seed;
    s.validate();

    RunManifest m;
    m.scenario_name = s.name;
    m.scenario_hash = scenario_hash(s);
    m.rng_seed = s.rng_seed;
    m.overrides = options.overrides;
    if (options.seed) m.overrides.push_back("rng_seed=" + std::to_string(*options.seed));

    io::OutputSet out(options.out_dir, s.name + "-" + m.scenario_hash.substr(0, 12));
    const auto& sig = s.signal;
    json summary;
    summary["scenario"] = to_json(s);
    summary["scenario_hash"] = m.scenario_hash;

    // Runs one stage; library failures are recorded and end the dependent
    // chain, output failures propagate.
    auto stage = [&](const std::string& name, const std::function<void()>& body) -> bool {
        const auto t0 = std::chrono::steady_clock::now();
        bool ok = true;
        try {
            body();
        } catch (const IoError&) {
            throw;
        } catch (const std::exception& e) {
            m.stage_errors.push_back({name, e.what()});
            ok = false;
        }
        m.timings.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
        return ok;
    };
    auto skipped = [&](const std::string& name, const std::string& because) {
        m.stage_errors.push_back({name, "skipped: " + because + " failed"});
    };
    auto finish = [&]() -> RunManifest {
        const auto sp = out.path_for("summary", "json");
        io::write_text(summary.dump(2) + "\n", sp);
        out.record("summary", sp);
        m.outputs = out.files();
        io::write_text(m.to_json(), options.out_dir / "manifest.json");
        return m;
    };

    Synthesis syn;
    IqBuffer noisy, filtered;
    const IqBuffer* working = nullptr;
    std::optional<acquisition::AcquisitionResult> acq;
    std::optional<tracking::TrackRecord> track;

    const bool generated = stage("generate", [&] {
        syn = synthesize(s);
        summary["truth"] = state_json(syn.truth);
    });
    if (!generated) {
        for (const char* st : {"impair", "acquire", "track", "analyze"}) skipped(st, "generate");
        return finish();
    }
    const auto sb = s.acq.sideband;
    const auto& codes = syn.satellite.codes;
    const auto& pilot = codes[sb == Sideband::lower ? 1 : 3];
    const auto& data = codes[sb == Sideband::lower ? 0 : 2];
    const auto& truth_symbols = sb == Sideband::lower ? syn.satellite.data_a.symbols : syn.satellite.data_b.symbols;

    const bool impaired = stage("impair", [&] {
        const bool noise = std::isfinite(s.channel.cn0_dbhz) || s.mult_noise;
        if (noise) noisy = impair(syn.clean, s);
        const IqBuffer& pre = noise ? noisy : syn.clean;
        if (s.filter) filtered = channel::lowpass_filter(pre, *s.filter);
        working = s.filter ? &filtered : &pre;
    });
    if (!impaired) {
        for (const char* st : {"acquire", "track", "analyze"}) skipped(st, "impair");
        return finish();
    }

    if (s.wants("iq")) {
        const auto p = out.path_for("iq", "cf32");
        io::write_iq(*working, p, io::SampleFormat::float32, sig.if_hz);
        out.record("iq", p);
        out.record("iq_sidecar", io::default_sidecar(p));
        std::vector<double> idx(truth_symbols.size()), val(truth_symbols.size());
        for (std::size_t i = 0; i < truth_symbols.size(); ++i) {
            idx[i] = static_cast<double>(i);
            val[i] = truth_symbols[i];
        }
        const auto q = out.path_for("truth_symbols", "csv");
        io::write_series_csv("symbol_index,symbol", {idx, val}, q);
        out.record("truth_symbols", q);
    }

    const bool want_surface = s.wants("acquisition_surface") || s.wants("code_cut") || s.wants("frequency_cut");
    const bool acquired = stage("acquire", [&] {
        auto cfg = s.acq;
        cfg.keep_surface = want_surface;
        const auto& code = codes[code_index(acquisition::acquisition_channel(cfg))];
        acq = acquisition::acquire(*working, code, sig, cfg);
        summary["acquisition"] = acquisition_json(*acq, sig);
        if (want_surface) {
            if (s.wants("acquisition_surface")) {
                const auto p = out.path_for("acquisition_surface", "csv");
                io::write_surface_csv(*acq->search_surface, sig.sample_rate_hz, p);
                out.record("acquisition_surface", p);
                fs::path axes = p;
                axes += ".axes.json";
                out.record("acquisition_surface_axes", axes);
            }
            write_cuts(*acq, sig, out, s.wants("code_cut"), s.wants("frequency_cut"));
        }
        acq->search_surface.reset();
        if (!acq->detected)
            throw StateError("signal not detected (peak-to-second ratio " + std::to_string(acq->peak_to_second_ratio) +
                             ", threshold " + std::to_string(s.acq.detection_threshold) + ")");
    });

    if (acquired) {
        stage("track", [&] {
            track = tracking::run_tracking(*working, *acq, s.loop, pilot, sig, s.effective_track_duration(), &data);
            json t;
            t["epochs"] = track->size();
            t["lock_lost_epoch"] = track->lock_lost_epoch ? json(*track->lock_lost_epoch) : json(nullptr);
            t["final_state"] = state_json(track->epochs.back().state);
            const double len = sig.primary_code_length;
            const double n_end = static_cast<double>((track->size() - 1) * track->samples_per_epoch);
            const double truth_end = wrap_positive(syn.truth.code_phase + n_end * sig.chip_rate_hz / sig.sample_rate_hz, len);
            t["final_code_error_chips"] = wrap_symmetric(track->epochs.back().state.code_phase - truth_end, len);
            summary["tracking"] = t;
            if (s.wants("tracking")) {
                const auto p = out.path_for("tracking", "csv");
                std::ofstream os(p);
                if (!os) throw IoError("cannot write " + p.string());
                track->write_csv(os);
                os.flush();
                if (!os) throw IoError("write failed: " + p.string());
                out.record("tracking", p);
            }
        });
    } else {
        skipped("track", "acquire");
    }

    if (track) {
        stage("bits", [&] {
            const auto bits = tracking::extract_nav_bits(*track, syn.satellite.data_a.symbol_period);
            const auto cmp = analysis::compare_bits(bits, truth_symbols, s.comparison.bit_skip);
            summary["bits"] = {{"extracted", bits.bits.size()},
                               {"gaps", bits.gaps()},
                               {"compared", cmp.compared},
                               {"errors", cmp.errors},
                               {"ber", cmp.ber()},
                               {"truth_shift", cmp.shift}};
            if (s.wants("bits")) {
                std::vector<double> idx, got, want;
                for (std::size_t i = 0; i < bits.bits.size(); ++i) {
                    const std::size_t t = cmp.shift + i;
                    idx.push_back(static_cast<double>(i));
                    got.push_back(bits.bits[i]);
                    want.push_back(t < truth_symbols.size() ? truth_symbols[t] : 0.0);
                }
                const auto p = out.path_for("bits", "csv");
                io::write_series_csv("symbol_index,extracted_bit,truth_bit", {idx, got, want}, p);
                out.record("bits", p);
            }
        });
    } else if (s.wants("bits")) {
        skipped("bits", "track");
    }

    const auto scurve_offsets = analysis::symmetric_grid(s.scurve.half_span_chips, s.scurve.points_per_side);

    stage("analyze", [&] {
        if (s.wants("psd")) {
            const std::size_t seg = std::min<std::size_t>(16384, std::bit_floor(working->size()));
            const auto psd = spectrum::welch_psd(*working, seg);
            const auto p = out.path_for("psd", "csv");
            io::write_series_csv("frequency_hz,psd_per_hz", {psd.freqs, psd.density}, p);
            out.record("psd", p);
        }
        if (s.wants("acf")) {
            if (!acq) throw StateError("acf needs a detected acquisition");
            const auto cut = analysis::acquisition_acf(*working, *acq, codes[1], codes[3], sig, s.comparison.acf_span_chips,
                                                       s.comparison.acf_segments);
            summary["acf_side_lobe_prominence"] = cut.side_lobe_prominence;
            const auto p = out.path_for("acf", "csv");
            io::write_acf_csv(cut, p);
            out.record("acf", p);
        }
        if (s.wants("scurve")) {
            const auto truth = filtered_truth(syn.truth, s);
            const auto curve = analysis::s_curve(s.loop.discriminator, s.loop, *working, pilot, sig, scurve_offsets, truth,
                                                 s.filter ? analysis::DatasetLabel::filtered
                                                          : (working == &noisy ? analysis::DatasetLabel::noisy
                                                                               : analysis::DatasetLabel::clean),
                                                 s.scurve.epochs);
            summary["scurve"] = {{"zero_crossing_chips", curve.zero_crossing()},
                                 {"odd_symmetry_defect", curve.odd_symmetry_defect()},
                                 {"range", curve.range()}};
            const auto p = out.path_for("scurve", "csv");
            io::write_scurve_csv(curve, p);
            out.record("scurve", p);
        }
        if (s.wants("jitter")) {
            const double band = s.jitter.band_hz > 0.0 ? s.jitter.band_hz : sig.main_lobe_bandwidth_hz();
            std::vector<double> cn0s, ds, alpha, rd, nem, dp, inem, idp;
            for (double d : s.jitter.spacings) {
                for (double c = s.jitter.cn0_min_dbhz; c <= s.jitter.cn0_max_dbhz + 1e-9; c += s.jitter.cn0_step_db) {
                    const auto jp = analysis::JitterParams::make(sig, band, s.loop.dll_bn_hz, d, c, s.loop.t_int, s.jitter.view);
                    const auto integral = analysis::jitter_integral_forms(jp, analysis::jitter_model(jp));
                    cn0s.push_back(c);
                    ds.push_back(d);
                    alpha.push_back(jp.acf_slope_alpha);
                    rd.push_back(jp.acf_at_d);
                    nem.push_back(analysis::jitter_nemlp(jp));
                    dp.push_back(analysis::jitter_dp(jp));
                    inem.push_back(integral.nemlp);
                    idp.push_back(integral.dp);
                }
            }
            const auto p = out.path_for("jitter", "csv");
            io::write_series_csv("cn0_dbhz,spacing_chips,alpha_per_chip,acf_at_d,closed_nemlp_chips2,closed_dp_chips2,"
                                 "integral_nemlp_chips2,integral_dp_chips2",
                                 {cn0s, ds, alpha, rd, nem, dp, inem, idp}, p);
            out.record("jitter", p);
        }
        if (s.wants("envelope")) {
            std::vector<double> delays;
            const auto n = static_cast<std::size_t>(std::floor(s.envelope.max_delay_chips / s.envelope.step_chips + 1e-9));
            for (std::size_t i = 0; i <= n; ++i) delays.push_back(static_cast<double>(i) * s.envelope.step_chips);
            const double band = s.envelope.band_hz > 0.0 ? s.envelope.band_hz : std::numeric_limits<double>::infinity();
            const auto env = analysis::multipath_envelope(s.loop, s.envelope.amplitude_ratio, delays, sig, band);
            const auto p = out.path_for("envelope", "csv");
            io::write_envelope_csv(env, p);
            out.record("envelope", p);
        }
    });

    if (s.wants("comparison")) {
        stage("compare", [&] {
            const IqBuffer& nz = noisy.empty() ? syn.clean : noisy;
            IqBuffer filt_default;
            const IqBuffer* filt = &filtered;
            channel::FilterSpec fspec = s.filter.value_or(channel::FilterSpec{});
            if (!s.filter) {
                filt_default = channel::lowpass_filter(nz, fspec);
                filt = &filt_default;
            }
            analysis::ComparisonSetup setup;
            setup.sig = sig;
            setup.acq = s.acq;
            setup.loop = s.loop;
            setup.track_duration =
                s.comparison.track_duration_s > 0.0 ? s.comparison.track_duration_s : s.effective_track_duration();
            setup.scatter_skip_epochs = s.comparison.scatter_skip_epochs;
            setup.scurve_offsets = scurve_offsets;
            setup.scurve_epochs = s.comparison.scurve_epochs;
            setup.acf_span_chips = s.comparison.acf_span_chips;
            setup.acf_segments = s.comparison.acf_segments;
            setup.bit_skip = s.comparison.bit_skip;

            analysis::ComparisonTruth truth;
            truth.codes = codes;
            truth.symbols = truth_symbols;
            truth.alignment[0] = syn.truth;
            truth.alignment[1] = syn.truth;
            Scenario fs_scn = s;
            fs_scn.filter = fspec;
            truth.alignment[2] = filtered_truth(syn.truth, fs_scn);

            const auto report = analysis::compare_datasets(syn.clean, nz, *filt, setup, truth);
            const auto p = out.path_for("comparison", "json");
            io::write_text(report.to_json() + "\n", p);
            out.record("comparison", p);
            for (const auto& d : report.datasets) {
                const std::string label = analysis::to_string(d.label);
                if (d.s_curve) {
                    const auto q = out.path_for("scurve_" + label, "csv");
                    io::write_scurve_csv(*d.s_curve, q);
                    out.record("scurve_" + label, q);
                }
                if (d.acf) {
                    const auto q = out.path_for("acf_" + label, "csv");
                    io::write_acf_csv(*d.acf, q);
                    out.record("acf_" + label, q);
                }
                for (const auto& e : d.errors) m.stage_errors.push_back({"compare/" + label, e});
            }
        });
    }

    return finish();
}

}  // namespace altboc::scenario
