// altboc: scenario runner and stage-level tools.
//
// Exit codes: 0 success, 2 validation failure, 3 stage failure, 4 I/O failure.
// The default output directory comes from ALTBOC_OUT_DIR, else ./out.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "altboc/analysis.hpp"
#include "altboc/io.hpp"
#include "altboc/scenario.hpp"

namespace fs = std::filesystem;
using namespace altboc;
using nlohmann::json;

namespace {

constexpr int kOk = 0, kValidation = 2, kStage = 3, kIo = 4;

fs::path default_out_dir()
{
    const char* env = std::getenv("ALTBOC_OUT_DIR");
    return env && *env ? fs::path(env) : fs::path("out");
}

// Flags of the stage tools are scenario overrides, so each maps to exactly
// one scenario field.
struct Overrides {
    std::vector<std::string> list;

    template <class T>
    void add(const std::string& key, const std::optional<T>& v)
    {
        if (v) list.push_back(key + "=" + json(*v).dump());
    }
};

scenario::Scenario base_scenario(const std::string& file, const std::vector<std::string>& overrides)
{
    std::string text = "{}";
    fs::path origin = "scenario.json";
    if (!file.empty()) {
        std::ifstream is(file);
        if (!is) throw IoError("cannot read scenario " + file);
        std::stringstream ss;
        ss << is.rdbuf();
        text = ss.str();
        origin = file;
    }
    for (const auto& o : overrides) text = scenario::apply_override(text, o);
    // a relative register table is relative to the scenario file
    auto j = json::parse(text, nullptr, false);
    if (j.is_object() && j.contains("prn_table") && j["prn_table"].is_string()) {
        fs::path t = j["prn_table"].get<std::string>();
        if (!t.empty() && t.is_relative()) j["prn_table"] = (origin.parent_path() / t).lexically_normal().string();
        text = j.dump();
    }
    return scenario::from_json_text(text);
}

// Sample rate, IF and length of a recorded file become scenario fields.
void from_sidecar(const io::IqMetadata& meta, Overrides& ov, const std::string& scenario_file)
{
    ov.list.insert(ov.list.begin(), "signal.if_hz=" + json(meta.if_hz).dump());
    ov.list.insert(ov.list.begin(), "signal.sample_rate_hz=" + json(meta.sample_rate_hz).dump());
    if (scenario_file.empty())
        ov.list.insert(ov.list.begin(), "duration_s=" + json(static_cast<double>(meta.sample_count) / meta.sample_rate_hz).dump());
}

struct SignalFlags {
    std::optional<std::string> scale;
    std::optional<int> prn;
    std::optional<std::string> code_mode;

    void attach(CLI::App* app)
    {
        app->add_option("--scale", scale, "signal.scale: full or desk");
        app->add_option("--prn", prn, "prn");
        app->add_option("--code-mode", code_mode, "code_mode: icd_register or synthetic");
    }
    void apply(Overrides& ov) const
    {
        ov.add("signal.scale", scale);
        ov.add("prn", prn);
        ov.add("code_mode", code_mode);
    }
};

struct AcqFlags {
    std::optional<double> dmin, dmax, dstep, tint, threshold;
    std::optional<int> sums;
    std::optional<std::string> sideband;

    void attach(CLI::App* app)
    {
        app->add_option("--doppler-min", dmin, "acq.doppler_min_hz");
        app->add_option("--doppler-max", dmax, "acq.doppler_max_hz");
        app->add_option("--doppler-step", dstep, "acq.doppler_step_hz");
        app->add_option("--coherent-t", tint, "acq.coherent_t_int (s)");
        app->add_option("--sums", sums, "acq.noncoherent_sums");
        app->add_option("--threshold", threshold, "acq.detection_threshold");
        app->add_option("--sideband", sideband, "acq.sideband: lower or upper");
    }
    void apply(Overrides& ov) const
    {
        ov.add("acq.doppler_min_hz", dmin);
        ov.add("acq.doppler_max_hz", dmax);
        ov.add("acq.doppler_step_hz", dstep);
        ov.add("acq.coherent_t_int", tint);
        ov.add("acq.noncoherent_sums", sums);
        ov.add("acq.detection_threshold", threshold);
        ov.add("acq.sideband", sideband);
    }
};

struct LoopFlags {
    std::optional<std::string> disc;
    std::optional<bool> normalized;
    std::optional<double> spacing, dll_bn, pll_bn, tint;
    std::optional<int> order;

    void attach(CLI::App* app)
    {
        app->add_option("--discriminator", disc, "loop.discriminator: EML, NEMLP or DP");
        app->add_option("--normalized", normalized, "loop.normalized (true/false)");
        app->add_option("--spacing", spacing, "loop.correlator_spacing_d (chips)");
        app->add_option("--dll-bn", dll_bn, "loop.dll_bn_hz");
        app->add_option("--pll-bn", pll_bn, "loop.pll_bn_hz");
        app->add_option("--t-int", tint, "loop.t_int (s)");
        app->add_option("--loop-order", order, "loop.loop_order");
    }
    void apply(Overrides& ov) const
    {
        ov.add("loop.discriminator", disc);
        ov.add("loop.normalized", normalized);
        ov.add("loop.correlator_spacing_d", spacing);
        ov.add("loop.dll_bn_hz", dll_bn);
        ov.add("loop.pll_bn_hz", pll_bn);
        ov.add("loop.t_int", tint);
        ov.add("loop.loop_order", order);
    }
};

struct Loaded {
    IqBuffer iq;
    io::IqMetadata meta;
};

Loaded load_iq(const std::string& path, const std::string& sidecar)
{
    Loaded l;
    l.iq = io::read_iq(path, sidecar.empty() ? io::default_sidecar(path) : fs::path(sidecar), l.meta);
    return l;
}

std::array<waveform::ChipSequence, 4> codes_for(const scenario::Scenario& s)
{
    std::optional<waveform::PrnRegistry> reg;
    if (!s.prn_table.empty()) reg = waveform::PrnRegistry::from_csv(s.prn_table);
    const auto& r = reg ? *reg : waveform::PrnRegistry::builtin();
    const waveform::ChannelLabel labels[4] = {waveform::ChannelLabel::E5aI, waveform::ChannelLabel::E5aQ,
                                              waveform::ChannelLabel::E5bI, waveform::ChannelLabel::E5bQ};
    std::array<waveform::ChipSequence, 4> codes;
    for (int c = 0; c < 4; ++c) codes[c] = waveform::generate_primary_code(s.prn, labels[c], s.signal, s.code_mode, r);
    return codes;
}

std::size_t pilot_index(acquisition::Sideband sb) { return sb == acquisition::Sideband::lower ? 1 : 3; }
std::size_t data_index(acquisition::Sideband sb) { return sb == acquisition::Sideband::lower ? 0 : 2; }

json acq_json(const acquisition::AcquisitionResult& r, const waveform::SignalConfig& sig)
{
    return {{"detected", r.detected},
            {"code_phase_samples", r.code_phase_samples},
            {"code_phase_chips", r.code_phase_samples * sig.chip_rate_hz / sig.sample_rate_hz},
            {"doppler_hz", r.doppler_hz},
            {"peak_metric", r.peak_metric},
            {"peak_to_second_ratio", r.peak_to_second_ratio}};
}

std::vector<std::int8_t> read_symbols(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw IoError("cannot read symbols " + path);
    std::vector<std::int8_t> out;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        const double v = std::stod(comma == std::string::npos ? line : line.substr(comma + 1));
        out.push_back(v >= 0 ? 1 : -1);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"AltBOC E5 baseband laboratory"};
    app.require_subcommand(1);
    fs::path out_dir = default_out_dir();

    // run
    auto* run = app.add_subcommand("run", "Run a scenario file end to end");
    std::string run_file;
    std::optional<std::uint64_t> run_seed;
    std::vector<std::string> run_overrides;
    run->add_option("scenario", run_file, "scenario JSON")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", run_seed, "rng_seed");
    run->add_option("--override", run_overrides, "key.path=value, repeatable");

    // acquire / track
    std::string iq_path, sidecar_path, scen_file;
    SignalFlags sigf;
    AcqFlags acqf;
    LoopFlags loopf;
    std::optional<double> track_dur;

    auto* acq_cmd = app.add_subcommand("acquire", "Acquire a recorded IQ file");
    acq_cmd->add_option("iq", iq_path, "raw IQ file")->required();
    acq_cmd->add_option("sidecar", sidecar_path, "metadata sidecar (default <iq>.json)");
    acq_cmd->add_option("--scenario", scen_file, "scenario supplying defaults");
    acq_cmd->add_option("--out", out_dir, "output directory");
    sigf.attach(acq_cmd);
    acqf.attach(acq_cmd);

    auto* trk_cmd = app.add_subcommand("track", "Acquire and track a recorded IQ file");
    trk_cmd->add_option("iq", iq_path, "raw IQ file")->required();
    trk_cmd->add_option("sidecar", sidecar_path, "metadata sidecar (default <iq>.json)");
    trk_cmd->add_option("--scenario", scen_file, "scenario supplying defaults");
    trk_cmd->add_option("--out", out_dir, "output directory");
    trk_cmd->add_option("--duration", track_dur, "tracking.duration_s");
    sigf.attach(trk_cmd);
    acqf.attach(trk_cmd);
    loopf.attach(trk_cmd);

    // analyze
    auto* ana = app.add_subcommand("analyze", "Analytic curves and S-curves");
    ana->require_subcommand(1);
    std::optional<double> band, cn0_min, cn0_max, cn0_step, amp, max_delay, step, half_span;
    std::optional<std::string> view;
    std::optional<std::vector<double>> spacings;
    std::optional<std::size_t> points, epochs;

    auto* jit = ana->add_subcommand("jitter", "Closed and integral jitter over a C/N0 grid");
    jit->add_option("--scenario", scen_file, "scenario supplying defaults");
    jit->add_option("--out", out_dir, "output directory");
    jit->add_option("--band", band, "analysis.jitter.band_hz");
    jit->add_option("--cn0-min", cn0_min, "analysis.jitter.cn0_min_dbhz");
    jit->add_option("--cn0-max", cn0_max, "analysis.jitter.cn0_max_dbhz");
    jit->add_option("--cn0-step", cn0_step, "analysis.jitter.cn0_step_db");
    jit->add_option("--spacings", spacings, "analysis.jitter.spacings (chips)");
    jit->add_option("--view", view, "analysis.jitter.view: single_sideband or full_band");
    sigf.attach(jit);
    loopf.attach(jit);

    auto* scv = ana->add_subcommand("scurve", "Open-loop S-curve of a recorded IQ file");
    scv->add_option("iq", iq_path, "raw IQ file")->required();
    scv->add_option("sidecar", sidecar_path, "metadata sidecar (default <iq>.json)");
    scv->add_option("--scenario", scen_file, "scenario supplying defaults");
    scv->add_option("--out", out_dir, "output directory");
    scv->add_option("--half-span", half_span, "analysis.scurve.half_span_chips");
    scv->add_option("--points", points, "analysis.scurve.points_per_side");
    scv->add_option("--epochs", epochs, "analysis.scurve.epochs");
    sigf.attach(scv);
    acqf.attach(scv);
    loopf.attach(scv);

    auto* env = ana->add_subcommand("envelope", "Multipath error envelope");
    env->add_option("--scenario", scen_file, "scenario supplying defaults");
    env->add_option("--out", out_dir, "output directory");
    env->add_option("--amplitude-ratio", amp, "analysis.envelope.amplitude_ratio");
    env->add_option("--max-delay", max_delay, "analysis.envelope.max_delay_chips");
    env->add_option("--step", step, "analysis.envelope.step_chips");
    env->add_option("--band", band, "analysis.envelope.band_hz (0 = unfiltered)");
    sigf.attach(env);
    loopf.attach(env);

    // compare
    auto* cmp = app.add_subcommand("compare", "Clean / noisy / filtered comparison of three IQ files");
    std::string clean_path, noisy_path, filt_path, symbols_path;
    cmp->add_option("clean", clean_path, "clean IQ file (sidecar <file>.json)")->required();
    cmp->add_option("noisy", noisy_path, "noisy IQ file")->required();
    cmp->add_option("filtered", filt_path, "filtered IQ file")->required();
    cmp->add_option("--scenario", scen_file, "scenario supplying defaults");
    cmp->add_option("--symbols", symbols_path, "truth symbol CSV (default: bits extracted from the clean file)");
    cmp->add_option("--out", out_dir, "output directory");
    sigf.attach(cmp);
    acqf.attach(cmp);
    loopf.attach(cmp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }

    try {
        if (*run) {
            auto m = scenario::run_scenario(run_file, {out_dir, run_seed, run_overrides});
            for (const auto& e : m.stage_errors) std::cerr << "stage " << e.stage << ": " << e.message << '\n';
            std::cout << (out_dir / "manifest.json").string() << '\n';
            return m.ok() ? kOk : kStage;
        }

        Overrides ov;
        sigf.apply(ov);
        acqf.apply(ov);
        loopf.apply(ov);

        if (*acq_cmd || *trk_cmd) {
            auto in = load_iq(iq_path, sidecar_path);
            from_sidecar(in.meta, ov, scen_file);
            ov.add("tracking.duration_s", track_dur);
            auto s = base_scenario(scen_file, ov.list);
            const auto codes = codes_for(s);
            auto cfg = s.acq;
            cfg.keep_surface = true;
            const auto& code = codes[static_cast<std::size_t>(acquisition::acquisition_channel(cfg))];
            const auto r = acquisition::acquire(in.iq, code, s.signal, cfg);
            io::OutputSet out(out_dir, fs::path(iq_path).stem().string());
            json doc{{"acquisition", acq_json(r, s.signal)}};
            if (*acq_cmd) {
                const auto p = out.path_for("acquisition_surface", "csv");
                io::write_surface_csv(*r.search_surface, s.signal.sample_rate_hz, p);
                out.record("acquisition_surface", p);
            }
            if (*trk_cmd) {
                if (!r.detected) {
                    std::cout << doc.dump(2) << '\n';
                    std::cerr << "acquisition: signal not detected\n";
                    return kStage;
                }
                const auto rec = tracking::run_tracking(in.iq, r, s.loop, codes[pilot_index(s.acq.sideband)], s.signal,
                                                        s.effective_track_duration(), &codes[data_index(s.acq.sideband)]);
                const auto p = out.path_for("tracking", "csv");
                std::ofstream os(p);
                rec.write_csv(os);
                os.close();
                if (!os) throw IoError("cannot write " + p.string());
                out.record("tracking", p);
                const auto bits = tracking::extract_nav_bits(rec, 0.02);
                doc["tracking"] = {{"epochs", rec.size()},
                                   {"lock_lost_epoch", rec.lock_lost_epoch ? json(*rec.lock_lost_epoch) : json(nullptr)},
                                   {"bits", bits.bits.size()},
                                   {"bit_gaps", bits.gaps()}};
                std::vector<double> idx, b;
                for (std::size_t i = 0; i < bits.bits.size(); ++i) {
                    idx.push_back(static_cast<double>(i));
                    b.push_back(bits.bits[i]);
                }
                const auto q = out.path_for("bits", "csv");
                io::write_series_csv("symbol_index,bit", {idx, b}, q);
                out.record("bits", q);
            }
            json files = json::array();
            for (const auto& f : out.files()) files.push_back({{"path", (out_dir / f.path).string()}, {"sha256", f.sha256}});
            doc["outputs"] = files;
            std::cout << doc.dump(2) << '\n';
            return r.detected ? kOk : kStage;
        }

        if (*jit || *env) {
            ov.add("analysis.jitter.band_hz", *jit ? band : std::nullopt);
            ov.add("analysis.jitter.cn0_min_dbhz", cn0_min);
            ov.add("analysis.jitter.cn0_max_dbhz", cn0_max);
            ov.add("analysis.jitter.cn0_step_db", cn0_step);
            ov.add("analysis.jitter.spacings", spacings);
            ov.add("analysis.jitter.view", view);
            ov.add("analysis.envelope.amplitude_ratio", amp);
            ov.add("analysis.envelope.max_delay_chips", max_delay);
            ov.add("analysis.envelope.step_chips", step);
            ov.add("analysis.envelope.band_hz", *env ? band : std::nullopt);
            ov.list.push_back(std::string("outputs=[\"") + (*jit ? "jitter" : "envelope") + "\"]");
            auto s = base_scenario(scen_file, ov.list);
            // analytic only: no synthesis needed beyond validation
            io::OutputSet out(out_dir, *jit ? "jitter" : "envelope");
            if (*jit) {
                const double b = s.jitter.band_hz > 0.0 ? s.jitter.band_hz : s.signal.main_lobe_bandwidth_hz();
                std::vector<double> c0, dd, nem, dp, inem, idp;
                for (double d : s.jitter.spacings)
                    for (double c = s.jitter.cn0_min_dbhz; c <= s.jitter.cn0_max_dbhz + 1e-9; c += s.jitter.cn0_step_db) {
                        const auto jp = analysis::JitterParams::make(s.signal, b, s.loop.dll_bn_hz, d, c, s.loop.t_int, s.jitter.view);
                        const auto ig = analysis::jitter_integral_forms(jp, analysis::jitter_model(jp));
                        c0.push_back(c);
                        dd.push_back(d);
                        nem.push_back(analysis::jitter_nemlp(jp));
                        dp.push_back(analysis::jitter_dp(jp));
                        inem.push_back(ig.nemlp);
                        idp.push_back(ig.dp);
                    }
                const auto p = out.path_for("curve", "csv");
                io::write_series_csv("cn0_dbhz,spacing_chips,closed_nemlp_chips2,closed_dp_chips2,integral_nemlp_chips2,"
                                     "integral_dp_chips2",
                                     {c0, dd, nem, dp, inem, idp}, p);
                std::cout << p.string() << '\n';
            } else {
                std::vector<double> delays;
                const auto n = static_cast<std::size_t>(std::floor(s.envelope.max_delay_chips / s.envelope.step_chips + 1e-9));
                for (std::size_t i = 0; i <= n; ++i) delays.push_back(static_cast<double>(i) * s.envelope.step_chips);
                const double b = s.envelope.band_hz > 0.0 ? s.envelope.band_hz : std::numeric_limits<double>::infinity();
                const auto e = analysis::multipath_envelope(s.loop, s.envelope.amplitude_ratio, delays, s.signal, b);
                const auto p = out.path_for("curve", "csv");
                io::write_envelope_csv(e, p);
                std::cout << p.string() << '\n';
            }
            return kOk;
        }

        if (*scv) {
            auto in = load_iq(iq_path, sidecar_path);
            from_sidecar(in.meta, ov, scen_file);
            ov.add("analysis.scurve.half_span_chips", half_span);
            ov.add("analysis.scurve.points_per_side", points);
            ov.add("analysis.scurve.epochs", epochs);
            auto s = base_scenario(scen_file, ov.list);
            const auto codes = codes_for(s);
            const auto grid = analysis::symmetric_grid(s.scurve.half_span_chips, s.scurve.points_per_side);
            auto acq = s.acq;
            acq.keep_surface = false;
            const auto curve = analysis::s_curve(s.loop.discriminator, s.loop, in.iq, codes[pilot_index(s.acq.sideband)],
                                                 s.signal, grid, std::nullopt, analysis::DatasetLabel::clean,
                                                 s.scurve.epochs, acq);
            io::OutputSet out(out_dir, fs::path(iq_path).stem().string());
            const auto p = out.path_for("scurve", "csv");
            io::write_scurve_csv(curve, p);
            std::cout << json{{"path", p.string()},
                              {"zero_crossing_chips", curve.zero_crossing()},
                              {"odd_symmetry_defect", curve.odd_symmetry_defect()}}
                             .dump(2)
                      << '\n';
            return kOk;
        }

        if (*cmp) {
            const auto clean = load_iq(clean_path, "");
            const auto noisy = load_iq(noisy_path, "");
            const auto filt = load_iq(filt_path, "");
            from_sidecar(clean.meta, ov, scen_file);
            auto s = base_scenario(scen_file, ov.list);

            analysis::ComparisonSetup setup;
            setup.sig = s.signal;
            setup.acq = s.acq;
            setup.loop = s.loop;
            setup.track_duration =
                s.comparison.track_duration_s > 0.0 ? s.comparison.track_duration_s : s.effective_track_duration();
            setup.scatter_skip_epochs = s.comparison.scatter_skip_epochs;
            setup.scurve_offsets = analysis::symmetric_grid(s.scurve.half_span_chips, s.scurve.points_per_side);
            setup.scurve_epochs = s.comparison.scurve_epochs;
            setup.acf_span_chips = s.comparison.acf_span_chips;
            setup.acf_segments = s.comparison.acf_segments;
            setup.bit_skip = s.comparison.bit_skip;

            analysis::ComparisonTruth truth;
            truth.codes = codes_for(s);
            if (!symbols_path.empty()) {
                truth.symbols = read_symbols(symbols_path);
            } else {
                // reference bits from the clean file; the clean BER is then zero by construction
                auto acq = s.acq;
                acq.keep_surface = false;
                const auto r = acquisition::acquire(clean.iq, truth.codes[static_cast<std::size_t>(acquisition::acquisition_channel(acq))],
                                                    s.signal, acq);
                if (!r.detected) throw StateError("clean file: signal not detected, no reference bits");
                const auto rec = tracking::run_tracking(clean.iq, r, s.loop, truth.codes[pilot_index(s.acq.sideband)], s.signal,
                                                        setup.track_duration, &truth.codes[data_index(s.acq.sideband)]);
                const auto bits = tracking::extract_nav_bits(rec, 0.02);
                truth.symbols.assign(bits.bits.begin(), bits.bits.end());
                std::cerr << "note: no --symbols given, clean-file bits serve as truth\n";
            }
            const auto report = analysis::compare_datasets(clean.iq, noisy.iq, filt.iq, setup, truth);
            io::OutputSet out(out_dir, "comparison");
            const auto p = out.path_for("report", "json");
            io::write_text(report.to_json() + "\n", p);
            for (const auto& d : report.datasets) {
                if (d.s_curve) io::write_scurve_csv(*d.s_curve, out.path_for("scurve_" + analysis::to_string(d.label), "csv"));
                if (d.acf) io::write_acf_csv(*d.acf, out.path_for("acf_" + analysis::to_string(d.label), "csv"));
            }
            std::cout << p.string() << '\n';
            bool ok = true;
            for (const auto& d : report.datasets)
                for (const auto& e : d.errors) {
                    std::cerr << analysis::to_string(d.label) << ": " << e << '\n';
                    ok = false;
                }
            return ok ? kOk : kStage;
        }
    } catch (const scenario::ValidationError& e) {
        std::cerr << "invalid scenario: " << e.what() << '\n';
        return kValidation;
    } catch (const ConfigurationError& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return kValidation;
    } catch (const ArgumentError& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kValidation;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const MetadataError& e) {
        std::cerr << "metadata error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "stage failure: " << e.what() << '\n';
        return kStage;
    }
    return kOk;
}
