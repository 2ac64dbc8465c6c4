#include "altboc/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"

namespace altboc::io {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "raw IQ files are written in host order");

namespace {

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out)
{
    std::ofstream os(path, mode | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    return os;
}

void finish(std::ofstream& os, const fs::path& path)
{
    os.flush();
    if (!os) throw IoError("write failed: " + path.string());
}

std::int16_t quantize(double v, double full_scale)
{
    const double q = std::round(v / full_scale * 32767.0);
    return static_cast<std::int16_t>(std::clamp(q, -32767.0, 32767.0));
}

std::size_t element_bytes(SampleFormat f) { return f == SampleFormat::float32 ? 4 : 2; }

}  // namespace

std::string to_string(SampleFormat f) { return f == SampleFormat::float32 ? "float32" : "int16"; }

SampleFormat sample_format_from_string(const std::string& name)
{
    if (name == "float32") return SampleFormat::float32;
    if (name == "int16") return SampleFormat::int16;
    throw ArgumentError("unknown sample format '" + name + "' (float32 or int16)");
}

fs::path default_sidecar(const fs::path& data_path)
{
    fs::path p = data_path;
    p += ".json";
    return p;
}

void write_iq(const IqBuffer& iq, const fs::path& path, SampleFormat format, double if_hz, double full_scale)
{
    if (!(full_scale > 0.0)) throw ArgumentError("write_iq: full_scale must be positive");
    auto os = open_out(path, std::ios::binary);
    if (format == SampleFormat::float32) {
        std::vector<float> raw(2 * iq.size());
        for (std::size_t n = 0; n < iq.size(); ++n) {
            raw[2 * n] = static_cast<float>(iq.samples[n].real());
            raw[2 * n + 1] = static_cast<float>(iq.samples[n].imag());
        }
        os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    } else {
        std::vector<std::int16_t> raw(2 * iq.size());
        for (std::size_t n = 0; n < iq.size(); ++n) {
            raw[2 * n] = quantize(iq.samples[n].real(), full_scale);
            raw[2 * n + 1] = quantize(iq.samples[n].imag(), full_scale);
        }
        os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 2));
    }
    finish(os, path);

    json meta = {{"sample_rate_hz", iq.sample_rate_hz},
                 {"if_hz", if_hz},
                 {"start_time", iq.start_time},
                 {"element_type", to_string(format)},
                 {"sample_count", iq.size()},
                 {"full_scale", full_scale},
                 {"layout", "interleaved_iq_le"}};
    const auto side = default_sidecar(path);
    auto ms = open_out(side);
    ms << meta.dump(2) << '\n';
    finish(ms, side);
}

IqMetadata read_metadata(const fs::path& sidecar)
{
    std::ifstream is(sidecar);
    if (!is) throw MetadataError("missing sidecar " + sidecar.string());
    IqMetadata m;
    try {
        const json j = json::parse(is);
        m.sample_rate_hz = j.at("sample_rate_hz").get<double>();
        m.if_hz = j.value("if_hz", 0.0);
        m.start_time = j.value("start_time", 0.0);
        m.format = sample_format_from_string(j.at("element_type").get<std::string>());
        m.sample_count = j.at("sample_count").get<std::size_t>();
        m.full_scale = j.value("full_scale", 1.0);
    } catch (const json::exception& e) {
        throw MetadataError("sidecar " + sidecar.string() + ": " + e.what());
    } catch (const ArgumentError& e) {
        throw MetadataError("sidecar " + sidecar.string() + ": " + e.what());
    }
    if (!(m.sample_rate_hz > 0.0)) throw MetadataError("sidecar " + sidecar.string() + ": sample_rate_hz must be positive");
    if (!(m.full_scale > 0.0)) throw MetadataError("sidecar " + sidecar.string() + ": full_scale must be positive");
    return m;
}

IqBuffer read_iq(const fs::path& path, const fs::path& sidecar)
{
    IqMetadata meta;
    return read_iq(path, sidecar, meta);
}

IqBuffer read_iq(const fs::path& path, const fs::path& sidecar, IqMetadata& meta)
{
    meta = read_metadata(sidecar);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    const std::uintmax_t size = fs::file_size(path);
    const std::size_t per_sample = 2 * element_bytes(meta.format);
    if (size % per_sample != 0) {
        throw IoError(path.string() + ": truncated sample at byte offset " + std::to_string(size - size % per_sample) +
                      " (file size " + std::to_string(size) + " is not a multiple of " +
                      std::to_string(per_sample) + ")");
    }
    const std::uintmax_t need = static_cast<std::uintmax_t>(meta.sample_count) * per_sample;
    if (size < need) {
        throw IoError(path.string() + ": data ends at byte offset " + std::to_string(size) + ", sidecar declares " +
                      std::to_string(need) + " bytes");
    }

    IqBuffer iq;
    iq.sample_rate_hz = meta.sample_rate_hz;
    iq.start_time = meta.start_time;
    iq.samples.resize(meta.sample_count);
    if (meta.format == SampleFormat::float32) {
        std::vector<float> raw(2 * meta.sample_count);
        is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
        for (std::size_t n = 0; n < meta.sample_count; ++n) iq.samples[n] = {raw[2 * n], raw[2 * n + 1]};
    } else {
        std::vector<std::int16_t> raw(2 * meta.sample_count);
        is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 2));
        const double k = meta.full_scale / 32767.0;
        for (std::size_t n = 0; n < meta.sample_count; ++n) iq.samples[n] = {k * raw[2 * n], k * raw[2 * n + 1]};
    }
    if (!is) throw IoError(path.string() + ": read failed at byte offset " + std::to_string(is.gcount()));
    return iq;
}

std::string sha256_hex(std::span<const unsigned char> bytes)
{
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
        throw Error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string sha256_file(const fs::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return sha256_hex(data);
}

void write_scurve_csv(const analysis::SCurve& curve, const fs::path& path)
{
    auto os = open_out(path);
    os << "offset_chips,discriminator_output\n";
    for (std::size_t i = 0; i < curve.offsets.size(); ++i) os << num(curve.offsets[i]) << ',' << num(curve.responses[i]) << '\n';
    finish(os, path);
}

void write_surface_csv(const acquisition::SearchSurface& surface, double sample_rate_hz, const fs::path& path)
{
    auto os = open_out(path);
    for (std::size_t r = 0; r < surface.rows(); ++r) {
        for (std::size_t c = 0; c < surface.code_phases; ++c) {
            if (c) os << ',';
            os << num(surface.at(r, c));
        }
        os << '\n';
    }
    finish(os, path);

    json axes = {{"rows", "doppler_hz"},
                 {"columns", "code_phase_samples"},
                 {"doppler_hz", surface.doppler_hz},
                 {"code_phases", surface.code_phases},
                 {"code_phase_spacing_s", 1.0 / sample_rate_hz},
                 {"value", "noncoherent power over surface mean"}};
    fs::path side = path;
    side += ".axes.json";
    auto as = open_out(side);
    as << axes.dump(2) << '\n';
    finish(as, side);
}

void write_envelope_csv(const analysis::MultipathEnvelopeResult& env, const fs::path& path)
{
    auto os = open_out(path);
    os << "mp_delay_chips,upper_bias_chips,lower_bias_chips,upper_saturated,lower_saturated\n";
    for (std::size_t i = 0; i < env.mp_delays.size(); ++i) {
        os << num(env.mp_delays[i]) << ',' << num(env.upper_bias[i]) << ',' << num(env.lower_bias[i]) << ','
           << (env.upper_saturated[i] ? 1 : 0) << ',' << (env.lower_saturated[i] ? 1 : 0) << '\n';
    }
    finish(os, path);
}

void write_acf_csv(const analysis::AcfCut& acf, const fs::path& path)
{
    auto os = open_out(path);
    os << "delay_chips,acf_magnitude_normalized\n";
    for (std::size_t i = 0; i < acf.delays_chips.size(); ++i) os << num(acf.delays_chips[i]) << ',' << num(acf.magnitude[i]) << '\n';
    finish(os, path);
}

void write_series_csv(const std::string& header, const std::vector<std::vector<double>>& columns, const fs::path& path)
{
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns)
        if (c.size() != rows) throw ShapeError("write_series_csv: columns differ in length");
    auto os = open_out(path);
    os << header << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (c) os << ',';
            os << num(columns[c][r]);
        }
        os << '\n';
    }
    finish(os, path);
}

void write_text(const std::string& text, const fs::path& path)
{
    auto os = open_out(path);
    os << text;
    finish(os, path);
}

OutputSet::OutputSet(fs::path dir, std::string prefix) : dir_(std::move(dir)), prefix_(std::move(prefix))
{
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw IoError("cannot create output directory " + dir_.string());
}

fs::path OutputSet::path_for(const std::string& id, const std::string& ext) const
{
    return dir_ / (prefix_ + "_" + id + "." + ext);
}

const OutputFile& OutputSet::record(const std::string& id, const fs::path& file)
{
    OutputFile f{id, fs::relative(file, dir_), sha256_file(file), fs::file_size(file)};
    auto it = std::find_if(files_.begin(), files_.end(), [&](const OutputFile& o) { return o.id == id; });
    if (it != files_.end()) {
        *it = std::move(f);
        return *it;
    }
    files_.push_back(std::move(f));
    return files_.back();
}

}  // namespace altboc::io
