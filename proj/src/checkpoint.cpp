#include "aiacr/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "aiacr/serialization.hpp"

namespace aiacr {

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'I', 'A', 'C', 'R', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) fail(ErrorCode::CorruptHeader, "truncated checkpoint");
    return value;
}

void write_floats(std::ostream& out, const std::vector<float>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_floats(std::istream& in, std::size_t n) {
    std::vector<float> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) fail(ErrorCode::CorruptHeader, "truncated checkpoint payload");
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    nlohmann::json header;
    header["v"] = kCheckpointVersion;
    header["network"] = to_json(ck.network);
    header["schedule"] = to_json(ck.schedule);
    header["iteration"] = ck.iteration;
    header["seed"] = ck.seed;
    header["rng_state"] = ck.rng_state;
    header["run_config"] = ck.run_config;
    header["parameter_count"] = ck.parameters.size();
    header["adam_steps"] = ck.adam_steps;
    header["adam_state_count"] = ck.adam_m.size();
    if (ck.adam_m.size() != ck.adam_v.size()) fail(ErrorCode::InvalidArgument, "Adam moments differ in size");
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::IoError, "cannot write checkpoint " + tmp.string());
        out.write(kMagic.data(), kMagic.size());
        write_pod<std::uint32_t>(out, kCheckpointVersion);
        write_pod<std::uint64_t>(out, text.size());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        write_floats(out, ck.parameters);
        write_floats(out, ck.adam_m);
        write_floats(out, ck.adam_v);
        if (!out) fail(ErrorCode::IoError, "failed writing checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig* expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open checkpoint " + path.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) fail(ErrorCode::CorruptHeader, path.string() + " is not a checkpoint");
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        fail(ErrorCode::UnsupportedFormat, "checkpoint version " + std::to_string(version) + " is not supported");
    }
    const auto length = read_pod<std::uint64_t>(in);
    if (length > (1u << 26)) fail(ErrorCode::CorruptHeader, "implausible checkpoint header length");
    std::string text(length, '\0');
    in.read(text.data(), static_cast<std::streamsize>(length));
    if (!in) fail(ErrorCode::CorruptHeader, "truncated checkpoint header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptHeader, std::string("checkpoint header: ") + e.what());
    }

    Checkpoint ck;
    try {
        ck.network = network_config_from_json(header.at("network"));
        ck.schedule = schedule_from_json(header.at("schedule"));
        ck.iteration = header.at("iteration").get<std::int64_t>();
        ck.seed = header.at("seed").get<std::uint64_t>();
        ck.rng_state = header.value("rng_state", "");
        ck.run_config = header.value("run_config", "");
        ck.adam_steps = header.at("adam_steps").get<std::int64_t>();
        const auto n_params = header.at("parameter_count").get<std::size_t>();
        const auto n_state = header.at("adam_state_count").get<std::size_t>();
        if (n_params != parameter_count(ck.network)) {
            fail(ErrorCode::CorruptHeader, "parameter count disagrees with the stored network config");
        }
        if (expected != nullptr && !(*expected == ck.network)) {
            fail(ErrorCode::ConfigMismatch, "checkpoint network config differs from the requested one");
        }
        ck.parameters = read_floats(in, n_params);
        ck.adam_m = read_floats(in, n_state);
        ck.adam_v = read_floats(in, n_state);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptHeader, std::string("checkpoint header: ") + e.what());
    }
    return ck;
}

RevisionNetwork load_network(const std::filesystem::path& path) {
    Checkpoint ck = load_checkpoint(path);
    return RevisionNetwork(ck.network, std::move(ck.parameters));
}

}  // namespace aiacr
