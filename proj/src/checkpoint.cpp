#include "drft/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "drft/errors.hpp"

namespace drft {

namespace {

constexpr char kMagic[8] = {'D', 'R', 'F', 'T', 'C', 'K', 'P', 'T'};
constexpr uint8_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, uint64_t v) {
    write_u32(os, static_cast<uint32_t>(v));
    write_u32(os, static_cast<uint32_t>(v >> 32));
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError("checkpoint truncated");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t read_u64(std::istream& is) {
    uint64_t lo = read_u32(is);
    uint64_t hi = read_u32(is);
    return lo | (hi << 32);
}

void write_f32_payload(std::ostream& os, std::span<const double> values) {
    for (double d : values) {
        float f = static_cast<float>(d);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32(os, bits);
    }
}

std::vector<double> read_f32_payload(std::istream& is, size_t n) {
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) {
        uint32_t bits = read_u32(is);
        float f;
        std::memcpy(&f, &bits, 4);
        out[i] = static_cast<double>(f);
    }
    return out;
}

void write_entry(std::ostream& os, const std::string& name, int rows, int cols,
                 std::span<const double> values) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(rows));
    write_u32(os, static_cast<uint32_t>(cols));
    write_f32_payload(os, values);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const CheckpointMeta& meta, const AdamOptimizer* optimizer) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 8);
    os.put(static_cast<char>(kVersion));
    write_u32(os, meta.epoch);
    write_u64(os, meta.adam_step);

    uint32_t count = static_cast<uint32_t>(store.entries().size());
    if (optimizer) count += 2 * static_cast<uint32_t>(optimizer->params().size());
    write_u32(os, count);

    for (const Parameter& p : store.entries()) {
        write_entry(os, p.name, p.tensor.rows(), p.tensor.cols(), p.tensor.values());
    }
    if (optimizer) {
        const auto& params = optimizer->params();
        for (size_t i = 0; i < params.size(); ++i) {
            write_entry(os, "adam.m:" + params[i].name, params[i].tensor.rows(),
                        params[i].tensor.cols(), optimizer->first_moment(i));
            write_entry(os, "adam.v:" + params[i].name, params[i].tensor.rows(),
                        params[i].tensor.cols(), optimizer->second_moment(i));
        }
    }
    if (!os) throw FormatError("write failure on checkpoint: " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, ParamStore& store,
                               AdamOptimizer* optimizer) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
        throw FormatError("bad checkpoint magic in " + path);
    }
    int version = is.get();
    if (version != kVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    CheckpointMeta meta;
    meta.epoch = read_u32(is);
    meta.adam_step = read_u64(is);
    const uint32_t count = read_u32(is);

    std::map<std::string, std::vector<double>> moments_m, moments_v;
    size_t loaded = 0;
    for (uint32_t e = 0; e < count; ++e) {
        const uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw FormatError("checkpoint truncated");
        const uint32_t rows = read_u32(is);
        const uint32_t cols = read_u32(is);
        std::vector<double> values = read_f32_payload(is, static_cast<size_t>(rows) * cols);

        if (name.rfind("adam.m:", 0) == 0) {
            moments_m[name.substr(7)] = std::move(values);
            continue;
        }
        if (name.rfind("adam.v:", 0) == 0) {
            moments_v[name.substr(7)] = std::move(values);
            continue;
        }
        if (!store.contains(name)) {
            throw IncompatibilityError("checkpoint parameter '" + name +
                                       "' not present in model");
        }
        Tensor t = store.find(name);
        if (t.rows() != static_cast<int>(rows) || t.cols() != static_cast<int>(cols)) {
            throw IncompatibilityError("checkpoint shape " + std::to_string(rows) + "x" +
                                       std::to_string(cols) + " does not match model shape " +
                                       shape_string(t) + " for '" + name + "'");
        }
        std::span<double> dst = t.mutable_values();
        std::copy(values.begin(), values.end(), dst.begin());
        ++loaded;
    }
    if (loaded != store.entries().size()) {
        throw IncompatibilityError("checkpoint covers " + std::to_string(loaded) + " of " +
                                   std::to_string(store.entries().size()) +
                                   " model parameters");
    }

    if (optimizer && !moments_m.empty()) {
        std::vector<std::vector<double>> m, v;
        for (const Parameter& p : optimizer->params()) {
            auto im = moments_m.find(p.name);
            auto iv = moments_v.find(p.name);
            if (im == moments_m.end() || iv == moments_v.end()) {
                throw IncompatibilityError("checkpoint lacks optimizer state for '" + p.name +
                                           "'");
            }
            m.push_back(std::move(im->second));
            v.push_back(std::move(iv->second));
        }
        optimizer->restore_state(static_cast<long>(meta.adam_step), std::move(m), std::move(v));
    }
    return meta;
}

}  // namespace drft
