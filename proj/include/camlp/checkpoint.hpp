#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "camlp/binary_io.hpp"
#include "camlp/model.hpp"

// Layout (all integers and values little-endian):
//   "CAMLP1" | u32 version | u32 scalar bytes (4 or 8)
//   u64 x 8: channels samples kernel filters blocks channel_hidden time_hidden num_classes
//   f64 x 4: slope bn_momentum bn_eps ln_eps
//   u32 tensor count, then per tensor:
//     u32 name length | name | u32 rank | u64 extents... | values

namespace camlp {

inline constexpr char kCheckpointMagic[6] = {'C', 'A', 'M', 'L', 'P', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(CamlpNet<T>& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_le<std::uint32_t>(out, kCheckpointVersion);
    detail::write_le<std::uint32_t>(out, sizeof(T));
    const auto& c = net.config;
    for (std::uint64_t v : {c.channels, c.samples, c.kernel, c.filters, c.blocks, c.channel_hidden, c.time_hidden,
                            c.num_classes})
        detail::write_le<std::uint64_t>(out, v);
    for (double v : {c.slope, c.bn_momentum, c.bn_eps, c.ln_eps}) detail::write_le<double>(out, v);

    const auto params = net.parameters();
    auto buffers = net.buffers();
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size() + buffers.size()));
    auto write_tensor = [&](const std::string& name, const Shape& shape, std::span<const T> values) {
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
        for (auto e : shape) detail::write_le<std::uint64_t>(out, e);
        for (T v : values) detail::write_le<T>(out, v);
    };
    for (const auto& p : params) write_tensor(p.name, p.tensor.shape(), p.tensor.data());
    for (const auto& b : buffers) write_tensor(b.name, {b.values->size()}, *b.values);
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

/// Loads a checkpoint into a network of scalar type T. Values are converted
/// when the stored precision differs.
template <typename T>
CamlpNet<T> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    char magic[sizeof(kCheckpointMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw DataError(path.string() + " is not a CAMLP checkpoint");
    const auto version = detail::read_le<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    const auto scalar_bytes = detail::read_le<std::uint32_t>(in, "precision");
    if (scalar_bytes != 4 && scalar_bytes != 8) throw DataError("bad checkpoint precision " + std::to_string(scalar_bytes));

    ModelConfig c;
    for (std::size_t* field : {&c.channels, &c.samples, &c.kernel, &c.filters, &c.blocks, &c.channel_hidden,
                               &c.time_hidden, &c.num_classes})
        *field = static_cast<std::size_t>(detail::read_le<std::uint64_t>(in, "config"));
    for (double* field : {&c.slope, &c.bn_momentum, &c.bn_eps, &c.ln_eps}) *field = detail::read_le<double>(in, "config");

    CamlpNet<T> net = make_camlp_net<T>(c, 0);
    std::map<std::string, std::pair<Shape, std::span<T>>> targets;
    for (auto& p : net.parameters()) targets[p.name] = {p.tensor.shape(), p.tensor.mutable_data()};
    for (auto& b : net.buffers()) targets[b.name] = {Shape{b.values->size()}, std::span<T>(*b.values)};

    const auto count = detail::read_le<std::uint32_t>(in, "tensor count");
    if (count != targets.size()) {
        throw DataError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                        std::to_string(targets.size()));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = detail::read_le<std::uint32_t>(in, "name length");
        if (name_len > 4096) throw DataError("checkpoint tensor name too long");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw DataError("checkpoint truncated in tensor name");
        auto it = targets.find(name);
        if (it == targets.end()) throw DataError("checkpoint has unknown tensor '" + name + "'");
        const auto rank = detail::read_le<std::uint32_t>(in, name);
        Shape shape(rank);
        for (auto& e : shape) e = static_cast<std::size_t>(detail::read_le<std::uint64_t>(in, name));
        if (shape != it->second.first) {
            throw DataError("tensor '" + name + "' has shape " + shape_str(shape) + ", model expects " +
                            shape_str(it->second.first));
        }
        for (auto& v : it->second.second) {
            v = scalar_bytes == 4 ? static_cast<T>(detail::read_le<float>(in, name))
                                  : static_cast<T>(detail::read_le<double>(in, name));
        }
        targets.erase(it);
    }
    return net;
}

}  // namespace camlp
