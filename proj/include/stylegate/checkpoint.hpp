#pragma once

// Checkpoint file layout (little-endian):
//   "SGCK" | u32 version | u8 kind | u32 tensor_count
//   per tensor: u16 name_len | name bytes | u8 rank | u32 dims[rank] | f32 data[prod(dims)]
//   trailer:    u64 training_seed | u64 config_fingerprint

#include <string>
#include <vector>

#include "stylegate/bytes.hpp"
#include "stylegate/nets.hpp"

namespace stylegate {

inline std::vector<unsigned char> encode_checkpoint(const NetworkCheckpoint& ckpt)
{
    detail::ByteWriter w;
    w.raw("SGCK", 4);
    w.u32_le(ckpt.version);
    w.u8(static_cast<std::uint8_t>(ckpt.kind));
    w.u32_le(static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        if (t.name.size() > 0xffff)
            throw Error("tensor name too long: " + t.name.substr(0, 32) + "...");
        if (t.dims.size() > 0xff)
            throw Error("tensor rank too large for '" + t.name + "'");
        if (t.data.size() != t.element_count())
            throw ShapeError("tensor '" + t.name + "' data size does not match its dims");
        w.u16_le(static_cast<std::uint16_t>(t.name.size()));
        w.raw(t.name.data(), t.name.size());
        w.u8(static_cast<std::uint8_t>(t.dims.size()));
        for (auto d : t.dims)
            w.u32_le(d);
        for (float v : t.data)
            w.f32_le(v);
    }
    w.u64_le(ckpt.training_seed);
    w.u64_le(ckpt.config_fingerprint);
    return w.bytes();
}

inline NetworkCheckpoint decode_checkpoint(const std::vector<unsigned char>& bytes, const std::string& origin = "checkpoint")
{
    detail::ByteReader r(bytes, origin);
    const unsigned char* magic = r.take(4);
    if (std::string(reinterpret_cast<const char*>(magic), 4) != "SGCK")
        throw FormatError(origin + ": bad magic");
    NetworkCheckpoint ckpt;
    ckpt.version = r.u32_le();
    if (ckpt.version != NetworkCheckpoint::format_version)
        throw FormatError(origin + ": version mismatch (file " + std::to_string(ckpt.version) + ", supported " +
                          std::to_string(NetworkCheckpoint::format_version) + ")");
    const std::uint8_t tag = r.u8();
    if (tag < 1 || tag > 3)
        throw FormatError(origin + ": unknown network kind tag " + std::to_string(tag));
    ckpt.kind = static_cast<NetworkKind>(tag);
    const std::uint32_t count = r.u32_le();
    if (count != arch::expected_tensor_count(ckpt.kind))
        throw FormatError(origin + ": tensor count mismatch (" + std::to_string(count) + " tensors, " +
                          to_string(ckpt.kind) + " has " + std::to_string(arch::expected_tensor_count(ckpt.kind)) + ")");
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const std::uint16_t len = r.u16_le();
        const unsigned char* name = r.take(len);
        t.name.assign(reinterpret_cast<const char*>(name), len);
        const std::uint8_t rank = r.u8();
        for (std::uint8_t d = 0; d < rank; ++d)
            t.dims.push_back(r.u32_le());
        const std::size_t n = t.element_count();
        r.need(n * 4);
        t.data.resize(n);
        for (std::size_t k = 0; k < n; ++k)
            t.data[k] = r.f32_le();
        ckpt.tensors.push_back(std::move(t));
    }
    ckpt.training_seed = r.u64_le();
    ckpt.config_fingerprint = r.u64_le();
    if (r.remaining() != 0)
        throw FormatError(origin + ": " + std::to_string(r.remaining()) + " trailing bytes");
    validate_architecture(ckpt);
    return ckpt;
}

inline void save_checkpoint(const NetworkCheckpoint& ckpt, const std::string& path)
{
    detail::write_file(path, encode_checkpoint(ckpt));
}

inline NetworkCheckpoint load_checkpoint(const std::string& path)
{
    return decode_checkpoint(detail::read_file(path), path);
}

} // namespace stylegate
