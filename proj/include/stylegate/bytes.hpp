#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "stylegate/error.hpp"

namespace stylegate::detail {

inline std::vector<unsigned char> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::vector<unsigned char>& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed for '" + path + "'");
}

// Sequential reader over a byte buffer; every overrun is a FormatError("truncated ...").
class ByteReader {
public:
    ByteReader(const std::vector<unsigned char>& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

    std::size_t remaining() const { return buf_.size() - pos_; }

    void need(std::size_t n) const
    {
        if (remaining() < n)
            throw FormatError(what_ + ": truncated (need " + std::to_string(n) + " bytes at offset " +
                              std::to_string(pos_) + ", have " + std::to_string(remaining()) + ")");
    }

    std::uint8_t u8()
    {
        need(1);
        return buf_[pos_++];
    }

    std::uint16_t u16_le()
    {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32_le()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
        pos_ += 4;
        return v;
    }

    std::uint64_t u64_le()
    {
        const std::uint64_t lo = u32_le();
        const std::uint64_t hi = u32_le();
        return lo | (hi << 32);
    }

    std::uint32_t u32_be()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v = (v << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
        pos_ += 4;
        return v;
    }

    float f32_le() { return std::bit_cast<float>(u32_le()); }

    const unsigned char* take(std::size_t n)
    {
        need(n);
        const unsigned char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }

private:
    const std::vector<unsigned char>& buf_;
    std::string what_;
    std::size_t pos_ = 0;
};

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16_le(std::uint16_t v)
    {
        bytes_.push_back(static_cast<unsigned char>(v & 0xff));
        bytes_.push_back(static_cast<unsigned char>(v >> 8));
    }
    void u32_le(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            bytes_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
    }
    void u64_le(std::uint64_t v)
    {
        u32_le(static_cast<std::uint32_t>(v));
        u32_le(static_cast<std::uint32_t>(v >> 32));
    }
    void u32_be(std::uint32_t v)
    {
        for (int i = 3; i >= 0; --i)
            bytes_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
    }
    void f32_le(float v) { u32_le(std::bit_cast<std::uint32_t>(v)); }
    void raw(const void* p, std::size_t n)
    {
        const auto* c = static_cast<const unsigned char*>(p);
        bytes_.insert(bytes_.end(), c, c + n);
    }

    const std::vector<unsigned char>& bytes() const { return bytes_; }

private:
    std::vector<unsigned char> bytes_;
};

} // namespace stylegate::detail
