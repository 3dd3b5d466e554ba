#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>

#include "stylegate/error.hpp"
#include "stylegate/evaluation.hpp"
#include "stylegate/training.hpp"

namespace stylegate {

// Identity stamped on every emitted artifact.
struct RunStamp {
    std::string run_id;
    std::uint64_t seed = 0;
    std::uint64_t config_fingerprint = 0;
};

namespace json_detail {

inline std::string quote(const std::string& s)
{
    std::string out = "\"";
    for (unsigned char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
            if (c < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\u%04x", c);
                out += buf;
            } else {
                out += static_cast<char>(c);
            }
        }
    }
    return out + "\"";
}

inline std::string fixed4(double v)
{
    if (!std::isfinite(v))
        throw Error("cannot serialize non-finite metric value");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    std::string s = buf;
    return s == "-0.0000" ? "0.0000" : s;
}

// Loss values span many magnitudes, so they keep significant digits instead.
inline std::string general(double v)
{
    if (!std::isfinite(v))
        throw Error("cannot serialize non-finite loss value");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

template <class Map, class Fmt>
std::string object(const Map& m, Fmt fmt, const std::string& indent)
{
    if (m.empty())
        return "{}";
    std::string out = "{\n";
    std::size_t i = 0;
    for (const auto& [k, v] : m)
        out += indent + "  " + quote(k) + ": " + fmt(v) + (++i < m.size() ? ",\n" : "\n");
    return out + indent + "}";
}

} // namespace json_detail

inline std::string report_to_json(const MetricsReport& r)
{
    using namespace json_detail;
    std::string out = "{\n";
    out += "  \"config_fingerprint\": " + quote(hex64(r.config_fingerprint)) + ",\n";
    out += "  \"metrics\": " + object(r.metrics, fixed4, "  ") + ",\n";
    out += "  \"run_id\": " + quote(r.run_id) + ",\n";
    out += "  \"seed\": " + std::to_string(r.seed) + ",\n";
    out += "  \"sizes\": " + object(r.sizes, [](std::int64_t v) { return std::to_string(v); }, "  ") + "\n";
    return out + "}\n";
}

// Accuracies use the fixed 4-decimal form; losses keep 9 significant digits.
inline std::string history_to_json(const TrainHistory& h, const RunStamp& s)
{
    using namespace json_detail;
    std::string out = "{\n";
    out += "  \"config_fingerprint\": " + quote(hex64(s.config_fingerprint)) + ",\n";
    out += "  \"epochs\": [";
    for (std::size_t i = 0; i < h.epochs.size(); ++i) {
        const auto& e = h.epochs[i];
        out += i ? ",\n" : "\n";
        out += "    {\n";
        out += "      \"accuracies\": " + object(e.accuracies, fixed4, "      ") + ",\n";
        out += "      \"epoch\": " + std::to_string(e.epoch) + ",\n";
        out += "      \"parts\": " + object(e.parts, general, "      ") + ",\n";
        out += "      \"total\": " + general(e.total) + "\n";
        out += "    }";
    }
    out += h.epochs.empty() ? "],\n" : "\n  ],\n";
    out += "  \"run_id\": " + quote(s.run_id) + ",\n";
    out += "  \"seed\": " + std::to_string(s.seed) + "\n";
    return out + "}\n";
}

inline void write_text_file(const std::string& text, const std::string& path)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("cannot open for writing: " + path);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f)
        throw IoError("write failed: " + path);
}

inline void write_report(const MetricsReport& r, const std::string& path) { write_text_file(report_to_json(r), path); }

inline void write_report(const TrainHistory& h, const RunStamp& stamp, const std::string& path)
{
    write_text_file(history_to_json(h, stamp), path);
}

} // namespace stylegate
