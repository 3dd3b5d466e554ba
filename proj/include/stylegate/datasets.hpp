#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <span>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stylegate/bytes.hpp"
#include "stylegate/error.hpp"
#include "stylegate/nets.hpp"
#include "stylegate/rng.hpp"
#include "stylegate/tensor.hpp"

namespace stylegate {

struct LabeledImage {
    ImageTensor pixels; // 1 x C x H x W
    std::uint32_t label = 0;
};

// Images are stored contiguously as one N x C x H x W tensor.
class Dataset {
public:
    Dataset() = default;
    Dataset(ImageShape shape, std::size_t class_count) : images_(0, shape), class_count_(class_count) {}
    Dataset(ImageTensor images, std::vector<std::uint32_t> labels, std::size_t class_count)
        : images_(std::move(images)), labels_(std::move(labels)), class_count_(class_count)
    {
        validate();
    }

    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }
    std::size_t class_count() const { return class_count_; }
    ImageShape shape() const { return images_.item_shape(); }
    const ImageTensor& images() const { return images_; }
    const std::vector<std::uint32_t>& labels() const { return labels_; }
    std::uint32_t label(std::size_t i) const { return labels_[i]; }
    std::span<const float> pixels(std::size_t i) const { return images_.item(i); }

    LabeledImage at(std::size_t i) const
    {
        LabeledImage item{ImageTensor(1, shape()), labels_.at(i)};
        std::copy(images_.item(i).begin(), images_.item(i).end(), item.pixels.data());
        return item;
    }

    void validate() const
    {
        if (images_.batch() != labels_.size())
            throw ShapeError("dataset has " + std::to_string(images_.batch()) + " images but " +
                             std::to_string(labels_.size()) + " labels");
        for (auto l : labels_)
            if (l >= class_count_)
                throw Error("label " + std::to_string(l) + " out of range for " + std::to_string(class_count_) +
                            " classes");
        for (float v : images_.values())
            if (!(v >= 0.0f && v <= 1.0f))
                throw Error("pixel value outside [0,1]");
    }

    // Rows `indices` gathered into a batch tensor.
    ImageTensor gather(std::span<const std::size_t> indices) const
    {
        ImageTensor out(indices.size(), shape());
        for (std::size_t b = 0; b < indices.size(); ++b) {
            auto src = images_.item(indices[b]);
            std::copy(src.begin(), src.end(), out.item(b).begin());
        }
        return out;
    }

    std::vector<std::uint32_t> gather_labels(std::span<const std::size_t> indices) const
    {
        std::vector<std::uint32_t> out;
        out.reserve(indices.size());
        for (auto i : indices)
            out.push_back(labels_[i]);
        return out;
    }

    Dataset subset(std::span<const std::size_t> indices) const
    {
        return Dataset(gather(indices), gather_labels(indices), class_count_);
    }

    Dataset head(std::size_t n) const
    {
        std::vector<std::size_t> idx(std::min(n, size()));
        for (std::size_t i = 0; i < idx.size(); ++i)
            idx[i] = i;
        return subset(idx);
    }

    bool operator==(const Dataset&) const = default;

private:
    ImageTensor images_;
    std::vector<std::uint32_t> labels_;
    std::size_t class_count_ = 0;
};

// ------------------------------------------------------------------- IDX I/O

constexpr std::uint32_t idx_images_magic = 0x00000803;
constexpr std::uint32_t idx_labels_magic = 0x00000801;

// class_count 0 infers max(label) + 1 (at least 2).
inline Dataset decode_idx(const std::vector<unsigned char>& image_bytes, const std::vector<unsigned char>& label_bytes,
                          std::size_t class_count = 0, const std::string& origin = "idx")
{
    detail::ByteReader img(image_bytes, origin + " images");
    if (img.u32_be() != idx_images_magic)
        throw FormatError(origin + " images: bad magic");
    const std::uint32_t n = img.u32_be(), rows = img.u32_be(), cols = img.u32_be();

    detail::ByteReader lab(label_bytes, origin + " labels");
    if (lab.u32_be() != idx_labels_magic)
        throw FormatError(origin + " labels: bad magic");
    const std::uint32_t n_labels = lab.u32_be();
    if (n_labels != n)
        throw FormatError(origin + ": count mismatch (" + std::to_string(n) + " images, " + std::to_string(n_labels) +
                          " labels)");

    const std::size_t plane = static_cast<std::size_t>(rows) * cols;
    const unsigned char* px = img.take(static_cast<std::size_t>(n) * plane);
    const unsigned char* lb = lab.take(n);

    std::vector<std::uint32_t> labels(lb, lb + n);
    if (class_count == 0) {
        std::uint32_t mx = 1;
        for (auto l : labels)
            mx = std::max(mx, l);
        class_count = mx + 1;
    }
    ImageTensor images(n, 1, rows, cols);
    for (std::size_t i = 0; i < images.size(); ++i)
        images[i] = static_cast<float>(px[i]) / 255.0f;
    return Dataset(std::move(images), std::move(labels), class_count);
}

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path, std::size_t class_count = 0)
{
    auto images = detail::read_file(images_path);
    return decode_idx(images, detail::read_file(labels_path), class_count, images_path);
}

inline std::uint8_t quantize_pixel(float v)
{
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

// Single-channel datasets only (the IDX image layout has no channel axis).
inline std::pair<std::vector<unsigned char>, std::vector<unsigned char>> encode_idx(const Dataset& data)
{
    if (data.shape().channels != 1)
        throw ShapeError("IDX export needs single-channel images, got " + data.shape().str());
    detail::ByteWriter img, lab;
    img.u32_be(idx_images_magic);
    img.u32_be(static_cast<std::uint32_t>(data.size()));
    img.u32_be(static_cast<std::uint32_t>(data.shape().height));
    img.u32_be(static_cast<std::uint32_t>(data.shape().width));
    for (float v : data.images().values())
        img.u8(quantize_pixel(v));
    lab.u32_be(idx_labels_magic);
    lab.u32_be(static_cast<std::uint32_t>(data.size()));
    for (auto l : data.labels())
        lab.u8(static_cast<std::uint8_t>(l));
    return {img.bytes(), lab.bytes()};
}

inline void write_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path)
{
    auto [img, lab] = encode_idx(data);
    detail::write_file(images_path, img);
    detail::write_file(labels_path, lab);
}

// --------------------------------------------------------- synthetic corpus

namespace glyphs {

// Membership test in glyph-local coordinates (u, v) in [-1, 1]^2.
using Mask = bool (*)(double u, double v);

inline const std::vector<std::pair<const char*, Mask>>& families()
{
    static const std::vector<std::pair<const char*, Mask>> f = {
        {"disk", [](double u, double v) { return u * u + v * v <= 1.0; }},
        {"cross",
         [](double u, double v) {
             return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) || (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
         }},
        {"square",
         [](double u, double v) {
             const double m = std::max(std::abs(u), std::abs(v));
             return m <= 1.0 && m >= 0.55;
         }},
        {"hbars",
         [](double u, double v) {
             return std::abs(u) <= 1.0 && std::abs(v) <= 1.0 && static_cast<int>(std::floor((v + 1.0) * 2.0)) % 2 == 0;
         }},
        {"vbars",
         [](double u, double v) {
             return std::abs(u) <= 1.0 && std::abs(v) <= 1.0 && static_cast<int>(std::floor((u + 1.0) * 2.0)) % 2 == 0;
         }},
        {"xshape",
         [](double u, double v) {
             return std::abs(u) <= 1.0 && std::abs(v) <= 1.0 && (std::abs(u - v) <= 0.4 || std::abs(u + v) <= 0.4);
         }},
        {"ring",
         [](double u, double v) {
             const double r = std::sqrt(u * u + v * v);
             return r <= 1.0 && r >= 0.55;
         }},
        {"triangle", [](double u, double v) { return v <= 1.0 && v >= -1.0 && std::abs(u) <= (v + 1.0) * 0.5; }},
    };
    return f;
}

} // namespace glyphs

inline std::size_t glyph_family_count() { return glyphs::families().size(); }

// One glyph family per class, drawn at a random centre/size/intensity over
// low-amplitude uniform noise. Items are emitted class-interleaved.
inline Dataset generate_synthetic(std::uint64_t seed, std::size_t n_per_class, std::size_t classes, ImageShape shape)
{
    if (classes < 2)
        throw Error("synthetic corpus needs at least 2 classes");
    if (classes > glyph_family_count())
        throw Error("synthetic corpus: " + std::to_string(classes) + " classes requested but only " +
                    std::to_string(glyph_family_count()) + " glyph families exist");
    if (shape.height < 8 || shape.width < 8 || shape.channels < 1)
        throw ShapeError("synthetic corpus shape must be at least (1,8,8), got " + shape.str());

    const std::size_t n = n_per_class * classes;
    ImageTensor images(n, shape);
    std::vector<std::uint32_t> labels(n);
    Rng rng(derive_seed(seed, "synthetic"));
    const double h = static_cast<double>(shape.height), w = static_cast<double>(shape.width);
    const double extent = std::min(h, w);

    for (std::size_t i = 0; i < n; ++i) {
        const auto cls = static_cast<std::uint32_t>(i % classes);
        labels[i] = cls;
        const auto mask = glyphs::families()[cls].second;
        const double radius = extent * rng.uniform(0.28, 0.42);
        const double cx = rng.uniform(radius, w - radius);
        const double cy = rng.uniform(radius, h - radius);
        const double intensity = rng.uniform(0.7, 1.0);
        std::vector<double> tint(shape.channels, 1.0);
        if (shape.channels > 1)
            for (double& t : tint)
                t = rng.uniform(0.6, 1.0);
        for (std::size_t c = 0; c < shape.channels; ++c)
            for (std::size_t y = 0; y < shape.height; ++y)
                for (std::size_t x = 0; x < shape.width; ++x) {
                    const double noise = rng.uniform(0.0, 0.15);
                    const double u = (static_cast<double>(x) + 0.5 - cx) / radius;
                    const double v = (static_cast<double>(y) + 0.5 - cy) / radius;
                    const double ink = mask(u, v) ? intensity * tint[c] : 0.0;
                    images(i, c, y, x) = static_cast<float>(std::clamp(std::max(noise, ink), 0.0, 1.0));
                }
    }
    return Dataset(std::move(images), std::move(labels), classes);
}

// Order-sensitive FNV-1a over labels and raw pixel bits.
inline std::uint64_t dataset_checksum(const Dataset& d)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    for (auto l : d.labels())
        mix(l);
    for (float v : d.images().values())
        mix(std::bit_cast<std::uint32_t>(v));
    return h;
}

template <typename T>
std::uint64_t tensor_checksum(const Tensor<T>& t)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (T v : t.values()) {
        const float f = static_cast<float>(v);
        const auto bits = std::bit_cast<std::uint32_t>(f);
        for (int i = 0; i < 4; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

// -------------------------------------------------------------- style source

inline const std::vector<std::string>& style_pattern_names()
{
    static const std::vector<std::string> names{"waves", "checker", "blobs", "noise"};
    return names;
}

// Procedural style-source textures, one per entry of style_pattern_names().
inline ImageTensor make_style_source(const std::string& pattern, ImageShape shape, std::uint64_t seed)
{
    ImageTensor img(1, shape);
    Rng rng(derive_seed(seed, "style-source:" + pattern));
    const std::size_t C = shape.channels, H = shape.height, W = shape.width;
    constexpr double two_pi = 6.283185307179586;

    if (pattern == "waves") {
        struct Wave { double fx, fy, phase; };
        std::vector<Wave> waves;
        for (int k = 0; k < 3; ++k) {
            const double angle = rng.uniform(0.0, two_pi);
            const double period = rng.uniform(2.5, 4.5);
            waves.push_back({std::cos(angle) / period, std::sin(angle) / period, rng.uniform(0.0, two_pi)});
        }
        for (std::size_t c = 0; c < C; ++c) {
            const double shift = rng.uniform(0.0, two_pi);
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    double s = 0.0;
                    for (const auto& wv : waves)
                        s += std::sin(two_pi * (wv.fx * x + wv.fy * y) + wv.phase + shift);
                    img(0, c, y, x) = static_cast<float>(0.5 + 0.5 * std::tanh(1.5 * s));
                }
        }
    } else if (pattern == "checker") {
        const std::size_t cell = 2 + rng.below(2);
        for (std::size_t c = 0; c < C; ++c) {
            const double hi = rng.uniform(0.75, 1.0), lo = rng.uniform(0.0, 0.25);
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x)
                    img(0, c, y, x) = static_cast<float>(((x / cell + y / cell) % 2 == 0) ? hi : lo);
        }
    } else if (pattern == "blobs") {
        struct Blob { double x, y, r, a; };
        std::vector<Blob> blobs;
        const std::size_t count = std::max<std::size_t>(4, H * W / 48);
        for (std::size_t k = 0; k < count; ++k)
            blobs.push_back({rng.uniform(0.0, double(W)), rng.uniform(0.0, double(H)), rng.uniform(2.0, 6.0),
                             rng.uniform(-1.0, 1.0)});
        for (std::size_t c = 0; c < C; ++c) {
            const double gain = rng.uniform(0.8, 1.2);
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    double s = 0.0;
                    for (const auto& b : blobs) {
                        const double dx = x - b.x, dy = y - b.y;
                        s += b.a * std::exp(-(dx * dx + dy * dy) / (2.0 * b.r * b.r));
                    }
                    img(0, c, y, x) = static_cast<float>(0.5 + 0.5 * std::tanh(2.0 * gain * s));
                }
        }
    } else if (pattern == "noise") {
        for (float& v : img.values())
            v = static_cast<float>(rng.uniform());
    } else {
        throw Error("unknown style pattern '" + pattern + "' (expected waves, checker, blobs or noise)");
    }
    return img;
}

// Binary netpbm (P5 grey / P6 RGB, maxval <= 255) to a 1 x C x H x W tensor in [0,1].
inline ImageTensor decode_netpbm(const std::vector<unsigned char>& bytes, const std::string& origin = "image")
{
    std::size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_uint = [&]() -> std::size_t {
        skip_ws();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
            throw FormatError(origin + ": malformed netpbm header");
        std::size_t v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos]))
            v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw FormatError(origin + ": bad magic (expected binary PGM P5 or PPM P6)");
    const std::size_t channels = bytes[1] == '5' ? 1 : 3;
    pos = 2;
    const std::size_t w = read_uint(), h = read_uint(), maxval = read_uint();
    if (maxval == 0 || maxval > 255)
        throw FormatError(origin + ": unsupported maxval " + std::to_string(maxval));
    ++pos; // single whitespace before raster
    if (bytes.size() < pos + w * h * channels)
        throw FormatError(origin + ": truncated raster");
    ImageTensor img(1, channels, h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < channels; ++c)
                img(0, c, y, x) = static_cast<float>(bytes[pos + (y * w + x) * channels + c]) / static_cast<float>(maxval);
    return img;
}

inline std::vector<unsigned char> encode_netpbm(const ImageTensor& img, std::size_t index = 0)
{
    const std::size_t c = img.channels();
    if (c != 1 && c != 3)
        throw ShapeError("netpbm export needs 1 or 3 channels");
    const std::string header =
        std::string(c == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x)
            for (std::size_t ch = 0; ch < c; ++ch)
                out.push_back(quantize_pixel(img(index, ch, y, x)));
    return out;
}

// Converts between grey and RGB by averaging / replicating channels.
inline ImageTensor match_channels(const ImageTensor& img, std::size_t channels)
{
    if (img.channels() == channels)
        return img;
    ImageTensor out(img.batch(), channels, img.height(), img.width());
    for (std::size_t n = 0; n < img.batch(); ++n)
        for (std::size_t y = 0; y < img.height(); ++y)
            for (std::size_t x = 0; x < img.width(); ++x) {
                float mean = 0.0f;
                for (std::size_t c = 0; c < img.channels(); ++c)
                    mean += img(n, c, y, x);
                mean /= static_cast<float>(img.channels());
                for (std::size_t c = 0; c < channels; ++c)
                    out(n, c, y, x) = img.channels() == 1 ? img(n, 0, y, x) : mean;
            }
    return out;
}

inline ImageTensor load_style_image(const std::string& path, std::size_t channels)
{
    return match_channels(decode_netpbm(detail::read_file(path), path), channels);
}

struct StylePatchSet {
    ImageTensor patches; // n x C x H x W
    std::string source_id;

    std::size_t size() const { return patches.batch(); }
};

// Seeded random crops of the style source, each optionally mirrored horizontally.
inline StylePatchSet make_style_patches(const ImageTensor& style_image, ImageShape shape, std::size_t count,
                                        std::uint64_t seed, bool flips = true, std::string source_id = "style")
{
    if (style_image.batch() != 1)
        throw ShapeError("style source must be a single image");
    if (style_image.channels() != shape.channels)
        throw ShapeError("style source has " + std::to_string(style_image.channels()) + " channels, corpus has " +
                         std::to_string(shape.channels));
    if (style_image.height() < shape.height || style_image.width() < shape.width)
        throw ShapeError("style image " + style_image.shape_str() + " smaller than requested patch shape " + shape.str());
    if (count == 0)
        throw Error("style patch set must be non-empty");

    StylePatchSet set{ImageTensor(count, shape), std::move(source_id)};
    Rng rng(derive_seed(seed, "style-patches"));
    const std::size_t max_y = style_image.height() - shape.height, max_x = style_image.width() - shape.width;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t oy = rng.below(max_y + 1), ox = rng.below(max_x + 1);
        const bool flip = flips && rng.coin();
        for (std::size_t c = 0; c < shape.channels; ++c)
            for (std::size_t y = 0; y < shape.height; ++y)
                for (std::size_t x = 0; x < shape.width; ++x) {
                    const std::size_t sx = flip ? shape.width - 1 - x : x;
                    set.patches(i, c, y, x) = style_image(0, c, oy + y, ox + sx);
                }
    }
    return set;
}

// ---------------------------------------------------------------- stylize

// Runs the generator over the dataset in chunks; outputs clamped to [0,1].
inline Dataset stylize_dataset(const Dataset& data, const NetworkCheckpoint& generator, std::size_t chunk = 256)
{
    if (generator.kind != NetworkKind::generator)
        throw Error("stylize_dataset: checkpoint is a " + to_string(generator.kind) + ", not a generator");
    check_input(generator, data.shape());
    const Params p = Params::from(generator);
    ImageTensor out(data.size(), data.shape());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        const std::size_t end = std::min(data.size(), start + chunk);
        idx.clear();
        for (std::size_t i = start; i < end; ++i)
            idx.push_back(i);
        const auto y = run_generator(p, data.gather(idx).cast<double>()).output;
        for (std::size_t k = 0; k < y.size(); ++k)
            out[start * data.shape().size() + k] = std::clamp(static_cast<float>(y[k]), 0.0f, 1.0f);
    }
    return Dataset(std::move(out), data.labels(), data.class_count());
}

// ------------------------------------------------------------------ batching

// Index batches for one epoch: seeded shuffle, short final batch kept.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                           std::uint64_t epoch)
{
    if (batch_size == 0)
        throw Error("batch size must be at least 1");
    const auto order = shuffled_indices(n, derive_seed(seed, "batch-order", epoch));
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
    return batches;
}

struct TripletBatch {
    ImageTensor style;
    ImageTensor original;
    ImageTensor licensed;
    std::vector<std::uint32_t> labels;
    std::vector<std::size_t> indices; // source rows of original/licensed

    std::size_t size() const { return labels.size(); }
};

// Single-consumer stream of aligned (style, original, licensed) batches for
// one epoch. Style patches are drawn with replacement from an RNG stream that
// is independent of the index shuffle.
class TripletStream {
public:
    TripletStream(const Dataset& original, const Dataset& licensed, const StylePatchSet& style, std::size_t batch_size,
                  std::uint64_t seed, std::uint64_t epoch = 0)
        : original_(&original), licensed_(&licensed), style_(&style),
          style_rng_(derive_seed(seed, "style-draw", epoch))
    {
        check_alignment(original, licensed);
        if (style.size() == 0)
            throw Error("triplet stream: empty style patch set");
        if (style.patches.item_shape() != original.shape())
            throw ShapeError("triplet stream: style patch shape " + style.patches.item_shape().str() +
                             " differs from corpus shape " + original.shape().str());
        batches_ = epoch_batches(original.size(), batch_size, seed, epoch);
    }

    static void check_alignment(const Dataset& original, const Dataset& licensed)
    {
        if (original.size() != licensed.size())
            throw Error("misaligned datasets: " + std::to_string(original.size()) + " originals vs " +
                        std::to_string(licensed.size()) + " licensed");
        if (original.shape() != licensed.shape())
            throw ShapeError("misaligned datasets: shapes " + original.shape().str() + " vs " + licensed.shape().str());
        for (std::size_t i = 0; i < original.size(); ++i)
            if (original.label(i) != licensed.label(i))
                throw Error("misaligned datasets: label mismatch at index " + std::to_string(i));
    }

    std::size_t batch_count() const { return batches_.size(); }

    std::optional<TripletBatch> next()
    {
        if (cursor_ >= batches_.size())
            return std::nullopt;
        const auto& idx = batches_[cursor_++];
        TripletBatch b;
        b.indices = idx;
        b.original = original_->gather(idx);
        b.licensed = licensed_->gather(idx);
        b.labels = original_->gather_labels(idx);
        std::vector<std::size_t> style_idx(idx.size());
        for (auto& s : style_idx)
            s = static_cast<std::size_t>(style_rng_.below(style_->size()));
        b.style = ImageTensor(idx.size(), style_->patches.item_shape());
        for (std::size_t k = 0; k < style_idx.size(); ++k) {
            auto src = style_->patches.item(style_idx[k]);
            std::copy(src.begin(), src.end(), b.style.item(k).begin());
        }
        return b;
    }

private:
    const Dataset* original_;
    const Dataset* licensed_;
    const StylePatchSet* style_;
    Rng style_rng_;
    std::vector<std::vector<std::size_t>> batches_;
    std::size_t cursor_ = 0;
};

inline TripletStream make_triplet_batches(const Dataset& original, const Dataset& licensed, const StylePatchSet& style,
                                          std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch = 0)
{
    return TripletStream(original, licensed, style, batch_size, seed, epoch);
}

} // namespace stylegate
