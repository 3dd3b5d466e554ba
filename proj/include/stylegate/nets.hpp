#pragma once

// The three fixed desk-scale architectures.
//
//   classifier / featurenet (same layout, independent weights):
//     conv1 C->16 s1 +ReLU   (tap 0: 16 x H  x W )
//     conv2 16->32 s2 +ReLU  (tap 1: 32 x H2 x W2, H2 = ceil(H/2))
//     conv3 32->64 s2 +ReLU  (tap 2: 64 x H4 x W4, H4 = ceil(H2/2))
//     global average pool    (feature: 64)
//     fc 64->K               (logits)
//
//   generator:
//     conv_in C->16 +ReLU, two residual blocks x + conv_b(relu(conv_a(x))),
//     conv_out 16->C, sigmoid.
//
// Parameters live in NetworkCheckpoint as f32; all arithmetic runs on an f64
// copy (Params).

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stylegate/error.hpp"
#include "stylegate/layers.hpp"
#include "stylegate/rng.hpp"
#include "stylegate/tensor.hpp"

namespace stylegate {

enum class NetworkKind : std::uint8_t {
    classifier = 1,
    generator = 2,
    featurenet = 3,
};

inline std::string to_string(NetworkKind k)
{
    switch (k) {
    case NetworkKind::classifier: return "classifier";
    case NetworkKind::generator: return "generator";
    case NetworkKind::featurenet: return "featurenet";
    }
    return "unknown(" + std::to_string(static_cast<int>(k)) + ")";
}

inline NetworkKind network_kind_from_tag(std::uint8_t tag)
{
    if (tag < 1 || tag > 3)
        throw Error("unknown network kind tag " + std::to_string(tag));
    return static_cast<NetworkKind>(tag);
}

inline NetworkKind network_kind_from_string(const std::string& s)
{
    if (s == "classifier")
        return NetworkKind::classifier;
    if (s == "generator")
        return NetworkKind::generator;
    if (s == "featurenet")
        return NetworkKind::featurenet;
    throw Error("unknown network kind '" + s + "'");
}

struct NamedTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t element_count() const
    {
        std::size_t n = 1;
        for (auto d : dims)
            n *= d;
        return n;
    }
    bool operator==(const NamedTensor&) const = default;
};

struct NetworkCheckpoint {
    static constexpr std::uint32_t format_version = 1;

    std::uint32_t version = format_version;
    NetworkKind kind = NetworkKind::classifier;
    std::vector<NamedTensor> tensors;
    std::uint64_t training_seed = 0;
    std::uint64_t config_fingerprint = 0;

    bool empty() const { return tensors.empty(); }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto& t : tensors)
            n += t.data.size();
        return n;
    }

    const NamedTensor& tensor(const std::string& name) const
    {
        for (const auto& t : tensors)
            if (t.name == name)
                return t;
        throw Error("checkpoint has no tensor '" + name + "'");
    }

    bool operator==(const NetworkCheckpoint&) const = default;
};

constexpr std::size_t feature_dim = 64;
constexpr std::size_t tap_count = 3;
constexpr std::size_t generator_width = 16;

namespace arch {

struct TensorSpec {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::size_t fan_in = 0; // 0 for biases
    double gain = 1.0;
};

inline std::vector<TensorSpec> conv_specs(const std::string& prefix, std::size_t in, std::size_t out, double gain)
{
    const auto i = static_cast<std::uint32_t>(in), o = static_cast<std::uint32_t>(out);
    return {{prefix + ".weight", {o, i, 3, 3}, in * 9, gain}, {prefix + ".bias", {o}, 0, 0.0}};
}

// Gain 2 for layers followed by ReLU (He), 1 otherwise.
inline std::vector<TensorSpec> layout(NetworkKind kind, std::size_t channels, std::size_t classes)
{
    std::vector<TensorSpec> specs;
    auto append = [&](std::vector<TensorSpec> s) { specs.insert(specs.end(), s.begin(), s.end()); };
    if (kind == NetworkKind::generator) {
        const std::size_t w = generator_width;
        append(conv_specs("conv_in", channels, w, 2.0));
        append(conv_specs("res1.conv_a", w, w, 2.0));
        append(conv_specs("res1.conv_b", w, w, 1.0));
        append(conv_specs("res2.conv_a", w, w, 2.0));
        append(conv_specs("res2.conv_b", w, w, 1.0));
        append(conv_specs("conv_out", w, channels, 1.0));
    } else {
        append(conv_specs("conv1", channels, 16, 2.0));
        append(conv_specs("conv2", 16, 32, 2.0));
        append(conv_specs("conv3", 32, 64, 2.0));
        const auto k = static_cast<std::uint32_t>(classes);
        specs.push_back({"fc.weight", {k, static_cast<std::uint32_t>(feature_dim)}, feature_dim, 1.0});
        specs.push_back({"fc.bias", {k}, 0, 0.0});
    }
    return specs;
}

inline std::size_t expected_tensor_count(NetworkKind kind) { return kind == NetworkKind::generator ? 12 : 8; }

enum ClassifierIndex : std::size_t { c1w, c1b, c2w, c2b, c3w, c3b, fcw, fcb };
enum GeneratorIndex : std::size_t { g_in_w, g_in_b, r1a_w, r1a_b, r1b_w, r1b_b, r2a_w, r2a_b, r2b_w, r2b_b, g_out_w, g_out_b };

inline layers::Conv3x3 conv1_geom(std::size_t c) { return {c, 16, 1}; }
inline const layers::Conv3x3 conv2_geom{16, 32, 2};
inline const layers::Conv3x3 conv3_geom{32, 64, 2};

} // namespace arch

inline std::size_t input_channels(const NetworkCheckpoint& ckpt)
{
    if (ckpt.tensors.empty() || ckpt.tensors.front().dims.size() != 4)
        throw ShapeError("checkpoint has no leading convolution");
    return ckpt.tensors.front().dims[1];
}

inline std::size_t class_count(const NetworkCheckpoint& ckpt)
{
    if (ckpt.kind == NetworkKind::generator)
        throw Error("generator checkpoints have no class count");
    return ckpt.tensors.back().dims.at(0);
}

// Throws unless names, order and shapes match the architecture for this kind.
inline void validate_architecture(const NetworkCheckpoint& ckpt)
{
    if (ckpt.tensors.size() != arch::expected_tensor_count(ckpt.kind))
        throw ShapeError("tensor count mismatch for " + to_string(ckpt.kind) + ": expected " +
                         std::to_string(arch::expected_tensor_count(ckpt.kind)) + ", got " +
                         std::to_string(ckpt.tensors.size()));
    const std::size_t c = input_channels(ckpt);
    const std::size_t k = ckpt.kind == NetworkKind::generator ? 0 : ckpt.tensors.back().dims.at(0);
    const auto specs = arch::layout(ckpt.kind, c, k);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& t = ckpt.tensors[i];
        if (t.name != specs[i].name || t.dims != specs[i].dims || t.data.size() != t.element_count())
            throw ShapeError("tensor '" + t.name + "' does not match " + to_string(ckpt.kind) + " layout (expected '" +
                             specs[i].name + "')");
    }
}

// Closed-form parameter count of the architecture.
inline std::size_t architecture_parameter_count(NetworkKind kind, std::size_t channels, std::size_t classes)
{
    const auto conv = [](std::size_t in, std::size_t out) { return out * in * 9 + out; };
    if (kind == NetworkKind::generator) {
        const std::size_t w = generator_width;
        return conv(channels, w) + 4 * conv(w, w) + conv(w, channels);
    }
    return conv(channels, 16) + conv(16, 32) + conv(32, 64) + feature_dim * classes + classes;
}

inline NetworkCheckpoint init_network(NetworkKind kind, ImageShape shape, std::size_t classes, std::uint64_t seed)
{
    if (kind != NetworkKind::classifier && kind != NetworkKind::generator && kind != NetworkKind::featurenet)
        throw Error("unknown network kind tag " + std::to_string(static_cast<int>(kind)));
    if (shape.channels == 0 || shape.height == 0 || shape.width == 0)
        throw ShapeError("invalid input shape " + shape.str());
    if (kind != NetworkKind::generator && classes < 2)
        throw Error("classifier needs at least 2 classes");

    NetworkCheckpoint ckpt;
    ckpt.kind = kind;
    ckpt.training_seed = seed;
    Rng rng(derive_seed(seed, "init", static_cast<std::uint64_t>(kind)));
    for (const auto& spec : arch::layout(kind, shape.channels, classes)) {
        NamedTensor t{spec.name, spec.dims, {}};
        t.data.assign(t.element_count(), 0.0f);
        if (spec.fan_in > 0) {
            const double bound = std::sqrt(3.0 * spec.gain / static_cast<double>(spec.fan_in));
            for (float& v : t.data)
                v = static_cast<float>(rng.uniform(-bound, bound));
        }
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

// f64 working copy of (or gradient for) a checkpoint's parameters, same order.
struct Params {
    std::vector<std::vector<double>> tensors;

    static Params from(const NetworkCheckpoint& ckpt)
    {
        Params p;
        p.tensors.reserve(ckpt.tensors.size());
        for (const auto& t : ckpt.tensors)
            p.tensors.emplace_back(t.data.begin(), t.data.end());
        return p;
    }

    static Params zeros_like(const NetworkCheckpoint& ckpt)
    {
        Params p;
        for (const auto& t : ckpt.tensors)
            p.tensors.emplace_back(t.data.size(), 0.0);
        return p;
    }

    void set_zero()
    {
        for (auto& t : tensors)
            std::fill(t.begin(), t.end(), 0.0);
    }

    std::span<const double> operator[](std::size_t i) const { return tensors[i]; }
    std::span<double> operator[](std::size_t i) { return tensors[i]; }

    std::size_t scalar_count() const
    {
        std::size_t n = 0;
        for (const auto& t : tensors)
            n += t.size();
        return n;
    }
};

// ---------------------------------------------------------------- classifier

struct ClassifierTrace {
    Activation input;
    std::array<Activation, tap_count> taps; // post-ReLU conv outputs
    Activation feature;                     // B x 64 x 1 x 1
    Activation logits;                      // B x K x 1 x 1
};

// Upstream gradients; null entries contribute nothing.
struct ClassifierUpstream {
    const Activation* d_logits = nullptr;
    const Activation* d_feature = nullptr;
    std::array<const Activation*, tap_count> d_taps{};
};

// with_head=false stops after the taps (feature net usage).
inline ClassifierTrace run_classifier(const Params& p, Activation x, bool with_head = true)
{
    using namespace arch;
    ClassifierTrace t;
    t.input = std::move(x);
    const std::size_t c = p[c1w].size() / (16 * 9);
    t.taps[0] = layers::conv_forward(t.input, p[c1w], p[c1b], conv1_geom(c));
    layers::relu_inplace(t.taps[0]);
    t.taps[1] = layers::conv_forward(t.taps[0], p[c2w], p[c2b], conv2_geom);
    layers::relu_inplace(t.taps[1]);
    t.taps[2] = layers::conv_forward(t.taps[1], p[c3w], p[c3b], conv3_geom);
    layers::relu_inplace(t.taps[2]);
    if (with_head) {
        t.feature = layers::global_avg_pool(t.taps[2]);
        t.logits = layers::linear_forward(t.feature, p[fcw], p[fcb], p[fcb].size());
    }
    return t;
}

// Accumulates parameter gradients into d_params (if non-null) and writes the
// input gradient into d_input (if non-null).
inline void backprop_classifier(const Params& p, const ClassifierTrace& t, const ClassifierUpstream& up,
                                Params* d_params, Activation* d_input)
{
    using namespace arch;
    auto grad = [&](std::size_t i) -> std::span<double> {
        return d_params ? (*d_params)[i] : std::span<double>{};
    };

    Activation d3(t.taps[2].batch(), t.taps[2].channels(), t.taps[2].height(), t.taps[2].width());
    if (up.d_logits || up.d_feature) {
        Activation d_feat;
        if (up.d_logits) {
            layers::linear_backward(t.feature, p[fcw], *up.d_logits, grad(fcw), grad(fcb), &d_feat);
            if (up.d_feature)
                layers::add_inplace(d_feat, *up.d_feature);
        } else {
            d_feat = *up.d_feature;
        }
        layers::global_avg_pool_backward(d_feat, d3);
    }
    if (up.d_taps[2])
        layers::add_inplace(d3, *up.d_taps[2]);
    layers::relu_backward_inplace(t.taps[2], d3);

    Activation d2;
    layers::conv_backward(t.taps[1], p[c3w], conv3_geom, d3, grad(c3w), grad(c3b), &d2);
    if (up.d_taps[1])
        layers::add_inplace(d2, *up.d_taps[1]);
    layers::relu_backward_inplace(t.taps[1], d2);

    Activation d1;
    layers::conv_backward(t.taps[0], p[c2w], conv2_geom, d2, grad(c2w), grad(c2b), &d1);
    if (up.d_taps[0])
        layers::add_inplace(d1, *up.d_taps[0]);
    layers::relu_backward_inplace(t.taps[0], d1);

    const std::size_t c = p[c1w].size() / (16 * 9);
    layers::conv_backward(t.input, p[c1w], conv1_geom(c), d1, grad(c1w), grad(c1b), d_input);
}

// ----------------------------------------------------------------- generator

struct GeneratorTrace {
    Activation input;
    Activation h0;       // relu(conv_in(x))
    Activation r1, h1;   // r1 = relu(res1.conv_a(h0)); h1 = h0 + res1.conv_b(r1)
    Activation r2, h2;
    Activation output;   // sigmoid(conv_out(h2))
};

inline GeneratorTrace run_generator(const Params& p, Activation x)
{
    using namespace arch;
    const std::size_t c = p[g_in_w].size() / (generator_width * 9);
    const layers::Conv3x3 in_g{c, generator_width, 1}, mid_g{generator_width, generator_width, 1},
        out_g{generator_width, c, 1};
    GeneratorTrace t;
    t.input = std::move(x);
    t.h0 = layers::conv_forward(t.input, p[g_in_w], p[g_in_b], in_g);
    layers::relu_inplace(t.h0);

    t.r1 = layers::conv_forward(t.h0, p[r1a_w], p[r1a_b], mid_g);
    layers::relu_inplace(t.r1);
    t.h1 = layers::conv_forward(t.r1, p[r1b_w], p[r1b_b], mid_g);
    layers::add_inplace(t.h1, t.h0);

    t.r2 = layers::conv_forward(t.h1, p[r2a_w], p[r2a_b], mid_g);
    layers::relu_inplace(t.r2);
    t.h2 = layers::conv_forward(t.r2, p[r2b_w], p[r2b_b], mid_g);
    layers::add_inplace(t.h2, t.h1);

    t.output = layers::conv_forward(t.h2, p[g_out_w], p[g_out_b], out_g);
    for (double& v : t.output.values())
        v = layers::sigmoid(v);
    return t;
}

inline void backprop_generator(const Params& p, const GeneratorTrace& t, const Activation& d_output,
                               Params* d_params, Activation* d_input)
{
    using namespace arch;
    require_same_shape(d_output, t.output, "generator backward");
    auto grad = [&](std::size_t i) -> std::span<double> {
        return d_params ? (*d_params)[i] : std::span<double>{};
    };
    const std::size_t c = p[g_in_w].size() / (generator_width * 9);
    const layers::Conv3x3 in_g{c, generator_width, 1}, mid_g{generator_width, generator_width, 1},
        out_g{generator_width, c, 1};

    Activation dz = d_output;
    for (std::size_t i = 0; i < dz.size(); ++i)
        dz[i] *= t.output[i] * (1.0 - t.output[i]);

    Activation d_h2;
    layers::conv_backward(t.h2, p[g_out_w], out_g, dz, grad(g_out_w), grad(g_out_b), &d_h2);

    // h2 = h1 + conv_b(r2)
    Activation d_r2;
    layers::conv_backward(t.r2, p[r2b_w], mid_g, d_h2, grad(r2b_w), grad(r2b_b), &d_r2);
    layers::relu_backward_inplace(t.r2, d_r2);
    Activation d_h1;
    layers::conv_backward(t.h1, p[r2a_w], mid_g, d_r2, grad(r2a_w), grad(r2a_b), &d_h1);
    layers::add_inplace(d_h1, d_h2);

    Activation d_r1;
    layers::conv_backward(t.r1, p[r1b_w], mid_g, d_h1, grad(r1b_w), grad(r1b_b), &d_r1);
    layers::relu_backward_inplace(t.r1, d_r1);
    Activation d_h0;
    layers::conv_backward(t.h0, p[r1a_w], mid_g, d_r1, grad(r1a_w), grad(r1a_b), &d_h0);
    layers::add_inplace(d_h0, d_h1);
    layers::relu_backward_inplace(t.h0, d_h0);

    layers::conv_backward(t.input, p[g_in_w], in_g, d_h0, grad(g_in_w), grad(g_in_b), d_input);
}

// ------------------------------------------------------------ public forward

inline void check_input(const NetworkCheckpoint& ckpt, ImageShape shape)
{
    validate_architecture(ckpt);
    if (input_channels(ckpt) != shape.channels)
        throw ShapeError(to_string(ckpt.kind) + " expects " + std::to_string(input_channels(ckpt)) +
                         " input channels, got shape " + shape.str());
    if (shape.height == 0 || shape.width == 0)
        throw ShapeError("empty spatial extent " + shape.str());
}

struct ClassifierOutput {
    Activation logits;  // B x K
    Activation feature; // B x 64
    std::array<Activation, tap_count> taps;
};

inline ClassifierOutput classifier_forward(const NetworkCheckpoint& ckpt, const ImageTensor& x)
{
    if (ckpt.kind == NetworkKind::generator)
        throw Error("classifier_forward: got a generator checkpoint");
    check_input(ckpt, x.item_shape());
    auto t = run_classifier(Params::from(ckpt), x.cast<double>());
    return {std::move(t.logits), std::move(t.feature), std::move(t.taps)};
}

inline ImageTensor generator_forward(const NetworkCheckpoint& ckpt, const ImageTensor& x)
{
    if (ckpt.kind != NetworkKind::generator)
        throw Error("generator_forward: got a " + to_string(ckpt.kind) + " checkpoint");
    check_input(ckpt, x.item_shape());
    return run_generator(Params::from(ckpt), x.cast<double>()).output.cast<float>();
}

inline std::array<Activation, tap_count> featurenet_forward(const NetworkCheckpoint& ckpt, const ImageTensor& x)
{
    if (ckpt.kind == NetworkKind::generator)
        throw Error("featurenet_forward: got a generator checkpoint");
    check_input(ckpt, x.item_shape());
    return run_classifier(Params::from(ckpt), x.cast<double>(), false).taps;
}

// (channels, height, width) of each tap for a given input shape.
inline std::array<ImageShape, tap_count> tap_shapes(ImageShape in)
{
    const auto half = [](std::size_t n) { return (n + 1) / 2; };
    return {{{16, in.height, in.width},
             {32, half(in.height), half(in.width)},
             {64, half(half(in.height)), half(half(in.width))}}};
}

} // namespace stylegate
