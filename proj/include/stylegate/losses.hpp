#pragma once

// Differentiable objectives for license training and generator training.
// Every reduction over a batch is an arithmetic mean.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stylegate/datasets.hpp"
#include "stylegate/error.hpp"
#include "stylegate/layers.hpp"
#include "stylegate/nets.hpp"
#include "stylegate/tensor.hpp"

namespace stylegate {

struct LicenseLossConfig {
    double alpha = 1.0;  // cross-entropy on licensed images
    double beta = 0.5;   // contrastive push-apart of original vs licensed features
    double gamma = 0.25; // Gram style matching against the style patches
    double margin = 1.0;
    double phi = 1.0;    // weight of the cosine term inside the distance
    double cosine_epsilon = 1e-8;
    std::vector<std::size_t> gram_layers{0, 1, 2};
    std::optional<std::size_t> feature_tap; // contrastive feature: pooled penultimate when empty, else a conv tap

    void validate() const
    {
        if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0))
            throw ConfigError("license loss weights must be non-negative");
        if (!(margin > 0.0))
            throw ConfigError("margin must be positive");
        if (!(phi >= 0.0))
            throw ConfigError("phi must be non-negative");
        if (!(cosine_epsilon > 0.0))
            throw ConfigError("cosine_epsilon must be positive");
        for (auto l : gram_layers)
            if (l >= tap_count)
                throw ConfigError("gram layer index " + std::to_string(l) + " out of range");
        if (feature_tap && *feature_tap >= tap_count)
            throw ConfigError("feature tap index " + std::to_string(*feature_tap) + " out of range");
    }
};

struct GeneratorLossConfig {
    double content_weight = 1.0;
    double style_weight = 50.0;
    double tv_weight = 0.05;
    std::size_t content_layer = 1;
    std::vector<std::size_t> style_layers{0, 1, 2};

    void validate() const
    {
        if (!(content_weight >= 0.0) || !(style_weight >= 0.0) || !(tv_weight >= 0.0))
            throw ConfigError("generator loss weights must be non-negative");
        if (content_layer >= tap_count)
            throw ConfigError("content layer index out of range");
        for (auto l : style_layers)
            if (l >= tap_count)
                throw ConfigError("style layer index " + std::to_string(l) + " out of range");
    }
};

// ------------------------------------------------------------ cross entropy

constexpr double probability_floor = 1e-12;

inline void check_labels(std::size_t rows, std::size_t classes, std::span<const std::uint32_t> labels)
{
    if (labels.size() != rows)
        throw ShapeError("got " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
    for (auto l : labels)
        if (l >= classes)
            throw Error("label " + std::to_string(l) + " out of range for " + std::to_string(classes) + " classes");
}

namespace detail {

inline double cross_entropy_unchecked(const Activation& probs, std::span<const std::uint32_t> labels,
                                      Activation* d_probs)
{
    const std::size_t b = probs.batch(), k = probs.item_size();
    if (d_probs)
        *d_probs = Activation(probs.batch(), probs.channels(), probs.height(), probs.width());
    if (b == 0)
        return 0.0;
    double total = 0.0;
    for (std::size_t n = 0; n < b; ++n) {
        const double p = probs[n * k + labels[n]];
        total -= std::log(std::max(p, probability_floor));
        if (d_probs && p > probability_floor)
            (*d_probs)[n * k + labels[n]] = -1.0 / (p * static_cast<double>(b));
    }
    return total / static_cast<double>(b);
}

} // namespace detail

// Mean over the batch of -log p(true class); probabilities floored at 1e-12.
// Rows must sum to 1 within 1e-4.
inline double cross_entropy(const Activation& probs, std::span<const std::uint32_t> labels,
                            Activation* d_probs = nullptr)
{
    const std::size_t b = probs.batch(), k = probs.item_size();
    check_labels(b, k, labels);
    for (std::size_t n = 0; n < b; ++n) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            s += probs[n * k + j];
        if (std::abs(s - 1.0) > 1e-4)
            throw Error("cross_entropy: row " + std::to_string(n) + " sums to " + std::to_string(s));
    }
    return detail::cross_entropy_unchecked(probs, labels, d_probs);
}

// Fused softmax + cross entropy on logits; d_logits = (softmax - onehot) / B.
inline double softmax_cross_entropy(const Activation& logits, std::span<const std::uint32_t> labels,
                                    Activation* d_logits = nullptr)
{
    const std::size_t b = logits.batch(), k = logits.item_size();
    check_labels(b, k, labels);
    const Activation p = layers::softmax(logits);
    if (d_logits)
        *d_logits = Activation(b, k, 1, 1);
    if (b == 0)
        return 0.0;
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t n = 0; n < b; ++n) {
        total -= std::log(std::max(p[n * k + labels[n]], probability_floor));
        if (d_logits) {
            for (std::size_t j = 0; j < k; ++j)
                (*d_logits)[n * k + j] = (p[n * k + j] - (j == labels[n] ? 1.0 : 0.0)) * inv_b;
        }
    }
    return total * inv_b;
}

// -------------------------------------------------------- feature distance

namespace detail {

struct DistanceTerms {
    double sq_euclid = 0.0;
    double one_minus_cos = 0.0;
    double nx = 0.0, ny = 0.0; // raw norms
};

// 1 - cos is evaluated as |x/|x| - y/|y||^2 / 2 when both norms clear eps, which
// is exactly zero for x == y and symmetric in (x, y); otherwise norms are
// floored at eps.
inline DistanceTerms distance_terms(std::span<const double> x, std::span<const double> y, double eps)
{
    DistanceTerms t;
    double xx = 0.0, yy = 0.0, xy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        t.sq_euclid += d * d;
        xx += x[i] * x[i];
        yy += y[i] * y[i];
        xy += x[i] * y[i];
    }
    t.nx = std::sqrt(xx);
    t.ny = std::sqrt(yy);
    if (t.nx >= eps && t.ny >= eps) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] / t.nx - y[i] / t.ny;
            s += d * d;
        }
        t.one_minus_cos = 0.5 * s;
    } else {
        t.one_minus_cos = 1.0 - xy / (std::max(t.nx, eps) * std::max(t.ny, eps));
    }
    return t;
}

} // namespace detail

// d(x, y) = sqrt(max(0, |x - y|^2 + phi * (1 - cos(x, y)))).
inline double feature_distance(std::span<const double> x, std::span<const double> y, double phi, double eps = 1e-8)
{
    if (x.size() != y.size())
        throw ShapeError("feature_distance: dimension mismatch " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
    if (x.empty())
        throw ShapeError("feature_distance: empty vectors");
    const auto t = detail::distance_terms(x, y, eps);
    return std::sqrt(std::max(0.0, t.sq_euclid + phi * t.one_minus_cos));
}

// Gradient of d w.r.t. x and y, scaled by `scale` and added into gx / gy.
// Zero (subgradient) where d == 0.
inline void feature_distance_grad(std::span<const double> x, std::span<const double> y, double phi, double eps,
                                  double scale, std::span<double> gx, std::span<double> gy)
{
    const auto t = detail::distance_terms(x, y, eps);
    const double d = std::sqrt(std::max(0.0, t.sq_euclid + phi * t.one_minus_cos));
    if (!(d > 0.0))
        return;
    const double k = scale / (2.0 * d);
    const std::size_t n = x.size();
    // d(1 - cos)/dx = -(dcos/dx)
    std::vector<double> dcx(n, 0.0), dcy(n, 0.0);
    if (t.nx >= eps && t.ny >= eps) {
        double cos = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            cos += (x[i] / t.nx) * (y[i] / t.ny);
        for (std::size_t i = 0; i < n; ++i) {
            dcx[i] = (y[i] / t.ny - cos * x[i] / t.nx) / t.nx;
            dcy[i] = (x[i] / t.nx - cos * y[i] / t.ny) / t.ny;
        }
    } else {
        double xy = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            xy += x[i] * y[i];
        const double mx = std::max(t.nx, eps), my = std::max(t.ny, eps);
        for (std::size_t i = 0; i < n; ++i) {
            dcx[i] = y[i] / (mx * my) - (t.nx >= eps ? xy * x[i] / (t.nx * t.nx * t.nx * my) : 0.0);
            dcy[i] = x[i] / (mx * my) - (t.ny >= eps ? xy * y[i] / (t.ny * t.ny * t.ny * mx) : 0.0);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = x[i] - y[i];
        if (!gx.empty())
            gx[i] += k * (2.0 * diff - phi * dcx[i]);
        if (!gy.empty())
            gy[i] += k * (-2.0 * diff - phi * dcy[i]);
    }
}

// ------------------------------------------------------------- contrastive

// Mean over pairs of max(margin - d(f_origin[i], f_gen[i]), 0).
inline double contrastive_loss(const Activation& f_origin, const Activation& f_gen, const LicenseLossConfig& cfg,
                               Activation* d_origin = nullptr, Activation* d_gen = nullptr)
{
    require_same_shape(f_origin, f_gen, "contrastive_loss");
    const std::size_t b = f_origin.batch();
    if (d_origin)
        *d_origin = Activation(f_origin.batch(), f_origin.channels(), f_origin.height(), f_origin.width());
    if (d_gen)
        *d_gen = Activation(f_gen.batch(), f_gen.channels(), f_gen.height(), f_gen.width());
    if (b == 0)
        return 0.0;
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        const auto x = f_origin.item(i), y = f_gen.item(i);
        const double d = feature_distance(x, y, cfg.phi, cfg.cosine_epsilon);
        const double h = cfg.margin - d;
        if (h > 0.0) {
            total += h;
            if (d_origin || d_gen)
                feature_distance_grad(x, y, cfg.phi, cfg.cosine_epsilon, -inv_b,
                                      d_origin ? d_origin->item(i) : std::span<double>{},
                                      d_gen ? d_gen->item(i) : std::span<double>{});
        }
    }
    return total * inv_b;
}

// ------------------------------------------------------------------- Gram

struct GramMatrix {
    std::size_t channels = 0;
    std::vector<double> values; // row-major C x C

    double operator()(std::size_t i, std::size_t j) const { return values[i * channels + j]; }
    double& operator()(std::size_t i, std::size_t j) { return values[i * channels + j]; }
    bool operator==(const GramMatrix&) const = default;
};

// G = F F^T / (C H W) per batch item, F the C x (H W) flattening.
inline std::vector<GramMatrix> gram_matrix(const Activation& fmap)
{
    const std::size_t c = fmap.channels(), hw = fmap.height() * fmap.width();
    if (hw == 0)
        throw ShapeError("gram_matrix: empty spatial extent");
    const double norm = 1.0 / static_cast<double>(c * hw);
    std::vector<GramMatrix> out;
    out.reserve(fmap.batch());
    for (std::size_t n = 0; n < fmap.batch(); ++n) {
        const layers::ConstMatrixMap f(fmap.item(n).data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(hw));
        GramMatrix g{c, std::vector<double>(c * c)};
        layers::MatrixMap gm(g.values.data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
        gm.noalias() = f * f.transpose();
        gm *= norm;
        // exact symmetry regardless of GEMM kernel rounding
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = i + 1; j < c; ++j)
                g(j, i) = g(i, j);
        out.push_back(std::move(g));
    }
    return out;
}

inline GramMatrix mean_gram(const std::vector<GramMatrix>& grams)
{
    if (grams.empty())
        throw ShapeError("mean_gram: no matrices");
    GramMatrix m{grams.front().channels, std::vector<double>(grams.front().values.size(), 0.0)};
    for (const auto& g : grams)
        for (std::size_t i = 0; i < g.values.size(); ++i)
            m.values[i] += g.values[i];
    for (double& v : m.values)
        v /= static_cast<double>(grams.size());
    return m;
}

// dF = (dG + dG^T) F / (C H W) for one item, added into d_item.
inline void gram_backward_item(std::span<const double> item, std::size_t c, std::size_t hw, const GramMatrix& dg,
                               std::span<double> d_item)
{
    const double norm = 1.0 / static_cast<double>(c * hw);
    const layers::ConstMatrixMap f(item.data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(hw));
    const layers::ConstMatrixMap g(dg.values.data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
    layers::MatrixMap d(d_item.data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(hw));
    const layers::RowMatrix sym = (g + g.transpose()) * norm;
    d.noalias() += sym * f;
}

// ------------------------------------------------------------------- style

// (1/L) sum over layers of the mean squared difference between the
// batch-averaged style Gram and each generated item's Gram.
inline double style_loss(std::span<const Activation> style_taps, std::span<const Activation> gen_taps,
                         std::vector<Activation>* d_style = nullptr, std::vector<Activation>* d_gen = nullptr)
{
    if (style_taps.size() != gen_taps.size())
        throw ShapeError("style_loss: layer count mismatch " + std::to_string(style_taps.size()) + " vs " +
                         std::to_string(gen_taps.size()));
    const std::size_t layers_n = style_taps.size();
    if (d_style) {
        d_style->clear();
        for (const auto& t : style_taps)
            d_style->emplace_back(t.batch(), t.channels(), t.height(), t.width());
    }
    if (d_gen) {
        d_gen->clear();
        for (const auto& t : gen_taps)
            d_gen->emplace_back(t.batch(), t.channels(), t.height(), t.width());
    }
    if (layers_n == 0)
        return 0.0;

    double total = 0.0;
    for (std::size_t l = 0; l < layers_n; ++l) {
        const Activation& s = style_taps[l];
        const Activation& g = gen_taps[l];
        if (s.channels() != g.channels())
            throw ShapeError("style_loss: channel mismatch at layer " + std::to_string(l));
        if (s.batch() == 0 || g.batch() == 0)
            throw ShapeError("style_loss: empty batch at layer " + std::to_string(l));
        const std::size_t c = s.channels();
        const auto style_grams = gram_matrix(s);
        const GramMatrix target = mean_gram(style_grams);
        const auto gen_grams = gram_matrix(g);
        const double denom = static_cast<double>(gen_grams.size() * c * c);

        double layer = 0.0;
        GramMatrix d_target{c, std::vector<double>(c * c, 0.0)};
        for (std::size_t i = 0; i < gen_grams.size(); ++i) {
            GramMatrix d_gi{c, std::vector<double>(c * c, 0.0)};
            for (std::size_t e = 0; e < c * c; ++e) {
                const double diff = gen_grams[i].values[e] - target.values[e];
                layer += diff * diff;
                const double grad = 2.0 * diff / (denom * static_cast<double>(layers_n));
                d_gi.values[e] = grad;
                d_target.values[e] -= grad;
            }
            if (d_gen)
                gram_backward_item(g.item(i), c, g.height() * g.width(), d_gi, (*d_gen)[l].item(i));
        }
        if (d_style) {
            for (double& v : d_target.values)
                v /= static_cast<double>(style_grams.size());
            for (std::size_t j = 0; j < s.batch(); ++j)
                gram_backward_item(s.item(j), c, s.height() * s.width(), d_target, (*d_style)[l].item(j));
        }
        total += layer / denom;
    }
    return total / static_cast<double>(layers_n);
}

// -------------------------------------------------------- total variation

// Mean over all horizontally and vertically adjacent pixel pairs of the squared difference.
inline double total_variation(const Activation& img, Activation* d_img = nullptr)
{
    const std::size_t b = img.batch(), c = img.channels(), h = img.height(), w = img.width();
    const std::size_t pairs = b * c * (h * (w > 0 ? w - 1 : 0) + (h > 0 ? h - 1 : 0) * w);
    if (d_img)
        *d_img = Activation(b, c, h, w);
    if (pairs == 0)
        return 0.0;
    const double inv = 1.0 / static_cast<double>(pairs);
    double total = 0.0;
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    if (x + 1 < w) {
                        const double d = img(n, ch, y, x + 1) - img(n, ch, y, x);
                        total += d * d;
                        if (d_img) {
                            (*d_img)(n, ch, y, x + 1) += 2.0 * d * inv;
                            (*d_img)(n, ch, y, x) -= 2.0 * d * inv;
                        }
                    }
                    if (y + 1 < h) {
                        const double d = img(n, ch, y + 1, x) - img(n, ch, y, x);
                        total += d * d;
                        if (d_img) {
                            (*d_img)(n, ch, y + 1, x) += 2.0 * d * inv;
                            (*d_img)(n, ch, y, x) -= 2.0 * d * inv;
                        }
                    }
                }
    return total * inv;
}

// ------------------------------------------------------------ combined loss

struct LicenseLossParts {
    double ce = 0.0;
    double contrastive = 0.0;
    double style = 0.0;
};

struct LicenseLoss {
    double total = 0.0;
    LicenseLossParts parts; // unweighted
};

inline double weighted_total(const LicenseLossParts& p, const LicenseLossConfig& cfg)
{
    return cfg.alpha * p.ce + cfg.beta * p.contrastive + cfg.gamma * p.style;
}

namespace detail {

inline Activation scaled(const Activation& a, double s)
{
    Activation out = a;
    for (double& v : out.values())
        v *= s;
    return out;
}

inline std::vector<Activation> select_taps(const std::array<Activation, tap_count>& taps,
                                           const std::vector<std::size_t>& layers)
{
    std::vector<Activation> out;
    out.reserve(layers.size());
    for (auto l : layers)
        out.push_back(taps[l]);
    return out;
}

inline const Activation& contrastive_feature(const ClassifierTrace& t, const LicenseLossConfig& cfg)
{
    return cfg.feature_tap ? t.taps[*cfg.feature_tap] : t.feature;
}

// Accumulates an upstream gradient for tap l, allocating the slot on first use.
inline void add_tap_grad(ClassifierUpstream& up, std::array<Activation, tap_count>& slots, std::size_t l, Activation g)
{
    if (up.d_taps[l]) {
        layers::add_inplace(slots[l], g);
    } else {
        slots[l] = std::move(g);
        up.d_taps[l] = &slots[l];
    }
}

} // namespace detail

// Evaluates the weighted license objective on one triplet batch and, when
// `grad` is given, accumulates its parameter gradient. A part whose weight is
// zero contributes no upstream gradient at all.
inline LicenseLoss license_loss_step(const Params& model, const TripletBatch& batch, const LicenseLossConfig& cfg,
                                     Params* grad)
{
    if (!batch.licensed.same_shape(batch.original))
        throw ShapeError("triplet batch: original/licensed shape mismatch");
    if (batch.style.item_shape() != batch.licensed.item_shape())
        throw ShapeError("triplet batch: style patch shape mismatch");

    const ClassifierTrace gen = run_classifier(model, batch.licensed.cast<double>());
    const ClassifierTrace orig = run_classifier(model, batch.original.cast<double>());
    const ClassifierTrace sty = run_classifier(model, batch.style.cast<double>(), false);

    const bool want = grad != nullptr;
    LicenseLoss out;

    Activation d_logits;
    out.parts.ce = softmax_cross_entropy(gen.logits, batch.labels, want && cfg.alpha != 0.0 ? &d_logits : nullptr);

    Activation d_f_orig, d_f_gen;
    const bool contrast_grad = want && cfg.beta != 0.0;
    out.parts.contrastive = contrastive_loss(detail::contrastive_feature(orig, cfg), detail::contrastive_feature(gen, cfg), cfg, contrast_grad ? &d_f_orig : nullptr,
                                             contrast_grad ? &d_f_gen : nullptr);

    std::vector<Activation> d_style_taps, d_gen_taps;
    const bool style_grad = want && cfg.gamma != 0.0;
    {
        const auto s = detail::select_taps(sty.taps, cfg.gram_layers);
        const auto g = detail::select_taps(gen.taps, cfg.gram_layers);
        out.parts.style = style_loss(s, g, style_grad ? &d_style_taps : nullptr, style_grad ? &d_gen_taps : nullptr);
    }
    out.total = weighted_total(out.parts, cfg);

    if (!want)
        return out;

    // generated (licensed) images
    {
        ClassifierUpstream up;
        Activation dl, df;
        std::array<Activation, tap_count> dt;
        if (cfg.alpha != 0.0) {
            dl = detail::scaled(d_logits, cfg.alpha);
            up.d_logits = &dl;
        }
        if (contrast_grad) {
            df = detail::scaled(d_f_gen, cfg.beta);
            if (cfg.feature_tap)
                detail::add_tap_grad(up, dt, *cfg.feature_tap, std::move(df));
            else
                up.d_feature = &df;
        }
        if (style_grad)
            for (std::size_t k = 0; k < cfg.gram_layers.size(); ++k)
                detail::add_tap_grad(up, dt, cfg.gram_layers[k], detail::scaled(d_gen_taps[k], cfg.gamma));
        if (up.d_logits || up.d_feature || up.d_taps[0] || up.d_taps[1] || up.d_taps[2])
            backprop_classifier(model, gen, up, grad, nullptr);
    }
    if (contrast_grad) {
        ClassifierUpstream up;
        std::array<Activation, tap_count> dt;
        Activation df = detail::scaled(d_f_orig, cfg.beta);
        if (cfg.feature_tap)
            detail::add_tap_grad(up, dt, *cfg.feature_tap, std::move(df));
        else
            up.d_feature = &df;
        backprop_classifier(model, orig, up, grad, nullptr);
    }
    if (style_grad && !cfg.gram_layers.empty()) {
        ClassifierUpstream up;
        std::array<Activation, tap_count> dt;
        for (std::size_t k = 0; k < cfg.gram_layers.size(); ++k)
            detail::add_tap_grad(up, dt, cfg.gram_layers[k], detail::scaled(d_style_taps[k], cfg.gamma));
        backprop_classifier(model, sty, up, grad, nullptr);
    }
    return out;
}

inline LicenseLoss combined_license_loss(const TripletBatch& batch, const NetworkCheckpoint& model,
                                         const LicenseLossConfig& cfg)
{
    cfg.validate();
    if (model.kind != NetworkKind::classifier)
        throw Error("combined_license_loss: expected a classifier checkpoint, got " + to_string(model.kind));
    check_input(model, batch.licensed.item_shape());
    return license_loss_step(Params::from(model), batch, cfg, nullptr);
}

// ------------------------------------------------------- perceptual loss

struct PerceptualParts {
    double content = 0.0;
    double style = 0.0;
    double tv = 0.0;
};

struct PerceptualLoss {
    double total = 0.0;
    PerceptualParts parts; // unweighted
};

// Core of the generator objective: `output` is differentiated through the
// frozen feature net (its parameters receive no gradient).
inline PerceptualLoss perceptual_loss_step(const Params& featnet, const Activation& content, const Activation& output,
                                           const Activation& style_patches, const GeneratorLossConfig& cfg,
                                           Activation* d_output)
{
    require_same_shape(content, output, "perceptual loss");
    if (style_patches.item_shape() != output.item_shape())
        throw ShapeError("perceptual loss: style patch shape mismatch");

    const ClassifierTrace out_t = run_classifier(featnet, output, false);
    const ClassifierTrace content_t = run_classifier(featnet, content, false);
    const ClassifierTrace style_t = run_classifier(featnet, style_patches, false);

    PerceptualLoss res;
    std::array<Activation, tap_count> d_taps;
    std::array<bool, tap_count> has{};

    // content: mean squared difference at one tap
    {
        const Activation& a = out_t.taps[cfg.content_layer];
        const Activation& b = content_t.taps[cfg.content_layer];
        const double inv = 1.0 / static_cast<double>(a.size());
        double s = 0.0;
        Activation d(a.batch(), a.channels(), a.height(), a.width());
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double diff = a[i] - b[i];
            s += diff * diff;
            d[i] = cfg.content_weight * 2.0 * diff * inv;
        }
        res.parts.content = s * inv;
        if (d_output && cfg.content_weight != 0.0) {
            d_taps[cfg.content_layer] = std::move(d);
            has[cfg.content_layer] = true;
        }
    }
    // style
    {
        const auto s = detail::select_taps(style_t.taps, cfg.style_layers);
        const auto g = detail::select_taps(out_t.taps, cfg.style_layers);
        std::vector<Activation> dg;
        const bool sg = d_output && cfg.style_weight != 0.0;
        res.parts.style = style_loss(s, g, nullptr, sg ? &dg : nullptr);
        if (sg)
            for (std::size_t k = 0; k < cfg.style_layers.size(); ++k) {
                const auto l = cfg.style_layers[k];
                Activation sc = detail::scaled(dg[k], cfg.style_weight);
                if (has[l]) {
                    layers::add_inplace(d_taps[l], sc);
                } else {
                    d_taps[l] = std::move(sc);
                    has[l] = true;
                }
            }
    }
    Activation d_tv;
    res.parts.tv = total_variation(output, d_output && cfg.tv_weight != 0.0 ? &d_tv : nullptr);
    res.total = cfg.content_weight * res.parts.content + cfg.style_weight * res.parts.style + cfg.tv_weight * res.parts.tv;

    if (d_output) {
        *d_output = Activation(output.batch(), output.channels(), output.height(), output.width());
        if (has[0] || has[1] || has[2]) {
            ClassifierUpstream up;
            for (std::size_t l = 0; l < tap_count; ++l)
                if (has[l])
                    up.d_taps[l] = &d_taps[l];
            backprop_classifier(featnet, out_t, up, nullptr, d_output);
        }
        if (cfg.tv_weight != 0.0)
            for (std::size_t i = 0; i < d_output->size(); ++i)
                (*d_output)[i] += cfg.tv_weight * d_tv[i];
    }
    return res;
}

inline PerceptualLoss generator_perceptual_loss(const ImageTensor& content, const ImageTensor& output,
                                                const ImageTensor& style_patches, const NetworkCheckpoint& featnet,
                                                const GeneratorLossConfig& cfg)
{
    cfg.validate();
    if (featnet.kind == NetworkKind::generator)
        throw Error("generator_perceptual_loss: feature net checkpoint is a generator");
    check_input(featnet, output.item_shape());
    return perceptual_loss_step(Params::from(featnet), content.cast<double>(), output.cast<double>(),
                                style_patches.cast<double>(), cfg, nullptr);
}

} // namespace stylegate
