#pragma once

// Central finite-difference checks of every analytic gradient in the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stylegate/losses.hpp"
#include "stylegate/nets.hpp"
#include "stylegate/rng.hpp"

namespace stylegate {

struct GradCheckResult {
    std::string name;
    std::size_t probes = 0;
    std::size_t skipped = 0; // coordinates whose stencil straddled a ReLU/hinge kink
    double max_rel_error = 0.0;
    bool passed = false;
};

struct GradCheckOptions {
    std::size_t probes = 24;
    std::size_t min_probes = 20;
    double step = 1e-3;
    double tolerance = 1e-3;
    std::uint64_t seed = 2024;
};

// |a - n| / max(|a|, |n|); pairs that are both below 1e-10 count as agreeing.
inline double relative_error(double analytic, double numeric)
{
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale < 1e-10)
        return 0.0;
    return std::abs(analytic - numeric) / scale;
}

// Value of the checked function plus a hash of its piecewise-linear branch
// pattern (ReLU signs, hinge activity). A central difference is only
// meaningful when x-h, x and x+h share one pattern.
struct Evaluation {
    double value = 0.0;
    std::uint64_t pattern = 0;
};

// Probes up to `opts.probes` distinct coordinates of x, replacing those whose
// stencil crosses a kink. `f` must read x through the same storage.
inline GradCheckResult check_gradient(std::string name, std::span<double> x, std::span<const double> analytic,
                                      const std::function<Evaluation()>& f, Rng& rng, const GradCheckOptions& opts)
{
    GradCheckResult r{std::move(name), 0, 0, 0.0, true};
    std::vector<std::size_t> coords(x.size());
    for (std::size_t i = 0; i < coords.size(); ++i)
        coords[i] = i;
    rng.shuffle(coords);
    const std::uint64_t centre = f().pattern;
    for (auto i : coords) {
        if (r.probes == opts.probes)
            break;
        const double saved = x[i];
        x[i] = saved + opts.step;
        const auto fp = f();
        x[i] = saved - opts.step;
        const auto fm = f();
        x[i] = saved;
        if (fp.pattern != centre || fm.pattern != centre) {
            ++r.skipped;
            continue;
        }
        const double numeric = (fp.value - fm.value) / (2.0 * opts.step);
        r.max_rel_error = std::max(r.max_rel_error, relative_error(analytic[i], numeric));
        ++r.probes;
    }
    r.passed = r.probes >= opts.min_probes && r.max_rel_error <= opts.tolerance;
    return r;
}

inline GradCheckResult check_gradient(std::string name, std::span<double> x, std::span<const double> analytic,
                                      const std::function<double()>& f, Rng& rng, const GradCheckOptions& opts)
{
    return check_gradient(std::move(name), x, analytic, std::function<Evaluation()>([&] { return Evaluation{f(), 0}; }),
                          rng, opts);
}

class PatternHash {
public:
    void add(bool bit)
    {
        h_ ^= bit ? 0x9eu : 0x3du;
        h_ *= 0x100000001b3ULL;
    }
    void add_positive(const Activation& a)
    {
        for (double v : a.values())
            add(v > 0.0);
    }
    void add(const ClassifierTrace& t)
    {
        for (const auto& tap : t.taps)
            add_positive(tap);
    }
    void add(const GeneratorTrace& t)
    {
        add_positive(t.h0);
        add_positive(t.r1);
        add_positive(t.r2);
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

namespace detail {

inline Activation random_activation(Rng& rng, std::size_t n, std::size_t c, std::size_t h, std::size_t w, double lo,
                                    double hi)
{
    Activation a(n, c, h, w);
    for (double& v : a.values())
        v = rng.uniform(lo, hi);
    return a;
}

inline std::vector<double> flatten(const Params& p)
{
    std::vector<double> out;
    for (const auto& t : p.tensors)
        out.insert(out.end(), t.begin(), t.end());
    return out;
}

inline void unflatten(std::span<const double> flat, Params& p)
{
    std::size_t k = 0;
    for (auto& t : p.tensors)
        for (double& v : t)
            v = flat[k++];
}

// Sum of w_i * a_i with fixed random weights; gradient is w.
struct Probe {
    std::vector<double> weights;
    Probe(Rng& rng, std::size_t n)
    {
        weights.resize(n);
        for (double& w : weights)
            w = rng.uniform(-1.0, 1.0);
    }
    double operator()(const Activation& a) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            s += weights[i] * a[i];
        return s;
    }
    Activation grad(const Activation& like) const
    {
        Activation g(like.batch(), like.channels(), like.height(), like.width());
        std::copy(weights.begin(), weights.end(), g.data());
        return g;
    }
};

// Network parameter check: loss(params) with analytic gradient `grad`.
inline GradCheckResult check_params(std::string name, const NetworkCheckpoint& ckpt,
                                    const std::function<Evaluation(const Params&)>& loss,
                                    const std::function<Params(const Params&)>& grad, Rng& rng,
                                    const GradCheckOptions& opts)
{
    Params p = Params::from(ckpt);
    const Params g = grad(p);
    auto flat = flatten(p);
    const auto flat_g = flatten(g);
    return check_gradient(std::move(name), flat, flat_g,
                          std::function<Evaluation()>([&] {
                              unflatten(flat, p);
                              return loss(p);
                          }),
                          rng, opts);
}

} // namespace detail

inline std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& opts = {})
{
    using detail::random_activation;
    std::vector<GradCheckResult> results;
    Rng rng(opts.seed);

    // cross entropy on probabilities
    {
        Activation p = random_activation(rng, 4, 6, 1, 1, 0.05, 1.0);
        const std::vector<std::uint32_t> labels{1, 5, 0, 3};
        Activation g;
        detail::cross_entropy_unchecked(p, labels, &g);
        results.push_back(check_gradient("cross_entropy", p.values(), g.values(),
                                         [&] { return detail::cross_entropy_unchecked(p, labels, nullptr); }, rng,
                                         opts));
    }
    // fused softmax cross entropy on logits
    {
        Activation z = random_activation(rng, 4, 6, 1, 1, -2.0, 2.0);
        const std::vector<std::uint32_t> labels{0, 5, 2, 2};
        Activation g;
        softmax_cross_entropy(z, labels, &g);
        results.push_back(check_gradient("softmax_cross_entropy", z.values(), g.values(),
                                         [&] { return softmax_cross_entropy(z, labels); }, rng, opts));
    }
    // feature distance, both arguments
    {
        const double phi = 1.0, eps = 1e-8;
        std::vector<double> x(24), y(24), gx(24, 0.0), gy(24, 0.0);
        for (auto& v : x)
            v = rng.uniform(-1.0, 1.0);
        for (auto& v : y)
            v = rng.uniform(-1.0, 1.0);
        feature_distance_grad(x, y, phi, eps, 1.0, gx, gy);
        auto f = [&] { return feature_distance(x, y, phi, eps); };
        results.push_back(check_gradient("feature_distance/x", x, gx, f, rng, opts));
        results.push_back(check_gradient("feature_distance/y", y, gy, f, rng, opts));
    }
    // contrastive hinge (margin chosen so every pair is active)
    {
        LicenseLossConfig cfg;
        cfg.margin = 6.0;
        Activation fo = random_activation(rng, 4, 16, 1, 1, -0.6, 0.6);
        Activation fg = random_activation(rng, 4, 16, 1, 1, -0.6, 0.6);
        Activation dfo, dfg;
        contrastive_loss(fo, fg, cfg, &dfo, &dfg);
        auto f = std::function<Evaluation()>([&] {
            PatternHash h;
            for (std::size_t i = 0; i < fo.batch(); ++i)
                h.add(feature_distance(fo.item(i), fg.item(i), cfg.phi, cfg.cosine_epsilon) < cfg.margin);
            return Evaluation{contrastive_loss(fo, fg, cfg), h.value()};
        });
        results.push_back(check_gradient("contrastive/origin", fo.values(), dfo.values(), f, rng, opts));
        results.push_back(check_gradient("contrastive/gen", fg.values(), dfg.values(), f, rng, opts));
    }
    // Gram matrix through a random linear probe
    {
        Activation fm = random_activation(rng, 2, 4, 3, 3, -1.0, 1.0);
        std::vector<GramMatrix> w;
        for (std::size_t n = 0; n < fm.batch(); ++n) {
            GramMatrix g{4, std::vector<double>(16)};
            for (double& v : g.values)
                v = rng.uniform(-1.0, 1.0);
            w.push_back(std::move(g));
        }
        auto f = [&] {
            const auto gs = gram_matrix(fm);
            double s = 0.0;
            for (std::size_t n = 0; n < gs.size(); ++n)
                for (std::size_t e = 0; e < 16; ++e)
                    s += w[n].values[e] * gs[n].values[e];
            return s;
        };
        Activation d(fm.batch(), fm.channels(), fm.height(), fm.width());
        for (std::size_t n = 0; n < fm.batch(); ++n)
            gram_backward_item(fm.item(n), 4, 9, w[n], d.item(n));
        results.push_back(check_gradient("gram_matrix", fm.values(), d.values(), f, rng, opts));
    }
    // style loss, both sides, two layers of different spatial size
    {
        std::vector<Activation> s{random_activation(rng, 3, 4, 4, 4, 0.0, 1.0), random_activation(rng, 3, 6, 2, 2, 0.0, 1.0)};
        std::vector<Activation> g{random_activation(rng, 2, 4, 5, 5, 0.0, 1.0), random_activation(rng, 2, 6, 3, 3, 0.0, 1.0)};
        std::vector<Activation> ds, dg;
        style_loss(s, g, &ds, &dg);
        auto f = [&] { return style_loss(s, g); };
        results.push_back(check_gradient("style_loss/style", s[0].values(), ds[0].values(), f, rng, opts));
        results.push_back(check_gradient("style_loss/gen", g[1].values(), dg[1].values(), f, rng, opts));
    }
    // total variation
    {
        Activation img = random_activation(rng, 2, 2, 4, 5, 0.0, 1.0);
        Activation d;
        total_variation(img, &d);
        results.push_back(check_gradient("total_variation", img.values(), d.values(),
                                         [&] { return total_variation(img); }, rng, opts));
    }

    const ImageShape shape{2, 8, 8};
    const std::size_t classes = 3;

    // network kinds, each under a random linear probe of every output
    {
        const auto ckpt = init_network(NetworkKind::classifier, shape, classes, derive_seed(opts.seed, "gc-cls"));
        const Activation x = random_activation(rng, 2, shape.channels, shape.height, shape.width, 0.0, 1.0);
        const ClassifierTrace t0 = run_classifier(Params::from(ckpt), x);
        const detail::Probe pl(rng, t0.logits.size()), pf(rng, t0.feature.size()), p0(rng, t0.taps[0].size()),
            p1(rng, t0.taps[1].size()), p2(rng, t0.taps[2].size());
        auto loss = [&](const Params& p) {
            const auto t = run_classifier(p, x);
            PatternHash h;
            h.add(t);
            return Evaluation{pl(t.logits) + pf(t.feature) + p0(t.taps[0]) + p1(t.taps[1]) + p2(t.taps[2]), h.value()};
        };
        auto grad = [&](const Params& p) {
            const auto t = run_classifier(p, x);
            Params g = Params::zeros_like(ckpt);
            const Activation dl = pl.grad(t.logits), df = pf.grad(t.feature), d0 = p0.grad(t.taps[0]),
                             d1 = p1.grad(t.taps[1]), d2 = p2.grad(t.taps[2]);
            ClassifierUpstream up{&dl, &df, {&d0, &d1, &d2}};
            backprop_classifier(p, t, up, &g, nullptr);
            return g;
        };
        results.push_back(detail::check_params("net/classifier", ckpt, loss, grad, rng, opts));
    }
    {
        const auto ckpt = init_network(NetworkKind::featurenet, shape, classes, derive_seed(opts.seed, "gc-feat"));
        Activation x = random_activation(rng, 2, shape.channels, shape.height, shape.width, 0.0, 1.0);
        const ClassifierTrace t0 = run_classifier(Params::from(ckpt), x, false);
        const detail::Probe p0(rng, t0.taps[0].size()), p1(rng, t0.taps[1].size()), p2(rng, t0.taps[2].size());
        auto loss_x = [&](const Params& p, const Activation& in) {
            const auto t = run_classifier(p, in, false);
            PatternHash h;
            h.add(t);
            return Evaluation{p0(t.taps[0]) + p1(t.taps[1]) + p2(t.taps[2]), h.value()};
        };
        auto backward = [&](const Params& p, const Activation& in, Params* g, Activation* dx) {
            const auto t = run_classifier(p, in, false);
            const Activation d0 = p0.grad(t.taps[0]), d1 = p1.grad(t.taps[1]), d2 = p2.grad(t.taps[2]);
            ClassifierUpstream up{nullptr, nullptr, {&d0, &d1, &d2}};
            backprop_classifier(p, t, up, g, dx);
        };
        results.push_back(detail::check_params(
            "net/featurenet", ckpt, [&](const Params& p) { return loss_x(p, x); },
            [&](const Params& p) {
                Params g = Params::zeros_like(ckpt);
                backward(p, x, &g, nullptr);
                return g;
            },
            rng, opts));
        const Params p = Params::from(ckpt);
        Activation dx;
        backward(p, x, nullptr, &dx);
        results.push_back(check_gradient("net/featurenet-input", x.values(), dx.values(),
                                         std::function<Evaluation()>([&] { return loss_x(p, x); }), rng, opts));
    }
    {
        const auto ckpt = init_network(NetworkKind::generator, shape, 0, derive_seed(opts.seed, "gc-gen"));
        const Activation x = random_activation(rng, 2, shape.channels, shape.height, shape.width, 0.0, 1.0);
        const auto t0 = run_generator(Params::from(ckpt), x);
        const detail::Probe po(rng, t0.output.size());
        results.push_back(detail::check_params(
            "net/generator", ckpt,
            [&](const Params& p) {
                const auto t = run_generator(p, x);
                PatternHash h;
                h.add(t);
                return Evaluation{po(t.output), h.value()};
            },
            [&](const Params& p) {
                const auto t = run_generator(p, x);
                Params g = Params::zeros_like(ckpt);
                backprop_generator(p, t, po.grad(t.output), &g, nullptr);
                return g;
            },
            rng, opts));
    }

    // combined license objective w.r.t. classifier parameters, per part and in total
    {
        const auto ckpt = init_network(NetworkKind::classifier, shape, classes, derive_seed(opts.seed, "gc-lic"));
        TripletBatch batch;
        batch.original = random_activation(rng, 3, shape.channels, shape.height, shape.width, 0.0, 1.0).cast<float>();
        batch.licensed = random_activation(rng, 3, shape.channels, shape.height, shape.width, 0.0, 1.0).cast<float>();
        batch.style = random_activation(rng, 3, shape.channels, shape.height, shape.width, 0.0, 1.0).cast<float>();
        batch.labels = {0, 2, 1};
        // margins wide enough that the hinge is active for the random batch
        struct Variant { const char* name; double a, b, g; std::optional<std::size_t> tap; double margin; };
        for (const Variant v : {Variant{"license/ce", 1, 0, 0, {}, 4}, Variant{"license/contrastive", 0, 1, 0, {}, 4},
                                Variant{"license/contrastive-tap", 0, 1, 0, 1, 100},
                                Variant{"license/style", 0, 0, 1, {}, 4}, Variant{"license/total", 1.0, 0.5, 0.25, {}, 4}}) {
            LicenseLossConfig cfg;
            cfg.alpha = v.a;
            cfg.beta = v.b;
            cfg.gamma = v.g;
            cfg.margin = v.margin;
            cfg.feature_tap = v.tap;
            auto loss = [&](const Params& p) {
                PatternHash h;
                const auto gen = run_classifier(p, batch.licensed.cast<double>());
                const auto orig = run_classifier(p, batch.original.cast<double>());
                h.add(gen);
                h.add(orig);
                h.add(run_classifier(p, batch.style.cast<double>(), false));
                for (std::size_t i = 0; i < batch.size(); ++i)
                    h.add(feature_distance(detail::contrastive_feature(orig, cfg).item(i),
                                           detail::contrastive_feature(gen, cfg).item(i), cfg.phi,
                                           cfg.cosine_epsilon) < cfg.margin);
                return Evaluation{license_loss_step(p, batch, cfg, nullptr).total, h.value()};
            };
            results.push_back(detail::check_params(
                v.name, ckpt, loss,
                [&](const Params& p) {
                    Params g = Params::zeros_like(ckpt);
                    license_loss_step(p, batch, cfg, &g);
                    return g;
                },
                rng, opts));
        }
    }

    // generator perceptual parts w.r.t. the generated image (through the feature net)
    {
        const auto feat = init_network(NetworkKind::featurenet, shape, classes, derive_seed(opts.seed, "gc-perc"));
        const Params fp = Params::from(feat);
        const Activation content = random_activation(rng, 2, shape.channels, shape.height, shape.width, 0.0, 1.0);
        const Activation patches = random_activation(rng, 3, shape.channels, shape.height, shape.width, 0.0, 1.0);
        struct Variant { const char* name; double c, s, t; };
        for (const Variant v : {Variant{"perceptual/content", 1, 0, 0}, Variant{"perceptual/style", 0, 1, 0},
                                Variant{"perceptual/tv", 0, 0, 1}, Variant{"perceptual/total", 1, 50, 0.05}}) {
            GeneratorLossConfig cfg;
            cfg.content_weight = v.c;
            cfg.style_weight = v.s;
            cfg.tv_weight = v.t;
            Activation out = random_activation(rng, 2, shape.channels, shape.height, shape.width, 0.0, 1.0);
            Activation d;
            perceptual_loss_step(fp, content, out, patches, cfg, &d);
            results.push_back(check_gradient(v.name, out.values(), d.values(), std::function<Evaluation()>([&] {
                                                 PatternHash h;
                                                 h.add(run_classifier(fp, out, false));
                                                 return Evaluation{
                                                     perceptual_loss_step(fp, content, out, patches, cfg, nullptr).total,
                                                     h.value()};
                                             }),
                                             rng, opts));
        }
    }
    return results;
}

} // namespace stylegate
