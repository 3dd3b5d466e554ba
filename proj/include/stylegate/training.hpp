#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stylegate/datasets.hpp"
#include "stylegate/losses.hpp"
#include "stylegate/nets.hpp"

namespace stylegate {

enum class OptimizerKind { sgd, momentum };

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    OptimizerKind optimizer = OptimizerKind::momentum;
    double momentum = 0.9;
    double max_grad_norm = 0.0; // global L2 clip; 0 disables
    std::uint64_t seed = 1;

    void validate() const
    {
        if (batch_size < 1)
            throw ConfigError("batch_size must be at least 1");
        if (!(learning_rate > 0.0))
            throw ConfigError("learning_rate must be positive");
        if (!(momentum >= 0.0 && momentum < 1.0))
            throw ConfigError("momentum must lie in [0, 1)");
        if (!(max_grad_norm >= 0.0))
            throw ConfigError("max_grad_norm must be non-negative");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double total = 0.0;                       // mean weighted objective
    std::map<std::string, double> parts;      // mean unweighted parts
    std::map<std::string, double> accuracies; // snapshots at epoch end (or running, for classifiers)
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    bool operator==(const TrainHistory& o) const
    {
        if (epochs.size() != o.epochs.size())
            return false;
        for (std::size_t i = 0; i < epochs.size(); ++i) {
            const auto &a = epochs[i], &b = o.epochs[i];
            if (a.epoch != b.epoch || a.total != b.total || a.parts != b.parts || a.accuracies != b.accuracies)
                return false;
        }
        return true;
    }
};

struct TrainResult {
    NetworkCheckpoint checkpoint;
    TrainHistory history;
};

// Momentum SGD on f32 parameters with f64 velocity: v = mu v + g; p -= lr v.
// Plain SGD is the mu = 0 special case. With max_grad_norm > 0 the gradient
// is first rescaled so its global L2 norm does not exceed that bound.
class Optimizer {
public:
    explicit Optimizer(const TrainConfig& cfg)
        : lr_(cfg.learning_rate), mu_(cfg.optimizer == OptimizerKind::momentum ? cfg.momentum : 0.0),
          clip_(cfg.max_grad_norm)
    {
    }

    void step(NetworkCheckpoint& ckpt, Params& working, const Params& grad)
    {
        if (velocity_.tensors.empty())
            velocity_ = Params::zeros_like(ckpt);
        double scale = 1.0;
        if (clip_ > 0.0) {
            double sq = 0.0;
            for (const auto& g : grad.tensors)
                for (double v : g)
                    sq += v * v;
            if (sq > clip_ * clip_)
                scale = clip_ / std::sqrt(sq);
        }
        for (std::size_t t = 0; t < ckpt.tensors.size(); ++t) {
            auto& data = ckpt.tensors[t].data;
            auto& v = velocity_.tensors[t];
            const auto& g = grad.tensors[t];
            auto& w = working.tensors[t];
            for (std::size_t i = 0; i < data.size(); ++i) {
                v[i] = mu_ * v[i] + scale * g[i];
                data[i] = static_cast<float>(static_cast<double>(data[i]) - lr_ * v[i]);
                w[i] = data[i];
            }
        }
    }

private:
    double lr_;
    double mu_;
    double clip_;
    Params velocity_;
};

inline std::size_t argmax_row(const Activation& logits, std::size_t row)
{
    const std::size_t k = logits.item_size();
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
        if (logits[row * k + j] > logits[row * k + best])
            best = j;
    return best;
}

// Predicted class per item (ties resolve to the lowest index).
inline std::vector<std::uint32_t> predict(const NetworkCheckpoint& model, const Dataset& data, std::size_t chunk = 256)
{
    if (model.kind == NetworkKind::generator)
        throw Error("predict: got a generator checkpoint");
    check_input(model, data.shape());
    const Params p = Params::from(model);
    std::vector<std::uint32_t> out;
    out.reserve(data.size());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        idx.clear();
        for (std::size_t i = start; i < std::min(data.size(), start + chunk); ++i)
            idx.push_back(i);
        const auto t = run_classifier(p, data.gather(idx).cast<double>());
        for (std::size_t r = 0; r < idx.size(); ++r)
            out.push_back(static_cast<std::uint32_t>(argmax_row(t.logits, r)));
    }
    return out;
}

// Fraction of items whose argmax logit equals the label.
inline double eval_accuracy(const NetworkCheckpoint& model, const Dataset& data)
{
    if (data.empty())
        throw Error("eval_accuracy: empty dataset");
    if (class_count(model) != data.class_count())
        throw ShapeError("eval_accuracy: model has " + std::to_string(class_count(model)) + " classes, data has " +
                         std::to_string(data.class_count()));
    const auto pred = predict(model, data);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        correct += pred[i] == data.label(i) ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace detail {

inline void require_trainable(const NetworkCheckpoint& init, const Dataset& data, const char* who)
{
    if (init.kind == NetworkKind::generator)
        throw Error(std::string(who) + ": expected a classifier-layout checkpoint");
    check_input(init, data.shape());
    if (class_count(init) != data.class_count())
        throw ShapeError(std::string(who) + ": checkpoint has " + std::to_string(class_count(init)) +
                         " classes, data has " + std::to_string(data.class_count()));
}

// One cross-entropy step on a batch; returns (summed loss, correct count).
inline std::pair<double, std::size_t> classifier_step(const Params& working, const ImageTensor& x,
                                                      std::span<const std::uint32_t> labels, Params& grad)
{
    grad.set_zero();
    const ClassifierTrace t = run_classifier(working, x.cast<double>());
    Activation d_logits;
    const double loss = softmax_cross_entropy(t.logits, labels, &d_logits);
    ClassifierUpstream up;
    up.d_logits = &d_logits;
    backprop_classifier(working, t, up, &grad, nullptr);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < labels.size(); ++r)
        correct += argmax_row(t.logits, r) == labels[r] ? 1 : 0;
    return {loss * static_cast<double>(labels.size()), correct};
}

} // namespace detail

// Minibatch cross-entropy training. History accuracies are running training
// accuracies accumulated during each epoch.
inline TrainResult train_classifier(const Dataset& data, const TrainConfig& cfg, const NetworkCheckpoint& init)
{
    cfg.validate();
    TrainResult res{init, {}};
    if (cfg.epochs == 0)
        return res;
    if (data.empty())
        throw Error("train_classifier: empty dataset with epochs > 0");
    detail::require_trainable(init, data, "train_classifier");

    Params working = Params::from(res.checkpoint);
    Params grad = Params::zeros_like(res.checkpoint);
    Optimizer opt(cfg);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (const auto& idx : epoch_batches(data.size(), cfg.batch_size, cfg.seed, e)) {
            const auto labels = data.gather_labels(idx);
            const auto [l, c] = detail::classifier_step(working, data.gather(idx), labels, grad);
            loss_sum += l;
            correct += c;
            opt.step(res.checkpoint, working, grad);
        }
        EpochRecord rec;
        rec.epoch = e;
        rec.total = loss_sum / static_cast<double>(data.size());
        rec.parts["ce"] = rec.total;
        rec.accuracies["train"] = static_cast<double>(correct) / static_cast<double>(data.size());
        res.history.epochs.push_back(std::move(rec));
    }
    return res;
}

// Fixed number of optimisation steps cycling through reshuffled epochs of `data`.
inline NetworkCheckpoint finetune_steps(const Dataset& data, const TrainConfig& cfg, const NetworkCheckpoint& init,
                                        std::size_t steps)
{
    cfg.validate();
    NetworkCheckpoint ckpt = init;
    if (steps == 0)
        return ckpt;
    if (data.empty())
        throw Error("fine-tuning needs at least one sample");
    detail::require_trainable(init, data, "finetune");
    Params working = Params::from(ckpt);
    Params grad = Params::zeros_like(ckpt);
    Optimizer opt(cfg);
    std::size_t done = 0;
    for (std::size_t e = 0; done < steps; ++e)
        for (const auto& idx : epoch_batches(data.size(), cfg.batch_size, cfg.seed, e)) {
            if (done == steps)
                break;
            const auto labels = data.gather_labels(idx);
            detail::classifier_step(working, data.gather(idx), labels, grad);
            opt.step(ckpt, working, grad);
            ++done;
        }
    return ckpt;
}

// Trains the style generator against a frozen feature net.
inline TrainResult train_generator(const Dataset& content, const StylePatchSet& style, const NetworkCheckpoint& featnet,
                                   const TrainConfig& cfg, const GeneratorLossConfig& gcfg,
                                   const NetworkCheckpoint& init)
{
    cfg.validate();
    gcfg.validate();
    TrainResult res{init, {}};
    if (cfg.epochs == 0)
        return res;
    if (content.empty())
        throw Error("train_generator: empty content dataset");
    if (init.kind != NetworkKind::generator)
        throw Error("train_generator: init is not a generator checkpoint");
    if (featnet.kind == NetworkKind::generator)
        throw Error("train_generator: feature net checkpoint is a generator");
    check_input(init, content.shape());
    check_input(featnet, content.shape());
    if (style.patches.item_shape() != content.shape())
        throw ShapeError("train_generator: style patches " + style.patches.item_shape().str() +
                         " do not match content shape " + content.shape().str());

    const Params feat = Params::from(featnet);
    Params working = Params::from(res.checkpoint);
    Params grad = Params::zeros_like(res.checkpoint);
    Optimizer opt(cfg);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        Rng style_rng(derive_seed(cfg.seed, "generator-style-draw", e));
        PerceptualParts sums;
        double total = 0.0;
        for (const auto& idx : epoch_batches(content.size(), cfg.batch_size, cfg.seed, e)) {
            const Activation x = content.gather(idx).cast<double>();
            Activation patches(idx.size(), style.patches.item_shape());
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const auto src = style.patches.item(style_rng.below(style.size()));
                std::copy(src.begin(), src.end(), patches.item(k).begin());
            }
            const GeneratorTrace gt = run_generator(working, x);
            Activation d_out;
            const auto loss = perceptual_loss_step(feat, x, gt.output, patches, gcfg, &d_out);
            grad.set_zero();
            backprop_generator(working, gt, d_out, &grad, nullptr);
            opt.step(res.checkpoint, working, grad);

            const double w = static_cast<double>(idx.size());
            total += loss.total * w;
            sums.content += loss.parts.content * w;
            sums.style += loss.parts.style * w;
            sums.tv += loss.parts.tv * w;
        }
        const double n = static_cast<double>(content.size());
        EpochRecord rec;
        rec.epoch = e;
        rec.total = total / n;
        rec.parts = {{"content", sums.content / n}, {"style", sums.style / n}, {"tv", sums.tv / n}};
        res.history.epochs.push_back(std::move(rec));
    }
    return res;
}

// Mean perceptual parts of the generator over `content` (no training).
inline PerceptualLoss mean_perceptual_loss(const Dataset& content, const StylePatchSet& style,
                                           const NetworkCheckpoint& featnet, const NetworkCheckpoint& generator,
                                           const GeneratorLossConfig& gcfg, std::size_t chunk = 64)
{
    const Params feat = Params::from(featnet), gen = Params::from(generator);
    const Activation patches = style.patches.cast<double>();
    PerceptualLoss acc;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < content.size(); start += chunk) {
        idx.clear();
        for (std::size_t i = start; i < std::min(content.size(), start + chunk); ++i)
            idx.push_back(i);
        const Activation x = content.gather(idx).cast<double>();
        const auto out = run_generator(gen, x).output;
        const auto l = perceptual_loss_step(feat, x, out, patches, gcfg, nullptr);
        const double w = static_cast<double>(idx.size());
        acc.total += l.total * w;
        acc.parts.content += l.parts.content * w;
        acc.parts.style += l.parts.style * w;
        acc.parts.tv += l.parts.tv * w;
    }
    const double n = static_cast<double>(content.size());
    acc.total /= n;
    acc.parts.content /= n;
    acc.parts.style /= n;
    acc.parts.tv /= n;
    return acc;
}

// The three aligned corpora consumed by license training.
struct TripletSource {
    const Dataset& original;
    const Dataset& licensed;
    const StylePatchSet& style;
};

// Sets on which per-epoch license/original accuracies are measured.
struct LicenseEvalSets {
    const Dataset* original = nullptr;
    const Dataset* licensed = nullptr;
};

inline TrainResult train_license_model(const TripletSource& source, const TrainConfig& cfg,
                                       const LicenseLossConfig& lcfg, const NetworkCheckpoint& init,
                                       LicenseEvalSets eval = {})
{
    cfg.validate();
    lcfg.validate();
    TrainResult res{init, {}};
    if (cfg.epochs == 0)
        return res;
    if (source.original.empty())
        throw Error("train_license_model: empty corpus with epochs > 0");
    TripletStream::check_alignment(source.original, source.licensed);
    detail::require_trainable(init, source.licensed, "train_license_model");
    if (init.kind != NetworkKind::classifier)
        throw Error("train_license_model: init must be a classifier checkpoint");
    const Dataset& eval_orig = eval.original ? *eval.original : source.original;
    const Dataset& eval_lic = eval.licensed ? *eval.licensed : source.licensed;

    Params working = Params::from(res.checkpoint);
    Params grad = Params::zeros_like(res.checkpoint);
    Optimizer opt(cfg);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        TripletStream stream(source.original, source.licensed, source.style, cfg.batch_size, cfg.seed, e);
        LicenseLossParts sums;
        double total = 0.0;
        while (auto batch = stream.next()) {
            grad.set_zero();
            const auto loss = license_loss_step(working, *batch, lcfg, &grad);
            opt.step(res.checkpoint, working, grad);
            const double w = static_cast<double>(batch->size());
            total += loss.total * w;
            sums.ce += loss.parts.ce * w;
            sums.contrastive += loss.parts.contrastive * w;
            sums.style += loss.parts.style * w;
        }
        const double n = static_cast<double>(source.original.size());
        EpochRecord rec;
        rec.epoch = e;
        rec.total = total / n;
        rec.parts = {{"ce", sums.ce / n}, {"contrastive", sums.contrastive / n}, {"style", sums.style / n}};
        rec.accuracies["license"] = eval_accuracy(res.checkpoint, eval_lic);
        rec.accuracies["original"] = eval_accuracy(res.checkpoint, eval_orig);
        res.history.epochs.push_back(std::move(rec));
    }
    return res;
}

} // namespace stylegate
