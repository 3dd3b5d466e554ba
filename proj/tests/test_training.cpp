#include <gtest/gtest.h>

#include <cmath>

#include "stylegate/datasets.hpp"
#include "stylegate/nets.hpp"
#include "stylegate/training.hpp"

using namespace stylegate;

namespace {

const ImageShape small{1, 8, 8};

TrainConfig config(std::size_t epochs, double lr, std::size_t batch = 8, std::uint64_t seed = 3)
{
    TrainConfig c;
    c.epochs = epochs;
    c.learning_rate = lr;
    c.batch_size = batch;
    c.seed = seed;
    return c;
}

StylePatchSet patches(ImageShape shape, std::size_t n = 16)
{
    return make_style_patches(make_style_source("waves", {shape.channels, 32, 32}, 3), shape, n, 5);
}

// Licensed counterpart of `d`: pixel-wise inversion keeps labels and ranges.
Dataset inverted(const Dataset& d)
{
    ImageTensor img = d.images();
    for (auto& v : img.values())
        v = 1.0f - v;
    return Dataset(img, d.labels(), d.class_count());
}

} // namespace

TEST(Optimizer, SgdAndMomentumUpdates)
{
    NetworkCheckpoint ckpt = init_network(NetworkKind::classifier, small, 2, 1);
    const NetworkCheckpoint start = ckpt;
    Params working = Params::from(ckpt);
    Params grad = Params::zeros_like(ckpt);
    for (auto& t : grad.tensors)
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = 0.01 * static_cast<double>(i % 7);

    auto cfg = config(1, 0.5);
    cfg.momentum = 0.9;
    Optimizer opt(cfg);
    opt.step(ckpt, working, grad);
    opt.step(ckpt, working, grad);
    // two momentum steps with a constant gradient move by lr*g*(1 + (1 + mu))
    for (std::size_t t = 0; t < ckpt.tensors.size(); ++t)
        for (std::size_t i = 0; i < ckpt.tensors[t].data.size(); ++i) {
            const double want = static_cast<double>(start.tensors[t].data[i]) - 0.5 * grad.tensors[t][i] * 2.9;
            EXPECT_NEAR(ckpt.tensors[t].data[i], want, 1e-6);
            EXPECT_EQ(working.tensors[t][i], static_cast<double>(ckpt.tensors[t].data[i]));
        }

    NetworkCheckpoint plain = start;
    Params w2 = Params::from(plain);
    cfg.optimizer = OptimizerKind::sgd;
    Optimizer sgd(cfg);
    sgd.step(plain, w2, grad);
    sgd.step(plain, w2, grad);
    for (std::size_t i = 0; i < plain.tensors[0].data.size(); ++i)
        EXPECT_NEAR(plain.tensors[0].data[i], start.tensors[0].data[i] - 0.5 * grad.tensors[0][i] * 2.0, 1e-6);
}

TEST(Optimizer, ClipsGlobalGradientNorm)
{
    const NetworkCheckpoint start = init_network(NetworkKind::classifier, small, 2, 1);
    Params grad = Params::zeros_like(start);
    double sq = 0;
    for (auto& t : grad.tensors)
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i] = 0.5 - static_cast<double>(i % 3) * 0.25;
            sq += t[i] * t[i];
        }
    const double norm = std::sqrt(sq);
    auto cfg = config(1, 0.1);
    cfg.optimizer = OptimizerKind::sgd;

    for (double clip : {norm / 4.0, norm * 2.0}) {
        cfg.max_grad_norm = clip;
        NetworkCheckpoint ckpt = start;
        Params w = Params::from(ckpt);
        Optimizer opt(cfg);
        opt.step(ckpt, w, grad);
        const double scale = std::min(1.0, clip / norm);
        double moved = 0;
        for (std::size_t t = 0; t < ckpt.tensors.size(); ++t)
            for (std::size_t i = 0; i < ckpt.tensors[t].data.size(); ++i) {
                const double d = static_cast<double>(start.tensors[t].data[i]) - ckpt.tensors[t].data[i];
                EXPECT_NEAR(d, 0.1 * scale * grad.tensors[t][i], 1e-6);
                moved += d * d;
            }
        EXPECT_NEAR(std::sqrt(moved), 0.1 * std::min(norm, clip), 1e-4);
    }
    cfg.max_grad_norm = -1;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Training, ZeroEpochsReturnInitUnchanged)
{
    const Dataset d = generate_synthetic(1, 4, 2, small);
    const auto cls = init_network(NetworkKind::classifier, small, 2, 2);
    const auto feat = init_network(NetworkKind::featurenet, small, 2, 3);
    const auto gen = init_network(NetworkKind::generator, small, 0, 4);
    const auto cfg = config(0, 0.1);

    const auto a = train_classifier(d, cfg, cls);
    EXPECT_EQ(a.checkpoint, cls);
    EXPECT_TRUE(a.history.epochs.empty());

    const auto b = train_generator(d, patches(small), feat, cfg, GeneratorLossConfig{}, gen);
    EXPECT_EQ(b.checkpoint, gen);
    EXPECT_TRUE(b.history.epochs.empty());

    const Dataset lic = inverted(d);
    const auto style = patches(small);
    const auto c = train_license_model({d, lic, style}, cfg, LicenseLossConfig{}, cls);
    EXPECT_EQ(c.checkpoint, cls);
    EXPECT_TRUE(c.history.epochs.empty());
}

TEST(Training, OverfitsEightSamples)
{
    const Dataset d = generate_synthetic(4, 2, 4, small);
    ASSERT_EQ(d.size(), 8u);
    // 100 epochs of two batches: 200 steps
    const auto res = train_classifier(d, config(100, 0.05, 4), init_network(NetworkKind::classifier, small, 4, 9));
    EXPECT_EQ(eval_accuracy(res.checkpoint, d), 1.0);
    EXPECT_LT(res.history.epochs.back().total, res.history.epochs.front().total);
}

TEST(Training, ClassifierIsDeterministic)
{
    const Dataset d = generate_synthetic(5, 8, 3, small);
    const auto init = init_network(NetworkKind::classifier, small, 3, 1);
    const auto a = train_classifier(d, config(3, 0.05), init);
    const auto b = train_classifier(d, config(3, 0.05), init);
    EXPECT_EQ(a.checkpoint, b.checkpoint);
    EXPECT_EQ(a.history, b.history);
    const auto c = train_classifier(d, config(3, 0.05, 8, 4), init);
    EXPECT_NE(a.checkpoint, c.checkpoint);
}

TEST(Training, ClassifierLossDescendsEarly)
{
    const Dataset d = generate_synthetic(6, 40, 4, {1, 16, 16});
    const auto res =
        train_classifier(d, config(3, 0.02, 32), init_network(NetworkKind::classifier, {1, 16, 16}, 4, 2));
    ASSERT_EQ(res.history.epochs.size(), 3u);
    EXPECT_LE(res.history.epochs[1].total, res.history.epochs[0].total);
    EXPECT_LE(res.history.epochs[2].total, res.history.epochs[1].total);
    for (const auto& e : res.history.epochs) {
        EXPECT_EQ(e.parts.at("ce"), e.total);
        EXPECT_GE(e.accuracies.at("train"), 0.0);
        EXPECT_LE(e.accuracies.at("train"), 1.0);
    }
}

TEST(Training, LicenseWithCrossEntropyOnlyMatchesClassifierOnLicensedData)
{
    const Dataset d = generate_synthetic(7, 6, 3, small);
    const Dataset lic = inverted(d);
    const auto style = patches(small);
    const auto init = init_network(NetworkKind::classifier, small, 3, 5);
    LicenseLossConfig lc;
    lc.beta = 0;
    lc.gamma = 0;
    const auto cfg = config(2, 0.05, 5);
    const auto a = train_license_model({d, lic, style}, cfg, lc, init);
    const auto b = train_classifier(lic, cfg, init);
    EXPECT_EQ(a.checkpoint.tensors, b.checkpoint.tensors);
    for (std::size_t e = 0; e < 2; ++e)
        EXPECT_NEAR(a.history.epochs[e].parts.at("ce"), b.history.epochs[e].total, 1e-12);
}

TEST(Training, LicenseRunIsDeterministicAndDescends)
{
    const Dataset d = generate_synthetic(8, 12, 2, small);
    const Dataset lic = inverted(d);
    const auto style = patches(small);
    const auto init = init_network(NetworkKind::classifier, small, 2, 6);
    LicenseLossConfig lc;
    lc.margin = 4.0;
    const auto a = train_license_model({d, lic, style}, config(4, 0.02), lc, init);
    const auto b = train_license_model({d, lic, style}, config(4, 0.02), lc, init);
    EXPECT_EQ(a.checkpoint, b.checkpoint);
    EXPECT_EQ(a.history, b.history);
    EXPECT_LT(a.history.epochs.back().total, a.history.epochs.front().total);
    for (const auto& e : a.history.epochs) {
        EXPECT_NEAR(e.total, lc.alpha * e.parts.at("ce") + lc.beta * e.parts.at("contrastive") +
                                 lc.gamma * e.parts.at("style"),
                    1e-9);
        EXPECT_TRUE(e.accuracies.count("license") && e.accuracies.count("original"));
    }
}

TEST(Training, LicenseRejectsMisalignedCorpora)
{
    const Dataset d = generate_synthetic(9, 4, 2, small);
    const Dataset shorter = generate_synthetic(9, 3, 2, small);
    const auto style = patches(small);
    const auto init = init_network(NetworkKind::classifier, small, 2, 6);
    EXPECT_THROW(train_license_model({d, shorter, style}, config(1, 0.02), LicenseLossConfig{}, init), Error);
}

TEST(Training, GeneratorReducesHeldOutStyleLoss)
{
    const Dataset train = generate_synthetic(10, 16, 2, small);
    const Dataset held = generate_synthetic(11, 8, 2, small);
    const auto feat = train_classifier(train, config(4, 0.05), init_network(NetworkKind::featurenet, small, 2, 7));
    const auto style = patches(small, 32);
    GeneratorLossConfig gc;
    gc.style_weight = 5000;
    const auto init = init_network(NetworkKind::generator, small, 0, 8);
    const auto before = mean_perceptual_loss(held, style, feat.checkpoint, init, gc);
    const auto res = train_generator(train, style, feat.checkpoint, config(6, 0.001), gc, init);
    const auto after = mean_perceptual_loss(held, style, feat.checkpoint, res.checkpoint, gc);
    EXPECT_LT(after.parts.style, before.parts.style);
    EXPECT_LT(after.total, before.total);
    ASSERT_EQ(res.history.epochs.size(), 6u);

    const Dataset out = stylize_dataset(held, res.checkpoint);
    for (float v : out.images().values()) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
    }
}

TEST(Training, FinetuneStepBudget)
{
    const Dataset d = generate_synthetic(12, 4, 2, small);
    const auto init = init_network(NetworkKind::classifier, small, 2, 1);
    EXPECT_EQ(finetune_steps(d, config(1, 0.05, 4), init, 0), init);
    const auto one = finetune_steps(d, config(1, 0.05, 4), init, 1);
    EXPECT_NE(one, init);
    // more steps than one epoch of batches cycles into reshuffled epochs
    const auto many = finetune_steps(d, config(1, 0.05, 4), init, 5);
    EXPECT_NE(many, one);
    EXPECT_THROW(finetune_steps(Dataset(small, 2), config(1, 0.05), init, 1), Error);
}

TEST(Training, ConfigValidation)
{
    auto c = config(1, 0.0);
    EXPECT_THROW(c.validate(), ConfigError);
    c = config(1, 0.1, 0);
    EXPECT_THROW(c.validate(), ConfigError);
    c = config(1, 0.1);
    c.momentum = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    const Dataset d = generate_synthetic(1, 2, 2, small);
    EXPECT_THROW(train_classifier(d, config(1, 0.1), init_network(NetworkKind::classifier, small, 3, 1)), ShapeError);
    EXPECT_THROW(train_classifier(d, config(1, 0.1), init_network(NetworkKind::generator, small, 0, 1)), Error);
}
