#include <gtest/gtest.h>

#include <algorithm>

#include "stylegate/evaluation.hpp"

using namespace stylegate;

namespace {

const ImageShape tiny{1, 8, 8};

// Classifier whose prediction is fixed by the final bias alone: all weights
// zero, so every input maps to argmax(bias).
NetworkCheckpoint constant_classifier(std::size_t classes, std::uint32_t winner)
{
    auto ckpt = init_network(NetworkKind::classifier, tiny, classes, 1);
    for (auto& t : ckpt.tensors)
        std::fill(t.data.begin(), t.data.end(), 0.0f);
    ckpt.tensors.back().data[winner] = 1.0f;
    return ckpt;
}

Dataset labelled(std::vector<std::uint32_t> labels, std::size_t classes)
{
    ImageTensor img(labels.size(), tiny, 0.5f);
    return Dataset(img, std::move(labels), classes);
}

} // namespace

TEST(Accuracy, CountsArgmaxHits)
{
    const auto model = constant_classifier(3, 1);
    EXPECT_NEAR(eval_accuracy(model, labelled({1, 1, 2}, 3)), 2.0 / 3.0, 1e-15);
    EXPECT_EQ(rounded_accuracy(model, labelled({1, 1, 2}, 3)), 0.6667);
    EXPECT_EQ(eval_accuracy(model, labelled({0, 2}, 3)), 0.0);
    EXPECT_THROW(eval_accuracy(model, Dataset(tiny, 3)), Error);
    EXPECT_THROW(eval_accuracy(model, labelled({0}, 4)), ShapeError);
}

TEST(Accuracy, PermutationInvariant)
{
    const Dataset d = generate_synthetic(3, 10, 3, tiny);
    auto model = init_network(NetworkKind::classifier, tiny, 3, 4);
    std::vector<std::size_t> idx(d.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    Rng rng(5);
    rng.shuffle(idx);
    EXPECT_EQ(eval_accuracy(model, d), eval_accuracy(model, d.subset(idx)));
}

TEST(Accuracy, TiesResolveToLowestIndex)
{
    auto model = constant_classifier(3, 0);
    model.tensors.back().data[0] = 0.0f; // all logits equal
    EXPECT_EQ(predict(model, labelled({2, 1}, 3)), (std::vector<std::uint32_t>{0, 0}));
}

TEST(Reports, UsabilityGapsRecomputeFromAccuracies)
{
    const Dataset d = generate_synthetic(6, 10, 3, tiny);
    const auto baseline = init_network(NetworkKind::classifier, tiny, 3, 7);
    const auto license = init_network(NetworkKind::classifier, tiny, 3, 8);
    const Dataset lic = generate_synthetic(9, 10, 3, tiny);
    const auto r = usability_report(baseline, license, d, lic);
    EXPECT_EQ(r.metric("usability_gap"),
              round4(100.0 * (r.metric("baseline_acc_original") - r.metric("license_acc_licensed"))));
    EXPECT_EQ(r.metric("lockout_gap"),
              round4(100.0 * (r.metric("license_acc_licensed") - r.metric("license_acc_original"))));
    EXPECT_EQ(r.metric("baseline_acc_original"), round4(eval_accuracy(baseline, d)));
    EXPECT_EQ(r.sizes.at("original_test"), 30);
    EXPECT_THROW(r.metric("missing"), Error);
}

TEST(Reports, PinnedGapValues)
{
    // baseline always right, license model always wrong on licensed data
    const auto right = constant_classifier(2, 1), wrong = constant_classifier(2, 0);
    const Dataset ones = labelled({1, 1, 1, 1}, 2);
    const auto u = usability_report(right, wrong, ones, ones);
    EXPECT_EQ(u.metric("usability_gap"), 100.0);
    EXPECT_EQ(u.metric("lockout_gap"), 0.0);
    const Dataset mixed = labelled({1, 0, 1, 1}, 2);
    const auto p = privacy_report(right, ones, mixed);
    EXPECT_EQ(p.metric("baseline_acc_stylized"), 0.75);
    EXPECT_EQ(p.metric("privacy_drop"), 25.0);
    EXPECT_THROW(privacy_report(right, ones, labelled({1}, 2)), Error);
}

TEST(Reports, ForgedStyleAttack)
{
    const Dataset d = generate_synthetic(10, 6, 2, tiny);
    const auto model = init_network(NetworkKind::classifier, tiny, 2, 11);
    const auto g1 = init_network(NetworkKind::generator, tiny, 0, 12);
    const auto g2 = init_network(NetworkKind::generator, tiny, 0, 13);
    const auto r = forged_style_attack(model, d, g2, g1);
    EXPECT_EQ(r.metric("acc_true_license"), round4(eval_accuracy(model, stylize_dataset(d, g1))));
    EXPECT_EQ(r.metric("acc_forged_license"), round4(eval_accuracy(model, stylize_dataset(d, g2))));
    EXPECT_EQ(r.metric("forgery_advantage"),
              round4(100.0 * (r.metric("acc_forged_license") - r.metric("acc_original"))));
    const auto same = forged_style_attack(model, d, g1, g1);
    EXPECT_EQ(same.metric("acc_forged_license"), same.metric("acc_true_license"));
    EXPECT_THROW(forged_style_attack(model, d, NetworkCheckpoint{}, g1), Error);
}

TEST(Reports, FinetuneAttack)
{
    const Dataset d = generate_synthetic(14, 6, 2, tiny);
    const auto model = init_network(NetworkKind::classifier, tiny, 2, 15);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.learning_rate = 0.05;

    const auto none = finetune_attack(model, d, 0, cfg, d, d);
    EXPECT_EQ(none.metric("recovery"), 0.0);
    EXPECT_EQ(none.metric("post_acc_original"), none.metric("pre_acc_original"));
    EXPECT_EQ(none.metric("post_acc_licensed"), none.metric("pre_acc_licensed"));
    EXPECT_NO_THROW(finetune_attack(model, Dataset(tiny, 2), 0, cfg, d, d));
    EXPECT_THROW(finetune_attack(model, Dataset(tiny, 2), 3, cfg, d, d), Error);

    const auto some = finetune_attack(model, d, 10, cfg, d, d);
    EXPECT_EQ(some.metric("recovery"),
              round4(100.0 * (some.metric("post_acc_original") - some.metric("pre_acc_original"))));
    EXPECT_EQ(some.sizes.at("budget"), 10);

    const auto sweep = finetune_sweep(model, d, {2, 8}, 5, cfg, d, d);
    EXPECT_EQ(sweep.sizes.at("leak_2.leak"), 2);
    EXPECT_TRUE(sweep.metrics.count("leak_8.recovery"));
    EXPECT_EQ(sweep, finetune_sweep(model, d, {2, 8}, 5, cfg, d, d));
    EXPECT_THROW(finetune_sweep(model, d, {13}, 5, cfg, d, d), Error);
}

TEST(Reports, RoundingHelpers)
{
    EXPECT_EQ(round4(2.0 / 3.0), 0.6667);
    EXPECT_EQ(round4(0.12344), 0.1234);
    EXPECT_EQ(gap_points(0.9, 0.45), 45.0);
}
