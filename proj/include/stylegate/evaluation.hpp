#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stylegate/datasets.hpp"
#include "stylegate/training.hpp"

namespace stylegate {

struct MetricsReport {
    std::string run_id;
    std::uint64_t config_fingerprint = 0;
    std::uint64_t seed = 0;
    std::map<std::string, double> metrics;      // accuracies in [0,1], gaps in percentage points
    std::map<std::string, std::int64_t> sizes;

    double metric(const std::string& name) const
    {
        auto it = metrics.find(name);
        if (it == metrics.end())
            throw Error("report has no metric '" + name + "'");
        return it->second;
    }

    bool operator==(const MetricsReport&) const = default;
};

// Accuracies are kept at 4 decimals; gaps are derived from the rounded
// accuracies so they can be recomputed from the report itself.
inline double round4(double v) { return std::round(v * 1e4) / 1e4; }
inline double gap_points(double a, double b) { return round4(100.0 * (a - b)); }

inline double rounded_accuracy(const NetworkCheckpoint& model, const Dataset& data)
{
    return round4(eval_accuracy(model, data));
}

inline MetricsReport usability_report(const NetworkCheckpoint& baseline, const NetworkCheckpoint& license_model,
                                      const Dataset& original_test, const Dataset& licensed_test)
{
    MetricsReport r;
    const double base = rounded_accuracy(baseline, original_test);
    const double lic = rounded_accuracy(license_model, licensed_test);
    const double lic_orig = rounded_accuracy(license_model, original_test);
    r.metrics["baseline_acc_original"] = base;
    r.metrics["license_acc_licensed"] = lic;
    r.metrics["license_acc_original"] = lic_orig;
    r.metrics["usability_gap"] = gap_points(base, lic);
    r.metrics["lockout_gap"] = gap_points(lic, lic_orig);
    r.sizes["original_test"] = static_cast<std::int64_t>(original_test.size());
    r.sizes["licensed_test"] = static_cast<std::int64_t>(licensed_test.size());
    return r;
}

inline MetricsReport privacy_report(const NetworkCheckpoint& baseline, const Dataset& original_test,
                                    const Dataset& stylized_test)
{
    if (original_test.size() != stylized_test.size())
        throw Error("privacy_report: stylized test set size differs from the original test set");
    MetricsReport r;
    const double orig = rounded_accuracy(baseline, original_test);
    const double sty = rounded_accuracy(baseline, stylized_test);
    r.metrics["baseline_acc_original"] = orig;
    r.metrics["baseline_acc_stylized"] = sty;
    r.metrics["privacy_drop"] = gap_points(orig, sty);
    r.sizes["original_test"] = static_cast<std::int64_t>(original_test.size());
    r.sizes["stylized_test"] = static_cast<std::int64_t>(stylized_test.size());
    return r;
}

// Attacker substitutes an independently trained generator for the license generator.
inline MetricsReport forged_style_attack(const NetworkCheckpoint& license_model, const Dataset& original_test,
                                         const NetworkCheckpoint& forged_generator,
                                         const NetworkCheckpoint& true_generator)
{
    if (forged_generator.empty())
        throw Error("forged_style_attack: missing forged generator checkpoint");
    if (true_generator.empty())
        throw Error("forged_style_attack: missing true generator checkpoint");
    MetricsReport r;
    const double acc_true = rounded_accuracy(license_model, stylize_dataset(original_test, true_generator));
    const double acc_forged = forged_generator == true_generator
                                  ? acc_true
                                  : rounded_accuracy(license_model, stylize_dataset(original_test, forged_generator));
    const double acc_orig = rounded_accuracy(license_model, original_test);
    r.metrics["acc_true_license"] = acc_true;
    r.metrics["acc_forged_license"] = acc_forged;
    r.metrics["acc_original"] = acc_orig;
    r.metrics["forgery_advantage"] = gap_points(acc_forged, acc_orig);
    r.sizes["original_test"] = static_cast<std::int64_t>(original_test.size());
    return r;
}

// Fine-tunes a copy of the license model on leaked original-domain data with
// plain cross-entropy for `budget` steps.
inline MetricsReport finetune_attack(const NetworkCheckpoint& license_model, const Dataset& leak, std::size_t budget,
                                     const TrainConfig& cfg, const Dataset& original_test, const Dataset& licensed_test)
{
    if (leak.empty() && budget > 0)
        throw Error("finetune_attack: empty leak set with a positive step budget");
    MetricsReport r;
    const double pre_orig = rounded_accuracy(license_model, original_test);
    const double pre_lic = rounded_accuracy(license_model, licensed_test);
    double post_orig = pre_orig, post_lic = pre_lic;
    if (budget > 0) {
        const NetworkCheckpoint tuned = finetune_steps(leak, cfg, license_model, budget);
        post_orig = rounded_accuracy(tuned, original_test);
        post_lic = rounded_accuracy(tuned, licensed_test);
    }
    r.metrics["pre_acc_original"] = pre_orig;
    r.metrics["pre_acc_licensed"] = pre_lic;
    r.metrics["post_acc_original"] = post_orig;
    r.metrics["post_acc_licensed"] = post_lic;
    r.metrics["recovery"] = gap_points(post_orig, pre_orig);
    r.sizes["leak"] = static_cast<std::int64_t>(leak.size());
    r.sizes["budget"] = static_cast<std::int64_t>(budget);
    r.sizes["original_test"] = static_cast<std::int64_t>(original_test.size());
    r.sizes["licensed_test"] = static_cast<std::int64_t>(licensed_test.size());
    return r;
}

// Runs finetune_attack for several leak sizes drawn from `pool` (a seeded
// prefix of a shuffle); metrics are prefixed "leak_<n>.".
inline MetricsReport finetune_sweep(const NetworkCheckpoint& license_model, const Dataset& pool,
                                    const std::vector<std::size_t>& leak_sizes, std::size_t budget,
                                    const TrainConfig& cfg, const Dataset& original_test,
                                    const Dataset& licensed_test)
{
    MetricsReport r;
    const auto order = shuffled_indices(pool.size(), derive_seed(cfg.seed, "leak"));
    for (auto n : leak_sizes) {
        if (n > pool.size())
            throw Error("leak size " + std::to_string(n) + " exceeds the available pool of " +
                        std::to_string(pool.size()));
        const std::vector<std::size_t> idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
        const auto one = finetune_attack(license_model, pool.subset(idx), budget, cfg, original_test, licensed_test);
        const std::string prefix = "leak_" + std::to_string(n) + ".";
        for (const auto& [k, v] : one.metrics)
            r.metrics[prefix + k] = v;
        r.sizes[prefix + "leak"] = static_cast<std::int64_t>(n);
    }
    r.sizes["budget"] = static_cast<std::int64_t>(budget);
    r.sizes["original_test"] = static_cast<std::int64_t>(original_test.size());
    r.sizes["licensed_test"] = static_cast<std::int64_t>(licensed_test.size());
    return r;
}

} // namespace stylegate
