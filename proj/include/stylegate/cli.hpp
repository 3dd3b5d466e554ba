#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stylegate/checkpoint.hpp"
#include "stylegate/config.hpp"
#include "stylegate/datasets.hpp"
#include "stylegate/evaluation.hpp"
#include "stylegate/gradcheck.hpp"
#include "stylegate/report.hpp"
#include "stylegate/training.hpp"

namespace stylegate {

namespace fs = std::filesystem;

inline const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{
        "train-featurenet", "train-generator", "stylize",     "train-baseline", "train-license",
        "eval-usability",   "eval-privacy",    "attack-forge", "attack-finetune", "gradcheck"};
    return names;
}

inline std::string usage_text()
{
    std::string s = "usage: stylegate <command> --config <path> [--out <dir>] [--seed <u64>]\n\ncommands:\n";
    for (const auto& c : command_names())
        s += "  " + c + "\n";
    return s;
}

// Command-line overrides applied on top of the parsed config file.
struct CommandArgs {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
};

struct Corpus {
    Dataset train;
    Dataset test;
};

inline Corpus load_corpus(const RunConfig& cfg)
{
    const auto& c = cfg.corpus;
    if (c.kind == CorpusKind::synthetic)
        return {generate_synthetic(c.synthetic_seed, c.train_per_class, c.classes, c.shape),
                generate_synthetic(derive_seed(c.synthetic_seed, "test"), c.test_per_class, c.classes, c.shape)};
    Corpus out{load_idx(c.train_images, c.train_labels, c.classes), load_idx(c.test_images, c.test_labels, c.classes)};
    if (c.train_limit)
        out.train = out.train.head(std::min(c.train_limit, out.train.size()));
    if (c.test_limit)
        out.test = out.test.head(std::min(c.test_limit, out.test.size()));
    for (const Dataset* d : {&out.train, &out.test})
        if (d->shape() != c.shape)
            throw ConfigError("IDX images have shape " + d->shape().str() + " but the config declares " + c.shape.str());
    return out;
}

inline StylePatchSet load_style_patches(const StyleSourceConfig& s, ImageShape shape, const std::string& role)
{
    ImageTensor source;
    std::string id;
    if (s.image.empty()) {
        source = make_style_source(s.pattern, {shape.channels, s.source_size, s.source_size}, s.seed);
        id = role + ":" + s.pattern + ":" + std::to_string(s.seed);
    } else {
        source = load_style_image(s.image, shape.channels);
        id = role + ":" + fs::path(s.image).filename().string();
    }
    return make_style_patches(source, shape, s.patches, s.patch_seed, s.flips, id);
}

namespace cli_detail {

// One command invocation: owns its run directory and knows where upstream artifacts live.
class Run {
public:
    Run(const std::string& command, const RunConfig& cfg, std::ostream& log)
        : cfg_(cfg), root_(cfg.out_dir), dir_(root_ / command), log_(log)
    {
        stamp_.config_fingerprint = cfg.fingerprint();
        stamp_.seed = cfg.seed;
        stamp_.run_id = command + "-" + json_detail::hex64(stamp_.config_fingerprint);
        fs::create_directories(root_);
        if (!fs::create_directory(dir_))
            throw IoError("run directory already exists: " + dir_.string());
        write_text_file(config_to_text(cfg), (dir_ / "config.txt").string());
    }

    const RunConfig& cfg() const { return cfg_; }
    std::ostream& log() { return log_; }
    std::string path(const std::string& file) const { return (dir_ / file).string(); }

    std::string upstream(const std::string& command, const std::string& file, const std::string& override_path,
                         const std::string& key) const
    {
        if (!override_path.empty())
            return override_path;
        const fs::path p = root_ / command / file;
        if (!fs::exists(p))
            throw IoError("missing upstream artifact " + p.string() + " (run '" + command + "' first or set '" + key +
                          "')");
        return p.string();
    }

    NetworkCheckpoint load(const std::string& command, const std::string& file, const std::string& override_path,
                           const std::string& key) const
    {
        return load_checkpoint(upstream(command, file, override_path, key));
    }

    // Stylized train/test sets written by the stylize command.
    Corpus load_stylized() const
    {
        const std::string dir = cfg_.stylized_dir.empty()
                                    ? fs::path(upstream("stylize", "test-images.idx", "", "stylized_dir")).parent_path().string()
                                    : cfg_.stylized_dir;
        const auto at = [&](const char* f) { return (fs::path(dir) / f).string(); };
        return {load_idx(at("train-images.idx"), at("train-labels.idx"), cfg_.corpus.classes),
                load_idx(at("test-images.idx"), at("test-labels.idx"), cfg_.corpus.classes)};
    }

    void save(NetworkCheckpoint ckpt, const std::string& file, std::uint64_t training_seed)
    {
        ckpt.training_seed = training_seed;
        ckpt.config_fingerprint = stamp_.config_fingerprint;
        save_checkpoint(ckpt, path(file));
        log_ << "  wrote " << path(file) << "\n";
    }

    void history(const TrainHistory& h) { write_report(h, stamp_, path("history.json")); }

    void report(MetricsReport r)
    {
        r.run_id = stamp_.run_id;
        r.seed = stamp_.seed;
        r.config_fingerprint = stamp_.config_fingerprint;
        write_report(r, path("report.json"));
        for (const auto& [k, v] : r.metrics)
            log_ << "  " << k << " = " << json_detail::fixed4(v) << "\n";
    }

private:
    RunConfig cfg_;
    fs::path root_, dir_;
    RunStamp stamp_;
    std::ostream& log_;
};

inline std::int64_t count(std::size_t n) { return static_cast<std::int64_t>(n); }

inline TrainResult train_stage(Run& run, NetworkKind kind, const Dataset& data, const StageConfig& stage,
                               const std::string& purpose)
{
    const auto& cfg = run.cfg();
    const TrainConfig tc = cfg.train_config(stage, purpose);
    const auto init = init_network(kind, cfg.corpus.shape, cfg.corpus.classes, derive_seed(cfg.seed, purpose + "-init"));
    auto res = train_classifier(data, tc, init);
    run.save(res.checkpoint, purpose + ".ckpt", tc.seed);
    run.history(res.history);
    return res;
}

inline TrainResult train_generator_stage(Run& run, const Dataset& content, const StylePatchSet& style,
                                         const NetworkCheckpoint& featnet, const std::string& purpose)
{
    const auto& cfg = run.cfg();
    const TrainConfig tc = cfg.train_config(cfg.generator, purpose);
    const auto init = init_network(NetworkKind::generator, cfg.corpus.shape, 0, derive_seed(cfg.seed, purpose + "-init"));
    auto res = train_generator(content, style, featnet, tc, cfg.generator_loss, init);
    run.save(res.checkpoint, purpose + ".ckpt", tc.seed);
    run.history(res.history);
    return res;
}

inline double ratio(double after, double before) { return before > 0.0 ? after / before : 0.0; }

inline int train_featurenet_cmd(Run& run)
{
    const Corpus corpus = load_corpus(run.cfg());
    const auto res = train_stage(run, NetworkKind::featurenet, corpus.train, run.cfg().featurenet, "featurenet");
    MetricsReport r;
    r.metrics["test_accuracy"] = rounded_accuracy(res.checkpoint, corpus.test);
    r.sizes["train"] = count(corpus.train.size());
    r.sizes["test"] = count(corpus.test.size());
    run.report(r);
    return 0;
}

inline int train_generator_cmd(Run& run)
{
    const auto& cfg = run.cfg();
    const Corpus corpus = load_corpus(cfg);
    const auto featnet = run.load("train-featurenet", "featurenet.ckpt", cfg.featurenet_checkpoint, "featurenet_checkpoint");
    const StylePatchSet style = load_style_patches(cfg.style, cfg.corpus.shape, "style");
    const auto res = train_generator_stage(run, corpus.train, style, featnet, "generator");
    const auto init = init_network(NetworkKind::generator, cfg.corpus.shape, 0, derive_seed(cfg.seed, "generator-init"));
    const auto before = mean_perceptual_loss(corpus.test, style, featnet, init, cfg.generator_loss);
    const auto after = mean_perceptual_loss(corpus.test, style, featnet, res.checkpoint, cfg.generator_loss);
    // held-out losses as final/initial ratios, which stay readable at 4 decimals
    MetricsReport r;
    r.metrics["heldout_content_ratio"] = ratio(after.parts.content, before.parts.content);
    r.metrics["heldout_style_ratio"] = ratio(after.parts.style, before.parts.style);
    r.metrics["heldout_tv_ratio"] = ratio(after.parts.tv, before.parts.tv);
    r.sizes["train"] = count(corpus.train.size());
    r.sizes["heldout"] = count(corpus.test.size());
    r.sizes["style_patches"] = count(style.patches.batch());
    run.report(r);
    return 0;
}

inline int stylize_cmd(Run& run)
{
    const auto& cfg = run.cfg();
    const Corpus corpus = load_corpus(cfg);
    const auto gen = run.load("train-generator", "generator.ckpt", cfg.generator_checkpoint, "generator_checkpoint");
    const Dataset train = stylize_dataset(corpus.train, gen);
    const Dataset test = stylize_dataset(corpus.test, gen);
    write_idx(train, run.path("train-images.idx"), run.path("train-labels.idx"));
    write_idx(test, run.path("test-images.idx"), run.path("test-labels.idx"));
    MetricsReport r;
    r.sizes["train"] = count(train.size());
    r.sizes["test"] = count(test.size());
    run.report(r);
    return 0;
}

inline int train_baseline_cmd(Run& run)
{
    const Corpus corpus = load_corpus(run.cfg());
    const auto res = train_stage(run, NetworkKind::classifier, corpus.train, run.cfg().baseline, "baseline");
    MetricsReport r;
    r.metrics["test_accuracy"] = rounded_accuracy(res.checkpoint, corpus.test);
    r.sizes["train"] = count(corpus.train.size());
    r.sizes["test"] = count(corpus.test.size());
    run.report(r);
    return 0;
}

inline int train_license_cmd(Run& run)
{
    const auto& cfg = run.cfg();
    const Corpus corpus = load_corpus(cfg);
    const Corpus stylized = run.load_stylized();
    const StylePatchSet style = load_style_patches(cfg.style, cfg.corpus.shape, "style");
    const TrainConfig tc = cfg.train_config(cfg.license, "license");
    const auto init = init_network(NetworkKind::classifier, cfg.corpus.shape, cfg.corpus.classes,
                                   derive_seed(cfg.seed, "license-init"));
    const auto res = train_license_model({corpus.train, stylized.train, style}, tc, cfg.license_loss, init,
                                         {&corpus.test, &stylized.test});
    run.save(res.checkpoint, "license.ckpt", tc.seed);
    run.history(res.history);
    MetricsReport r;
    r.metrics["license_acc_licensed"] = rounded_accuracy(res.checkpoint, stylized.test);
    r.metrics["license_acc_original"] = rounded_accuracy(res.checkpoint, corpus.test);
    r.metrics["lockout_gap"] = gap_points(r.metrics["license_acc_licensed"], r.metrics["license_acc_original"]);
    r.sizes["train"] = count(stylized.train.size());
    r.sizes["test"] = count(stylized.test.size());
    run.report(r);
    return 0;
}

inline int eval_usability_cmd(Run& run)
{
    const auto& cfg = run.cfg();
    const Corpus corpus = load_corpus(cfg);
    const Corpus stylized = run.load_stylized();
    const auto base = run.load("train-baseline", "baseline.ckpt", cfg.baseline_checkpoint, "baseline_checkpoint");
    const auto lic = run.load("train-license", "license.ckpt", cfg.license_checkpoint, "license_checkpoint");
    run.report(usability_report(base, lic, corpus.test, stylized.test));
    return 0;
}

inline int eval_privacy_cmd(Run& run)
{
    const auto& cfg = run.cfg();
    const Corpus corpus = load_corpus(cfg);
    const Corpus stylized = run.load_stylized();
    const auto base = run.load("train-baseline", "baseline.ckpt", cfg.baseline_checkpoint, "baseline_checkpoint");
    run.report(privacy_report(base, corpus.test, stylized.test));
    return 0;
}

inline int attack_forge_cmd(Run& run)
{
    const auto& cfg = run.cfg();
    const Corpus corpus = load_corpus(cfg);
    const auto lic = run.load("train-license", "license.ckpt", cfg.license_checkpoint, "license_checkpoint");
    const auto gen = run.load("train-generator", "generator.ckpt", cfg.generator_checkpoint, "generator_checkpoint");
    NetworkCheckpoint forged;
    if (!cfg.forged_generator_checkpoint.empty()) {
        forged = load_checkpoint(cfg.forged_generator_checkpoint);
    } else {
        const auto featnet =
            run.load("train-featurenet", "featurenet.ckpt", cfg.featurenet_checkpoint, "featurenet_checkpoint");
        const StylePatchSet style = load_style_patches(cfg.forged_style, cfg.corpus.shape, "forged");
        forged = train_generator_stage(run, corpus.train, style, featnet, "forged-generator").checkpoint;
    }
    run.report(forged_style_attack(lic, corpus.test, forged, gen));
    return 0;
}

inline int attack_finetune_cmd(Run& run)
{
    const auto& cfg = run.cfg();
    const Corpus corpus = load_corpus(cfg);
    const Corpus stylized = run.load_stylized();
    const auto lic = run.load("train-license", "license.ckpt", cfg.license_checkpoint, "license_checkpoint");
    const TrainConfig tc = cfg.train_config({1, cfg.finetune_learning_rate}, "finetune");
    run.report(finetune_sweep(lic, corpus.train, cfg.leak_sizes, cfg.finetune_steps, tc, corpus.test, stylized.test));
    return 0;
}

inline int gradcheck_cmd(Run& run)
{
    GradCheckOptions opts;
    opts.seed = derive_seed(run.cfg().seed, "gradcheck");
    const auto results = run_gradient_suite(opts);
    std::string table;
    std::size_t passed = 0;
    for (const auto& r : results) {
        char line[160];
        std::snprintf(line, sizeof line, "%-28s probes=%-3zu skipped=%-3zu max_rel_error=%.3e %s\n", r.name.c_str(),
                      r.probes, r.skipped, r.max_rel_error, r.passed ? "PASS" : "FAIL");
        table += line;
        passed += r.passed ? 1 : 0;
    }
    write_text_file(table, run.path("gradcheck.txt"));
    run.log() << table;
    MetricsReport r;
    r.metrics["pass_fraction"] = results.empty() ? 0.0 : static_cast<double>(passed) / static_cast<double>(results.size());
    r.sizes["checks"] = count(results.size());
    r.sizes["passed"] = count(passed);
    run.report(r);
    return passed == results.size() ? 0 : 1;
}

} // namespace cli_detail

// Runs one command; returns the process exit status. Diagnostics go to `err`.
inline int dispatch(const std::string& command, RunConfig config, const CommandArgs& args = {},
                    std::ostream& log = std::cout, std::ostream& err = std::cerr)
{
    using namespace cli_detail;
    using Handler = int (*)(Run&);
    static const std::array<std::pair<const char*, Handler>, 10> handlers{{
        {"train-featurenet", train_featurenet_cmd},
        {"train-generator", train_generator_cmd},
        {"stylize", stylize_cmd},
        {"train-baseline", train_baseline_cmd},
        {"train-license", train_license_cmd},
        {"eval-usability", eval_usability_cmd},
        {"eval-privacy", eval_privacy_cmd},
        {"attack-forge", attack_forge_cmd},
        {"attack-finetune", attack_finetune_cmd},
        {"gradcheck", gradcheck_cmd},
    }};
    Handler handler = nullptr;
    for (const auto& [name, h] : handlers)
        if (command == name)
            handler = h;
    if (!handler) {
        err << "stylegate: unknown command '" << command << "'\n" << usage_text();
        return 2;
    }
    try {
        if (args.out_dir)
            config.out_dir = *args.out_dir;
        if (args.seed)
            config.seed = *args.seed;
        config.validate();
        log << "stylegate " << command << "\n";
        Run run(command, config, log);
        return handler(run);
    } catch (const std::exception& e) {
        err << "stylegate " << command << ": error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace stylegate
