#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stylegate/cli.hpp"

using namespace stylegate;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("stylegate_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// Small enough that the whole pipeline runs in seconds.
RunConfig tiny_config(const fs::path& out)
{
    return parse_config_text("classes = 2\n"
                             "train_per_class = 8\n"
                             "test_per_class = 4\n"
                             "image_height = 8\n"
                             "image_width = 8\n"
                             "style_source_size = 16\n"
                             "style_patches = 8\n"
                             "forged_style_source_size = 16\n"
                             "forged_style_patches = 8\n"
                             "batch_size = 4\n"
                             "featurenet_epochs = 1\n"
                             "generator_epochs = 1\n"
                             "baseline_epochs = 1\n"
                             "license_epochs = 1\n"
                             "leak_sizes = 2,4\n"
                             "finetune_steps = 3\n"
                             "out_dir = " +
                             out.string() + "\n");
}

} // namespace

TEST(Config, EmptyTextGivesDefaults)
{
    const RunConfig c = parse_config_text("");
    const RunConfig d;
    EXPECT_EQ(config_to_text(c), config_to_text(d));
    EXPECT_EQ(c.license_loss.alpha, 1.0);
    EXPECT_EQ(c.license_loss.beta, 0.5);
    EXPECT_EQ(c.license_loss.gamma, 0.25);
    EXPECT_EQ(c.license_loss.margin, 1.0);
    EXPECT_EQ(c.license_loss.phi, 1.0);
}

TEST(Config, ParsesValuesCommentsAndBlankLines)
{
    const RunConfig c = parse_config_text("# comment\n\nmargin = 2.0\n  beta=0.75  \nfeature_tap = 1\ngram_layers = 0,2\n");
    EXPECT_EQ(c.license_loss.margin, 2.0);
    EXPECT_EQ(c.license_loss.beta, 0.75);
    ASSERT_TRUE(c.license_loss.feature_tap.has_value());
    EXPECT_EQ(*c.license_loss.feature_tap, 1u);
    EXPECT_EQ(c.license_loss.gram_layers, (std::vector<std::size_t>{0, 2}));
}

TEST(Config, RejectsBadInput)
{
    try {
        parse_config_text("alpha = -1\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("non-negative"), std::string::npos);
    }
    try {
        parse_config_text("\nbogus = 3\n", "run.cfg");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
    }
    EXPECT_THROW(parse_config_text("margin\n"), ConfigError);
    EXPECT_THROW(parse_config_text("margin = abc\n"), ConfigError);
    EXPECT_THROW(parse_config_text("optimizer = adam\n"), ConfigError);
    EXPECT_THROW(parse_config_text("style_pattern = stripes\n"), ConfigError);
    EXPECT_THROW(parse_config(scratch_dir("nofile") / "missing.cfg"), IoError);
}

TEST(Config, TextRoundTripsAndFingerprintIgnoresOutDir)
{
    RunConfig c = parse_config_text("margin = 3\nseed = 9\nleak_sizes = 1,2\n");
    const RunConfig back = parse_config_text(config_to_text(c));
    EXPECT_EQ(config_to_text(back), config_to_text(c));
    EXPECT_EQ(back.fingerprint(), c.fingerprint());
    RunConfig moved = c;
    moved.out_dir = "elsewhere";
    EXPECT_EQ(moved.fingerprint(), c.fingerprint());
    moved.seed = 10;
    EXPECT_NE(moved.fingerprint(), c.fingerprint());
}

TEST(Report, JsonLayoutIsFixed)
{
    MetricsReport r;
    r.run_id = "eval-usability-00000000000000ff";
    r.config_fingerprint = 0xff;
    r.seed = 7;
    r.metrics["b"] = 2.0 / 3.0;
    r.metrics["a"] = -0.00001;
    r.sizes["n"] = 3;
    const std::string want = "{\n"
                             "  \"config_fingerprint\": \"00000000000000ff\",\n"
                             "  \"metrics\": {\n"
                             "    \"a\": 0.0000,\n"
                             "    \"b\": 0.6667\n"
                             "  },\n"
                             "  \"run_id\": \"eval-usability-00000000000000ff\",\n"
                             "  \"seed\": 7,\n"
                             "  \"sizes\": {\n"
                             "    \"n\": 3\n"
                             "  }\n"
                             "}\n";
    EXPECT_EQ(report_to_json(r), want);
    EXPECT_EQ(report_to_json(r), report_to_json(r));
    const auto parsed = nlohmann::json::parse(report_to_json(r));
    EXPECT_EQ(parsed.at("metrics").at("b").get<double>(), 0.6667);
    EXPECT_EQ(parsed.at("seed").get<int>(), 7);
    r.metrics["c"] = std::nan("");
    EXPECT_THROW(report_to_json(r), Error);
}

TEST(Report, WriteErrorsNameThePath)
{
    const std::string bad = (scratch_dir("nodir") / "sub" / "report.json").string();
    try {
        write_report(MetricsReport{}, bad);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find(bad), std::string::npos);
    }
}

TEST(Report, HistoryJson)
{
    TrainHistory h;
    EpochRecord e;
    e.epoch = 0;
    e.total = 1.25;
    e.parts["ce"] = 1.25;
    e.accuracies["train"] = 0.5;
    h.epochs.push_back(e);
    const std::string j = history_to_json(h, {"x", 1, 2});
    EXPECT_NE(j.find("\"total\": 1.25"), std::string::npos);
    EXPECT_NE(j.find("\"train\": 0.5000"), std::string::npos);
    EXPECT_NE(j.find("\"config_fingerprint\": \"0000000000000002\""), std::string::npos);
    const auto parsed = nlohmann::json::parse(j);
    EXPECT_EQ(parsed.at("epochs").at(0).at("parts").at("ce").get<double>(), 1.25);
    EXPECT_EQ(parsed.at("run_id").get<std::string>(), "x");
}

TEST(Dispatch, UnknownCommandPrintsUsage)
{
    std::ostringstream log, err;
    EXPECT_EQ(dispatch("frobnicate", RunConfig{}, {}, log, err), 2);
    EXPECT_NE(err.str().find("usage:"), std::string::npos);
    for (const auto& c : command_names())
        EXPECT_NE(usage_text().find(c), std::string::npos);
}

TEST(Dispatch, GradcheckSucceeds)
{
    const fs::path out = scratch_dir("gradcheck");
    std::ostringstream log, err;
    CommandArgs args;
    args.out_dir = out.string();
    EXPECT_EQ(dispatch("gradcheck", RunConfig{}, args, log, err), 0) << err.str();
    EXPECT_TRUE(fs::exists(out / "gradcheck" / "gradcheck.txt"));
    EXPECT_NE(slurp(out / "gradcheck" / "report.json").find("\"pass_fraction\": 1.0000"), std::string::npos);

    // a second run into the same directory refuses to overwrite
    std::ostringstream err2;
    EXPECT_EQ(dispatch("gradcheck", RunConfig{}, args, log, err2), 1);
    EXPECT_NE(err2.str().find("already exists"), std::string::npos);
    fs::remove_all(out);
}

TEST(Dispatch, MissingUpstreamIsReported)
{
    const fs::path out = scratch_dir("upstream");
    std::ostringstream log, err;
    EXPECT_EQ(dispatch("train-generator", tiny_config(out), {}, log, err), 1);
    EXPECT_NE(err.str().find("missing upstream artifact"), std::string::npos);
    fs::remove_all(out);
}

TEST(Dispatch, TinyPipelineRunsEndToEnd)
{
    const fs::path out = scratch_dir("pipeline");
    const RunConfig cfg = tiny_config(out);
    for (const auto& cmd : command_names()) {
        if (cmd == "gradcheck")
            continue;
        std::ostringstream log, err;
        ASSERT_EQ(dispatch(cmd, cfg, {}, log, err), 0) << cmd << ": " << err.str();
        EXPECT_TRUE(fs::exists(out / cmd / "report.json")) << cmd;
        EXPECT_TRUE(fs::exists(out / cmd / "config.txt")) << cmd;
    }
    const auto ckpt = load_checkpoint((out / "train-license" / "license.ckpt").string());
    EXPECT_EQ(ckpt.config_fingerprint, cfg.fingerprint());
    const Dataset sty = load_idx((out / "stylize" / "test-images.idx").string(),
                                 (out / "stylize" / "test-labels.idx").string());
    EXPECT_EQ(sty.size(), 8u);
    const std::string fin = slurp(out / "attack-finetune" / "report.json");
    EXPECT_NE(fin.find("leak_4.recovery"), std::string::npos);
    fs::remove_all(out);
}

TEST(Corpus, SyntheticTrainAndTestDiffer)
{
    RunConfig c = parse_config_text("classes = 2\ntrain_per_class = 3\ntest_per_class = 3\n");
    const Corpus corpus = load_corpus(c);
    EXPECT_EQ(corpus.train.size(), 6u);
    EXPECT_NE(dataset_checksum(corpus.train), dataset_checksum(corpus.test));
}
