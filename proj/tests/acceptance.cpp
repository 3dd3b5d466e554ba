// End-to-end acceptance run: prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Usage: acceptance <scratch dir>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "stylegate/stylegate.hpp"

using namespace stylegate;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void verdict(const std::string& id, bool ok, const std::string& detail)
{
    std::cout << (ok ? "PASS " : "FAIL ") << id << ": " << detail << std::endl;
    failures += ok ? 0 : 1;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::map<std::string, double> metrics_of(const fs::path& report)
{
    return nlohmann::json::parse(slurp(report)).at("metrics").get<std::map<std::string, double>>();
}

std::vector<double> history_totals(const fs::path& history)
{
    const auto doc = nlohmann::json::parse(slurp(history));
    std::vector<double> out;
    for (const auto& e : doc.at("epochs"))
        out.push_back(e.at("total").get<double>());
    return out;
}

const std::vector<std::string> pipeline{"train-featurenet", "train-generator", "stylize",      "train-baseline",
                                        "train-license",    "eval-usability",  "eval-privacy", "attack-forge",
                                        "attack-finetune"};

// Runs the pipeline into `out`; returns false on the first failing command.
bool run_pipeline(RunConfig cfg, const fs::path& out, double& elapsed)
{
    cfg.out_dir = out.string();
    const auto t0 = Clock::now();
    for (const auto& cmd : pipeline) {
        std::ostringstream log, err;
        const auto t = Clock::now();
        const int rc = dispatch(cmd, cfg, {}, log, err);
        std::cout << "  " << cmd << " exit " << rc << " (" << fmt("%.1f", seconds_since(t)) << " s)\n" << log.str();
        if (rc != 0) {
            std::cout << err.str();
            return false;
        }
    }
    elapsed = seconds_since(t0);
    return true;
}

std::map<std::string, std::string> artifacts(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() != "config.txt") // config.txt records out_dir
            out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

// ---------------------------------------------------------------- criterion 1

void gradient_suite(const fs::path& scratch)
{
    const auto t0 = Clock::now();
    GradCheckOptions opts;
    const auto results = run_gradient_suite(opts);
    const double secs = seconds_since(t0);
    bool ok = !results.empty();
    double worst = 0;
    std::size_t fewest = ~std::size_t{0};
    for (const auto& r : results) {
        ok = ok && r.passed && r.probes >= 20 && r.max_rel_error <= 1e-3;
        worst = std::max(worst, r.max_rel_error);
        fewest = std::min(fewest, r.probes);
        if (!r.passed)
            std::cout << "  failed check " << r.name << " max_rel_error " << r.max_rel_error << "\n";
    }
    RunConfig cfg;
    cfg.out_dir = (scratch / "gradcheck").string();
    std::ostringstream log, err;
    const int rc = dispatch("gradcheck", cfg, {}, log, err);
    verdict("1 gradient suite", ok && rc == 0 && secs < 120.0,
            std::to_string(results.size()) + " checks, min probes " + std::to_string(fewest) + ", max rel error " +
                fmt("%.2e", worst) + " (<= 1e-3), " + fmt("%.2f", secs) + " s (< 120 s), cli exit " +
                std::to_string(rc));
}

// ---------------------------------------------------------------- criterion 2

Activation random_act(Rng& rng, std::size_t n, std::size_t c, std::size_t h, std::size_t w)
{
    Activation a(n, c, h, w);
    for (auto& v : a.values())
        v = rng.uniform(-1.0, 1.0);
    return a;
}

void oracle_suite()
{
    double worst = 0;
    auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

    // pinned values
    const std::vector<double> x{1, 0}, y{0, 1};
    track(feature_distance(x, y, 1.0), std::sqrt(3.0));
    Activation uniform(1, 10, 1, 1, 0.1);
    track(cross_entropy(uniform, std::vector<std::uint32_t>{0}), std::log(10.0));
    Activation ident(1, 2, 1, 2);
    ident(0, 0, 0, 0) = 2;
    ident(0, 1, 0, 1) = 2;
    const std::vector<Activation> s1{ident}, g1{Activation(1, 2, 1, 2)};
    track(style_loss(s1, g1), 0.5);

    Rng rng(derive_seed(2024, "acceptance-oracles"));
    for (int trial = 0; trial < 200; ++trial) {
        // cross entropy on a random probability table (<= 16 entries)
        const std::size_t b = 1 + rng.below(4), k = 2 + rng.below(3);
        std::vector<std::vector<double>> p(b, std::vector<double>(k));
        Activation probs(b, k, 1, 1);
        std::vector<std::uint32_t> labels(b);
        for (std::size_t i = 0; i < b; ++i) {
            double sum = 0;
            for (auto& v : p[i])
                sum += v = rng.uniform(0.01, 1.0);
            for (std::size_t j = 0; j < k; ++j)
                probs[i * k + j] = p[i][j] /= sum;
            labels[i] = static_cast<std::uint32_t>(rng.below(k));
        }
        track(cross_entropy(probs, labels), oracle::cross_entropy(p, labels));

        // distance and contrastive hinge
        const std::size_t n = 1 + rng.below(8);
        const Activation fa = random_act(rng, 2, n, 1, 1), fb = random_act(rng, 2, n, 1, 1);
        LicenseLossConfig lc;
        lc.margin = rng.uniform(0.1, 3.0);
        lc.phi = rng.uniform(0.0, 2.0);
        double hinge = 0;
        for (std::size_t i = 0; i < 2; ++i) {
            const std::vector<double> va(fa.item(i).begin(), fa.item(i).end()), vb(fb.item(i).begin(), fb.item(i).end());
            const double d = oracle::distance(va, vb, lc.phi, lc.cosine_epsilon);
            track(feature_distance(va, vb, lc.phi), d);
            hinge += std::max(lc.margin - d, 0.0) / 2.0;
        }
        track(contrastive_loss(fa, fb, lc), hinge);

        // Gram, style and total variation on <= 16-element maps
        const std::size_t c = 1 + rng.below(4), h = 1 + rng.below(2), w = 1 + rng.below(2);
        const Activation m = random_act(rng, 1, c, h, w);
        const auto g = gram_matrix(m);
        const auto go = oracle::gram(m);
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < c; ++j)
                track(g[0](i, j), go[0][i][j]);
        const std::vector<Activation> st{random_act(rng, 2, c, h, w)}, gt{random_act(rng, 1, c, w, h)};
        track(style_loss(st, gt), oracle::style(st, gt));
        track(total_variation(m), oracle::tv(m));
    }
    verdict("2 oracle suite", worst <= 1e-6, "max |library - oracle| " + fmt("%.2e", worst) + " (<= 1e-6)");
}

// ---------------------------------------------------------------- criterion 7

using Bytes = std::vector<unsigned char>;

void put_be32(Bytes& b, std::uint32_t v)
{
    for (int s = 24; s >= 0; s -= 8)
        b.push_back(static_cast<unsigned char>(v >> s));
}

bool throws_format_error(const std::function<void()>& f)
{
    try {
        f();
    } catch (const FormatError&) {
        return true;
    } catch (...) {
        return false;
    }
    return false;
}

void format_suite(const fs::path& scratch)
{
    Bytes img, lab;
    put_be32(img, 0x803);
    put_be32(img, 2);
    put_be32(img, 2);
    put_be32(img, 2);
    img.insert(img.end(), {0, 255, 128, 0, 255, 255, 0, 0});
    put_be32(lab, 0x801);
    put_be32(lab, 2);
    lab.insert(lab.end(), {3, 1});
    const Dataset d = decode_idx(img, lab);
    const std::vector<float> px(d.images().values().begin(), d.images().values().end());
    const bool idx_ok = d.size() == 2 && d.label(0) == 3 && d.label(1) == 1 &&
                        px == std::vector<float>{0.0f, 1.0f, 128.0f / 255.0f, 0.0f, 1.0f, 1.0f, 0.0f, 0.0f};

    Bytes bad_magic = img;
    bad_magic[3] = 0x01;
    Bytes short_img(img.begin(), img.end() - 1);
    const bool idx_errors = throws_format_error([&] { decode_idx(bad_magic, lab); }) &&
                            throws_format_error([&] { decode_idx(short_img, lab); });

    bool ckpt_ok = true;
    const fs::path file = scratch / "roundtrip.ckpt";
    for (auto kind : {NetworkKind::classifier, NetworkKind::featurenet, NetworkKind::generator}) {
        auto c = init_network(kind, {1, 16, 16}, kind == NetworkKind::generator ? 0 : 4, 11);
        c.training_seed = 5;
        c.config_fingerprint = 0x0123456789abcdefULL;
        save_checkpoint(c, file.string());
        const auto back = load_checkpoint(file.string());
        ckpt_ok = ckpt_ok && back == c && encode_checkpoint(back) == encode_checkpoint(c);
        const std::string raw = slurp(file);
        const Bytes on_disk(raw.begin(), raw.end());
        ckpt_ok = ckpt_ok && on_disk == encode_checkpoint(c);
    }
    const Bytes good = encode_checkpoint(init_network(NetworkKind::classifier, {1, 8, 8}, 3, 1));
    Bytes magic = good, truncated(good.begin(), good.end() - 3), trailing = good;
    magic[0] ^= 0xff;
    trailing.push_back(0);
    const bool ckpt_errors = throws_format_error([&] { decode_checkpoint(magic); }) &&
                             throws_format_error([&] { decode_checkpoint(truncated); }) &&
                             throws_format_error([&] { decode_checkpoint(trailing); });

    verdict("7 format suite", idx_ok && idx_errors && ckpt_ok && ckpt_errors,
            std::string("idx fixture ") + (idx_ok ? "exact" : "MISMATCH") + ", idx corruption " +
                (idx_errors ? "rejected" : "NOT rejected") + ", checkpoint round trip " +
                (ckpt_ok ? "bitwise" : "NOT bitwise") + ", checkpoint corruption " +
                (ckpt_errors ? "rejected" : "NOT rejected"));
}

} // namespace

// usage: acceptance [scratch-dir [config-file]]; without a config file the defaults are used.
int main(int argc, char** argv)
{
    const fs::path scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "stylegate-acceptance";
    const RunConfig run_cfg = argc > 2 ? parse_config(argv[2]) : RunConfig{};
    std::cout << "pipeline config: " << (argc > 2 ? argv[2] : "defaults") << "\n";
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    gradient_suite(scratch);
    oracle_suite();
    format_suite(scratch);

    const fs::path a = scratch / "run-a", b = scratch / "run-b";
    double secs_a = 0, secs_b = 0;
    std::cout << "pipeline run A\n";
    const bool ran_a = run_pipeline(run_cfg, a, secs_a);
    std::cout << "pipeline run B\n";
    const bool ran_b = ran_a && run_pipeline(run_cfg, b, secs_b);

    bool reports = ran_a;
    for (const auto& cmd : pipeline)
        reports = reports && fs::exists(a / cmd / "report.json");
    verdict("pipeline completes", reports,
            std::string(ran_a ? "all commands exit 0" : "a command failed") + ", " +
                (reports ? "all reports written" : "reports missing"));
    if (!ran_a) {
        std::cout << failures << " criteria failed\n";
        return 1;
    }

    const auto usability = metrics_of(a / "eval-usability" / "report.json");
    const double ug = usability.at("usability_gap"), lg = usability.at("lockout_gap");
    verdict("3 usability", ug <= 5.0 && lg >= 30.0 && secs_a < 45 * 60.0,
            "usability_gap " + fmt("%.2f", ug) + " (<= 5), lockout_gap " + fmt("%.2f", lg) + " (>= 30), pipeline " +
                fmt("%.0f", secs_a) + " s (< 2700 s)");

    const double pd = metrics_of(a / "eval-privacy" / "report.json").at("privacy_drop");
    verdict("4 privacy", pd >= 25.0, "privacy_drop " + fmt("%.2f", pd) + " (>= 25)");

    const double fa = metrics_of(a / "attack-forge" / "report.json").at("forgery_advantage");
    verdict("5 forged license", fa <= 10.0, "forgery_advantage " + fmt("%.2f", fa) + " (<= 10)");

    bool identical = ran_b;
    std::size_t compared = 0;
    if (ran_b) {
        const auto fa_files = artifacts(a), fb_files = artifacts(b);
        identical = fa_files == fb_files;
        compared = fa_files.size();
        for (const auto& [name, bytes] : fa_files)
            if (!fb_files.count(name) || fb_files.at(name) != bytes)
                std::cout << "  differs: " << name << "\n";
    }
    verdict("6 determinism", identical,
            std::to_string(compared) + " checkpoints/reports/datasets compared byte-for-byte");

    const auto license = metrics_of(a / "train-license" / "report.json");
    const double acc_lic = license.at("license_acc_licensed"), acc_orig = license.at("license_acc_original");
    verdict("license training outcome", acc_lic >= 0.90 && acc_orig <= 0.40,
            "license accuracy " + fmt("%.4f", acc_lic) + " (>= 0.90), original accuracy " + fmt("%.4f", acc_orig) +
                " (<= 0.40)");

    const double style_ratio = metrics_of(a / "train-generator" / "report.json").at("heldout_style_ratio");
    verdict("generator held-out style loss", style_ratio < 1.0,
            "final/initial held-out style loss " + fmt("%.4f", style_ratio) + " (< 1)");

    bool descent = true;
    std::string detail;
    for (const char* cmd : {"train-featurenet", "train-generator", "train-baseline", "train-license"}) {
        const auto totals = history_totals(a / cmd / "history.json");
        bool ok = totals.size() >= 3 && totals[1] <= totals[0] && totals[2] <= totals[1];
        descent = descent && ok;
        detail += std::string(detail.empty() ? "" : ", ") + cmd + (ok ? " ok" : " NOT non-increasing");
    }
    verdict("first-3-epoch descent", descent, detail);

    std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << "\n";
    return failures ? 1 : 0;
}
