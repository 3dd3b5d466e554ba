#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "stylegate/error.hpp"
#include "stylegate/losses.hpp"
#include "stylegate/rng.hpp"
#include "stylegate/training.hpp"

namespace stylegate {

enum class CorpusKind { synthetic, idx };

struct CorpusConfig {
    CorpusKind kind = CorpusKind::synthetic;
    std::uint64_t synthetic_seed = 7;
    std::size_t classes = 4;
    std::size_t train_per_class = 400;
    std::size_t test_per_class = 100;
    ImageShape shape{1, 16, 16};
    std::string train_images, train_labels, test_images, test_labels;
    std::size_t train_limit = 0; // 0 keeps everything
    std::size_t test_limit = 0;
};

// A style source is either an image file or a procedural pattern.
struct StyleSourceConfig {
    std::string image;
    std::string pattern = "waves";
    std::size_t source_size = 64;
    std::uint64_t seed = 3;
    std::size_t patches = 64;
    std::uint64_t patch_seed = 5;
    bool flips = true;
};

struct StageConfig {
    std::size_t epochs = 0;
    double learning_rate = 0.0;
    double max_grad_norm = 0.0; // 0 disables clipping
};

struct RunConfig {
    CorpusConfig corpus;
    StyleSourceConfig style;
    StyleSourceConfig forged_style{"", "blobs", 64, 99, 64, 98, true};

    std::size_t batch_size = 32;
    OptimizerKind optimizer = OptimizerKind::momentum;
    double momentum = 0.9;
    StageConfig featurenet{8, 0.02};
    StageConfig generator{4, 0.001, 100.0};
    StageConfig baseline{8, 0.02};
    StageConfig license{10, 0.02};

    LicenseLossConfig license_loss;
    GeneratorLossConfig generator_loss{1.0, 5000.0, 0.05, 1, {0, 1, 2}};

    std::vector<std::size_t> leak_sizes{16, 64, 256};
    std::size_t finetune_steps = 50;
    double finetune_learning_rate = 0.02;

    // explicit artifact paths; empty means "read from the sibling command directory"
    std::string featurenet_checkpoint, generator_checkpoint, baseline_checkpoint, license_checkpoint,
        forged_generator_checkpoint, stylized_dir;

    std::string out_dir = "runs";
    std::uint64_t seed = 1;

    TrainConfig train_config(const StageConfig& stage, std::string_view purpose) const
    {
        TrainConfig t;
        t.epochs = stage.epochs;
        t.batch_size = batch_size;
        t.learning_rate = stage.learning_rate;
        t.max_grad_norm = stage.max_grad_norm;
        t.optimizer = optimizer;
        t.momentum = momentum;
        t.seed = derive_seed(seed, purpose);
        return t;
    }

    void validate() const;
    std::uint64_t fingerprint() const;
};

namespace config_detail {

inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text)
{
    T v{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty())
        throw ConfigError("malformed value for '" + key + "': '" + text + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text)
{
    if (text == "true" || text == "1")
        return true;
    if (text == "false" || text == "0")
        return false;
    throw ConfigError("malformed value for '" + key + "': expected true/false, got '" + text + "'");
}

inline std::vector<std::size_t> parse_list(const std::string& key, const std::string& text)
{
    std::vector<std::size_t> out;
    if (text.empty())
        return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_number<std::size_t>(key, trim(item)));
    return out;
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v)
{
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_list(const std::vector<std::size_t>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

struct Field {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field num(std::string key, std::function<T&(RunConfig&)> member)
{
    return {key, [key, member](RunConfig& c, const std::string& v) { member(c) = parse_number<T>(key, v); },
            [member](const RunConfig& c) {
                const T& v = member(const_cast<RunConfig&>(c));
                if constexpr (std::is_floating_point_v<T>)
                    return format_double(v);
                else
                    return std::to_string(v);
            }};
}

inline Field text(std::string key, std::function<std::string&(RunConfig&)> member)
{
    return {key, [member](RunConfig& c, const std::string& v) { member(c) = v; },
            [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)); }};
}

inline Field flag(std::string key, std::function<bool&(RunConfig&)> member)
{
    return {key, [key, member](RunConfig& c, const std::string& v) { member(c) = parse_bool(key, v); },
            [member](const RunConfig& c) { return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

inline Field list(std::string key, std::function<std::vector<std::size_t>&(RunConfig&)> member)
{
    return {key, [key, member](RunConfig& c, const std::string& v) { member(c) = parse_list(key, v); },
            [member](const RunConfig& c) { return format_list(member(const_cast<RunConfig&>(c))); }};
}

inline void add_style_fields(std::vector<Field>& f, const std::string& prefix,
                             std::function<StyleSourceConfig&(RunConfig&)> s)
{
    f.push_back(text(prefix + "image", [s](RunConfig& c) -> std::string& { return s(c).image; }));
    f.push_back(text(prefix + "pattern", [s](RunConfig& c) -> std::string& { return s(c).pattern; }));
    f.push_back(num<std::size_t>(prefix + "source_size", [s](RunConfig& c) -> std::size_t& { return s(c).source_size; }));
    f.push_back(num<std::uint64_t>(prefix + "seed", [s](RunConfig& c) -> std::uint64_t& { return s(c).seed; }));
    f.push_back(num<std::size_t>(prefix + "patches", [s](RunConfig& c) -> std::size_t& { return s(c).patches; }));
    f.push_back(num<std::uint64_t>(prefix + "patch_seed", [s](RunConfig& c) -> std::uint64_t& { return s(c).patch_seed; }));
    f.push_back(flag(prefix + "flips", [s](RunConfig& c) -> bool& { return s(c).flips; }));
}

inline void add_stage_fields(std::vector<Field>& f, const std::string& prefix,
                             std::function<StageConfig&(RunConfig&)> s)
{
    f.push_back(num<std::size_t>(prefix + "_epochs", [s](RunConfig& c) -> std::size_t& { return s(c).epochs; }));
    f.push_back(num<double>(prefix + "_learning_rate", [s](RunConfig& c) -> double& { return s(c).learning_rate; }));
    f.push_back(num<double>(prefix + "_max_grad_norm", [s](RunConfig& c) -> double& { return s(c).max_grad_norm; }));
}

#define SG_REF(type, expr) [](RunConfig & c) -> type& { return expr; }

inline const std::vector<Field>& fields()
{
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back({"corpus",
                     [](RunConfig& c, const std::string& v) {
                         if (v == "synthetic")
                             c.corpus.kind = CorpusKind::synthetic;
                         else if (v == "idx")
                             c.corpus.kind = CorpusKind::idx;
                         else
                             throw ConfigError("malformed value for 'corpus': expected synthetic or idx, got '" + v + "'");
                     },
                     [](const RunConfig& c) {
                         return std::string(c.corpus.kind == CorpusKind::synthetic ? "synthetic" : "idx");
                     }});
        f.push_back(num<std::uint64_t>("synthetic_seed", SG_REF(std::uint64_t, c.corpus.synthetic_seed)));
        f.push_back(num<std::size_t>("classes", SG_REF(std::size_t, c.corpus.classes)));
        f.push_back(num<std::size_t>("train_per_class", SG_REF(std::size_t, c.corpus.train_per_class)));
        f.push_back(num<std::size_t>("test_per_class", SG_REF(std::size_t, c.corpus.test_per_class)));
        f.push_back(num<std::size_t>("image_channels", SG_REF(std::size_t, c.corpus.shape.channels)));
        f.push_back(num<std::size_t>("image_height", SG_REF(std::size_t, c.corpus.shape.height)));
        f.push_back(num<std::size_t>("image_width", SG_REF(std::size_t, c.corpus.shape.width)));
        f.push_back(text("idx_train_images", SG_REF(std::string, c.corpus.train_images)));
        f.push_back(text("idx_train_labels", SG_REF(std::string, c.corpus.train_labels)));
        f.push_back(text("idx_test_images", SG_REF(std::string, c.corpus.test_images)));
        f.push_back(text("idx_test_labels", SG_REF(std::string, c.corpus.test_labels)));
        f.push_back(num<std::size_t>("idx_train_limit", SG_REF(std::size_t, c.corpus.train_limit)));
        f.push_back(num<std::size_t>("idx_test_limit", SG_REF(std::size_t, c.corpus.test_limit)));

        add_style_fields(f, "style_", SG_REF(StyleSourceConfig, c.style));
        add_style_fields(f, "forged_style_", SG_REF(StyleSourceConfig, c.forged_style));

        f.push_back(num<std::size_t>("batch_size", SG_REF(std::size_t, c.batch_size)));
        f.push_back({"optimizer",
                     [](RunConfig& c, const std::string& v) {
                         if (v == "sgd")
                             c.optimizer = OptimizerKind::sgd;
                         else if (v == "momentum")
                             c.optimizer = OptimizerKind::momentum;
                         else
                             throw ConfigError("malformed value for 'optimizer': expected sgd or momentum, got '" + v + "'");
                     },
                     [](const RunConfig& c) {
                         return std::string(c.optimizer == OptimizerKind::sgd ? "sgd" : "momentum");
                     }});
        f.push_back(num<double>("momentum", SG_REF(double, c.momentum)));
        add_stage_fields(f, "featurenet", SG_REF(StageConfig, c.featurenet));
        add_stage_fields(f, "generator", SG_REF(StageConfig, c.generator));
        add_stage_fields(f, "baseline", SG_REF(StageConfig, c.baseline));
        add_stage_fields(f, "license", SG_REF(StageConfig, c.license));

        f.push_back(num<double>("alpha", SG_REF(double, c.license_loss.alpha)));
        f.push_back(num<double>("beta", SG_REF(double, c.license_loss.beta)));
        f.push_back(num<double>("gamma", SG_REF(double, c.license_loss.gamma)));
        f.push_back(num<double>("margin", SG_REF(double, c.license_loss.margin)));
        f.push_back(num<double>("phi", SG_REF(double, c.license_loss.phi)));
        f.push_back(num<double>("cosine_epsilon", SG_REF(double, c.license_loss.cosine_epsilon)));
        f.push_back(list("gram_layers", SG_REF(std::vector<std::size_t>, c.license_loss.gram_layers)));
        f.push_back({"feature_tap",
                     [](RunConfig& c, const std::string& v) {
                         if (v == "pooled")
                             c.license_loss.feature_tap.reset();
                         else
                             c.license_loss.feature_tap = parse_number<std::size_t>("feature_tap", v);
                     },
                     [](const RunConfig& c) {
                         const auto& t = c.license_loss.feature_tap;
                         return t ? std::to_string(*t) : std::string("pooled");
                     }});

        f.push_back(num<double>("content_weight", SG_REF(double, c.generator_loss.content_weight)));
        f.push_back(num<double>("style_weight", SG_REF(double, c.generator_loss.style_weight)));
        f.push_back(num<double>("tv_weight", SG_REF(double, c.generator_loss.tv_weight)));
        f.push_back(num<std::size_t>("content_layer", SG_REF(std::size_t, c.generator_loss.content_layer)));
        f.push_back(list("style_layers", SG_REF(std::vector<std::size_t>, c.generator_loss.style_layers)));

        f.push_back(list("leak_sizes", SG_REF(std::vector<std::size_t>, c.leak_sizes)));
        f.push_back(num<std::size_t>("finetune_steps", SG_REF(std::size_t, c.finetune_steps)));
        f.push_back(num<double>("finetune_learning_rate", SG_REF(double, c.finetune_learning_rate)));

        f.push_back(text("featurenet_checkpoint", SG_REF(std::string, c.featurenet_checkpoint)));
        f.push_back(text("generator_checkpoint", SG_REF(std::string, c.generator_checkpoint)));
        f.push_back(text("baseline_checkpoint", SG_REF(std::string, c.baseline_checkpoint)));
        f.push_back(text("license_checkpoint", SG_REF(std::string, c.license_checkpoint)));
        f.push_back(text("forged_generator_checkpoint", SG_REF(std::string, c.forged_generator_checkpoint)));
        f.push_back(text("stylized_dir", SG_REF(std::string, c.stylized_dir)));

        f.push_back(text("out_dir", SG_REF(std::string, c.out_dir)));
        f.push_back(num<std::uint64_t>("seed", SG_REF(std::uint64_t, c.seed)));
        return f;
    }();
    return table;
}

#undef SG_REF

inline const Field* find_field(const std::string& key)
{
    for (const auto& f : fields())
        if (f.key == key)
            return &f;
    return nullptr;
}

inline void require_file(const std::string& key, const std::string& path)
{
    if (!path.empty() && !std::filesystem::is_regular_file(path))
        throw ConfigError("'" + key + "' refers to a missing file: " + path);
}

} // namespace config_detail

// Sets one key from its textual value; unknown keys and malformed values throw.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value)
{
    const auto* f = config_detail::find_field(key);
    if (!f)
        throw ConfigError("unknown config key '" + key + "'");
    f->set(cfg, value);
}

inline std::string get_config_value(const RunConfig& cfg, const std::string& key)
{
    const auto* f = config_detail::find_field(key);
    if (!f)
        throw ConfigError("unknown config key '" + key + "'");
    return f->get(cfg);
}

// Canonical `key = value` listing of every field, in table order.
inline std::string config_to_text(const RunConfig& cfg)
{
    std::string out;
    for (const auto& f : config_detail::fields())
        out += f.key + " = " + f.get(cfg) + "\n";
    return out;
}

inline void RunConfig::validate() const
{
    using config_detail::require_file;
    if (corpus.classes < 2)
        throw ConfigError("classes must be at least 2");
    if (corpus.shape.channels < 1 || corpus.shape.height < 1 || corpus.shape.width < 1)
        throw ConfigError("image dimensions must be positive");
    if (corpus.kind == CorpusKind::synthetic) {
        if (corpus.train_per_class < 1 || corpus.test_per_class < 1)
            throw ConfigError("train_per_class and test_per_class must be at least 1");
    } else {
        for (auto [k, p] : {std::pair<const char*, const std::string&>{"idx_train_images", corpus.train_images},
                            {"idx_train_labels", corpus.train_labels},
                            {"idx_test_images", corpus.test_images},
                            {"idx_test_labels", corpus.test_labels}}) {
            if (p.empty())
                throw ConfigError(std::string("corpus = idx requires '") + k + "'");
            require_file(k, p);
        }
    }
    for (const auto* s : {&style, &forged_style}) {
        const std::string prefix = s == &style ? "style_" : "forged_style_";
        require_file(prefix + "image", s->image);
        if (s->image.empty()) {
            const auto& names = style_pattern_names();
            if (std::find(names.begin(), names.end(), s->pattern) == names.end())
                throw ConfigError("unknown " + prefix + "pattern '" + s->pattern + "'");
            if (s->source_size < std::max(corpus.shape.height, corpus.shape.width))
                throw ConfigError(prefix + "source_size is smaller than the image shape");
        }
        if (s->patches < 1)
            throw ConfigError(prefix + "patches must be at least 1");
    }
    for (const auto* st : {&featurenet, &generator, &baseline, &license})
        train_config(*st, "validate").validate();
    license_loss.validate();
    generator_loss.validate();
    if (!(finetune_learning_rate > 0.0))
        throw ConfigError("finetune_learning_rate must be positive");
    require_file("featurenet_checkpoint", featurenet_checkpoint);
    require_file("generator_checkpoint", generator_checkpoint);
    require_file("baseline_checkpoint", baseline_checkpoint);
    require_file("license_checkpoint", license_checkpoint);
    require_file("forged_generator_checkpoint", forged_generator_checkpoint);
    if (!stylized_dir.empty() && !std::filesystem::is_directory(stylized_dir))
        throw ConfigError("'stylized_dir' refers to a missing directory: " + stylized_dir);
    if (out_dir.empty())
        throw ConfigError("out_dir must not be empty");
}

// Hash of the canonical listing; the output directory does not affect results and is left out.
inline std::uint64_t RunConfig::fingerprint() const
{
    std::string canon;
    for (const auto& f : config_detail::fields())
        if (f.key != "out_dir")
            canon += f.key + "=" + f.get(*this) + "\n";
    return fnv1a64(canon);
}

inline RunConfig parse_config_text(const std::string& text, const std::string& origin = "config")
{
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const std::string body = config_detail::trim(line);
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        const std::string where = origin + ":" + std::to_string(lineno) + ": ";
        if (eq == std::string::npos)
            throw ConfigError(where + "expected 'key = value'");
        const std::string key = config_detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = config_detail::trim(std::string_view(body).substr(eq + 1));
        try {
            set_config_value(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

inline RunConfig parse_config(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot read config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

} // namespace stylegate
