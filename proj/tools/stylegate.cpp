#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

#include "stylegate/cli.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Style-licensed classifier pipeline"};
    std::string command, config_path;
    stylegate::CommandArgs args;
    app.add_option("command", command, "pipeline command")->required();
    app.add_option("--config", config_path, "key = value config file")->required();
    app.add_option("--out", args.out_dir, "run root directory (overrides out_dir)");
    app.add_option("--seed", args.seed, "master seed (overrides seed)");
    app.footer(stylegate::usage_text());
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const auto& names = stylegate::command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) {
        std::cerr << "stylegate: unknown command '" << command << "'\n" << stylegate::usage_text();
        return 2;
    }
    stylegate::RunConfig cfg;
    try {
        cfg = stylegate::parse_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "stylegate: " << e.what() << "\n";
        return 1;
    }
    return stylegate::dispatch(command, cfg, args);
}
