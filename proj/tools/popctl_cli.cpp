// Command-line front end: popctl <command> --config <path> [--out <dir>] [--seed <n>]

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "popctl/popctl.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Degenerate age-structured population control laboratory"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    for (const auto& name : popctl::experiment_commands()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " pipeline");
        sub->add_option("--config", config_path, "INI configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides [output] directory)");
        sub->add_option("--seed", seed, "ensemble seed (overrides [lab] seed)");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        auto cfg = popctl::parse_config(config_path);
        if (seed) cfg.lab.seed = *seed;
        if (out_dir) cfg.output.directory = *out_dir;
        const auto art = popctl::run_experiment(cfg, command, cfg.output.directory);
        std::cout << art.summary.dump(2) << "\n";
        for (const auto& [stage, s] : art.stage_seconds) std::fprintf(stderr, "%-16s %8.3f s\n", stage.c_str(), s);
        return 0;
    } catch (const popctl::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
