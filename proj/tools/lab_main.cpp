#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>

#include "lab/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

/// Accepts "0..19", "3", or "0,4,7".
bool parse_seed_list(const std::string& text, std::vector<std::uint64_t>& out) {
    out.clear();
    const auto dots = text.find("..");
    try {
        if (dots != std::string::npos) {
            const std::uint64_t lo = std::stoull(text.substr(0, dots));
            const std::uint64_t hi = std::stoull(text.substr(dots + 2));
            if (hi < lo) return false;
            for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
            return true;
        }
        std::size_t pos = 0;
        while (pos < text.size()) {
            const auto comma = text.find(',', pos);
            const std::string tok = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
            out.push_back(std::stoull(tok));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        return !out.empty();
    } catch (const std::exception&) {
        return false;
    }
}

void apply_thread_cap() {
    if (const char* cap = std::getenv("LAB_THREADS")) {
        const int n = std::atoi(cap);
        if (n > 0) omp_set_num_threads(n);
    }
}

int execute(lab::ExperimentConfig config, const std::string& seeds_arg, const std::string& out_arg) {
    if (!seeds_arg.empty()) {
        std::vector<std::uint64_t> seeds;
        if (!parse_seed_list(seeds_arg, seeds)) {
            std::cerr << "error: cannot parse --seeds '" << seeds_arg << "'\n";
            return kExitConfigError;
        }
        config.seeds = seeds;
        config.seeds_defaulted = false;
    }
    if (config.seeds_defaulted)
        std::cerr << "warning: no seed list given; defaulting to seed 0\n";
    const std::string out_dir = out_arg.empty() ? config.out_dir : out_arg;
    try {
        lab::run_experiment(config, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntimeError;
    }
    std::cout << "wrote artifacts to " << out_dir << " (config " << lab::config_hash(config)
              << ")\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    apply_thread_cap();

    CLI::App app{"Tabular offline policy-iteration laboratory"};
    app.require_subcommand(1);

    std::string preset_name, config_path, seeds_arg, out_arg;

    CLI::App* preset = app.add_subcommand("preset", "run a canned experiment");
    preset->add_option("name", preset_name, "one of: optimal_mix, suboptimal_mix, mixture_sweep")
        ->required();
    preset->add_option("--seeds", seeds_arg, "seed list, e.g. 0..19 or 0,3,5");
    preset->add_option("--out", out_arg, "output directory");

    CLI::App* runcmd = app.add_subcommand("run", "run an experiment from a config file");
    runcmd->add_option("--config", config_path, "config file (JSON)")->required();
    runcmd->add_option("--seeds", seeds_arg, "seed list override");
    runcmd->add_option("--out", out_arg, "output directory override");

    CLI::App* validate = app.add_subcommand("validate", "validate a config file");
    validate->add_option("--config", config_path, "config file (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? kExitConfigError : kExitOk;
    }

    if (preset->parsed()) {
        lab::ExperimentConfig config;
        try {
            config = lab::preset_config(preset_name);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitConfigError;
        }
        return execute(std::move(config), seeds_arg, out_arg);
    }

    std::vector<std::string> diagnostics;
    auto config = lab::load_config_file(config_path, diagnostics);
    if (validate->parsed()) {
        for (const auto& d : diagnostics) std::cerr << d << "\n";
        if (!config) return kExitConfigError;
        std::cout << "ok: " << config_path << " (config " << lab::config_hash(*config) << ")\n";
        return kExitOk;
    }
    if (!config) {
        for (const auto& d : diagnostics) std::cerr << d << "\n";
        return kExitConfigError;
    }
    return execute(std::move(*config), seeds_arg, out_arg);
}
