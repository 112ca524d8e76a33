#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dnls/config.hpp"
#include "dnls/harness.hpp"

namespace {

struct SubArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

int run_subcommand(dnls::cli::Kind kind, const SubArgs& args) {
    using namespace dnls::cli;
    ExperimentConfig cfg = load_config(args.config_path, kind);
    if (args.seed || args.out_dir) {
        nlohmann::json patched = cfg.canonical;
        if (args.seed) patched["seed"] = *args.seed;
        if (args.out_dir) patched["output_dir"] = *args.out_dir;
        cfg = config_from_json(patched, kind);
    }
    return run_config(cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DNLS lattice simulator and diagnostics suite"};
    app.require_subcommand(1);

    static const std::pair<const char*, dnls::cli::Kind> kinds[] = {
        {"simulate", dnls::cli::Kind::simulate},
        {"standing-wave", dnls::cli::Kind::standing_wave},
        {"contraction-probe", dnls::cli::Kind::contraction_probe},
        {"geometry-check", dnls::cli::Kind::geometry_check},
        {"tail-audit", dnls::cli::Kind::tail_audit},
        {"truncation-sweep", dnls::cli::Kind::truncation_sweep},
        {"weight-audit", dnls::cli::Kind::weight_audit},
    };

    SubArgs args;
    dnls::cli::Kind selected{};
    for (const auto& [name, kind] : kinds) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", args.config_path, "Experiment config (JSON)")->required();
        sub->add_option("--seed", args.seed, "Override the config seed");
        sub->add_option("--out", args.out_dir, "Override the output directory");
        sub->callback([&selected, kind = kind]() { selected = kind; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        return run_subcommand(selected, args);
    } catch (const dnls::ValidationError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    } catch (const dnls::NumericalError& err) {
        std::cerr << "numerical error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
}
