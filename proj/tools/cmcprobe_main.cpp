#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cmcprobe/errors.hpp"
#include "cmcprobe/harness.hpp"

int main(int argc, char** argv) {
    using namespace cmcprobe;

    CLI::App app{"cmcprobe: constant-mean-curvature surfaces in asymptotically flat 3-manifolds"};
    app.set_version_flag("--version", "cmcprobe 0.3.0");

    std::string config_path;
    std::string out_dir;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "random seed for the verify corpus");

    app.fallthrough();
    app.add_subcommand("verify", "run the self-verification suites");
    app.add_subcommand("foliate", "trace the CMC foliation and record its functionals");
    app.add_subcommand("scan", "audit outlying coordinate spheres S_lambda(lambda xi)");
    app.add_subcommand("expand", "fit the second-order Minkowski deficit expansion");
    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    ExperimentConfig config;
    try {
        if (!config_path.empty()) config = load_config(config_path);
        apply_environment(config, process_environment());
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (workers) config.workers = *workers;
        if (seed) config.seed = *seed;
    } catch (const ConfigError& e) {
        std::cerr << "cmcprobe: configuration error: " << e.what() << '\n';
        return kExitUsage;
    }

    const auto subs = app.get_subcommands();
    const std::string command = subs.empty() ? "verify" : subs.front()->get_name();
    if (command == "foliate") return cmd_foliate(config);
    if (command == "scan") return cmd_scan(config);
    if (command == "expand") return cmd_expand(config);
    return cmd_verify(config);
}
