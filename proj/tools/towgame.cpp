#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tow/config.hpp"
#include "tow/error.hpp"
#include "tow/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Tug-of-war with noise: parabolic obstacle problem solver and game simulator"};
    app.set_version_flag("--version", std::string(tow::software_version()));
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool quiet = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("-o,--out", out_dir, "output directory (overrides output.directory)");
        sub->add_option("--seed", seed, "master seed (overrides simulation.seed)");
        sub->add_option("--threads", threads, "worker threads, 0 = hardware concurrency");
        sub->add_flag("-q,--quiet", quiet, "suppress progress lines");
    };
    add_common(app.add_subcommand("solve", "solve the dynamic programming principle on the lattice"));
    add_common(app.add_subcommand("simulate", "solve, then play Monte Carlo episodes from the configured starts"));
    add_common(app.add_subcommand("converge", "L-infinity error against a fine finite-difference reference"));
    add_common(app.add_subcommand("validate", "fixed point, comparison, modulus and consistency checks"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : tow::kExitConfig;
    }

    const CLI::App* chosen = app.get_subcommands().front();
    const auto sub = tow::subcommand_from(chosen->get_name());

    tow::RunConfig cfg;
    try {
        cfg = tow::load_config(config_path);
    } catch (const tow::Error& e) {
        std::cerr << "towgame: " << config_path << ": " << e.what() << '\n';
        return tow::exit_code_for(e.code());
    }

    tow::RunOptions opts;
    opts.out_dir = out_dir;
    if (chosen->count("--seed")) opts.seed = seed;
    if (chosen->count("--threads")) opts.threads = threads;
    opts.quiet = quiet;
    opts.log = &std::cerr;

    const tow::RunManifest m = tow::run(*sub, cfg, opts);
    if (m.document.contains("failure")) {
        const auto& f = m.document["failure"];
        std::cerr << "towgame: " << f["code"].get<std::string>() << ": " << f["message"].get<std::string>() << '\n';
    }
    if (!quiet) std::cerr << "manifest: " << m.path << '\n';
    return m.exit_code;
}
