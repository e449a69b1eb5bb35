#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "ncask/errors.hpp"
#include "ncask/experiment.hpp"

namespace {

struct Overrides {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<long long> trials;
    std::optional<int> xi;
    std::optional<int> threads;
    bool optimized = false;
    bool traditional = false;
    bool both = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON config file (or a CSV produced by this tool)");
    cmd->add_option("--out", o.out, "output CSV path (default: stdout)");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--trials", o.trials, "Monte Carlo trials per point");
    cmd->add_option("--xi", o.xi, "series depth");
    cmd->add_option("--threads", o.threads, "simulation worker threads (0 = hardware)");
    auto* a = cmd->add_flag("--optimized", o.optimized, "optimized constellation only");
    auto* b = cmd->add_flag("--traditional", o.traditional, "equispaced constellation only");
    auto* c = cmd->add_flag("--both", o.both, "both schemes");
    a->excludes(b)->excludes(c);
    b->excludes(c);
}

ncask::ExperimentConfig resolve(ncask::ExperimentKind kind, const Overrides& o) {
    ncask::ExperimentConfig cfg = o.config.empty() ? ncask::ExperimentConfig{} : ncask::load_config(o.config);
    cfg.experiment = kind;
    if (o.seed) cfg.seed = *o.seed;
    if (o.trials) cfg.trials = *o.trials;
    if (o.xi) cfg.xi = *o.xi;
    if (o.threads) cfg.threads = *o.threads;
    if (o.optimized) cfg.schemes = ncask::SchemeSelection::Optimized;
    if (o.traditional) cfg.schemes = ncask::SchemeSelection::Traditional;
    if (o.both) cfg.schemes = ncask::SchemeSelection::Both;
    if (!o.out.empty()) cfg.output = o.out;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noncoherent ASK link analysis: SEP bounds, constellation design and simulation"};
    app.set_version_flag("--version", std::string("ncask ") + ncask::version_string());
    app.require_subcommand(1);

    Overrides o;
    std::optional<ncask::ExperimentKind> chosen;
    const std::pair<ncask::ExperimentKind, const char*> verbs[] = {
        {ncask::ExperimentKind::SnrSweep, "union bound (and optional simulation) over an SNR grid"},
        {ncask::ExperimentKind::CorrSweep, "union bound over a grid of correlation coefficients"},
        {ncask::ExperimentKind::Optimize, "optimize the constellation at one average SNR"},
        {ncask::ExperimentKind::ConstellationDiagram, "normalized symbol amplitudes over an (M, N, SNR) grid"},
        {ncask::ExperimentKind::Simulate, "Monte Carlo symbol error rate over an SNR grid"},
    };
    for (const auto& [kind, about] : verbs) {
        auto* cmd = app.add_subcommand(ncask::to_string(kind), about);
        add_common(cmd, o);
        cmd->callback([&chosen, kind] { chosen = kind; });
    }

    CLI11_PARSE(app, argc, argv);

    ncask::ExperimentConfig cfg;
    try {
        cfg = resolve(*chosen, o);
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "ncask: usage error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (cfg.output.empty() || cfg.output == "-") {
            ncask::run_experiment(cfg, std::cout);
        } else {
            std::ofstream file(cfg.output, std::ios::binary);
            if (!file) {
                std::cerr << "ncask: cannot open '" << cfg.output << "' for writing\n";
                return 2;
            }
            ncask::run_experiment(cfg, file);
        }
    } catch (const ncask::ExperimentError& e) {
        std::cerr << "ncask: failed at " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ncask: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
