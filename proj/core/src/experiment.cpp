#include "ncask/experiment.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ncask/detector.hpp"
#include "ncask/errors.hpp"
#include "ncask/rng.hpp"
#include "ncask/sep_analytics.hpp"

#ifndef NCASK_VERSION
#define NCASK_VERSION "0.0.0"
#endif

namespace ncask {

using json = nlohmann::json;
using detail::require;

namespace {

double from_db(double db) { return std::pow(10.0, db / 10.0); }

std::string num(double v) { return fmt::format("{:.12g}", v); }

const char* scheme_name(bool optimized) { return optimized ? "optimized" : "traditional"; }

std::vector<bool> selected_schemes(SchemeSelection s) {
    switch (s) {
        case SchemeSelection::Traditional: return {false};
        case SchemeSelection::Optimized: return {true};
        case SchemeSelection::Both: return {false, true};
    }
    return {false};
}

const char* to_string(SchemeSelection s) {
    switch (s) {
        case SchemeSelection::Traditional: return "traditional";
        case SchemeSelection::Optimized: return "optimized";
        case SchemeSelection::Both: return "both";
    }
    return "?";
}

SchemeSelection scheme_from_string(const std::string& s) {
    if (s == "traditional") return SchemeSelection::Traditional;
    if (s == "optimized") return SchemeSelection::Optimized;
    if (s == "both") return SchemeSelection::Both;
    throw InvalidArgument("unknown scheme selection '" + s + "'");
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

GridSpec parse_grid(const json& j, GridSpec fallback, const char* start, const char* stop, const char* step) {
    return {get_or(j, start, fallback.start), get_or(j, stop, fallback.stop), get_or(j, step, fallback.step)};
}

void write_header(const ExperimentConfig& cfg, std::ostream& out) {
    out << "# ncask " << version_string() << '\n';
    out << "# experiment: " << to_string(cfg.experiment) << '\n';
    out << "# seed: " << cfg.seed << "  xi: " << cfg.xi << (cfg.adaptive_xi ? " (adaptive)" : "") << '\n';
    out << "# config: " << config_to_json(cfg) << '\n';
}

[[noreturn]] void fail_point(std::ostream& out, const std::string& where, const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg) {
        if (ch == ',' || ch == '\n') ch = ';';
    }
    out << "FAILED," << where << ',' << msg << '\n';
    out.flush();
    throw ExperimentError(where + ": " + e.what());
}

OptimizerOptions optimizer_options(const ExperimentConfig& cfg) {
    OptimizerOptions o = cfg.optimizer;
    o.xi = cfg.xi;
    o.adaptive_xi = cfg.adaptive_xi;
    return o;
}

// Level SNRs for the requested scheme at the given average SNR.
std::vector<double> scheme_gammas(const ExperimentConfig& cfg, bool optimized, double gamma_av,
                                  const EigenStructure& eig, int m) {
    if (!optimized) return equispaced_gammas(cfg.side, m, gamma_av);
    return optimize(cfg.side, m, gamma_av, eig, optimizer_options(cfg)).gammas_opt;
}

SepBound series_bound(const ExperimentConfig& cfg, const SnrProfile& snr, const EigenStructure& eig) {
    return cfg.adaptive_xi ? union_bound_adaptive(snr, eig, cfg.xi) : union_bound(snr, eig, cfg.xi);
}

}  // namespace

const char* version_string() { return NCASK_VERSION; }

const char* to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::SnrSweep: return "sep-sweep";
        case ExperimentKind::CorrSweep: return "corr-sweep";
        case ExperimentKind::Optimize: return "optimize";
        case ExperimentKind::ConstellationDiagram: return "constellation";
        case ExperimentKind::Simulate: return "simulate";
    }
    return "?";
}

ExperimentKind experiment_from_string(const std::string& verb) {
    for (auto k : {ExperimentKind::SnrSweep, ExperimentKind::CorrSweep, ExperimentKind::Optimize,
                   ExperimentKind::ConstellationDiagram, ExperimentKind::Simulate}) {
        if (verb == to_string(k)) return k;
    }
    throw InvalidArgument("unknown experiment '" + verb + "'");
}

ChannelSpec ChannelConfig::build(std::optional<int> n_override, std::optional<double> eps_override) const {
    ChannelSpec spec;
    spec.n = n_override.value_or(n);
    spec.sigma_h_sq = sigma_h_sq;
    spec.sigma_n_sq = sigma_n_sq;
    spec.model = {kind, eps_override.value_or(epsilon)};
    if (!values.empty()) {
        require(static_cast<int>(values.size()) == spec.n, "explicit mean vector length must equal n");
        spec.mean = Eigen::Map<const CVector>(values.data(), static_cast<Eigen::Index>(values.size()));
    } else {
        spec.mean = make_mean_vector(spec.n, sigma_h_sq, k_av, phases);
    }
    spec.validate();
    return spec;
}

std::vector<double> GridSpec::points() const {
    require(std::isfinite(start) && std::isfinite(stop), "grid bounds must be finite");
    require(step > 0.0, "grid step must be positive");
    require(stop >= start, "grid must be nondecreasing (stop >= start)");
    std::vector<double> out;
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long k = 0; k <= count; ++k) out.push_back(start + static_cast<double>(k) * step);
    return out;
}

void ExperimentConfig::validate() const {
    levels_for(side, m);
    optimizer.validate();
    require(xi >= 1, "xi must be at least 1");
    require(trials >= 0, "trials must be nonnegative");
    switch (experiment) {
        case ExperimentKind::SnrSweep:
            snr_grid.points();
            channel.build();
            break;
        case ExperimentKind::CorrSweep:
            require(channel.kind != CorrelationKind::Iid, "corr-sweep requires a correlated family");
            for (double e : eps_grid.points()) channel.build({}, e);
            break;
        case ExperimentKind::Simulate:
            require(trials >= 1, "simulate requires trials >= 1");
            if (gammas.empty()) snr_grid.points();
            channel.build();
            break;
        case ExperimentKind::ConstellationDiagram:
            require(!diagram_m.empty() && !diagram_n.empty() && !diagram_gamma_db.empty(),
                    "constellation grid must be non-empty");
            for (int mm : diagram_m) levels_for(side, mm);
            for (int nn : diagram_n) channel.build(nn);
            break;
        case ExperimentKind::Optimize:
            channel.build();
            break;
    }
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        if (j.contains("experiment")) cfg.experiment = experiment_from_string(j.at("experiment").get<std::string>());
        if (j.contains("channel")) {
            const json& c = j.at("channel");
            auto& ch = cfg.channel;
            ch.n = get_or(c, "n", ch.n);
            ch.sigma_h_sq = get_or(c, "sigma_h_sq", ch.sigma_h_sq);
            ch.sigma_n_sq = get_or(c, "sigma_n_sq", ch.sigma_n_sq);
            if (c.contains("correlation")) {
                const json& k = c.at("correlation");
                ch.kind = correlation_kind_from_string(get_or<std::string>(k, "kind", "iid"));
                ch.epsilon = get_or(k, "epsilon", 0.0);
            }
            if (c.contains("mean")) {
                const json& mu = c.at("mean");
                ch.k_av = get_or(mu, "k_av", ch.k_av);
                ch.phases = get_or(mu, "phases", std::vector<double>{});
                if (mu.contains("values")) {
                    for (const auto& v : mu.at("values")) {
                        require(v.is_array() && v.size() == 2, "mean.values entries must be [re, im]");
                        ch.values.emplace_back(v[0].get<double>(), v[1].get<double>());
                    }
                }
            }
        }
        if (j.contains("modulation")) {
            const json& m = j.at("modulation");
            cfg.side = side_from_string(get_or<std::string>(m, "side", to_string(cfg.side)));
            cfg.m = get_or(m, "m", cfg.m);
            cfg.gammas = get_or(m, "gammas", std::vector<double>{});
            if (!cfg.gammas.empty()) cfg.m = cfg.side == Side::OneSided ? static_cast<int>(cfg.gammas.size())
                                                                        : 2 * static_cast<int>(cfg.gammas.size());
        }
        if (j.contains("sweep")) cfg.snr_grid = parse_grid(j.at("sweep"), cfg.snr_grid, "start_db", "stop_db", "step_db");
        if (j.contains("corr_sweep")) cfg.eps_grid = parse_grid(j.at("corr_sweep"), cfg.eps_grid, "start", "stop", "step");
        cfg.gamma_av_db = get_or(j, "gamma_av_db", cfg.gamma_av_db);
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            cfg.diagram_m = get_or(g, "m", cfg.diagram_m);
            cfg.diagram_n = get_or(g, "n", cfg.diagram_n);
            cfg.diagram_gamma_db = get_or(g, "gamma_av_db", cfg.diagram_gamma_db);
        }
        cfg.trials = get_or(j, "trials", cfg.trials);
        cfg.seed = get_or(j, "seed", cfg.seed);
        cfg.threads = get_or(j, "threads", cfg.threads);
        cfg.xi = get_or(j, "xi", cfg.xi);
        cfg.adaptive_xi = get_or(j, "adaptive_xi", cfg.adaptive_xi);
        cfg.massive = get_or(j, "massive", cfg.massive);
        if (j.contains("schemes")) cfg.schemes = scheme_from_string(j.at("schemes").get<std::string>());
        if (j.contains("optimizer")) {
            const json& o = j.at("optimizer");
            auto& op = cfg.optimizer;
            op.max_iters = get_or(o, "max_iters", op.max_iters);
            op.grad_tol = get_or(o, "grad_tol", op.grad_tol);
            op.step_init = get_or(o, "step_init", op.step_init);
            op.restarts = get_or(o, "restarts", op.restarts);
            op.min_gap = get_or(o, "min_gap", op.min_gap);
            op.seed = get_or(o, "seed", op.seed);
            const std::string mode = get_or<std::string>(o, "mode", "analytic");
            require(mode == "analytic" || mode == "finite-difference", "optimizer.mode must be analytic or finite-difference");
            op.mode = mode == "analytic" ? GradientMode::Analytic : GradientMode::FiniteDifference;
        }
        cfg.output = get_or<std::string>(j, "output", cfg.output);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '#') {
        std::istringstream lines(text);
        std::string line;
        const std::string tag = "# config: ";
        while (std::getline(lines, line)) {
            if (line.rfind(tag, 0) == 0) return parse_config(line.substr(tag.size()));
        }
        throw InvalidArgument("'" + path + "' has no '# config:' header line");
    }
    return parse_config(text);
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["experiment"] = to_string(cfg.experiment);
    json ch;
    ch["n"] = cfg.channel.n;
    ch["sigma_h_sq"] = cfg.channel.sigma_h_sq;
    ch["sigma_n_sq"] = cfg.channel.sigma_n_sq;
    ch["correlation"] = {{"kind", to_string(cfg.channel.kind)}, {"epsilon", cfg.channel.epsilon}};
    json mean;
    mean["k_av"] = cfg.channel.k_av;
    mean["phases"] = cfg.channel.phases;
    if (!cfg.channel.values.empty()) {
        json vals = json::array();
        for (const auto& v : cfg.channel.values) vals.push_back({v.real(), v.imag()});
        mean["values"] = vals;
    }
    ch["mean"] = mean;
    j["channel"] = ch;
    json mod;
    mod["side"] = to_string(cfg.side);
    mod["m"] = cfg.m;
    if (!cfg.gammas.empty()) mod["gammas"] = cfg.gammas;
    j["modulation"] = mod;
    j["sweep"] = {{"start_db", cfg.snr_grid.start}, {"stop_db", cfg.snr_grid.stop}, {"step_db", cfg.snr_grid.step}};
    j["corr_sweep"] = {{"start", cfg.eps_grid.start}, {"stop", cfg.eps_grid.stop}, {"step", cfg.eps_grid.step}};
    j["gamma_av_db"] = cfg.gamma_av_db;
    j["grid"] = {{"m", cfg.diagram_m}, {"n", cfg.diagram_n}, {"gamma_av_db", cfg.diagram_gamma_db}};
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["xi"] = cfg.xi;
    j["adaptive_xi"] = cfg.adaptive_xi;
    j["massive"] = cfg.massive;
    j["schemes"] = to_string(cfg.schemes);
    const auto& o = cfg.optimizer;
    j["optimizer"] = {{"max_iters", o.max_iters}, {"grad_tol", o.grad_tol}, {"step_init", o.step_init},
                      {"restarts", o.restarts},   {"min_gap", o.min_gap},   {"seed", o.seed},
                      {"mode", o.mode == GradientMode::Analytic ? "analytic" : "finite-difference"}};
    return j.dump();
}

void run_snr_sweep(const ExperimentConfig& cfg, std::ostream& out) {
    cfg.validate();
    write_header(cfg, out);
    out << "scheme,gamma_av_db,bound,bound_massive,xi_used,warnings,sim_sep,sim_stderr,trials\n";
    const ChannelSpec spec = cfg.channel.build();
    const EigenStructure eig = eigen_structure(spec);
    const auto grid = cfg.snr_grid.points();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double db = grid[k];
        for (bool opt : selected_schemes(cfg.schemes)) {
            try {
                const double gamma_av = from_db(db);
                const auto gammas = scheme_gammas(cfg, opt, gamma_av, eig, cfg.m);
                const SnrProfile snr = SnrProfile::from_gammas(cfg.side, gammas);
                const SepBound b = series_bound(cfg, snr, eig);
                std::string row = fmt::format("{},{},{},", scheme_name(opt), num(db), num(b.value));
                row += cfg.massive ? num(union_bound_massive(snr, eig).value) : "";
                row += fmt::format(",{},{},", b.xi, b.warnings);
                if (cfg.trials > 0) {
                    const Constellation c = constellation_from_gammas(cfg.side, gammas, spec.sigma_h_sq, spec.sigma_n_sq);
                    const auto ctx = DetectorContext::make(spec, eig, c);
                    SimulationOptions so;
                    so.threads = cfg.threads;
                    const auto est = simulate_sep(ctx, cfg.trials, splitmix64(cfg.seed + k), so);
                    row += fmt::format("{},{},{}", num(est.sep_hat), num(est.std_error), est.trials);
                } else {
                    row += ",,0";
                }
                out << row << '\n';
            } catch (const std::exception& e) {
                fail_point(out, fmt::format("gamma_av_db={}", num(db)), e);
            }
        }
    }
}

void run_corr_sweep(const ExperimentConfig& cfg, std::ostream& out) {
    cfg.validate();
    write_header(cfg, out);
    out << "scheme,epsilon,bound,bound_massive,xi_used,warnings\n";
    const double gamma_av = from_db(cfg.gamma_av_db);
    for (double eps : cfg.eps_grid.points()) {
        for (bool opt : selected_schemes(cfg.schemes)) {
            try {
                const EigenStructure eig = eigen_structure(cfg.channel.build({}, eps));
                const SnrProfile snr = SnrProfile::from_gammas(cfg.side, scheme_gammas(cfg, opt, gamma_av, eig, cfg.m));
                const SepBound b = series_bound(cfg, snr, eig);
                out << fmt::format("{},{},{},{},{},{}\n", scheme_name(opt), num(eps), num(b.value),
                                   cfg.massive ? num(union_bound_massive(snr, eig).value) : "", b.xi, b.warnings);
            } catch (const std::exception& e) {
                fail_point(out, fmt::format("epsilon={}", num(eps)), e);
            }
        }
    }
}

void run_constellation_diagram(const ExperimentConfig& cfg, std::ostream& out) {
    cfg.validate();
    write_header(cfg, out);
    int widest = 0;
    for (int mm : cfg.diagram_m) widest = std::max(widest, mm);
    std::string header = "scheme,side,M,N,gamma_av_db";
    for (int k = 1; k <= widest; ++k) header += fmt::format(",s_{}", k);
    out << header << '\n';
    for (int mm : cfg.diagram_m) {
        for (int nn : cfg.diagram_n) {
            const EigenStructure eig = eigen_structure(cfg.channel.build(nn));
            for (double db : cfg.diagram_gamma_db) {
                for (bool opt : selected_schemes(cfg.schemes)) {
                    try {
                        const double gamma_av = from_db(db);
                        const auto gammas = scheme_gammas(cfg, opt, gamma_av, eig, mm);
                        // Normalized amplitudes s/sqrt(E_av) = sqrt(Gamma/Gamma_av), independent of sigmas.
                        std::vector<double> energies(gammas.size());
                        for (std::size_t k = 0; k < gammas.size(); ++k) energies[k] = gammas[k] / gamma_av;
                        const Constellation c = Constellation::from_energies(cfg.side, energies);
                        std::string row = fmt::format("{},{},{},{},{}", scheme_name(opt), to_string(cfg.side), mm, nn, num(db));
                        for (int k = 0; k < widest; ++k) {
                            row += ',';
                            if (k < mm) row += num(c.symbols[static_cast<std::size_t>(k)]);
                        }
                        out << row << '\n';
                    } catch (const std::exception& e) {
                        fail_point(out, fmt::format("M={} N={} gamma_av_db={}", mm, nn, num(db)), e);
                    }
                }
            }
        }
    }
}

void run_optimize(const ExperimentConfig& cfg, std::ostream& out) {
    cfg.validate();
    write_header(cfg, out);
    const EigenStructure eig = eigen_structure(cfg.channel.build());
    const double gamma_av = from_db(cfg.gamma_av_db);
    OptimizationResult r;
    try {
        r = optimize(cfg.side, cfg.m, gamma_av, eig, optimizer_options(cfg));
    } catch (const std::exception& e) {
        fail_point(out, fmt::format("gamma_av_db={}", num(cfg.gamma_av_db)), e);
    }
    out << "level,gamma_opt,amplitude_norm\n";
    for (std::size_t k = 0; k < r.gammas_opt.size(); ++k) {
        out << fmt::format("{},{},{}\n", k + 1, num(r.gammas_opt[k]), num(std::sqrt(r.gammas_opt[k] / gamma_av)));
    }
    const double sum = std::accumulate(r.gammas_opt.begin(), r.gammas_opt.end(), 0.0);
    const double residual = std::abs(sum - static_cast<double>(r.gammas_opt.size()) * gamma_av) / gamma_av;
    out << "# constraint_residual: " << num(residual) << '\n';
    out << "# sep_opt: " << num(r.sep_opt) << '\n';
    out << "# sep_equispaced: " << num(r.sep_equispaced) << '\n';
    out << "# iterations: " << r.iterations << '\n';
    out << "# kkt_residual: " << num(r.kkt_residual) << '\n';
    out << "# grad_norm_final: " << num(r.grad_norm_final) << '\n';
    out << "# eta: " << num(r.eta) << '\n';
    out << "# converged: " << (r.converged ? "true" : "false") << '\n';
    out << "# xi_used: " << r.xi << '\n';
}

void run_simulate(const ExperimentConfig& cfg, std::ostream& out) {
    cfg.validate();
    write_header(cfg, out);
    out << "scheme,gamma_av_db,sep_hat,stderr,trials,errors\n";
    const ChannelSpec spec = cfg.channel.build();
    const EigenStructure eig = eigen_structure(spec);
    SimulationOptions so;
    so.threads = cfg.threads;

    auto emit = [&](const char* scheme, double db, const std::vector<double>& gammas, std::size_t k) {
        const Constellation c = constellation_from_gammas(cfg.side, gammas, spec.sigma_h_sq, spec.sigma_n_sq);
        const auto est = simulate_sep(DetectorContext::make(spec, eig, c), cfg.trials, splitmix64(cfg.seed + k), so);
        out << fmt::format("{},{},{},{},{},{}\n", scheme, num(db), num(est.sep_hat), num(est.std_error), est.trials,
                           est.errors);
    };

    if (!cfg.gammas.empty()) {
        const double avg = std::accumulate(cfg.gammas.begin(), cfg.gammas.end(), 0.0) / static_cast<double>(cfg.gammas.size());
        try {
            emit("explicit", 10.0 * std::log10(avg), cfg.gammas, 0);
        } catch (const std::exception& e) {
            fail_point(out, "explicit gammas", e);
        }
        return;
    }
    const auto grid = cfg.snr_grid.points();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        for (bool opt : selected_schemes(cfg.schemes)) {
            try {
                emit(scheme_name(opt), grid[k], scheme_gammas(cfg, opt, from_db(grid[k]), eig, cfg.m), k);
            } catch (const std::exception& e) {
                fail_point(out, fmt::format("gamma_av_db={}", num(grid[k])), e);
            }
        }
    }
}

void run_experiment(const ExperimentConfig& cfg, std::ostream& out) {
    switch (cfg.experiment) {
        case ExperimentKind::SnrSweep: return run_snr_sweep(cfg, out);
        case ExperimentKind::CorrSweep: return run_corr_sweep(cfg, out);
        case ExperimentKind::Optimize: return run_optimize(cfg, out);
        case ExperimentKind::ConstellationDiagram: return run_constellation_diagram(cfg, out);
        case ExperimentKind::Simulate: return run_simulate(cfg, out);
    }
}

}  // namespace ncask
