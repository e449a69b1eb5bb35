#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "ncask/errors.hpp"
#include "ncask/experiment.hpp"

using namespace ncask;

namespace {

std::string run(const ExperimentConfig& cfg) {
    std::ostringstream out;
    run_experiment(cfg, out);
    return out.str();
}

std::vector<std::vector<std::string>> data_rows(const std::string& csv) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(csv);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "ncask_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig small_sweep() {
    ExperimentConfig cfg = parse_config(R"({
        "experiment": "sep-sweep",
        "channel": {"n": 2, "correlation": {"kind": "exponential", "epsilon": 0.5}, "mean": {"k_av": 1.0}},
        "modulation": {"side": "one-sided", "m": 4},
        "sweep": {"start_db": 0, "stop_db": 10, "step_db": 5},
        "trials": 4000, "xi": 500, "adaptive_xi": false,
        "optimizer": {"restarts": 0, "max_iters": 40}
    })");
    cfg.schemes = SchemeSelection::Both;
    return cfg;
}

}  // namespace

TEST_CASE("grid points") {
    CHECK(GridSpec{0, 30, 5}.points().size() == 7);
    CHECK(GridSpec{0.05, 0.9, 0.05}.points().size() == 18);
    CHECK(GridSpec{3, 3, 1}.points() == std::vector<double>{3});
    CHECK_THROWS_AS((GridSpec{0, 1, 0}.points()), InvalidArgument);
    CHECK_THROWS_AS((GridSpec{5, 1, 1}.points()), InvalidArgument);
}

TEST_CASE("config round trips through JSON") {
    const auto cfg = small_sweep();
    const std::string text = config_to_json(cfg);
    CHECK(config_to_json(parse_config(text)) == text);
    CHECK_THROWS_AS(parse_config("{not json"), InvalidArgument);
    CHECK_THROWS_AS(parse_config(R"({"experiment": "plot"})"), InvalidArgument);
    CHECK_THROWS_AS(parse_config(R"({"channel": {"n": "four"}})"), InvalidArgument);
}

TEST_CASE("invalid configs are rejected before running") {
    auto cfg = small_sweep();
    cfg.experiment = ExperimentKind::Simulate;
    cfg.trials = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = small_sweep();
    cfg.experiment = ExperimentKind::CorrSweep;
    cfg.eps_grid = {0.5, 1.1, 0.3};
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg.channel.kind = CorrelationKind::Iid;
    cfg.eps_grid = {0.1, 0.5, 0.1};
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = small_sweep();
    cfg.m = 3;
    cfg.side = Side::TwoSided;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("snr sweep rows carry bound and simulation for both schemes") {
    const auto cfg = small_sweep();
    const std::string csv = run(cfg);
    CHECK(csv.rfind("# ncask ", 0) == 0);
    CHECK(csv.find("# config: ") != std::string::npos);
    const auto rows = data_rows(csv);
    REQUIRE(rows.size() == 6);
    double prev_trad = 2.0;
    for (std::size_t k = 0; k < rows.size(); k += 2) {
        CHECK(rows[k][0] == "traditional");
        CHECK(rows[k + 1][0] == "optimized");
        const double trad = std::stod(rows[k][2]);
        const double opt = std::stod(rows[k + 1][2]);
        CHECK(opt < trad);
        CHECK(trad <= prev_trad);
        prev_trad = trad;
        for (std::size_t r = k; r < k + 2; ++r) {
            const double sim = std::stod(rows[r][6]);
            const double se = std::stod(rows[r][7]);
            CHECK(sim <= std::stod(rows[r][2]) + 3 * se);
            CHECK(rows[r][8] == "4000");
        }
    }
}

TEST_CASE("runs are byte-identical and reproducible from the header") {
    auto cfg = small_sweep();
    const std::string a = run(cfg);
    cfg.threads = 3;
    const std::string b = run(cfg);
    CHECK(a == b);

    const auto path = scratch("sweep.csv");
    {
        std::ofstream f(path, std::ios::binary);
        f << a;
    }
    const auto again = load_config(path.string());
    CHECK(run(again) == a);
}

TEST_CASE("constellation diagram rows are normalized") {
    auto cfg = parse_config(R"({
        "experiment": "constellation",
        "modulation": {"side": "two-sided", "m": 4},
        "grid": {"m": [4, 8], "n": [2], "gamma_av_db": [10]},
        "schemes": "both", "xi": 500, "adaptive_xi": false,
        "optimizer": {"restarts": 0, "max_iters": 30}
    })");
    const auto rows = data_rows(run(cfg));
    REQUIRE(rows.size() == 4);
    const double r5 = std::sqrt(5.0);
    CHECK(rows[0][0] == "traditional");
    CHECK(rows[0][2] == "4");
    CHECK(std::stod(rows[0][5]) == doctest::Approx(-3 / r5));
    CHECK(std::stod(rows[0][6]) == doctest::Approx(-1 / r5));
    CHECK(std::stod(rows[0][7]) == doctest::Approx(1 / r5));
    CHECK(std::stod(rows[0][8]) == doctest::Approx(3 / r5));
    CHECK(rows[0][9].empty());
    for (const auto& row : rows) {
        const int m = std::stoi(row[2]);
        double ms = 0.0;
        for (int k = 0; k < m; ++k) ms += std::pow(std::stod(row[5 + k]), 2);
        CHECK(ms / m == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("optimize output reports a satisfied energy constraint") {
    auto cfg = parse_config(R"({
        "experiment": "optimize",
        "channel": {"n": 4, "correlation": {"kind": "uniform", "epsilon": 0.5}},
        "modulation": {"side": "one-sided", "m": 4},
        "gamma_av_db": 10,
        "optimizer": {"restarts": 1}
    })");
    const std::string csv = run(cfg);
    const auto pos = csv.find("# constraint_residual: ");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(csv.substr(pos + 23)) <= 1e-9);
    CHECK(data_rows(csv).size() == 4);
}

TEST_CASE("corr sweep and simulate") {
    auto cfg = parse_config(R"({
        "experiment": "corr-sweep",
        "channel": {"n": 2, "correlation": {"kind": "uniform", "epsilon": 0.5}},
        "corr_sweep": {"start": 0.2, "stop": 0.8, "step": 0.3},
        "gamma_av_db": 10, "xi": 500, "adaptive_xi": false
    })");
    const auto rows = data_rows(run(cfg));
    REQUIRE(rows.size() == 3);
    CHECK(std::stod(rows[0][2]) <= std::stod(rows[2][2]));

    cfg.experiment = ExperimentKind::Simulate;
    cfg.trials = 2000;
    cfg.snr_grid = {10, 10, 1};
    const auto sim = data_rows(run(cfg));
    REQUIRE(sim.size() == 1);
    CHECK(sim[0][4] == "2000");
}

TEST_CASE("a failing grid point leaves a marker row and raises") {
    auto cfg = small_sweep();
    cfg.trials = 0;
    cfg.schemes = SchemeSelection::Traditional;
    cfg.snr_grid = {0, 4000, 2000};
    std::ostringstream out;
    CHECK_THROWS_AS(run_experiment(cfg, out), ExperimentError);
    const std::string csv = out.str();
    CHECK(csv.find("FAILED,gamma_av_db=") != std::string::npos);
    CHECK(data_rows(csv).size() >= 1);
}

#ifdef NCASK_TOOL_PATH
TEST_CASE("command line verbs and exit codes") {
    const std::string tool = NCASK_TOOL_PATH;
    const auto cfg_path = scratch("cfg.json");
    {
        std::ofstream f(cfg_path);
        f << R"({"channel": {"n": 2}, "modulation": {"side": "two-sided", "m": 4},
                 "grid": {"m": [4], "n": [2], "gamma_av_db": [10]}, "xi": 400, "adaptive_xi": false,
                 "sweep": {"start_db": 5, "stop_db": 5, "step_db": 1}, "optimizer": {"restarts": 0}})";
    }
    const auto out1 = scratch("c1.csv"), out2 = scratch("c2.csv");
    auto sh = [&](const std::string& args) {
        return std::system(fmt::format("\"{}\" {} 2>/dev/null >/dev/null", tool, args).c_str());
    };
    CHECK(sh(fmt::format("constellation --config {} --both --out {}", cfg_path.string(), out1.string())) == 0);
    CHECK(sh(fmt::format("constellation --config {} --both --out {}", cfg_path.string(), out2.string())) == 0);
    CHECK(slurp(out1) == slurp(out2));
    CHECK(sh(fmt::format("constellation --config {} --out {}", out1.string(), out2.string())) == 0);
    CHECK(slurp(out1) == slurp(out2));

    CHECK(sh(fmt::format("simulate --config {} --trials 0", cfg_path.string())) != 0);
    CHECK(sh(fmt::format("sep-sweep --config {} --optimized --traditional", cfg_path.string())) != 0);
    CHECK(sh("sep-sweep --config /nonexistent/cfg.json") != 0);
    CHECK(sh("unknown-verb") != 0);

    const auto sim1 = scratch("s1.csv"), sim2 = scratch("s2.csv");
    CHECK(sh(fmt::format("simulate --config {} --trials 3000 --seed 9 --threads 1 --out {}", cfg_path.string(), sim1.string())) == 0);
    CHECK(sh(fmt::format("simulate --config {} --trials 3000 --seed 9 --threads 4 --out {}", cfg_path.string(), sim2.string())) == 0);
    CHECK(slurp(sim1) == slurp(sim2));
}
#endif
