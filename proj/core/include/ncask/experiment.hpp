#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncask/ask_modulation.hpp"
#include "ncask/channel_model.hpp"
#include "ncask/optimizer.hpp"

namespace ncask {

enum class ExperimentKind { SnrSweep, CorrSweep, Optimize, ConstellationDiagram, Simulate };
enum class SchemeSelection { Traditional, Optimized, Both };

const char* to_string(ExperimentKind kind);
ExperimentKind experiment_from_string(const std::string& verb);

struct ChannelConfig {
    int n = 4;
    double sigma_h_sq = 1.0;
    double sigma_n_sq = 1.0;
    CorrelationKind kind = CorrelationKind::Iid;
    double epsilon = 0.0;
    double k_av = 1.0;
    std::vector<double> phases;
    std::vector<cplx> values;  // explicit mean vector; overrides k_av/phases

    // n_override / eps_override replace the configured values when set.
    ChannelSpec build(std::optional<int> n_override = {}, std::optional<double> eps_override = {}) const;
};

struct GridSpec {
    double start = 0.0;
    double stop = 0.0;
    double step = 1.0;

    std::vector<double> points() const;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::SnrSweep;
    ChannelConfig channel;
    Side side = Side::OneSided;
    int m = 4;
    std::vector<double> gammas;  // explicit level SNRs (simulate); empty = equispaced
    GridSpec snr_grid{0.0, 30.0, 1.0};   // Gamma_av in dB
    GridSpec eps_grid{0.05, 0.9, 0.05};  // correlation coefficient
    double gamma_av_db = 10.0;
    std::vector<int> diagram_m{4, 8};
    std::vector<int> diagram_n{4, 8};
    std::vector<double> diagram_gamma_db{10.0, 20.0};
    std::int64_t trials = 0;
    std::uint64_t seed = 1;
    int threads = 0;
    int xi = 2000;
    bool adaptive_xi = true;
    bool massive = true;
    SchemeSelection schemes = SchemeSelection::Traditional;
    OptimizerOptions optimizer;
    std::string output;

    void validate() const;
};

class ExperimentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// JSON text; missing keys take the defaults above.
ExperimentConfig parse_config(const std::string& text);
// Reads a JSON config file, or the "# config:" line of a CSV this tool wrote.
ExperimentConfig load_config(const std::string& path);
// Fully resolved config as single-line JSON.
std::string config_to_json(const ExperimentConfig& cfg);

const char* version_string();

void run_snr_sweep(const ExperimentConfig& cfg, std::ostream& out);
void run_corr_sweep(const ExperimentConfig& cfg, std::ostream& out);
void run_constellation_diagram(const ExperimentConfig& cfg, std::ostream& out);
void run_optimize(const ExperimentConfig& cfg, std::ostream& out);
void run_simulate(const ExperimentConfig& cfg, std::ostream& out);
void run_experiment(const ExperimentConfig& cfg, std::ostream& out);

}  // namespace ncask
