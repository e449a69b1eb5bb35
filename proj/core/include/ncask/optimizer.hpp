#pragma once

#include <cstdint>
#include <vector>

#include "ncask/ask_modulation.hpp"
#include "ncask/channel_model.hpp"
#include "ncask/sep_analytics.hpp"

namespace ncask {

enum class GradientMode { Analytic, FiniteDifference };

struct OptimizerOptions {
    int max_iters = 200;
    double grad_tol = 1e-6;   // on the projected gradient of ln(bound) in units of Gamma_av
    double step_init = 0.05;  // first step length, as a fraction of Gamma_av
    int xi = kDefaultSeriesDepth;
    bool adaptive_xi = true;  // pick xi once at the equispaced start, then hold it
    int restarts = 5;
    double min_gap = -1.0;    // minimum level spacing; negative means 1e-3 * Gamma_av
    GradientMode mode = GradientMode::Analytic;
    std::uint64_t seed = 1;

    void validate() const;
};

struct OptimizationResult {
    std::vector<double> gammas_opt;
    double sep_opt = 0.0;
    double sep_equispaced = 0.0;
    int iterations = 0;
    double grad_norm_final = 0.0;
    double kkt_residual = 0.0;
    double eta = 0.0;  // Lagrange multiplier of the sum constraint
    bool converged = false;
    int xi = 0;
    int best_start = 0;  // 0 = equispaced seed, k > 0 = k-th random restart
};

struct BoundWithGradient {
    double value = 0.0;
    std::vector<double> gradient;  // d bound / d Gamma_t, one entry per level
};

// dP_{i->j} / dGamma_t for symbols i, j and level t.
double pep_gradient(int i, int j, int t, const SnrProfile& snr, const EigenStructure& eig,
                    int xi = kDefaultSeriesDepth);

// Both the PEP and its derivatives with respect to the two levels involved.
struct PepWithGradient {
    double value = 0.0;
    double d_level_i = 0.0;
    double d_level_j = 0.0;
};
PepWithGradient pep_with_gradient(int i, int j, const SnrProfile& snr, const EigenStructure& eig, int xi);

std::vector<double> union_bound_gradient(const SnrProfile& snr, const EigenStructure& eig,
                                         int xi = kDefaultSeriesDepth);
BoundWithGradient union_bound_with_gradient(const SnrProfile& snr, const EigenStructure& eig,
                                            int xi = kDefaultSeriesDepth);

// Central finite differences of union_bound with step `rel_step * Gamma_t`.
std::vector<double> union_bound_gradient_fd(const SnrProfile& snr, const EigenStructure& eig, int xi,
                                            double rel_step = 1e-4);

struct GradientCheckReport {
    std::vector<double> analytic;
    std::vector<double> numeric;
    std::vector<double> rel_error;
    double max_rel_error = 0.0;
};

// Relative errors use max(|numeric_t|, 1e-6 * max_t |numeric_t|) as the scale so
// that components many orders below the dominant one are judged against it.
GradientCheckReport gradient_selfcheck(const SnrProfile& snr, const EigenStructure& eig, int xi,
                                       double rel_step = 1e-4);

// Euclidean projection onto {sum g = total, g_1 >= gap, g_{m+1} - g_m >= gap}.
std::vector<double> project_feasible(const std::vector<double>& v, double total, double gap);

OptimizationResult optimize(Side side, int m, double gamma_av, const EigenStructure& eig,
                            const OptimizerOptions& opts = {});

}  // namespace ncask
