#pragma once

#include <cstdint>
#include <vector>

#include "ncask/ask_modulation.hpp"
#include "ncask/channel_model.hpp"

namespace ncask {

// Everything the noncoherent receiver knows: channel statistics and the
// constellation. `mean` is kept so the simulator can draw h in antenna space.
struct DetectorContext {
    EigenStructure eig;
    CVector mean;
    CVector mu_tilde;
    double sigma_h_sq = 1.0;
    double sigma_n_sq = 1.0;
    Constellation constellation;

    static DetectorContext make(const ChannelSpec& spec, const EigenStructure& eig, Constellation c);
};

struct SimEstimate {
    double sep_hat = 0.0;
    std::int64_t trials = 0;
    std::int64_t errors = 0;
    double std_error = 0.0;
    std::uint64_t seed = 0;
};

// U^H r
CVector rotate(const CVector& received, const CMatrix& u);

// Precomputed per-symbol pieces of the decision metric.
class MlDetector {
public:
    explicit MlDetector(const DetectorContext& ctx);

    // sum_l |r_l - s mu_l|^2 / d_l + sum_l ln d_l, with d_l = s^2 sigma_h^2 lambda_l + sigma_n^2.
    double metric(const CVector& r_tilde, int symbol) const;
    // Smallest-metric symbol (0-based), ties to the lowest index.
    int detect(const CVector& r_tilde) const;

private:
    int n_ = 0;
    std::vector<double> amplitude_;
    std::vector<std::vector<double>> inv_d_;
    std::vector<double> log_det_;
    CVector mu_tilde_;
};

int detect(const CVector& r_tilde, const DetectorContext& ctx);

struct SimulationOptions {
    std::int64_t block_size = 4096;
    int threads = 0;  // 0 = hardware concurrency
    // Restrict transmitted symbols to this subset (empty = all, equiprobable).
    std::vector<int> transmit;
};

// Monte Carlo symbol error rate of the ML detector. Trials are partitioned into
// fixed-size blocks with per-block generator streams, so the result depends only
// on (ctx, trials, seed), never on the thread count.
SimEstimate simulate_sep(const DetectorContext& ctx, std::int64_t trials, std::uint64_t seed,
                         const SimulationOptions& opts = {});

}  // namespace ncask
