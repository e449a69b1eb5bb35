#include "ncask/detector.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "ncask/errors.hpp"
#include "ncask/rng.hpp"

namespace ncask {

using detail::require;

DetectorContext DetectorContext::make(const ChannelSpec& spec, const EigenStructure& eig, Constellation c) {
    spec.validate();
    require(eig.antennas() == spec.n, "eigenstructure does not match channel dimension");
    DetectorContext ctx;
    ctx.eig = eig;
    ctx.mean = spec.mean;
    ctx.mu_tilde = eig.u.adjoint() * spec.mean;
    ctx.sigma_h_sq = spec.sigma_h_sq;
    ctx.sigma_n_sq = spec.sigma_n_sq;
    ctx.constellation = std::move(c);
    return ctx;
}

CVector rotate(const CVector& received, const CMatrix& u) {
    require(u.rows() == received.size(), "rotation dimension mismatch");
    return u.adjoint() * received;
}

MlDetector::MlDetector(const DetectorContext& ctx)
    : n_(ctx.eig.antennas()), amplitude_(ctx.constellation.symbols), mu_tilde_(ctx.mu_tilde) {
    const std::vector<double> lam = ctx.eig.flat_lambdas();
    for (double s : amplitude_) {
        std::vector<double> inv(static_cast<std::size_t>(n_));
        double log_det = 0.0;
        for (int l = 0; l < n_; ++l) {
            const double d = s * s * ctx.sigma_h_sq * lam[static_cast<std::size_t>(l)] + ctx.sigma_n_sq;
            inv[static_cast<std::size_t>(l)] = 1.0 / d;
            log_det += std::log(d);
        }
        inv_d_.push_back(std::move(inv));
        log_det_.push_back(log_det);
    }
}

double MlDetector::metric(const CVector& r_tilde, int symbol) const {
    const auto k = static_cast<std::size_t>(symbol);
    const double s = amplitude_[k];
    const auto& inv = inv_d_[k];
    double acc = log_det_[k];
    for (int l = 0; l < n_; ++l) acc += std::norm(r_tilde(l) - s * mu_tilde_(l)) * inv[static_cast<std::size_t>(l)];
    return acc;
}

int MlDetector::detect(const CVector& r_tilde) const {
    int best = 0;
    double best_metric = metric(r_tilde, 0);
    for (int m = 1; m < static_cast<int>(amplitude_.size()); ++m) {
        const double v = metric(r_tilde, m);
        if (v < best_metric) {
            best_metric = v;
            best = m;
        }
    }
    return best;
}

int detect(const CVector& r_tilde, const DetectorContext& ctx) { return MlDetector(ctx).detect(r_tilde); }

SimEstimate simulate_sep(const DetectorContext& ctx, std::int64_t trials, std::uint64_t seed,
                         const SimulationOptions& opts) {
    require(trials >= 1, "trial count must be positive");
    require(opts.block_size >= 1, "block size must be positive");
    const int m = ctx.constellation.m;
    std::vector<int> transmit = opts.transmit;
    if (transmit.empty()) {
        transmit.resize(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) transmit[static_cast<std::size_t>(i)] = i;
    }
    for (int t : transmit) require(t >= 0 && t < m, "transmit symbol index out of range");

    const MlDetector detector(ctx);
    const int n = ctx.eig.antennas();
    const std::vector<double> lam = ctx.eig.flat_lambdas();
    CMatrix factor = ctx.eig.u;
    for (int c = 0; c < n; ++c) factor.col(c) *= std::sqrt(ctx.sigma_h_sq * lam[static_cast<std::size_t>(c)]);
    const double noise_std = std::sqrt(ctx.sigma_n_sq);
    const auto& symbols = ctx.constellation.symbols;

    const std::int64_t blocks = (trials + opts.block_size - 1) / opts.block_size;
    std::vector<std::int64_t> block_errors(static_cast<std::size_t>(blocks), 0);

    auto run_block = [&](std::int64_t b) {
        auto eng = stream_engine(seed, static_cast<std::uint64_t>(b));
        ComplexNormal cn;
        std::uniform_int_distribution<std::size_t> pick(0, transmit.size() - 1);
        const std::int64_t begin = b * opts.block_size;
        const std::int64_t count = std::min(opts.block_size, trials - begin);
        CVector w(n), h(n), r(n), r_tilde(n);
        std::int64_t errors = 0;
        for (std::int64_t t = 0; t < count; ++t) {
            const int sent = transmit[pick(eng)];
            for (int l = 0; l < n; ++l) w(l) = cn(eng);
            h.noalias() = factor * w;
            h += ctx.mean;
            const double s = symbols[static_cast<std::size_t>(sent)];
            for (int l = 0; l < n; ++l) r(l) = h(l) * s + noise_std * cn(eng);
            r_tilde.noalias() = ctx.eig.u.adjoint() * r;
            if (detector.detect(r_tilde) != sent) ++errors;
        }
        block_errors[static_cast<std::size_t>(b)] = errors;
    };

    int threads = opts.threads > 0 ? opts.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(blocks)));
    if (threads == 1) {
        for (std::int64_t b = 0; b < blocks; ++b) run_block(b);
    } else {
        std::atomic<std::int64_t> next{0};
        std::vector<std::jthread> pool;
        for (int k = 0; k < threads; ++k) {
            pool.emplace_back([&] {
                for (std::int64_t b = next++; b < blocks; b = next++) run_block(b);
            });
        }
    }

    SimEstimate est;
    est.trials = trials;
    for (auto e : block_errors) est.errors += e;
    est.sep_hat = static_cast<double>(est.errors) / static_cast<double>(trials);
    est.std_error = std::sqrt(est.sep_hat * (1.0 - est.sep_hat) / static_cast<double>(trials));
    est.seed = seed;
    return est;
}

}  // namespace ncask
