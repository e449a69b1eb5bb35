#include "ncask/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ncask/errors.hpp"
#include "ncask/rng.hpp"

namespace ncask {

using detail::require;

void OptimizerOptions::validate() const {
    require(max_iters >= 0, "max_iters must be nonnegative");
    require(grad_tol > 0.0, "grad_tol must be positive");
    require(step_init > 0.0, "step_init must be positive");
    require(xi >= 1, "series depth must be at least 1");
    require(restarts >= 0, "restarts must be nonnegative");
}

PepWithGradient pep_with_gradient(int i, int j, const SnrProfile& snr, const EigenStructure& eig, int xi) {
    PepWithGradient out;
    const PepCase kind = classify_pair(snr, i, j);
    if (kind == PepCase::Antipodal) {
        // d/dGamma Q(sqrt(T(Gamma))) = -exp(-T/2) / (2 sqrt(2 pi T)) * dT/dGamma.
        const double g = snr.gamma_of(i);
        const auto k = eig.k_sums();
        double big_t = 0.0;
        double dt = 0.0;
        for (std::size_t p = 0; p < eig.lambdas.size(); ++p) {
            const double lam = eig.lambdas[p];
            const double den = g * lam + 1.0;
            big_t += 2.0 * g * lam * k[p] / den;
            dt += 2.0 * lam * k[p] / (den * den);
        }
        out.value = q_function(std::sqrt(big_t));
        out.d_level_i = big_t > 0.0 ? -std::exp(-0.5 * big_t) / (2.0 * std::sqrt(2.0 * M_PI * big_t)) * dt : 0.0;
        return out;
    }

    const SnrProfile guarded = detail::guard_pair(snr, i, j);
    const PepTerms t = pep_terms(i, j, guarded, eig);
    const std::size_t groups = t.beta.size();
    const double ai = t.sign_i * std::sqrt(t.gamma_i);
    const double aj = t.sign_j * std::sqrt(t.gamma_j);
    const double sum = ai + aj;
    const double k_total = std::accumulate(t.k_sums.begin(), t.k_sums.end(), 0.0);

    FormTangent wrt_i, wrt_j;
    wrt_i.dbeta.resize(groups);
    wrt_i.dgk.resize(groups);
    wrt_j.dbeta.resize(groups);
    wrt_j.dgk.resize(groups);
    wrt_i.dx = k_total * aj / (ai * sum * sum);
    wrt_j.dx = -k_total * ai / (aj * sum * sum);
    for (std::size_t p = 0; p < groups; ++p) {
        const double lam = t.lambdas[p];
        const double di = t.gamma_i * lam + 1.0;
        const double dj = t.gamma_j * lam + 1.0;
        wrt_i.dbeta[p] = lam / dj;
        wrt_j.dbeta[p] = -lam * di / (dj * dj);
        const double cube = lam * sum * sum * sum;
        wrt_i.dgk[p] = t.k_sums[p] * (1.0 / (sum * sum) - di / (cube * ai));
        wrt_j.dgk[p] = t.k_sums[p] * (-di / (cube * aj));
        wrt_i.dx += t.q[p] * lam / di;
        wrt_j.dx -= t.q[p] * lam / dj;
    }
    const FormTangent dirs[] = {wrt_i, wrt_j};
    const bool upper = kind == PepCase::Less;
    const SeriesResult s = evaluate_series(t.form(), t.alpha, xi, upper, dirs);
    const double raw = upper ? s.tail : s.head;
    const auto& d = upper ? s.d_tail : s.d_head;
    out.value = std::clamp(raw, 0.0, 1.0);
    // Clamped values are flat in every direction.
    const bool inside = raw > 0.0 && raw < 1.0;
    out.d_level_i = inside ? d[0] : 0.0;
    out.d_level_j = inside ? d[1] : 0.0;
    return out;
}

double pep_gradient(int i, int j, int t, const SnrProfile& snr, const EigenStructure& eig, int xi) {
    require(t >= 0 && t < snr.levels(), "level index out of range");
    const int li = snr.level_of(i);
    const int lj = snr.level_of(j);
    if (t != li && t != lj) return 0.0;
    const PepWithGradient r = pep_with_gradient(i, j, snr, eig, xi);
    return t == li ? r.d_level_i : r.d_level_j;
}

BoundWithGradient union_bound_with_gradient(const SnrProfile& snr, const EigenStructure& eig, int xi) {
    const int m = snr.symbols();
    BoundWithGradient out;
    out.gradient.assign(static_cast<std::size_t>(snr.levels()), 0.0);
    const bool mirror = snr.side == Side::TwoSided;
    const double weight = mirror ? 2.0 : 1.0;
    for (int i = mirror ? m / 2 : 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            const PepWithGradient r = pep_with_gradient(i, j, snr, eig, xi);
            out.value += weight * r.value;
            out.gradient[static_cast<std::size_t>(snr.level_of(i))] += weight * r.d_level_i;
            out.gradient[static_cast<std::size_t>(snr.level_of(j))] += weight * r.d_level_j;
        }
    }
    out.value /= m;
    for (double& g : out.gradient) g /= m;
    return out;
}

std::vector<double> union_bound_gradient(const SnrProfile& snr, const EigenStructure& eig, int xi) {
    return union_bound_with_gradient(snr, eig, xi).gradient;
}

std::vector<double> union_bound_gradient_fd(const SnrProfile& snr, const EigenStructure& eig, int xi,
                                            double rel_step) {
    require(rel_step > 0.0, "finite-difference step must be positive");
    std::vector<double> out(static_cast<std::size_t>(snr.levels()));
    for (int t = 0; t < snr.levels(); ++t) {
        const double h = rel_step * snr.gammas[static_cast<std::size_t>(t)];
        auto shifted = [&](double delta) {
            std::vector<double> g = snr.gammas;
            g[static_cast<std::size_t>(t)] += delta;
            return union_bound(SnrProfile::from_gammas(snr.side, std::move(g)), eig, xi).value;
        };
        out[static_cast<std::size_t>(t)] = (shifted(h) - shifted(-h)) / (2.0 * h);
    }
    return out;
}

GradientCheckReport gradient_selfcheck(const SnrProfile& snr, const EigenStructure& eig, int xi, double rel_step) {
    GradientCheckReport rep;
    rep.analytic = union_bound_gradient(snr, eig, xi);
    rep.numeric = union_bound_gradient_fd(snr, eig, xi, rel_step);
    double scale = 0.0;
    for (double v : rep.numeric) scale = std::max(scale, std::abs(v));
    rep.rel_error.resize(rep.analytic.size());
    for (std::size_t t = 0; t < rep.analytic.size(); ++t) {
        const double den = std::max({std::abs(rep.numeric[t]), 1e-6 * scale, std::numeric_limits<double>::min()});
        rep.rel_error[t] = std::abs(rep.analytic[t] - rep.numeric[t]) / den;
        rep.max_rel_error = std::max(rep.max_rel_error, rep.rel_error[t]);
    }
    return rep;
}

namespace {

// Pool-adjacent-violators least-squares nondecreasing fit.
std::vector<double> isotonic(const std::vector<double>& v) {
    std::vector<double> mean;
    std::vector<std::size_t> size;
    for (double x : v) {
        mean.push_back(x);
        size.push_back(1);
        while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
            const std::size_t n1 = size[size.size() - 2];
            const std::size_t n2 = size.back();
            const double merged = (mean[mean.size() - 2] * n1 + mean.back() * n2) / static_cast<double>(n1 + n2);
            mean.pop_back();
            size.pop_back();
            mean.back() = merged;
            size.back() = n1 + n2;
        }
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t b = 0; b < mean.size(); ++b) out.insert(out.end(), size[b], mean[b]);
    return out;
}

std::vector<double> isotonic_weighted(const std::vector<double>& v, const std::vector<double>& w) {
    std::vector<double> mean, weight;
    std::vector<std::size_t> size;
    for (std::size_t k = 0; k < v.size(); ++k) {
        mean.push_back(v[k]);
        weight.push_back(w[k]);
        size.push_back(1);
        while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
            const std::size_t a = mean.size() - 2;
            const double wt = weight[a] + weight.back();
            mean[a] = (mean[a] * weight[a] + mean.back() * weight.back()) / wt;
            weight[a] = wt;
            size[a] += size.back();
            mean.pop_back();
            weight.pop_back();
            size.pop_back();
        }
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t b = 0; b < mean.size(); ++b) out.insert(out.end(), size[b], mean[b]);
    return out;
}

// Projection in the norm sum_k w_k (x_k - v_k)^2. The sum multiplier enters as
// a shift tau / w_k, so it is located by bisection instead of in closed form.
std::vector<double> project_weighted(const std::vector<double>& v, const std::vector<double>& w, double total,
                                     double gap) {
    const std::size_t n = v.size();
    const double slack = total - gap * static_cast<double>(n * (n + 1)) / 2.0;
    std::vector<double> u(n), shifted(n);
    for (std::size_t k = 0; k < n; ++k) u[k] = v[k] - gap * static_cast<double>(k + 1);

    auto fit = [&](double tau) {
        for (std::size_t k = 0; k < n; ++k) shifted[k] = u[k] - tau / w[k];
        auto y = isotonic_weighted(shifted, w);
        for (double& e : y) e = std::max(e, 0.0);
        return y;
    };
    auto sum = [](const std::vector<double>& y) { return std::accumulate(y.begin(), y.end(), 0.0); };

    double spread = 1.0;
    for (std::size_t k = 0; k < n; ++k) spread = std::max(spread, (std::abs(u[k]) + slack) * w[k]);
    double lo = -spread, hi = spread;
    while (sum(fit(lo)) < slack) lo *= 2.0;
    while (sum(fit(hi)) > slack) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (sum(fit(mid)) > slack ? lo : hi) = mid;
    }
    std::vector<double> y = fit(0.5 * (lo + hi));
    const double drift = slack - sum(y);
    if (drift >= 0.0 || y.back() + drift >= y[n > 1 ? n - 2 : 0]) y.back() += drift;
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = y[k] + gap * static_cast<double>(k + 1);
    return x;
}

}  // namespace

std::vector<double> project_feasible(const std::vector<double>& v, double total, double gap) {
    const std::size_t n = v.size();
    require(n >= 1, "nothing to project");
    require(gap >= 0.0, "gap must be nonnegative");
    const double slack = total - gap * static_cast<double>(n * (n + 1)) / 2.0;
    require(slack >= 0.0, "level spacing constraint is infeasible for this total");

    // y_k = x_k - (k+1) gap turns the spacing constraints into y nondecreasing,
    // y >= 0. The projection is then max(iso(y) - tau, 0) with tau fixed by the sum.
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) y[k] = v[k] - gap * static_cast<double>(k + 1);
    const std::vector<double> w = isotonic(y);

    double tau = 0.0;
    double suffix = 0.0;
    for (std::size_t cnt = 1; cnt <= n; ++cnt) {
        const std::size_t first = n - cnt;
        suffix += w[first];
        const double cand = (suffix - slack) / static_cast<double>(cnt);
        const bool below_first = cand <= w[first] || (cnt == n);
        const bool above_prev = first == 0 || cand >= w[first - 1];
        if (below_first && above_prev) {
            tau = cand;
            break;
        }
    }
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = std::max(w[k] - tau, 0.0) + gap * static_cast<double>(k + 1);
    // Remove rounding drift in the sum without breaking the spacing.
    const double drift = (total - std::accumulate(x.begin(), x.end(), 0.0)) / static_cast<double>(n);
    if (drift > 0.0 || x.front() + drift >= gap) {
        for (double& e : x) e += drift;
    }
    return x;
}

namespace {

struct Objective {
    Side side;
    double gamma_av;
    const EigenStructure& eig;
    int xi;
    GradientMode mode;

    SnrProfile profile(const std::vector<double>& z) const {
        std::vector<double> g(z.size());
        std::transform(z.begin(), z.end(), g.begin(), [&](double v) { return v * gamma_av; });
        return SnrProfile::from_gammas(side, std::move(g));
    }

    double bound(const std::vector<double>& z) const { return union_bound(profile(z), eig, xi).value; }

    // Bound and gradient of ln(bound) with respect to z = Gamma / Gamma_av.
    std::pair<double, std::vector<double>> with_log_gradient(const std::vector<double>& z,
                                                            std::vector<double>* raw = nullptr) const {
        const SnrProfile p = profile(z);
        BoundWithGradient bg;
        if (mode == GradientMode::Analytic) {
            bg = union_bound_with_gradient(p, eig, xi);
        } else {
            bg.value = union_bound(p, eig, xi).value;
            bg.gradient = union_bound_gradient_fd(p, eig, xi);
        }
        if (raw) *raw = bg.gradient;
        std::vector<double> g(bg.gradient.size());
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = gamma_av * bg.gradient[k] / bg.value;
        return {bg.value, std::move(g)};
    }
};

double norm2(const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

struct RunResult {
    std::vector<double> z;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

RunResult descend(const Objective& obj, std::vector<double> z, double total, double gap, const OptimizerOptions& opts) {
    const std::size_t n = z.size();
    auto residual = [&](const std::vector<double>& x, const std::vector<double>& g) {
        std::vector<double> trial(n);
        for (std::size_t k = 0; k < n; ++k) trial[k] = x[k] - g[k];
        const auto proj = project_feasible(trial, total, gap);
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += (proj[k] - x[k]) * (proj[k] - x[k]);
        return std::sqrt(acc);
    };

    auto [value, grad] = obj.with_log_gradient(z);
    double log_value = std::log(value);
    // Diagonal metric 1/z^2: steps are taken in relative (log-like) units, which
    // keeps levels that differ by orders of magnitude equally well conditioned.
    auto metric = [&](const std::vector<double>& x) {
        std::vector<double> w(n);
        for (std::size_t k = 0; k < n; ++k) w[k] = 1.0 / std::pow(std::max(x[k], gap > 0.0 ? gap : 1e-12), 2);
        return w;
    };
    std::vector<double> w = metric(z);
    double gmax = 0.0;
    for (std::size_t k = 0; k < n; ++k) gmax = std::max(gmax, std::abs(grad[k] * z[k]));
    double t = gmax > 0.0 ? opts.step_init / gmax : 1.0;

    RunResult out;
    out.z = z;
    out.value = value;
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        if (residual(z, grad) <= opts.grad_tol) {
            out.converged = true;
            break;
        }
        bool accepted = false;
        std::vector<double> z_new;
        double value_new = 0.0;
        for (int bt = 0; bt < 60; ++bt) {
            std::vector<double> trial(n);
            for (std::size_t k = 0; k < n; ++k) trial[k] = z[k] - t * grad[k] / w[k];
            z_new = project_weighted(trial, w, total, gap);
            double decrease = 0.0;
            double moved = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                decrease += grad[k] * (z_new[k] - z[k]);
                moved = std::max(moved, std::abs(z_new[k] - z[k]) / z[k]);
            }
            if (moved < 1e-15) break;
            value_new = obj.bound(z_new);
            if (value_new > 0.0 && std::log(value_new) <= log_value + 1e-4 * decrease && value_new <= value) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        out.iterations = iter + 1;
        if (!accepted) {
            // No descent along the projected direction at double precision.
            out.converged = residual(z, grad) <= std::sqrt(opts.grad_tol);
            break;
        }
        auto [v2, g2] = obj.with_log_gradient(z_new);
        double ss = 0.0;
        double sy = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double s = z_new[k] - z[k];
            ss += w[k] * s * s;
            sy += s * (g2[k] - grad[k]);
        }
        t = sy > 0.0 ? ss / sy : 2.0 * t;
        t = std::clamp(t, 1e-12, 1e6);
        const double improvement = log_value - std::log(v2);
        z = std::move(z_new);
        w = metric(z);
        value = v2;
        log_value = std::log(v2);
        grad = std::move(g2);
        out.z = z;
        out.value = value;
        if (improvement < 1e-13) {
            out.converged = residual(z, grad) <= std::sqrt(opts.grad_tol);
            break;
        }
    }
    return out;
}

}  // namespace

OptimizationResult optimize(Side side, int m, double gamma_av, const EigenStructure& eig,
                            const OptimizerOptions& opts) {
    opts.validate();
    require(gamma_av > 0.0 && std::isfinite(gamma_av), "average SNR must be positive");
    require(eig.distinct() >= 1, "eigenstructure has no eigenvalues");
    const int levels = levels_for(side, m);
    OptimizationResult res;
    if (levels == 1) {
        res.gammas_opt = {gamma_av};
        const SnrProfile p = SnrProfile::from_gammas(side, {gamma_av});
        const SepBound b = union_bound(p, eig, opts.xi);
        res.sep_opt = res.sep_equispaced = b.value;
        res.xi = opts.xi;
        res.converged = true;
        return res;
    }

    const double min_gap = opts.min_gap < 0.0 ? 1e-3 * gamma_av : opts.min_gap;
    const double gap = std::max(min_gap, 1e-8 * gamma_av) / gamma_av;
    const double total = static_cast<double>(levels);

    const std::vector<double> eq = equispaced_gammas(side, m, gamma_av);
    int xi = opts.xi;
    if (opts.adaptive_xi) xi = union_bound_adaptive(SnrProfile::from_gammas(side, eq), eig, opts.xi).xi;
    res.xi = xi;

    // Starts are searched at the base depth; only the winner is refined at the
    // adaptive depth, where each evaluation can be several times more expensive.
    const Objective search{side, gamma_av, eig, std::min(opts.xi, xi), opts.mode};
    const Objective obj{side, gamma_av, eig, xi, opts.mode};
    std::vector<double> z0(eq.size());
    std::transform(eq.begin(), eq.end(), z0.begin(), [&](double g) { return g / gamma_av; });
    z0 = project_feasible(z0, total, gap);
    res.sep_equispaced = obj.bound(z0);

    RunResult best = descend(search, z0, total, gap, opts);
    res.iterations = best.iterations;
    for (int r = 1; r <= opts.restarts; ++r) {
        auto eng = stream_engine(opts.seed, static_cast<std::uint64_t>(r));
        std::exponential_distribution<double> expo(1.0);
        std::vector<double> z(static_cast<std::size_t>(levels));
        for (double& v : z) v = expo(eng);
        std::sort(z.begin(), z.end());
        const double s = std::accumulate(z.begin(), z.end(), 0.0);
        for (double& v : z) v *= total / s;
        RunResult run = descend(search, project_feasible(z, total, gap), total, gap, opts);
        res.iterations += run.iterations;
        if (run.value < best.value) {
            best = std::move(run);
            res.best_start = r;
        }
    }
    if (search.xi != obj.xi) {
        best = descend(obj, best.z, total, gap, opts);
        res.iterations += best.iterations;
        if (best.value > res.sep_equispaced) {
            best = descend(obj, z0, total, gap, opts);
            res.iterations += best.iterations;
            res.best_start = 0;
        }
    }

    std::vector<double> raw;
    const auto [value, log_grad] = obj.with_log_gradient(best.z, &raw);
    res.gammas_opt.resize(best.z.size());
    std::transform(best.z.begin(), best.z.end(), res.gammas_opt.begin(), [&](double v) { return v * gamma_av; });
    res.sep_opt = value;
    res.converged = best.converged;
    // Levels pinned by a gap constraint carry their own multipliers; the sum multiplier is read off the rest.
    std::vector<bool> free_level(best.z.size(), true);
    for (std::size_t k = 0; k < best.z.size(); ++k) {
        const double below = k == 0 ? best.z[0] : best.z[k] - best.z[k - 1];
        if (below <= gap * (1.0 + 1e-6)) free_level[k] = false;
        if (k + 1 < best.z.size() && best.z[k + 1] - best.z[k] <= gap * (1.0 + 1e-6)) free_level[k] = false;
    }
    int n_free = 0;
    double mean_log = 0.0, mean_raw = 0.0;
    for (std::size_t k = 0; k < best.z.size(); ++k) {
        if (!free_level[k]) continue;
        ++n_free;
        mean_log += log_grad[k];
        mean_raw += raw[k];
    }
    if (n_free > 0) {
        mean_log /= n_free;
        mean_raw /= n_free;
    }
    std::vector<double> tangent;
    for (std::size_t k = 0; k < best.z.size(); ++k) {
        if (free_level[k]) tangent.push_back(log_grad[k] - mean_log);
    }
    res.grad_norm_final = norm2(tangent);
    {
        std::vector<double> trial(best.z.size());
        for (std::size_t k = 0; k < trial.size(); ++k) trial[k] = best.z[k] - log_grad[k];
        const auto proj = project_feasible(trial, total, gap);
        double acc = 0.0;
        for (std::size_t k = 0; k < trial.size(); ++k) acc += (proj[k] - best.z[k]) * (proj[k] - best.z[k]);
        res.kkt_residual = std::sqrt(acc);
    }
    res.eta = -mean_raw;
    return res;
}

}  // namespace ncask
