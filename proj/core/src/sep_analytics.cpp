#include "ncask/sep_analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ncask/errors.hpp"

namespace ncask {

using detail::require;

namespace {

constexpr double kClampWarn = 1e-6;

void check_profile(const SnrProfile& snr, const EigenStructure& eig) {
    require(snr.symbols() >= 1, "SNR profile has no symbols");
    require(eig.distinct() >= 1, "eigenstructure has no eigenvalues");
    for (double g : snr.gammas) require(g > 0.0 && std::isfinite(g), "level SNRs must be positive");
}

double clamp_unit(double v, int& warnings) {
    if (v < -kClampWarn || v > 1.0 + kClampWarn) ++warnings;
    return std::clamp(v, 0.0, 1.0);
}

}  // namespace

QuadraticForm PepTerms::form() const {
    QuadraticForm f;
    f.beta = beta;
    f.q = q;
    f.gk.resize(beta.size());
    for (std::size_t p = 0; p < beta.size(); ++p) f.gk[p] = gamma[p] * k_sums[p];
    return f;
}

PepCase classify_pair(const SnrProfile& snr, int i, int j) {
    const int li = snr.level_of(i);
    const int lj = snr.level_of(j);
    if (li == lj) {
        require(snr.signs[static_cast<std::size_t>(i)] != snr.signs[static_cast<std::size_t>(j)],
                "equal-energy pair must be antipodal");
        return PepCase::Antipodal;
    }
    return snr.gammas[static_cast<std::size_t>(li)] > snr.gammas[static_cast<std::size_t>(lj)] ? PepCase::Greater
                                                                                              : PepCase::Less;
}

PepTerms pep_terms(int i, int j, const SnrProfile& snr, const EigenStructure& eig) {
    check_profile(snr, eig);
    require(i >= 0 && j >= 0 && i < snr.symbols() && j < snr.symbols() && i != j, "invalid symbol pair");
    PepTerms t;
    t.i = i;
    t.j = j;
    t.gamma_i = snr.gamma_of(i);
    t.gamma_j = snr.gamma_of(j);
    t.sign_i = snr.signs[static_cast<std::size_t>(i)];
    t.sign_j = snr.signs[static_cast<std::size_t>(j)];
    require(t.gamma_i != t.gamma_j, "pep_terms requires distinct level SNRs (antipodal pairs use pep_antipodal)");

    t.lambdas = eig.lambdas;
    t.q = eig.mults;
    t.k_sums = eig.k_sums();
    const std::size_t groups = t.lambdas.size();
    t.beta.resize(groups);
    t.gamma.resize(groups);

    // Signed amplitudes a = phi sqrt(Gamma). With them the gamma_{ij,p} ratio
    // simplifies to (Gamma_i lambda + 1) / (lambda (a_i + a_j)^2) and the LoS part
    // of alpha to K (a_i - a_j) / (a_i + a_j), free of the removable 0/0.
    const double ai = t.sign_i * std::sqrt(t.gamma_i);
    const double aj = t.sign_j * std::sqrt(t.gamma_j);
    const double sum = ai + aj;
    double log_ratio = 0.0;
    double k_total = 0.0;
    for (std::size_t p = 0; p < groups; ++p) {
        const double lam = t.lambdas[p];
        t.beta[p] = lam * (t.gamma_i - t.gamma_j) / (t.gamma_j * lam + 1.0);
        t.gamma[p] = (t.gamma_i * lam + 1.0) / (lam * sum * sum);
        log_ratio += t.q[p] * (std::log1p(t.gamma_i * lam) - std::log1p(t.gamma_j * lam));
        k_total += t.k_sums[p];
    }
    t.alpha = log_ratio + k_total * (ai - aj) / sum;
    return t;
}

double mgf(const PepTerms& terms, double nu) { return form_log_mgf(terms.form(), nu); }

double g_derivative(const PepTerms& terms, double nu, int n) { return form_g_derivative(terms.form(), nu, n); }

double cdf_chi2(const PepTerms& terms, double x, int xi) {
    int warnings = 0;
    // for a negative form the head sums to P(X > x)
    const bool negative = !terms.beta.empty() && terms.beta[0] < 0.0;
    const SeriesResult s = evaluate_series(terms.form(), x, xi, negative);
    return clamp_unit(negative ? s.tail : s.head, warnings);
}

double q_function(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double pep_antipodal(int i, const SnrProfile& snr, const EigenStructure& eig) {
    check_profile(snr, eig);
    const double g = snr.gamma_of(i);
    const auto k = eig.k_sums();
    double acc = 0.0;
    for (std::size_t p = 0; p < eig.lambdas.size(); ++p) {
        const double gl = g * eig.lambdas[p];
        acc += 2.0 * gl * k[p] / (gl + 1.0);
    }
    return q_function(std::sqrt(acc));
}

namespace detail {

double near_equal_gap(const SnrProfile& snr) { return 1e-6 * snr.gamma_av; }

SnrProfile guard_pair(const SnrProfile& snr, int i, int j) {
    const int li = snr.level_of(i);
    const int lj = snr.level_of(j);
    const double gap = near_equal_gap(snr);
    const double gi = snr.gammas[static_cast<std::size_t>(li)];
    const double gj = snr.gammas[static_cast<std::size_t>(lj)];
    if (li == lj || std::abs(gi - gj) >= gap) return snr;
    SnrProfile out = snr;
    const int hi = gi > gj ? li : lj;
    const int lo = gi > gj ? lj : li;
    out.gammas[static_cast<std::size_t>(hi)] = out.gammas[static_cast<std::size_t>(lo)] + gap;
    return out;
}

}  // namespace detail

namespace {

double pep_impl(int i, int j, const SnrProfile& snr, const EigenStructure& eig, int xi, int& warnings) {
    const PepCase kind = classify_pair(snr, i, j);
    if (kind == PepCase::Antipodal) return pep_antipodal(i, snr, eig);
    const SnrProfile guarded = detail::guard_pair(snr, i, j);
    const PepTerms terms = pep_terms(i, j, guarded, eig);
    const bool upper = kind == PepCase::Less;
    const SeriesResult s = evaluate_series(terms.form(), terms.alpha, xi, upper);
    return clamp_unit(upper ? s.tail : s.head, warnings);
}

}  // namespace

double pep(int i, int j, const SnrProfile& snr, const EigenStructure& eig, int xi) {
    check_profile(snr, eig);
    int warnings = 0;
    return pep_impl(i, j, snr, eig, xi, warnings);
}

namespace {

// Two-sided constellations are symmetric under s -> -s, which maps symbol k to
// M-1-k and leaves every PEP unchanged; only pairs with i in the upper half are
// evaluated and then mirrored.
template <class PairFn>
SepBound accumulate_bound(const SnrProfile& snr, PairFn&& pair_pep) {
    const int m = snr.symbols();
    SepBound b;
    b.m = m;
    b.per_pair.assign(static_cast<std::size_t>(m * m), 0.0);
    const bool mirror = snr.side == Side::TwoSided;
    const int first = mirror ? m / 2 : 0;
    for (int i = first; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            const double v = pair_pep(i, j, b.warnings);
            b.per_pair[static_cast<std::size_t>(i * m + j)] = v;
            if (mirror) b.per_pair[static_cast<std::size_t>((m - 1 - i) * m + (m - 1 - j))] = v;
        }
    }
    b.value = std::accumulate(b.per_pair.begin(), b.per_pair.end(), 0.0) / m;
    return b;
}

}  // namespace

SepBound union_bound(const SnrProfile& snr, const EigenStructure& eig, int xi) {
    check_profile(snr, eig);
    require(xi >= 1, "series depth must be at least 1");
    SepBound b = accumulate_bound(snr, [&](int i, int j, int& warnings) {
        return pep_impl(i, j, snr, eig, xi, warnings);
    });
    b.xi = xi;
    return b;
}

SepBound union_bound_adaptive(const SnrProfile& snr, const EigenStructure& eig, int xi_start, double rel_tol,
                              int xi_max) {
    require(rel_tol > 0.0, "relative tolerance must be positive");
    require(xi_start >= 1 && xi_max >= xi_start, "invalid series depth range");
    SepBound prev = union_bound(snr, eig, xi_start);
    int xi = xi_start;
    while (xi <= xi_max / 2) {
        xi *= 2;
        SepBound next = union_bound(snr, eig, xi);
        const double diff = std::abs(next.value - prev.value);
        prev = std::move(next);
        if (diff <= rel_tol * std::abs(prev.value)) break;
    }
    return prev;
}

GaussianApprox gaussian_approx_moments(const PepTerms& terms) {
    GaussianApprox g;
    double var = 0.0;
    for (std::size_t p = 0; p < terms.beta.size(); ++p) {
        const double b = terms.beta[p];
        const double gk = terms.gamma[p] * terms.k_sums[p];
        g.mu_x += b * (terms.q[p] + gk);
        var += b * b * (terms.q[p] + 2.0 * gk);
    }
    g.sigma_x = std::sqrt(var);
    return g;
}

SepBound union_bound_massive(const SnrProfile& snr, const EigenStructure& eig) {
    check_profile(snr, eig);
    return accumulate_bound(snr, [&](int i, int j, int& warnings) {
        if (classify_pair(snr, i, j) == PepCase::Antipodal) return pep_antipodal(i, snr, eig);
        const PepTerms terms = pep_terms(i, j, detail::guard_pair(snr, i, j), eig);
        const GaussianApprox g = gaussian_approx_moments(terms);
        const double z = (terms.alpha - g.mu_x) / g.sigma_x;
        return clamp_unit(q_function(-z), warnings);
    });
}

}  // namespace ncask
