#include "ncask/series_cdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ncask/errors.hpp"

namespace ncask {

using detail::require;

namespace {

constexpr double kRescaleAbove = 1e250;
constexpr double kRescaleFactor = 1e-250;
const double kLogRescale = 250.0 * std::log(10.0);

// Explicit tail summation only pays off when the complement is small; above
// this, 1 - head loses at most ~1e-14 relative accuracy.
constexpr double kDirectTailBelow = 1e-2;
constexpr double kTailRelTol = 1e-17;

void check_form(const QuadraticForm& form) {
    require(!form.beta.empty(), "quadratic form needs at least one eigenvalue group");
    require(form.gk.size() == form.beta.size() && form.q.size() == form.beta.size(),
            "quadratic form parameter lengths differ");
}

// Signed value held as sign * exp(log_mag).
struct SignedLog {
    int sign = 0;
    double log_mag = -std::numeric_limits<double>::infinity();
};

SignedLog signed_log_sum(const std::vector<SignedLog>& xs) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& v : xs) {
        if (v.sign != 0) top = std::max(top, v.log_mag);
    }
    if (!std::isfinite(top)) return {};
    double acc = 0.0;
    for (const auto& v : xs) {
        if (v.sign != 0) acc += v.sign * std::exp(v.log_mag - top);
    }
    if (acc == 0.0) return {};
    return {acc > 0.0 ? 1 : -1, top + std::log(std::abs(acc))};
}

}  // namespace

double form_log_mgf(const QuadraticForm& form, double nu) {
    check_form(form);
    double acc = 0.0;
    for (std::size_t p = 0; p < form.beta.size(); ++p) {
        const double a = 1.0 - nu * form.beta[p];
        if (!(a > 0.0)) throw DomainError("m.g.f. evaluated outside its domain (1 - nu*beta <= 0)");
        acc += nu * form.beta[p] * form.gk[p] / a - form.q[p] * std::log(a);
    }
    return acc;
}

double form_g_derivative(const QuadraticForm& form, double nu, int n) {
    check_form(form);
    require(n >= 0, "derivative order must be nonnegative");
    double acc = 0.0;
    for (std::size_t p = 0; p < form.beta.size(); ++p) {
        const double b = form.beta[p];
        const double a = 1.0 - b * nu;
        if (!(a > 0.0)) throw DomainError("m.g.f. evaluated outside its domain (1 - nu*beta <= 0)");
        if (b == 0.0) continue;
        const double log_mag = std::lgamma(n + 1.0) + std::log((1.0 + n) * form.gk[p] + form.q[p] * a) +
                               (n + 1.0) * std::log(std::abs(b)) - (n + 2.0) * std::log(a);
        const double sign = (b < 0.0 && (n + 1) % 2 == 1) ? -1.0 : 1.0;
        acc += sign * std::exp(log_mag);
    }
    return acc;
}

SeriesResult evaluate_series(const QuadraticForm& form, double x, int xi, bool want_tail,
                             std::span<const FormTangent> tangents) {
    check_form(form);
    require(xi >= 1, "series depth must be at least 1");
    require(std::isfinite(x) && x != 0.0, "series evaluation point must be finite and nonzero");
    const std::size_t groups = form.beta.size();
    const std::size_t dirs = tangents.size();
    for (const auto& t : tangents) {
        require(t.dbeta.size() == groups && t.dgk.size() == groups, "tangent length mismatch");
    }

    // nu = (1 - xi)/x = -c. Each group contributes a factor whose power series in
    // the scaled index has ratio r_p = c beta_p / (1 + c beta_p).
    const double c = (xi - 1.0) / x;
    std::vector<double> r(groups), kappa(groups), qd(groups);
    std::vector<double> dr(groups * dirs), dkappa(groups * dirs), dlog_g(dirs, 0.0);
    double log_g = 0.0;
    for (std::size_t p = 0; p < groups; ++p) {
        const double cb = c * form.beta[p];
        if (cb < 0.0) throw DomainError("series evaluation point has the wrong sign for this quadratic form");
        const double a = 1.0 + cb;
        r[p] = cb / a;
        kappa[p] = form.gk[p] / a;
        qd[p] = form.q[p];
        log_g += -form.gk[p] * r[p] - form.q[p] * std::log(a);
        for (std::size_t k = 0; k < dirs; ++k) {
            const auto& t = tangents[k];
            const double dc = -c * t.dx / x;
            const double da = form.beta[p] * dc + c * t.dbeta[p];
            const double drp = da / (a * a);
            dr[k * groups + p] = drp;
            dkappa[k * groups + p] = t.dgk[p] / a - form.gk[p] * da / (a * a);
            dlog_g[k] += -t.dgk[p] * r[p] - form.gk[p] * drp - form.q[p] * da / a;
        }
    }

    std::vector<double> acc_a(groups, 0.0), acc_b(groups, 0.0);
    std::vector<double> dacc_a(groups * dirs, 0.0), dacc_b(groups * dirs, 0.0);
    std::vector<double> drho(dirs, 0.0), dhead(dirs, 0.0), dtail(dirs, 0.0);
    double rho = 1.0;
    double head = 1.0;
    double tail = 0.0;
    double log_scale = 0.0;

    auto rescale = [&] {
        rho *= kRescaleFactor;
        head *= kRescaleFactor;
        tail *= kRescaleFactor;
        for (auto* v : {&acc_a, &acc_b, &dacc_a, &dacc_b, &drho, &dhead, &dtail}) {
            for (double& e : *v) e *= kRescaleFactor;
        }
        log_scale += kLogRescale;
    };

    std::vector<double> dnext(dirs);
    // Advance from index u-1 to u.
    auto step = [&](int u) {
        double next = 0.0;
        std::fill(dnext.begin(), dnext.end(), 0.0);
        double biggest = 0.0;
        for (std::size_t p = 0; p < groups; ++p) {
            const double a_old = acc_a[p];
            const double b_old = acc_b[p];
            acc_a[p] = r[p] * (a_old + rho);
            acc_b[p] = r[p] * (b_old + a_old + rho);
            for (std::size_t k = 0; k < dirs; ++k) {
                const std::size_t idx = k * groups + p;
                const double da_old = dacc_a[idx];
                const double db_old = dacc_b[idx];
                dacc_a[idx] = dr[idx] * (a_old + rho) + r[p] * (da_old + drho[k]);
                dacc_b[idx] = dr[idx] * (b_old + a_old + rho) + r[p] * (db_old + da_old + drho[k]);
                dnext[k] += qd[p] * dacc_a[idx] + dkappa[idx] * acc_b[p] + kappa[p] * dacc_b[idx];
            }
            next += qd[p] * acc_a[p] + kappa[p] * acc_b[p];
            biggest = std::max({biggest, acc_a[p], acc_b[p]});
        }
        rho = next / u;
        for (std::size_t k = 0; k < dirs; ++k) drho[k] = dnext[k] / u;
        if (!std::isfinite(rho) || !std::isfinite(biggest)) {
            throw NumericalError("series term scaling overflowed");
        }
        if (std::max(rho, biggest) > kRescaleAbove) rescale();
    };

    for (int u = 1; u < xi; ++u) {
        step(u);
        head += rho;
        for (std::size_t k = 0; k < dirs; ++k) dhead[k] += drho[k];
    }

    auto unscale = [&](double stored) {
        if (stored == 0.0) return 0.0;
        const double v = std::exp(log_g + log_scale + std::log(std::abs(stored)));
        return stored < 0.0 ? -v : v;
    };

    SeriesResult out;
    out.head = unscale(head);
    out.d_head.resize(dirs);
    for (std::size_t k = 0; k < dirs; ++k) out.d_head[k] = out.head * dlog_g[k] + unscale(dhead[k]);
    if (!std::isfinite(out.head)) throw NumericalError("series sum is not finite");

    if (!want_tail) return out;
    out.d_tail.resize(dirs);
    if (1.0 - out.head >= kDirectTailBelow) {
        out.tail = 1.0 - out.head;
        for (std::size_t k = 0; k < dirs; ++k) out.d_tail[k] = -out.d_head[k];
        return out;
    }

    // Remaining mass of the nonnegative term sequence, summed until terms
    // stop contributing at double precision.
    const long cap = static_cast<long>(xi) * 400L + 100000L;
    double prev = rho;
    int u = xi;
    for (; u < cap; ++u) {
        step(u);
        tail += rho;
        for (std::size_t k = 0; k < dirs; ++k) dtail[k] += drho[k];
        bool done = rho <= kTailRelTol * tail && rho <= prev;
        for (std::size_t k = 0; k < dirs && done; ++k) {
            done = std::abs(drho[k]) <= kTailRelTol * std::abs(dtail[k]);
        }
        if (done) break;
        prev = rho;
    }
    out.tail_terms = u - xi + 1;
    out.tail = unscale(tail);
    for (std::size_t k = 0; k < dirs; ++k) out.d_tail[k] = out.tail * dlog_g[k] + unscale(dtail[k]);
    if (!std::isfinite(out.tail)) throw NumericalError("series tail is not finite");
    return out;
}

double evaluate_series_reference(const QuadraticForm& form, double x, int xi) {
    check_form(form);
    require(xi >= 1, "series depth must be at least 1");
    require(std::isfinite(x) && x != 0.0, "series evaluation point must be finite and nonzero");
    const double nu = (1.0 - xi) / x;
    const double log_g = form_log_mgf(form, nu);
    const std::size_t groups = form.beta.size();

    // g^{(n)}(nu) for n = 0..xi-2 in signed log form.
    std::vector<SignedLog> g(static_cast<std::size_t>(std::max(0, xi - 1)));
    std::vector<SignedLog> parts(groups);
    for (int n = 0; n + 1 < xi; ++n) {
        for (std::size_t p = 0; p < groups; ++p) {
            const double b = form.beta[p];
            const double a = 1.0 - b * nu;
            if (b == 0.0) {
                parts[p] = {};
                continue;
            }
            parts[p].log_mag = std::lgamma(n + 1.0) + std::log((1.0 + n) * form.gk[p] + form.q[p] * a) +
                               (n + 1.0) * std::log(std::abs(b)) - (n + 2.0) * std::log(a);
            parts[p].sign = (b < 0.0 && (n + 1) % 2 == 1) ? -1 : 1;
        }
        g[static_cast<std::size_t>(n)] = signed_log_sum(parts);
    }

    std::vector<double> log_fact(static_cast<std::size_t>(xi) + 1);
    for (int k = 0; k <= xi; ++k) log_fact[static_cast<std::size_t>(k)] = std::lgamma(k + 1.0);
    auto log_binom = [&](int n, int k) {
        return log_fact[static_cast<std::size_t>(n)] - log_fact[static_cast<std::size_t>(k)] -
               log_fact[static_cast<std::size_t>(n - k)];
    };

    std::vector<SignedLog> rr(static_cast<std::size_t>(xi));
    rr[0] = {1, 0.0};
    std::vector<SignedLog> summands;
    std::vector<SignedLog> terms;
    terms.push_back({1, log_g});
    const double log_ratio = std::log(std::abs((xi - 1.0) / x));
    const int ratio_sign = x < 0.0 ? -1 : 1;
    for (int u = 1; u < xi; ++u) {
        summands.clear();
        for (int v = 0; v < u; ++v) {
            const auto& gv = g[static_cast<std::size_t>(u - 1 - v)];
            const auto& rv = rr[static_cast<std::size_t>(v)];
            if (gv.sign == 0 || rv.sign == 0) continue;
            summands.push_back({gv.sign * rv.sign, log_binom(u - 1, v) + gv.log_mag + rv.log_mag});
        }
        rr[static_cast<std::size_t>(u)] = signed_log_sum(summands);
        const auto& ru = rr[static_cast<std::size_t>(u)];
        if (ru.sign == 0) continue;
        const int sign = ru.sign * ((ratio_sign < 0 && u % 2 == 1) ? -1 : 1);
        terms.push_back({sign, u * log_ratio - log_fact[static_cast<std::size_t>(u)] + log_g + ru.log_mag});
    }
    const SignedLog total = signed_log_sum(terms);
    return total.sign == 0 ? 0.0 : total.sign * std::exp(total.log_mag);
}

}  // namespace ncask
