#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ncask/errors.hpp"
#include "ncask/optimizer.hpp"
#include "oracles.hpp"

using namespace ncask;

namespace {

bool feasible(const std::vector<double>& g, double total, double gap, double tol = 1e-9) {
    if (std::abs(std::accumulate(g.begin(), g.end(), 0.0) - total) > tol * std::max(1.0, total)) return false;
    if (g[0] < gap - tol) return false;
    for (std::size_t k = 1; k < g.size(); ++k)
        if (g[k] - g[k - 1] < gap - tol) return false;
    return true;
}

EigenStructure channel(int n, CorrelationKind kind, double eps, double k_av) {
    return eigen_structure(oracle::make_spec(n, kind, eps, k_av));
}

TEST_CASE("projection lands in the feasible set and is the nearest point") {
    auto eng = stream_engine(3, 0);
    std::normal_distribution<double> nd(0.0, 2.0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int m = 2 + trial % 6;
        const double gap = 0.05 * (trial % 3);
        const double total = m * (1.0 + 3.0 * ud(eng));
        std::vector<double> v(static_cast<std::size_t>(m));
        for (double& x : v) x = nd(eng) + 1.0;
        const auto p = project_feasible(v, total, gap);
        REQUIRE(feasible(p, total, gap));
        // variational inequality (v - p).(y - p) <= 0 for feasible y
        for (int s = 0; s < 20; ++s) {
            std::vector<double> y(v.size());
            double acc = 0.0;
            for (double& x : y) {
                x = ud(eng) + 1e-3;
                acc += x;
            }
            // cumulative sums of positive increments, rescaled onto the constraint surface
            std::partial_sum(y.begin(), y.end(), y.begin());
            const double base = gap * m * (m + 1) / 2.0;
            const double s0 = std::accumulate(y.begin(), y.end(), 0.0);
            for (std::size_t k = 0; k < y.size(); ++k) y[k] = gap * (k + 1) + y[k] * (total - base) / s0;
            if (!feasible(y, total, gap)) continue;
            double ip = 0.0;
            for (std::size_t k = 0; k < y.size(); ++k) ip += (v[k] - p[k]) * (y[k] - p[k]);
            CHECK(ip <= 1e-9);
        }
    }
}

TEST_CASE("projection keeps feasible points") {
    const std::vector<double> v{0.5, 1.0, 2.5};
    const auto p = project_feasible(v, 4.0, 0.1);
    for (std::size_t k = 0; k < v.size(); ++k) CHECK(p[k] == doctest::Approx(v[k]));
    CHECK_THROWS_AS(project_feasible(v, 0.1, 0.1), InvalidArgument);
}

double pep_value(int i, int j, const SnrProfile& s, const EigenStructure& eig, int xi) {
    return classify_pair(s, i, j) == PepCase::Antipodal ? pep_antipodal(i, s, eig) : pep(i, j, s, eig, xi);
}

double pep_fd(int i, int j, int t, const SnrProfile& snr, const EigenStructure& eig, int xi, double rel_step) {
    const double h = rel_step * snr.gammas[t];
    auto up = snr, dn = snr;
    up.gammas[t] += h;
    dn.gammas[t] -= h;
    return (pep_value(i, j, up, eig, xi) - pep_value(i, j, dn, eig, xi)) / (2 * h);
}

TEST_CASE("PEP gradients match central differences on random instances") {
    auto eng = stream_engine(8, 0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const CorrelationKind kinds[] = {CorrelationKind::Iid, CorrelationKind::Uniform, CorrelationKind::Exponential};
    const int sizes[] = {2, 4, 8};
    double worst = 0.0;
    for (int inst = 0; inst < 9; ++inst) {
        const auto kind = kinds[inst % 3];
        const int n = sizes[(inst / 3) % 3];
        const auto eig = channel(n, kind, kind == CorrelationKind::Iid ? 0.0 : 0.2 + 0.6 * ud(eng), 2.0 * ud(eng));
        const Side side = inst % 2 ? Side::TwoSided : Side::OneSided;
        std::vector<double> g(side == Side::OneSided ? 4 : 2);
        double acc = 0.0;
        for (double& v : g) v = acc += 0.2 + ud(eng);
        const double scale = std::pow(10.0, 2.0 * ud(eng)) / acc * g.size();
        for (double& v : g) v *= scale;
        const auto snr = SnrProfile::from_gammas(side, g);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                if (i == j) continue;
                double dmax = 0.0;
                std::vector<double> an(g.size()), fd(g.size());
                for (int t = 0; t < snr.levels(); ++t) {
                    an[t] = pep_gradient(i, j, t, snr, eig, 1500);
                    fd[t] = pep_fd(i, j, t, snr, eig, 1500, 1e-4);
                    dmax = std::max(dmax, std::abs(fd[t]));
                }
                for (int t = 0; t < snr.levels(); ++t) {
                    const bool involved = t == snr.level_of(i) || t == snr.level_of(j);
                    if (!involved) CHECK(an[t] == 0.0);
                    const double den = std::max({std::abs(fd[t]), 1e-6 * dmax, 1e-300});
                    worst = std::max(worst, std::abs(an[t] - fd[t]) / den);
                }
            }
        }
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("Rayleigh channel gradients") {
    const auto eig = channel(4, CorrelationKind::Exponential, 0.5, 0.0);
    CHECK(eig.k_total() == 0.0);
    const auto snr = SnrProfile::from_gammas(Side::OneSided, {1.0, 6.0, 15.0, 30.0});
    CHECK(gradient_selfcheck(snr, eig, 2000).max_rel_error <= 1e-4);
}

TEST_CASE("antipodal derivative is negative and blows up like Gamma^-1/2") {
    const auto eig = channel(4, CorrelationKind::Iid, 0.0, 1.0);
    auto at = [&](double g) {
        const auto snr = SnrProfile::from_gammas(Side::TwoSided, {g});
        return pep_gradient(1, 0, 0, snr, eig);
    };
    for (double g : {1e-3, 0.1, 1.0, 10.0}) CHECK(at(g) < 0.0);
    CHECK(at(1e-8) / at(4e-8) == doctest::Approx(2.0).epsilon(1e-3));
    const auto snr = SnrProfile::from_gammas(Side::TwoSided, {3.0});
    CHECK(pep_gradient(1, 0, 0, snr, eig) == doctest::Approx(pep_fd(1, 0, 0, snr, eig, 0, 1e-4)).epsilon(1e-6));
}

TEST_CASE("central differences converge at second order") {
    const auto eig = channel(2, CorrelationKind::Uniform, 0.5, 1.0);
    const auto snr = SnrProfile::from_gammas(Side::OneSided, {0.5, 3.0, 8.0, 20.0});
    const double an = pep_gradient(2, 3, 2, snr, eig, 1000);
    const double e1 = std::abs(pep_fd(2, 3, 2, snr, eig, 1000, 2e-2) - an);
    const double e2 = std::abs(pep_fd(2, 3, 2, snr, eig, 1000, 1e-2) - an);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
}

}  // namespace

TEST_CASE("union bound gradient passes the finite-difference gate") {
    for (auto kind : {CorrelationKind::Iid, CorrelationKind::Exponential}) {
        const auto eig = channel(3, kind, kind == CorrelationKind::Iid ? 0.0 : 0.5, 2.0);
        const auto snr = SnrProfile::from_gammas(Side::OneSided, equispaced_gammas(Side::OneSided, 4, 20.0));
        const auto rep = gradient_selfcheck(snr, eig, 2000);
        CHECK(rep.max_rel_error <= 1e-4);
        const auto bwg = union_bound_with_gradient(snr, eig, 2000);
        CHECK(bwg.value == doctest::Approx(union_bound(snr, eig, 2000).value).epsilon(1e-12));
        for (std::size_t k = 0; k < rep.analytic.size(); ++k)
            CHECK(bwg.gradient[k] == doctest::Approx(rep.analytic[k]).epsilon(1e-12));
    }
}

TEST_CASE("optimizer improves on the equispaced design and keeps the energy constraint") {
    const auto eig = channel(4, CorrelationKind::Exponential, 0.5, 1.0);
    OptimizerOptions opts;
    opts.restarts = 2;
    for (auto side : {Side::OneSided, Side::TwoSided}) {
        const auto r = optimize(side, 4, 10.0, eig, opts);
        const double total = 10.0 * r.gammas_opt.size();
        CHECK(std::abs(std::accumulate(r.gammas_opt.begin(), r.gammas_opt.end(), 0.0) - total) / 10.0 <= 1e-9);
        CHECK(r.sep_opt < r.sep_equispaced);
        CHECK(std::is_sorted(r.gammas_opt.begin(), r.gammas_opt.end()));
        CHECK(r.sep_opt == doctest::Approx(union_bound(SnrProfile::from_gammas(side, r.gammas_opt), eig, r.xi).value));
        CHECK(r.kkt_residual < 1e-3);
    }
}

TEST_CASE("optimized spacing widens towards high energy") {
    const auto eig = channel(4, CorrelationKind::Iid, 0.0, 1.0);
    OptimizerOptions opts;
    opts.restarts = 1;
    const auto r = optimize(Side::OneSided, 4, 100.0, eig, opts);
    std::vector<double> amp(r.gammas_opt.size());
    std::transform(r.gammas_opt.begin(), r.gammas_opt.end(), amp.begin(), [](double g) { return std::sqrt(g); });
    for (std::size_t k = 2; k < amp.size(); ++k) CHECK(amp[k] - amp[k - 1] > amp[k - 1] - amp[k - 2]);
}

TEST_CASE("finite-difference mode reaches a comparable optimum") {
    const auto eig = channel(2, CorrelationKind::Iid, 0.0, 1.0);
    OptimizerOptions a;
    a.restarts = 0;
    OptimizerOptions b = a;
    b.mode = GradientMode::FiniteDifference;
    const auto ra = optimize(Side::OneSided, 4, 10.0, eig, a);
    const auto rb = optimize(Side::OneSided, 4, 10.0, eig, b);
    CHECK(rb.sep_opt == doctest::Approx(ra.sep_opt).epsilon(1e-3));
}

TEST_CASE("optimizer is deterministic and handles the trivial case") {
    const auto eig = channel(2, CorrelationKind::Uniform, 0.3, 1.0);
    OptimizerOptions opts;
    opts.restarts = 2;
    const auto a = optimize(Side::OneSided, 4, 5.0, eig, opts);
    const auto b = optimize(Side::OneSided, 4, 5.0, eig, opts);
    CHECK(a.gammas_opt == b.gammas_opt);
    const auto two = optimize(Side::TwoSided, 2, 5.0, eig, opts);
    REQUIRE(two.gammas_opt.size() == 1);
    CHECK(two.gammas_opt[0] == doctest::Approx(5.0));
    const auto one = optimize(Side::OneSided, 1, 5.0, eig, opts);
    REQUIRE(one.gammas_opt.size() == 1);
    CHECK(one.gammas_opt[0] == 5.0);
    CHECK(union_bound_gradient(SnrProfile::from_gammas(Side::TwoSided, {5.0}), eig).size() == 1);
    opts.grad_tol = 0.0;
    CHECK_THROWS_AS(optimize(Side::OneSided, 4, 5.0, eig, opts), InvalidArgument);
}
