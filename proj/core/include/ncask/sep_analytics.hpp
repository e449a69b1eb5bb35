#pragma once

#include <string>
#include <vector>

#include "ncask/ask_modulation.hpp"
#include "ncask/channel_model.hpp"
#include "ncask/series_cdf.hpp"

namespace ncask {

inline constexpr int kDefaultSeriesDepth = 2000;

// Quantities of the pairwise statistic chi^2_ij for transmitted symbol i
// detected as j (0-based symbol indices), grouped by distinct eigenvalue.
struct PepTerms {
    int i = 0;
    int j = 0;
    double gamma_i = 0.0;
    double gamma_j = 0.0;
    int sign_i = 1;
    int sign_j = 1;
    std::vector<double> lambdas;
    std::vector<int> q;
    std::vector<double> k_sums;
    std::vector<double> beta;
    std::vector<double> gamma;
    double alpha = 0.0;

    QuadraticForm form() const;
};

struct GaussianApprox {
    double mu_x = 0.0;
    double sigma_x = 0.0;
};

struct SepBound {
    double value = 0.0;
    int m = 0;
    std::vector<double> per_pair;  // row-major M x M, diagonal zero
    int xi = 0;
    int warnings = 0;  // PEPs that needed clamping by more than 1e-6

    double pair(int i, int j) const { return per_pair[static_cast<std::size_t>(i * m + j)]; }
};

enum class PepCase { Greater, Less, Antipodal };

// Which of the three PEP forms applies to the symbol pair.
PepCase classify_pair(const SnrProfile& snr, int i, int j);

// Requires distinct levels; antipodal pairs go through pep_antipodal.
PepTerms pep_terms(int i, int j, const SnrProfile& snr, const EigenStructure& eig);

// ln G(nu); throws DomainError when 1 - nu*beta_p <= 0 for some p.
double mgf(const PepTerms& terms, double nu);
double g_derivative(const PepTerms& terms, double nu, int n);

// Series c.d.f. approximation of chi^2_ij at x, clamped to [0, 1].
double cdf_chi2(const PepTerms& terms, double x, int xi = kDefaultSeriesDepth);

double q_function(double z);

double pep(int i, int j, const SnrProfile& snr, const EigenStructure& eig, int xi = kDefaultSeriesDepth);
double pep_antipodal(int i, const SnrProfile& snr, const EigenStructure& eig);

SepBound union_bound(const SnrProfile& snr, const EigenStructure& eig, int xi = kDefaultSeriesDepth);

// Doubles xi from `xi_start` until successive bounds agree to `rel_tol`.
SepBound union_bound_adaptive(const SnrProfile& snr, const EigenStructure& eig,
                              int xi_start = kDefaultSeriesDepth, double rel_tol = 1e-3,
                              int xi_max = 1 << 17);

// Exact first two moments of chi^2_ij.
GaussianApprox gaussian_approx_moments(const PepTerms& terms);

SepBound union_bound_massive(const SnrProfile& snr, const EigenStructure& eig);

namespace detail {

// Level gap below which a same-sign pair is separated before evaluation.
double near_equal_gap(const SnrProfile& snr);
// Copy of the profile with the (i, j) levels pushed apart if they nearly coincide.
SnrProfile guard_pair(const SnrProfile& snr, int i, int j);

}  // namespace detail
}  // namespace ncask
