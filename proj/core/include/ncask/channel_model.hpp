#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ncask {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

enum class CorrelationKind { Iid, Uniform, Exponential };

struct CorrelationModel {
    CorrelationKind kind = CorrelationKind::Iid;
    double epsilon = 0.0;  // ignored for Iid

    static CorrelationModel iid() { return {}; }
    static CorrelationModel uniform(double eps) { return {CorrelationKind::Uniform, eps}; }
    static CorrelationModel exponential(double eps) { return {CorrelationKind::Exponential, eps}; }

    // Throws InvalidArgument when epsilon is outside the legal open interval
    // for the family, or zero for a correlated family.
    void validate(int n) const;
};

const char* to_string(CorrelationKind kind);
CorrelationKind correlation_kind_from_string(const std::string& name);

struct ChannelSpec {
    int n = 1;
    double sigma_h_sq = 1.0;
    double sigma_n_sq = 1.0;
    CorrelationModel model;
    CVector mean;  // line-of-sight component, length n

    void validate() const;
};

// Equal-magnitude line-of-sight vector mu_l = sigma_h * sqrt(k_av) * exp(j*theta_l).
// An empty phase list means all phases are zero.
CVector make_mean_vector(int n, double sigma_h_sq, double k_av,
                         const std::vector<double>& phases = {});

// Eigenstructure of the normalized covariance K_h / sigma_h^2.
//
// Distinct eigenvalues are sorted ascending and the columns of `u` are
// ordered group by group, so column c belongs to the group that contains
// flat index c. `k_factors[p][q]` is |(U^H mu)_c|^2 / (sigma_h^2 lambda_p)
// for the q-th column of group p.
struct EigenStructure {
    std::vector<double> lambdas;
    std::vector<int> mults;
    std::vector<std::vector<double>> k_factors;
    double k_av = 0.0;
    CMatrix u;

    int distinct() const { return static_cast<int>(lambdas.size()); }
    int antennas() const { return static_cast<int>(u.rows()); }

    // Per-column eigenvalue, length N.
    std::vector<double> flat_lambdas() const;
    // Sum over q of k_{q,p}, length L.
    std::vector<double> k_sums() const;
    double k_total() const;
};

CMatrix build_covariance(const CorrelationModel& model, int n, double sigma_h_sq);

// Numerical decomposition of an arbitrary Hermitian positive-definite covariance.
// `group_tol` is relative to max(1, lambda).
EigenStructure eigen_structure(const CMatrix& cov, const CVector& mean,
                               double sigma_h_sq, double group_tol = 1e-9);

// Decomposition that uses the known closed-form spectrum of the family
// (single group for Iid, {1-eps x (N-1), 1+(N-1)eps} for Uniform).
EigenStructure eigen_structure(const ChannelSpec& spec, double group_tol = 1e-9);

// Rows are independent draws h = mu + U diag(sigma_h sqrt(lambda)) w.
CMatrix sample_channels(const ChannelSpec& spec, const EigenStructure& eig,
                        int count, std::uint64_t seed);

}  // namespace ncask
