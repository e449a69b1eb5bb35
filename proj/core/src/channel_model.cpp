#include "ncask/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "ncask/errors.hpp"
#include "ncask/rng.hpp"

namespace ncask {

using detail::require;

void CorrelationModel::validate(int n) const {
    require(n >= 1, "antenna count must be positive");
    switch (kind) {
        case CorrelationKind::Iid:
            return;
        case CorrelationKind::Uniform: {
            require(epsilon != 0.0, "uniform correlation requires epsilon != 0 (select iid instead)");
            require(epsilon < 1.0, "uniform correlation requires epsilon < 1");
            if (n > 1) {
                require(epsilon > -1.0 / (n - 1), "uniform correlation requires epsilon > -1/(N-1)");
            }
            return;
        }
        case CorrelationKind::Exponential:
            require(epsilon != 0.0, "exponential correlation requires epsilon != 0 (select iid instead)");
            require(epsilon > -1.0 && epsilon < 1.0, "exponential correlation requires |epsilon| < 1");
            return;
    }
}

const char* to_string(CorrelationKind kind) {
    switch (kind) {
        case CorrelationKind::Iid: return "iid";
        case CorrelationKind::Uniform: return "uniform";
        case CorrelationKind::Exponential: return "exponential";
    }
    return "?";
}

CorrelationKind correlation_kind_from_string(const std::string& name) {
    if (name == "iid") return CorrelationKind::Iid;
    if (name == "uniform") return CorrelationKind::Uniform;
    if (name == "exponential") return CorrelationKind::Exponential;
    throw InvalidArgument("unknown correlation kind '" + name + "'");
}

void ChannelSpec::validate() const {
    require(n >= 1, "antenna count must be positive");
    require(sigma_h_sq > 0.0 && std::isfinite(sigma_h_sq), "sigma_h_sq must be positive");
    require(sigma_n_sq > 0.0 && std::isfinite(sigma_n_sq), "sigma_n_sq must be positive");
    model.validate(n);
    require(mean.size() == n, "mean vector length must equal the antenna count");
    require(mean.allFinite(), "mean vector must be finite");
}

CVector make_mean_vector(int n, double sigma_h_sq, double k_av, const std::vector<double>& phases) {
    require(n >= 1, "antenna count must be positive");
    require(k_av >= 0.0, "k_av must be nonnegative");
    require(phases.empty() || static_cast<int>(phases.size()) == n,
            "phase profile length must equal the antenna count");
    const double mag = std::sqrt(sigma_h_sq * k_av);
    CVector mu(n);
    for (int l = 0; l < n; ++l) {
        mu(l) = phases.empty() ? cplx(mag, 0.0) : std::polar(mag, phases[static_cast<std::size_t>(l)]);
    }
    return mu;
}

std::vector<double> EigenStructure::flat_lambdas() const {
    std::vector<double> out;
    for (std::size_t p = 0; p < lambdas.size(); ++p) {
        out.insert(out.end(), static_cast<std::size_t>(mults[p]), lambdas[p]);
    }
    return out;
}

std::vector<double> EigenStructure::k_sums() const {
    std::vector<double> out;
    out.reserve(k_factors.size());
    for (const auto& group : k_factors) out.push_back(std::accumulate(group.begin(), group.end(), 0.0));
    return out;
}

double EigenStructure::k_total() const {
    const auto sums = k_sums();
    return std::accumulate(sums.begin(), sums.end(), 0.0);
}

CMatrix build_covariance(const CorrelationModel& model, int n, double sigma_h_sq) {
    model.validate(n);
    require(sigma_h_sq > 0.0, "sigma_h_sq must be positive");
    CMatrix k = CMatrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double rho = 0.0;
            if (i == j) {
                rho = 1.0;
            } else if (model.kind == CorrelationKind::Uniform) {
                rho = model.epsilon;
            } else if (model.kind == CorrelationKind::Exponential) {
                rho = std::pow(model.epsilon, std::abs(i - j));
            }
            k(i, j) = sigma_h_sq * rho;
        }
    }
    return k;
}

namespace {

// Fills grouping and Rician factors given sorted per-column eigenvalues and
// the matching eigenvector matrix.
EigenStructure assemble(const std::vector<double>& sorted_lambda, const std::vector<double>& group_value,
                        const std::vector<int>& group_of, CMatrix u, const CVector& mean, double sigma_h_sq) {
    EigenStructure eig;
    eig.u = std::move(u);
    const int n = static_cast<int>(sorted_lambda.size());
    const int groups = static_cast<int>(group_value.size());
    eig.lambdas = group_value;
    eig.mults.assign(static_cast<std::size_t>(groups), 0);
    eig.k_factors.assign(static_cast<std::size_t>(groups), {});
    const CVector mu_tilde = eig.u.adjoint() * mean;
    double k_sum = 0.0;
    for (int c = 0; c < n; ++c) {
        const auto p = static_cast<std::size_t>(group_of[static_cast<std::size_t>(c)]);
        eig.mults[p] += 1;
        const double k = std::norm(mu_tilde(c)) / (sigma_h_sq * eig.lambdas[p]);
        eig.k_factors[p].push_back(k);
        k_sum += k;
    }
    eig.k_av = k_sum / n;
    return eig;
}

}  // namespace

EigenStructure eigen_structure(const CMatrix& cov, const CVector& mean, double sigma_h_sq, double group_tol) {
    require(cov.rows() == cov.cols() && cov.rows() >= 1, "covariance must be square");
    require(mean.size() == cov.rows(), "mean length must match covariance dimension");
    require(sigma_h_sq > 0.0, "sigma_h_sq must be positive");
    require(group_tol > 0.0, "group tolerance must be positive");
    const double scale = cov.cwiseAbs().maxCoeff();
    require((cov - cov.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, scale),
            "covariance must be Hermitian");

    const int n = static_cast<int>(cov.rows());
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(cov / sigma_h_sq);
    if (solver.info() != Eigen::Success) throw NumericalError("eigen decomposition failed");
    const Eigen::VectorXd& ev = solver.eigenvalues();  // ascending
    require(ev.minCoeff() > 0.0, "covariance must be positive definite (full rank)");

    std::vector<double> lam(ev.data(), ev.data() + n);
    std::vector<double> group_value;
    std::vector<int> group_of(static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (std::size_t c = 0; c < lam.size(); ++c) {
        if (c > start && lam[c] - lam[start] > group_tol * std::max(1.0, lam[start])) {
            group_value.push_back(std::accumulate(lam.begin() + static_cast<long>(start),
                                                  lam.begin() + static_cast<long>(c), 0.0) /
                                  static_cast<double>(c - start));
            start = c;
        }
        group_of[c] = static_cast<int>(group_value.size());
    }
    group_value.push_back(std::accumulate(lam.begin() + static_cast<long>(start), lam.end(), 0.0) /
                          static_cast<double>(lam.size() - start));
    return assemble(lam, group_value, group_of, solver.eigenvectors(), mean, sigma_h_sq);
}

EigenStructure eigen_structure(const ChannelSpec& spec, double group_tol) {
    spec.validate();
    const int n = spec.n;
    const auto& model = spec.model;

    if (model.kind == CorrelationKind::Iid || n == 1) {
        return assemble(std::vector<double>(static_cast<std::size_t>(n), 1.0), {1.0},
                        std::vector<int>(static_cast<std::size_t>(n), 0),
                        CMatrix::Identity(n, n), spec.mean, spec.sigma_h_sq);
    }
    if (model.kind == CorrelationKind::Uniform) {
        // Eigenvectors from the numerical solver, spectrum from the closed form.
        const CMatrix cov = build_covariance(model, n, spec.sigma_h_sq);
        Eigen::SelfAdjointEigenSolver<CMatrix> solver(cov / spec.sigma_h_sq);
        if (solver.info() != Eigen::Success) throw NumericalError("eigen decomposition failed");
        const double low = 1.0 - model.epsilon;
        const double high = 1.0 + (n - 1) * model.epsilon;
        // Ascending order: for eps > 0 the single eigenvalue is last, else first.
        std::vector<double> lam(static_cast<std::size_t>(n), low);
        std::vector<int> group_of(static_cast<std::size_t>(n), 0);
        std::vector<double> groups;
        if (model.epsilon > 0.0) {
            lam.back() = high;
            group_of.back() = 1;
            groups = {low, high};
        } else {
            lam.front() = high;
            std::fill(group_of.begin() + 1, group_of.end(), 1);
            group_of.front() = 0;
            groups = {high, low};
        }
        return assemble(lam, groups, group_of, solver.eigenvectors(), spec.mean, spec.sigma_h_sq);
    }
    return eigen_structure(build_covariance(model, n, spec.sigma_h_sq), spec.mean, spec.sigma_h_sq, group_tol);
}

CMatrix sample_channels(const ChannelSpec& spec, const EigenStructure& eig, int count, std::uint64_t seed) {
    require(count >= 1, "sample count must be positive");
    require(eig.antennas() == spec.n, "eigenstructure does not match channel dimension");
    const int n = spec.n;
    const std::vector<double> lam = eig.flat_lambdas();
    CMatrix factor = eig.u;
    for (int c = 0; c < n; ++c) factor.col(c) *= std::sqrt(spec.sigma_h_sq * lam[static_cast<std::size_t>(c)]);

    CMatrix out(count, n);
    auto eng = stream_engine(seed, 0);
    ComplexNormal cn;
    CVector w(n);
    for (int row = 0; row < count; ++row) {
        for (int c = 0; c < n; ++c) w(c) = cn(eng);
        out.row(row) = (spec.mean + factor * w).transpose();
    }
    return out;
}

}  // namespace ncask
