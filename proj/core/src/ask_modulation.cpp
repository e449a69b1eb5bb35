#include "ncask/ask_modulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "ncask/errors.hpp"

namespace ncask {

using detail::require;

namespace {

constexpr double kDuplicateTol = 1e-12;

void check_levels(std::vector<double>& energies) {
    require(!energies.empty(), "constellation needs at least one level");
    for (double e : energies) require(e > 0.0 && std::isfinite(e), "level energies must be positive and finite");
    for (std::size_t k = 1; k < energies.size(); ++k) {
        require(energies[k] > energies[k - 1], "level energies must be strictly increasing");
        require(energies[k] - energies[k - 1] > kDuplicateTol * energies[k], "level energies must be distinct");
    }
}

void check_increasing(const std::vector<double>& gammas) {
    require(!gammas.empty(), "at least one level SNR is required");
    for (std::size_t k = 0; k < gammas.size(); ++k) {
        require(gammas[k] > 0.0 && std::isfinite(gammas[k]), "level SNRs must be positive and finite");
        if (k > 0) require(gammas[k] > gammas[k - 1], "level SNRs must be strictly increasing");
    }
}

int level_index(Side side, int m, int index) {
    require(index >= 0 && index < m, "symbol index out of range");
    if (side == Side::OneSided) return index;
    const int half = m / 2;
    return index < half ? half - 1 - index : index - half;
}

}  // namespace

const char* to_string(Side side) { return side == Side::OneSided ? "one-sided" : "two-sided"; }

Side side_from_string(const std::string& name) {
    if (name == "one-sided" || name == "one_sided" || name == "one") return Side::OneSided;
    if (name == "two-sided" || name == "two_sided" || name == "two") return Side::TwoSided;
    throw InvalidArgument("unknown ASK side '" + name + "'");
}

int levels_for(Side side, int m) {
    require(m >= 1, "modulation order must be positive");
    if (side == Side::TwoSided) {
        require(m >= 2 && m % 2 == 0, "two-sided ASK requires an even modulation order");
        return m / 2;
    }
    return m;
}

double Constellation::average_energy() const {
    double acc = 0.0;
    for (double s : symbols) acc += s * s;
    return acc / static_cast<double>(symbols.size());
}

int Constellation::level_of(int index) const { return level_index(side, m, index); }

int SnrProfile::level_of(int index) const { return level_index(side, symbols(), index); }

Constellation Constellation::from_energies(Side side, std::vector<double> energies) {
    check_levels(energies);
    Constellation c;
    c.side = side;
    const int levels = static_cast<int>(energies.size());
    c.m = side == Side::OneSided ? levels : 2 * levels;
    c.symbols.resize(static_cast<std::size_t>(c.m));
    for (int i = 0; i < c.m; ++i) {
        const double amp = std::sqrt(energies[static_cast<std::size_t>(level_index(side, c.m, i))]);
        c.symbols[static_cast<std::size_t>(i)] = (side == Side::TwoSided && i < levels) ? -amp : amp;
    }
    c.energies = std::move(energies);
    return c;
}

SnrProfile SnrProfile::from_gammas(Side side, std::vector<double> gammas) {
    check_increasing(gammas);
    SnrProfile p;
    p.side = side;
    const int levels = static_cast<int>(gammas.size());
    const int m = side == Side::OneSided ? levels : 2 * levels;
    p.gamma_av = std::accumulate(gammas.begin(), gammas.end(), 0.0) / levels;
    p.signs.assign(static_cast<std::size_t>(m), 1);
    if (side == Side::TwoSided) std::fill(p.signs.begin(), p.signs.begin() + levels, -1);
    p.gammas = std::move(gammas);
    return p;
}

std::vector<double> equispaced_gammas(Side side, int m, double gamma_av) {
    require(gamma_av > 0.0, "average SNR must be positive");
    const int levels = levels_for(side, m);
    std::vector<double> g(static_cast<std::size_t>(levels));
    double acc = 0.0;
    for (int k = 1; k <= levels; ++k) {
        const double amp = side == Side::OneSided ? k : 2.0 * k - 1.0;
        g[static_cast<std::size_t>(k - 1)] = amp * amp;
        acc += amp * amp;
    }
    for (double& v : g) v *= gamma_av * levels / acc;
    return g;
}

Constellation equispaced_constellation(Side side, int m, double e_av) {
    require(e_av > 0.0, "average energy must be positive");
    require(m >= 2, "equispaced constellation needs M >= 2");
    return Constellation::from_energies(side, equispaced_gammas(side, m, e_av));
}

Constellation constellation_from_gammas(Side side, const std::vector<double>& gammas, double sigma_h_sq,
                                        double sigma_n_sq) {
    require(sigma_h_sq > 0.0 && sigma_n_sq > 0.0, "fading and noise powers must be positive");
    check_increasing(gammas);
    std::vector<double> e(gammas.size());
    std::transform(gammas.begin(), gammas.end(), e.begin(),
                   [&](double g) { return g * sigma_n_sq / sigma_h_sq; });
    return Constellation::from_energies(side, std::move(e));
}

SnrProfile snr_profile(const Constellation& c, double sigma_h_sq, double sigma_n_sq) {
    require(sigma_h_sq > 0.0 && sigma_n_sq > 0.0, "fading and noise powers must be positive");
    SnrProfile p;
    p.side = c.side;
    p.gammas.resize(c.energies.size());
    std::transform(c.energies.begin(), c.energies.end(), p.gammas.begin(),
                   [&](double e) { return e * sigma_h_sq / sigma_n_sq; });
    p.gamma_av = c.average_energy() * sigma_h_sq / sigma_n_sq;
    p.signs.resize(c.symbols.size());
    std::transform(c.symbols.begin(), c.symbols.end(), p.signs.begin(), [](double s) { return s < 0.0 ? -1 : 1; });
    return p;
}

std::string to_csv_row(const Constellation& c) {
    std::string row = fmt::format("{},{}", to_string(c.side), c.m);
    for (double s : c.symbols) row += fmt::format(",{:.12g}", s);
    return row;
}

}  // namespace ncask
