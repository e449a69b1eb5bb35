#pragma once

#include <string>
#include <vector>

namespace ncask {

enum class Side { OneSided, TwoSided };

const char* to_string(Side side);
Side side_from_string(const std::string& name);

// Real M-level ASK constellation.
//
// `energies` holds the distinct level energies in strictly increasing order
// (M of them for one-sided, M/2 for two-sided). `symbols` holds the M signed
// amplitudes: one-sided s_m = sqrt(E_m); two-sided lists the negative half
// from largest magnitude down, then the positive half ascending.
struct Constellation {
    Side side = Side::OneSided;
    int m = 0;
    std::vector<double> energies;
    std::vector<double> symbols;

    int levels() const { return static_cast<int>(energies.size()); }
    double average_energy() const;
    // Distinct-energy level used by symbol `index` (0-based).
    int level_of(int index) const;

    static Constellation from_energies(Side side, std::vector<double> energies);
};

// Per-level SNRs Gamma_m = E_m sigma_h^2 / sigma_n^2 and per-symbol signs.
struct SnrProfile {
    Side side = Side::OneSided;
    std::vector<double> gammas;
    double gamma_av = 0.0;
    std::vector<int> signs;

    int symbols() const { return static_cast<int>(signs.size()); }
    int levels() const { return static_cast<int>(gammas.size()); }
    int level_of(int index) const;
    double gamma_of(int index) const { return gammas[static_cast<std::size_t>(level_of(index))]; }

    // Builds the profile directly from a level SNR vector (validated the same way
    // as constellation_from_gammas).
    static SnrProfile from_gammas(Side side, std::vector<double> gammas);
};

int levels_for(Side side, int m);

// Arithmetic amplitude grid normalized to average energy e_av.
Constellation equispaced_constellation(Side side, int m, double e_av);

Constellation constellation_from_gammas(Side side, const std::vector<double>& gammas,
                                        double sigma_h_sq, double sigma_n_sq);

SnrProfile snr_profile(const Constellation& c, double sigma_h_sq, double sigma_n_sq);

// Level SNRs of the equispaced constellation with mean SNR gamma_av.
std::vector<double> equispaced_gammas(Side side, int m, double gamma_av);

// "side,M,s_1,...,s_M"
std::string to_csv_row(const Constellation& c);

}  // namespace ncask
