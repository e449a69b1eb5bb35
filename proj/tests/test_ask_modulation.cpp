#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ncask/ask_modulation.hpp"
#include "ncask/errors.hpp"

using namespace ncask;

TEST_CASE("level counts") {
    CHECK(levels_for(Side::OneSided, 4) == 4);
    CHECK(levels_for(Side::TwoSided, 8) == 4);
    CHECK_THROWS_AS(levels_for(Side::TwoSided, 5), InvalidArgument);
    CHECK(levels_for(Side::OneSided, 1) == 1);
    CHECK_THROWS_AS(levels_for(Side::OneSided, 0), InvalidArgument);
    CHECK_THROWS_AS(levels_for(Side::TwoSided, 0), InvalidArgument);
    CHECK_NOTHROW(levels_for(Side::TwoSided, 2));
}

TEST_CASE("equispaced two-sided M=4 normalizes to {-3,-1,1,3}/sqrt(5)") {
    const auto c = equispaced_constellation(Side::TwoSided, 4, 1.0);
    REQUIRE(c.symbols.size() == 4);
    const double r5 = std::sqrt(5.0);
    CHECK(c.symbols[0] == doctest::Approx(-3.0 / r5));
    CHECK(c.symbols[1] == doctest::Approx(-1.0 / r5));
    CHECK(c.symbols[2] == doctest::Approx(1.0 / r5));
    CHECK(c.symbols[3] == doctest::Approx(3.0 / r5));
    CHECK(c.average_energy() == doctest::Approx(1.0));
}

TEST_CASE("equispaced amplitudes are arithmetic with the requested mean energy") {
    for (auto side : {Side::OneSided, Side::TwoSided}) {
        for (int m : {2, 4, 8, 16}) {
            CAPTURE(m);
            const auto c = equispaced_constellation(side, m, 3.5);
            CHECK(c.average_energy() == doctest::Approx(3.5));
            double ms = 0.0;
            for (double s : c.symbols) ms += s * s;
            CHECK(ms / m == doctest::Approx(3.5));
            std::vector<double> amp(c.symbols);
            std::sort(amp.begin(), amp.end());
            for (std::size_t k = 2; k < amp.size(); ++k)
                CHECK(amp[k] - amp[k - 1] == doctest::Approx(amp[1] - amp[0]));
        }
    }
}

TEST_CASE("symbol to level mapping") {
    const auto one = Constellation::from_energies(Side::OneSided, {1.0, 2.0, 5.0});
    CHECK(one.m == 3);
    CHECK(one.level_of(2) == 2);
    CHECK(one.symbols[1] == doctest::Approx(std::sqrt(2.0)));

    const auto two = Constellation::from_energies(Side::TwoSided, {1.0, 4.0});
    REQUIRE(two.m == 4);
    CHECK(two.level_of(0) == 1);
    CHECK(two.level_of(1) == 0);
    CHECK(two.level_of(2) == 0);
    CHECK(two.level_of(3) == 1);
    CHECK(two.symbols[0] == doctest::Approx(-2.0));
    CHECK(two.symbols[3] == doctest::Approx(2.0));
    CHECK_THROWS(two.level_of(4));
}

TEST_CASE("invalid energy vectors are rejected") {
    CHECK_THROWS_AS(Constellation::from_energies(Side::OneSided, {1.0, 1.0, 2.0}), InvalidArgument);
    CHECK_THROWS_AS(Constellation::from_energies(Side::OneSided, {2.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(Constellation::from_energies(Side::OneSided, {-1.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(Constellation::from_energies(Side::TwoSided, {0.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(Constellation::from_energies(Side::OneSided, {1.0, std::nan("")}), InvalidArgument);
    CHECK_THROWS_AS(equispaced_constellation(Side::OneSided, 4, 0.0), InvalidArgument);
}

TEST_CASE("SNR profile scales energies by sigma_h^2 / sigma_n^2") {
    const auto c = Constellation::from_energies(Side::TwoSided, {0.5, 2.0});
    const auto p = snr_profile(c, 2.0, 0.25);
    REQUIRE(p.levels() == 2);
    CHECK(p.gammas[0] == doctest::Approx(4.0));
    CHECK(p.gammas[1] == doctest::Approx(16.0));
    CHECK(p.gamma_av == doctest::Approx(10.0));
    CHECK(p.signs == std::vector<int>{-1, -1, 1, 1});
    CHECK(p.gamma_of(0) == doctest::Approx(16.0));

    const auto back = constellation_from_gammas(Side::TwoSided, p.gammas, 2.0, 0.25);
    CHECK(back.energies[1] == doctest::Approx(2.0));
}

TEST_CASE("equispaced gammas average to the target") {
    const auto g = equispaced_gammas(Side::OneSided, 4, 10.0);
    CHECK(std::accumulate(g.begin(), g.end(), 0.0) / 4.0 == doctest::Approx(10.0));
    CHECK(g[1] / g[0] == doctest::Approx(4.0));
}

TEST_CASE("csv row") {
    const auto c = Constellation::from_energies(Side::OneSided, {1.0, 4.0});
    CHECK(to_csv_row(c) == "one-sided,2,1,2");
    CHECK(side_from_string("two-sided") == Side::TwoSided);
    CHECK_THROWS_AS(side_from_string("both"), InvalidArgument);
}
