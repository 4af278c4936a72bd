#include "hsres/error.hpp"
#include "hsres/models.hpp"
#include "hsres/radial.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace hsres;

namespace {

RadialMeshOptions toy_mesh()
{
    RadialMeshOptions o;
    o.relative_element = 0.0;
    o.max_element = 0.5;
    o.energy_max = 4.0;
    return o;
}

RadialProblem toy_problem(const ToyModel& m, double rho_match)
{
    return RadialProblem(m.couplings(), m.channels(), 0.0, rho_match, toy_mesh());
}

} // namespace

TEST_CASE("free motion has zero K")
{
    RadialMeshOptions o;
    o.relative_element = 0.0;
    o.energy_max = 3.0;
    RadialProblem p(constant_couplings(1, 0.0), ChannelSet({0.0}, {0.5}), 0.0, 12.0, o);
    for (double E : {0.3, 0.7, 2.3}) {
        const KSample s = extract_k(p, E);
        REQUIRE(s.K.entries.rows() == 1);
        CHECK(std::abs(s.K.entries(0, 0)) < 1e-6);
    }
}

TEST_CASE("hyperradial barrier against Riccati-Bessel functions")
{
    RadialMeshOptions o;
    o.min_element = 1e-3;
    o.max_element = 0.5;
    o.energy_max = 2.0;
    const double rs = 15.0;
    RadialProblem p(barrier_couplings(), ChannelSet({0.0}, {0.5}), 0.0, rs, o);
    for (double E : {0.25, 1.0, 1.9}) {
        const double q = std::sqrt(E);
        // regular solution sqrt(rho) J_2(q rho)
        const double x = q * rs;
        const double j2 = std::cyl_bessel_j(2.0, x);
        const double dj2 = 0.5 * (std::cyl_bessel_j(1.0, x) - std::cyl_bessel_j(3.0, x));
        const double f = std::sqrt(rs) * j2;
        const double df = 0.5 * j2 / std::sqrt(rs) + std::sqrt(rs) * q * dj2;
        const double J = std::sin(x) / std::sqrt(q), dJ = q * std::cos(x) / std::sqrt(q);
        const double N = std::cos(x) / std::sqrt(q), dN = -q * std::sin(x) / std::sqrt(q);
        const double expected = (dJ * f - J * df) / (df * N - f * dN);
        CHECK(extract_k(p, E).K.entries(0, 0) == doctest::Approx(expected).epsilon(1e-8));
    }
}

TEST_CASE("toy model K agrees with direct integration")
{
    const ToyModel m;
    const RadialProblem p = toy_problem(m, m.range());
    auto U = [&](double r, Eigen::MatrixXd& W) { m.potential(r, W); };
    for (double E : {0.7, 1.3, 2.0, 2.1, 3.0}) {
        const KSample s = extract_k(p, E);
        CHECK(s.asymmetry_defect < 1e-8);
        const Eigen::MatrixXd ref = oracle::k_matrix(U, {0.0, m.threshold2}, E, m.range(), 1e-3);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                CHECK(std::abs(s.K.entries(i, j) - ref(i, j)) < 1e-6 * std::max(1.0, std::abs(ref(i, j))));
    }
    SUBCASE("one open channel below the second threshold")
    {
        const KSample s = extract_k(p, 0.3);
        REQUIRE(s.K.entries.rows() == 1);
        CHECK(std::isfinite(s.K.entries(0, 0)));
    }
}

TEST_CASE("K is insensitive to the matching radius")
{
    const ToyModel m;
    const RadialProblem a = toy_problem(m, m.range());
    const RadialProblem b = toy_problem(m, 2.0 * m.range());
    for (double E : {0.9, 2.5}) {
        const RealMatrix Ka = extract_k(a, E).K.entries;
        const RealMatrix Kb = extract_k(b, E).K.entries;
        CHECK((Ka - Kb).cwiseAbs().maxCoeff() < 1e-4 * std::max(1.0, Kb.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("extract_k errors")
{
    const ToyModel m;
    const RadialProblem p = toy_problem(m, m.range());
    CHECK_THROWS_AS(extract_k(p, -0.2), Error);
    try {
        extract_k(p, -0.2);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoOpenChannel);
    }
    try {
        extract_k(p, 0.5);
        FAIL("threshold energy accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Domain);
    }
}

TEST_CASE("particle in a box")
{
    const double c = 0.3;
    const double rho0 = 0.05;
    RadialMeshOptions o;
    o.relative_element = 0.0;
    o.max_element = 1.0;
    RadialProblem p(constant_couplings(1, c), ChannelSet({c}, {0.5}), rho0, 40.0, o);
    for (double alpha : {20.0, 27.3, 40.0}) {
        const BoxLevels levels = stabilization_eigenvalues(p, alpha, 8);
        CHECK(levels.first_index == 0);
        for (int n = 1; n <= 8; ++n) {
            const double L = alpha - rho0;
            const double exact = c + n * n * std::numbers::pi * std::numbers::pi / (L * L);
            CHECK(std::abs(levels.values[static_cast<std::size_t>(n - 1)] - exact) < 1e-6);
        }
    }
}

TEST_CASE("box levels fall monotonically with the box size")
{
    const ToyModel m;
    const RadialProblem p = toy_problem(m, 30.0);
    std::vector<double> prev;
    for (double alpha = 20.0; alpha <= 30.0; alpha += 0.37) {
        const BoxLevels levels = stabilization_eigenvalues(p, alpha, 10);
        if (!prev.empty())
            for (std::size_t j = 0; j < prev.size(); ++j)
                CHECK(levels.values[j] <= prev[j] + 1e-10);
        prev = levels.values;
    }
}

TEST_CASE("targeted box levels carry absolute indices")
{
    const ToyModel m;
    const RadialProblem p = toy_problem(m, 30.0);
    const BoxLevels low = stabilization_eigenvalues(p, 25.0, 20);
    const double target = 0.5 * (low.values[11] + low.values[12]);
    const BoxLevels near = stabilization_eigenvalues(p, 25.0, 4, target);
    REQUIRE(near.values.size() == 4);
    CHECK(near.first_index == 10);
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(near.values[j] == doctest::Approx(low.values[10 + j]).epsilon(1e-10));
    CHECK_THROWS_AS(stabilization_eigenvalues(p, 31.0, 4), Error);
}
