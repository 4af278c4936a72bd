#include "hsres/eigensolver.hpp"
#include "hsres/error.hpp"
#include "hsres/quadrature.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace hsres;

TEST_CASE("Gauss-Legendre integrates polynomials of degree 2n-1 exactly")
{
    for (int n = 1; n <= 12; ++n) {
        const QuadratureRule q = gauss_legendre(n);
        for (int p = 0; p <= 2 * n - 1; ++p) {
            double sum = 0.0;
            for (std::size_t i = 0; i < q.nodes.size(); ++i)
                sum += q.weights[i] * std::pow(q.nodes[i], p);
            const double exact = (p % 2 == 1) ? 0.0 : 2.0 / (p + 1);
            CHECK(sum == doctest::Approx(exact).epsilon(1e-14));
        }
    }
}

TEST_CASE("Gauss-Lobatto nodes")
{
    const auto x2 = gauss_lobatto_nodes(2);
    CHECK(x2[1] == doctest::Approx(0.0));
    const auto x4 = gauss_lobatto_nodes(4);
    CHECK(x4[1] == doctest::Approx(-std::sqrt(3.0 / 7.0)).epsilon(1e-15));
    CHECK(x4[3] == doctest::Approx(std::sqrt(3.0 / 7.0)).epsilon(1e-15));
}

TEST_CASE("Lagrange basis: partition of unity and interpolation of polynomials")
{
    const LagrangeBasis basis(gauss_lobatto_nodes(6));
    std::vector<double> v(7), d(7);
    for (double x : {-0.93, -0.2, 0.0, 0.41, 1.0}) {
        basis.evaluate(x, v.data(), d.data());
        double sv = 0.0, sd = 0.0, cube = 0.0, dcube = 0.0;
        for (int j = 0; j < 7; ++j) {
            sv += v[j];
            sd += d[j];
            const double xj = basis.nodes()[j];
            cube += v[j] * xj * xj * xj;
            dcube += d[j] * xj * xj * xj;
        }
        CHECK(sv == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(std::abs(sd) < 1e-12);
        CHECK(cube == doctest::Approx(x * x * x).epsilon(1e-13));
        CHECK(dcube == doctest::Approx(3 * x * x).epsilon(1e-12));
    }
}

TEST_CASE("shift-invert solver on a diagonal pencil")
{
    const int n = 200;
    SparseMatrix A(n, n), M(n, n);
    for (int i = 0; i < n; ++i) {
        A.insert(i, i) = i + 1.0;
        M.insert(i, i) = 1.0;
    }
    ShiftInvertSolver solver(A, M, 10.3);
    CHECK(solver.count_below() == 10);
    const EigenPairs ep = solver.nearest(4);
    REQUIRE(ep.values.size() == 4);
    CHECK(ep.values(0) == doctest::Approx(9.0).epsilon(1e-13));
    CHECK(ep.values(3) == doctest::Approx(12.0).epsilon(1e-13));
}

TEST_CASE("shift-invert solver on a generalized 1D finite-element pencil")
{
    // linear elements for -u'' = lambda u on (0, pi) with Dirichlet ends
    const int ne = 400;
    const int n = ne - 1;
    const double h = M_PI / ne;
    std::vector<Eigen::Triplet<double>> ta, tm;
    for (int i = 0; i < n; ++i) {
        ta.emplace_back(i, i, 2.0 / h);
        tm.emplace_back(i, i, 4.0 * h / 6.0);
        if (i + 1 < n) {
            ta.emplace_back(i, i + 1, -1.0 / h);
            ta.emplace_back(i + 1, i, -1.0 / h);
            tm.emplace_back(i, i + 1, h / 6.0);
            tm.emplace_back(i + 1, i, h / 6.0);
        }
    }
    SparseMatrix A(n, n), M(n, n);
    A.setFromTriplets(ta.begin(), ta.end());
    M.setFromTriplets(tm.begin(), tm.end());
    ShiftInvertSolver solver(A, M, 0.0);
    CHECK(solver.count_below() == 0);
    const EigenPairs ep = solver.nearest(6);
    for (int j = 0; j < 6; ++j) {
        // exact discrete eigenvalues of the linear-element pencil
        const double t = (j + 1) * h;
        const double exact = 6.0 / (h * h) * (1.0 - std::cos(t)) / (2.0 + std::cos(t));
        CHECK(ep.values(j) == doctest::Approx(exact).epsilon(1e-12));
        CHECK(ep.residuals(j) < 1e-10);
        CHECK(ep.vectors.col(j).dot(M * ep.vectors.col(j)) == doctest::Approx(1.0));
    }
    // interior shift: inertia counts the levels below
    ShiftInvertSolver mid(A, M, 30.5);
    CHECK(mid.count_below() == 5);
    const EigenPairs ep2 = mid.nearest(2);
    CHECK(ep2.values(0) == doctest::Approx(ep.values(4)).epsilon(1e-12));
    CHECK(ep2.values(1) == doctest::Approx(ep.values(5)).epsilon(1e-12));
}
