#include "hsres/ahs.hpp"
#include "hsres/error.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace hsres;

namespace {

constexpr double pi = std::numbers::pi;

HyperangularGrid uniform_grid(int n)
{
    HyperangularGrid g;
    g.n_chi = n;
    g.n_theta = n;
    g.graded = false;
    return g;
}

HyperangularGrid small_grid()
{
    HyperangularGrid g;
    g.n_chi = 61;
    g.n_theta = 31;
    return g;
}

// Coulomb energy times rho from explicit particle positions in the plane
double cartesian_potential(const ThreeBodyMasses& m, double rho, double chi, double theta)
{
    const double r = rho * std::sin(0.5 * chi) / std::sqrt(2.0 * m.mu());
    const double R = rho * std::cos(0.5 * chi) / std::sqrt(2.0 * m.M());
    // heavy pair on the x axis, from particle 1 to particle 2, center of mass at 0
    const double x1 = -m.m2 / (m.m1 + m.m2) * R, x2 = m.m1 / (m.m1 + m.m2) * R;
    const double lx = r * std::cos(theta), ly = r * std::sin(theta);
    const double d12 = x2 - x1, d1 = std::hypot(lx - x1, ly), d2 = std::hypot(lx - x2, ly);
    return rho * (m.z1 * m.z2 / d12 + m.z1 * m.z_light / d1 + m.z2 * m.z_light / d2);
}

} // namespace

TEST_CASE("mass-scaled coordinates reproduce the Cartesian Coulomb energy")
{
    const ThreeBodyMasses m;
    for (double chi : {0.05, 0.3, 1.1, 2.5, 3.0})
        for (double theta : {0.0, 0.4, 1.6, 2.9, pi}) {
            const double c = cartesian_potential(m, 7.0, chi, theta);
            CHECK(m.scaled_potential(chi, theta) == doctest::Approx(c).epsilon(1e-12));
        }
    // the light particle sits on heavy 1 at theta = pi and on heavy 2 at theta = 0
    CHECK(std::abs(m.scaled_potential(m.coalescence_chi(1), pi - 1e-9)) > 1e6);
    CHECK(std::abs(m.scaled_potential(m.coalescence_chi(2), 1e-9)) > 1e6);
    CHECK(m.atomic_level(1, 1) < m.atomic_level(2, 1));
    CHECK(m.atomic_level(1, 2) == doctest::Approx(0.25 * m.atomic_level(1, 1)).epsilon(1e-15));

    ThreeBodyMasses bad = m;
    bad.m2 = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    HyperangularGrid g;
    g.n_chi = 60;
    CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("graded mesh: monotone, coalescence points are vertices, refinement is nested")
{
    const ThreeBodyMasses m;
    const AngularMesh mesh = build_mesh(m, HyperangularGrid{}, 300.0);
    CHECK(mesh.chi.size() == 131);
    CHECK(mesh.theta.size() == 61);
    for (const auto* v : {&mesh.chi, &mesh.theta}) {
        CHECK(v->front() == 0.0);
        CHECK(v->back() == doctest::Approx(pi));
        for (std::size_t i = 1; i < v->size(); ++i)
            CHECK((*v)[i] > (*v)[i - 1]);
    }
    for (int k = 1; k <= 2; ++k) {
        bool vertex = false;
        for (std::size_t i = 0; i < mesh.chi.size(); i += 2)
            vertex = vertex || mesh.chi[i] == m.coalescence_chi(k);
        CHECK(vertex);
    }
    const AngularMesh fine = refine(mesh);
    CHECK(fine.chi.size() == 261);
    for (std::size_t i = 0; i < mesh.chi.size(); ++i)
        CHECK(fine.chi[2 * i] == mesh.chi[i]);

    // biquadratic fields are transferred exactly
    Eigen::VectorXd u(mesh.nodes());
    for (std::size_t j = 0; j < mesh.theta.size(); ++j)
        for (std::size_t i = 0; i < mesh.chi.size(); ++i)
            u(mesh.index(int(i), int(j))) = mesh.chi[i] * mesh.chi[i] * mesh.theta[j] - mesh.theta[j];
    const AngularMesh other = build_mesh(m, HyperangularGrid{}, 20.0);
    const Eigen::VectorXd v = mesh.transfer(u, other);
    for (std::size_t j = 0; j < other.theta.size(); j += 7)
        for (std::size_t i = 0; i < other.chi.size(); i += 11)
            CHECK(v(other.index(int(i), int(j))) ==
                  doctest::Approx(other.chi[i] * other.chi[i] * other.theta[j] - other.theta[j]).epsilon(1e-10));
}

TEST_CASE("free hyperangular spectrum is 4 lambda (lambda + 2) / rho^2 with multiplicity lambda + 1")
{
    const ThreeBodyMasses m;
    for (double rho : {1.0, 2.5}) {
        const AdiabaticOperator op = assemble_adiabatic_operator(m, build_mesh(m, uniform_grid(61), rho),
                                                                 PotentialMode::Free);
        const AngularStates s = solve_angular(op, rho, 10);
        int j = 0;
        for (int lambda = 0; lambda <= 3; ++lambda)
            for (int d = 0; d <= lambda; ++d, ++j) {
                const double exact = 4.0 * lambda * (lambda + 2) / (rho * rho);
                CHECK(std::abs(s.energies(j) - exact) <= 1e-3 * std::max(1.0, exact));
            }
        const Eigen::VectorXd c = s.vectors.col(0);
        CHECK(c.maxCoeff() - c.minCoeff() < 1e-8 * c.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("terms approach the hydrogen-like thresholds")
{
    const ThreeBodyMasses m;
    const HyperangularGrid g;
    for (double rho : {100.0, 300.0, 500.0}) {
        const AdiabaticOperator op = assemble_adiabatic_operator(m, build_mesh(m, g, rho));
        const AngularStates s = solve_angular(op, rho, 6);
        const double error = std::abs(s.energies(0) - m.atomic_level(1, 1));
        CHECK(error < 2e-3);
        if (rho == 500.0) {
            CHECK(error < 1e-4);
            CHECK(std::abs(s.energies(1) - m.atomic_level(2, 1)) < 1e-4);
            CHECK(std::abs(s.energies(2) - m.atomic_level(1, 2)) < 2e-3);
            const Eigen::MatrixXd G = s.vectors.transpose() * (op.M * s.vectors);
            CHECK((G - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-5);
        }
        for (int j = 1; j < 6; ++j)
            CHECK(s.energies(j) >= s.energies(j - 1));
    }
}

TEST_CASE("nested refinement never raises a term")
{
    const ThreeBodyMasses m;
    for (double rho : {2.0, 40.0}) {
        const AngularMesh mesh = build_mesh(m, small_grid(), rho);
        const AngularStates coarse = solve_angular(assemble_adiabatic_operator(m, mesh), rho, 6);
        const AngularStates fine = solve_angular(assemble_adiabatic_operator(m, refine(mesh)), rho, 6);
        for (int j = 0; j < 6; ++j)
            CHECK(fine.energies(j) <= coarse.energies(j) + 1e-6 * std::abs(coarse.energies(j)));
    }
}

TEST_CASE("equal heavy masses: states are even or odd under theta -> pi - theta")
{
    ThreeBodyMasses m;
    m.m2 = m.m1;
    const double rho = 30.0;
    const AdiabaticOperator op = assemble_adiabatic_operator(m, build_mesh(m, small_grid(), rho));
    const AngularMesh& mesh = op.mesh;
    const int nt = static_cast<int>(mesh.theta.size()), nc = static_cast<int>(mesh.chi.size());
    for (int j = 0; j < nt; ++j)
        CHECK(mesh.theta[std::size_t(j)] + mesh.theta[std::size_t(nt - 1 - j)] == doctest::Approx(pi));
    const AngularStates s = solve_angular(op, rho, 6);
    for (int k = 0; k < 6; ++k) {
        Eigen::VectorXd reflected(mesh.nodes());
        for (int j = 0; j < nt; ++j)
            for (int i = 0; i < nc; ++i)
                reflected(mesh.index(i, j)) = s.vectors(mesh.index(i, nt - 1 - j), k);
        const double parity = reflected.dot(op.M * s.vectors.col(k));
        CHECK(std::abs(std::abs(parity) - 1.0) < 1e-6);
    }
    // the gerade/ungerade pair of the ground atom is split by exchange, which
    // dies off as the heavy particles separate
    const AngularStates far = solve_angular(assemble_adiabatic_operator(m, build_mesh(m, small_grid(), 60.0)), 60.0, 2);
    CHECK(s.energies(1) - s.energies(0) > 0.0);
    CHECK(far.energies(1) - far.energies(0) < 0.1 * (s.energies(1) - s.energies(0)));
}

TEST_CASE("couplings: symmetries, completeness bound and Hellmann-Feynman")
{
    const ThreeBodyMasses m;
    const HyperangularGrid g = small_grid();
    AdiabaticOptions o;
    o.n_terms = 3;
    for (double rho : {0.5, 8.0, 60.0}) {
        const AdiabaticSolution a = compute_adiabatic(m, g, {rho}, o);
        REQUIRE(a.rho.size() == 1);
        const RealMatrix& Q = a.Q[0];
        const RealMatrix& H = a.H[0];
        const double scale = Q.cwiseAbs().maxCoeff();
        CHECK((Q + Q.transpose()).cwiseAbs().maxCoeff() < 1e-6 * scale);
        CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);
        for (int j = 0; j < 3; ++j) {
            CHECK(H(j, j) >= 0.0);
            CHECK(H(j, j) >= Q.col(j).squaredNorm() * (1.0 - 1e-6));
        }

        // <phi_j|dh/drho|phi_k> = (eps_j - eps_k) Q_jk for j != k, with
        // dh/drho = -8 K / rho^3 - C / rho^2 on the frozen mesh
        const AdiabaticOperator op = assemble_adiabatic_operator(m, build_mesh(m, g, rho));
        const AngularStates s = solve_angular(op, rho, 3);
        const SparseMatrix dh = SparseMatrix((-8.0 / (rho * rho * rho)) * op.K - (1.0 / (rho * rho)) * op.C);
        const RealMatrix D = s.vectors.transpose() * (dh * s.vectors);
        for (int j = 0; j < 3; ++j) {
            CHECK(a.terms(0, j) == doctest::Approx(s.energies(j)).epsilon(1e-12));
            for (int k = 0; k < 3; ++k) {
                if (j == k)
                    continue;
                const double hf = D(j, k) / (s.energies(j) - s.energies(k));
                CHECK(std::abs(Q(j, k) - hf) < 1e-5 * std::max(1e-3, std::abs(hf)) + 1e-9);
            }
        }
    }
}

TEST_CASE("Q34 peaks where the n = 2 pair turns from mixed to atomic")
{
    // Two-state picture: diabatic splitting Delta, coupling c(rho) decaying
    // monotonically. The mixing angle is atan(2c/Delta)/2, so Q peaks at
    // 2c = Delta, where the adiabatic gap is sqrt(2) Delta.
    const ThreeBodyMasses m;
    AdiabaticOptions o;
    o.n_terms = 4;
    const AdiabaticSolution a = compute_adiabatic(m, small_grid(), geometric_grid(70.0, 200.0, 41), o);
    CHECK(a.min_overlap > 0.5);
    const double delta = m.atomic_level(2, 2) - m.atomic_level(1, 2);
    std::size_t peak = 0;
    double rho_gap = 0.0;
    for (std::size_t i = 0; i < a.rho.size(); ++i) {
        if (std::abs(a.Q[i](2, 3)) > std::abs(a.Q[peak](2, 3)))
            peak = i;
        const auto r = Eigen::Index(i);
        if (i > 0 && a.terms(r - 1, 3) - a.terms(r - 1, 2) > std::sqrt(2.0) * delta &&
            a.terms(r, 3) - a.terms(r, 2) <= std::sqrt(2.0) * delta)
            rho_gap = a.rho[i];
    }
    CHECK(peak > 0);
    CHECK(peak + 1 < a.rho.size());
    CHECK(std::abs(a.rho[peak] - rho_gap) < 0.1 * rho_gap);
    // one sign through the peak
    for (std::size_t i = 0; i < a.rho.size(); ++i)
        if (std::abs(a.Q[i](2, 3)) > 0.1 * std::abs(a.Q[peak](2, 3)))
            CHECK(a.Q[i](2, 3) * a.Q[peak](2, 3) > 0.0);
}

TEST_CASE("spline adapter interpolates the tables and adds the centrifugal term")
{
    AdiabaticSolution s;
    s.rho = geometric_grid(0.5, 50.0, 200);
    const int n = 2;
    s.terms.resize(Eigen::Index(s.rho.size()), n);
    for (std::size_t i = 0; i < s.rho.size(); ++i) {
        const double r = s.rho[i];
        s.terms(Eigen::Index(i), 0) = -1.0 + 1.0 / r;
        s.terms(Eigen::Index(i), 1) = -0.5 + std::exp(-r);
        RealMatrix H(n, n), Q(n, n);
        H << 1.0 / (r * r), 0.1 * std::exp(-r), 0.1 * std::exp(-r), 2.0 / (r * r);
        Q << 0.0, std::sin(0.2 * r) / r, -std::sin(0.2 * r) / r, 0.0;
        s.H.push_back(H);
        s.Q.push_back(Q);
    }
    const AdiabaticCouplings c(s);
    CHECK(c.channels() == 2);
    CHECK(c.rho_min() == doctest::Approx(0.5));
    CHECK(c.rho_max() == doctest::Approx(50.0));
    RealMatrix W, Q;
    for (double r : {0.7, 3.3, 17.1, 49.0}) {
        c.evaluate(r, W, Q);
        CHECK(W(0, 0) == doctest::Approx(-1.0 + 1.0 / r + 1.0 / (r * r) + 3.75 / (r * r)).epsilon(1e-6));
        CHECK(W(1, 1) == doctest::Approx(-0.5 + std::exp(-r) + 2.0 / (r * r) + 3.75 / (r * r)).epsilon(1e-6));
        CHECK(std::abs(W(0, 1) - 0.1 * std::exp(-r)) < 1e-7);
        CHECK(std::abs(Q(0, 1) - std::sin(0.2 * r) / r) < 2e-5);
        CHECK(Q(1, 0) == -Q(0, 1));
    }
    CHECK_THROWS_AS(c.evaluate(0.4, W, Q), Error);
    CHECK_THROWS_AS(c.evaluate(51.0, W, Q), Error);

    const ChannelSet ch = atomic_channels(ThreeBodyMasses{});
    CHECK(ch.n_open() == 2);
    CHECK(ch.thresholds()[0] < ch.thresholds()[1]);
}
