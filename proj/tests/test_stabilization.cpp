#include "hsres/error.hpp"
#include "hsres/fit.hpp"
#include "hsres/models.hpp"
#include "hsres/stabilization.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace hsres;

namespace {

RadialProblem toy_problem(const ToyModel& m, double rho_match)
{
    RadialMeshOptions o;
    o.relative_element = 0.0;
    o.max_element = 0.5;
    o.energy_max = 4.0;
    return RadialProblem(m.couplings(), m.channels(), 0.0, rho_match, o);
}

ScanConfig toy_scan()
{
    ScanConfig c;
    c.alpha_min = 20.0;
    c.alpha_max = 40.0;
    c.alpha_step = 0.05;
    c.n_levels = 10;
    c.target = 2.0;
    c.energy_min = 1.0;
    c.energy_max = 3.0;
    return c;
}

// two linear diabats with a constant coupling, as adiabatic branches
StabilizationSpectrum two_level(double e_cross, double alpha_cross, double s1, double s2, double v)
{
    StabilizationSpectrum s;
    const int n = 101;
    s.branch = {0, 1};
    s.Lambda.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        const double a = 0.1 * i;
        const double d1 = e_cross + s1 * (a - alpha_cross);
        const double d2 = e_cross + s2 * (a - alpha_cross);
        const double mid = 0.5 * (d1 + d2), half = std::sqrt(0.25 * (d1 - d2) * (d1 - d2) + v * v);
        s.alpha.push_back(a);
        s.Lambda(i, 0) = mid - half;
        s.Lambda(i, 1) = mid + half;
    }
    return s;
}

} // namespace

TEST_CASE("scan configuration validation")
{
    ScanConfig c;
    c.alpha_min = 10.0;
    c.alpha_max = 5.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c.alpha_max = 20.0;
    c.alpha_step = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c.alpha_step = 2.5;
    CHECK_NOTHROW(c.validate());
    CHECK(c.alphas().size() == 5);
    CHECK(c.alphas().back() == doctest::Approx(20.0));
}

TEST_CASE("two-level avoided crossing is centered on the diabat crossing")
{
    const double e0 = 0.9994;
    const StabilizationSpectrum s = two_level(e0, 5.3, -0.002, -1.0, 0.01);
    const auto x = avoided_crossing(s, 0);
    REQUIRE(x.has_value());
    CHECK(std::abs(x->energy - e0) < 1e-10);
    CHECK(x->alpha == doctest::Approx(5.3).epsilon(1e-10));
    CHECK(x->gap == doctest::Approx(0.02).epsilon(1e-8));

    ScanConfig c;
    c.alpha_min = 0.0;
    c.alpha_max = 10.0;
    c.alpha_step = 0.1;
    const ResonanceWindow w = detect_resonance(s, c);
    REQUIRE(w.found);
    CHECK(w.plateaus == 1);
    CHECK(std::abs(w.E_center - e0) < 1e-6);
    CHECK(w.width_estimate == doctest::Approx(0.02).epsilon(1e-6));
    for (std::size_t i = 1; i < w.samples.size(); ++i)
        CHECK(w.samples[i].energy > w.samples[i - 1].energy);
}

TEST_CASE("a resonance-free box has no plateau")
{
    RadialMeshOptions o;
    o.relative_element = 0.0;
    o.max_element = 1.0;
    RadialProblem p(constant_couplings(1, 0.0), ChannelSet({0.0}, {0.5}), 0.0, 60.0, o);
    ScanConfig c;
    c.alpha_min = 20.0;
    c.alpha_max = 60.0;
    c.alpha_step = 0.5;
    c.n_levels = 8;
    const StabilizationSpectrum s = scan_branches(p, c);
    CHECK(s.columns() == 8);
    for (int j = 0; j < s.columns(); ++j)
        for (int r = 1; r < s.rows(); ++r)
            CHECK(s.Lambda(r, j) <= s.Lambda(r - 1, j) + 1e-12);
    const ResonanceWindow w = detect_resonance(s, c);
    CHECK_FALSE(w.found);
    CHECK(w.plateaus == 0);
}

TEST_CASE("toy model: one plateau per oracle pole")
{
    const ToyModel m;
    auto U = [&](double r, Eigen::MatrixXd& W) { m.potential(r, W); };
    const int poles = oracle::count_poles(U, {0.0, m.threshold2}, 1.0, 3.0, -0.02, 0.002, m.range(), 4e-3);
    const RadialProblem p = toy_problem(m, 40.0);
    const ScanConfig c = toy_scan();
    const StabilizationSpectrum s = scan_branches(p, c);
    CHECK(find_plateaus(s, c).size() == static_cast<std::size_t>(poles));
    CHECK(poles == 1);
}

TEST_CASE("toy model: window, samples and plateau stability")
{
    const ToyModel m;
    const RadialProblem p = toy_problem(m, 40.0);
    ScanConfig c = toy_scan();
    const ResonanceWindow w = detect_resonance(scan_branches(p, c), c);
    REQUIRE(w.found);
    CHECK(w.samples.size() >= 20);

    c.alpha_step *= 0.5;
    const ResonanceWindow fine = detect_resonance(scan_branches(p, c), c);
    REQUIRE(fine.found);
    CHECK(std::abs(fine.E_center - w.E_center) < 0.1 * w.width_estimate);

    const std::vector<KSample> k = sample_k(p, w);
    CHECK(k.size() == w.samples.size());
    for (const auto& s : k) {
        CHECK(s.asymmetry_defect < 1e-6);
        CHECK(s.K.entries(0, 1) == s.K.entries(1, 0));
    }

    ResonanceWindow one;
    one.found = true;
    one.samples = {w.samples.front()};
    CHECK(sample_k(p, one).size() == 1);
}

TEST_CASE("toy model pipeline reproduces the complex pole")
{
    const ToyModel m;
    auto U = [&](double r, Eigen::MatrixXd& W) { m.potential(r, W); };
    const oracle::Pole pole = oracle::find_pole(U, {0.0, m.threshold2}, 1.9, 2.2, 0.01, m.range(), 2e-3, 60, 5);
    REQUIRE(pole.Gamma > 0.0);

    const RadialProblem p = toy_problem(m, 40.0);
    const ScanConfig c = toy_scan();
    const ResonanceWindow w = detect_resonance(scan_branches(p, c), c);
    REQUIRE(w.found);
    const FitResult r = fit({sample_k(p, w), {}, FitModel::General});
    CHECK(std::abs(r.report.E0 - pole.E0) < 0.01 * pole.Gamma);
    CHECK(std::abs(r.report.Gamma - pole.Gamma) < 0.01 * pole.Gamma);
}
