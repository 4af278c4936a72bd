#include "hsres/error.hpp"
#include "hsres/fit.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace hsres;
using hsres::testing::random_pole_params;
using hsres::testing::rel_err;
using hsres::testing::synthetic_samples;

namespace {

double report_error(const ResonanceReport& r, const ResonanceReport& ref)
{
    return std::max({rel_err(r.E0, ref.E0), rel_err(r.Gamma, ref.Gamma),
                     rel_err(r.partial_widths[0], ref.partial_widths[0]),
                     rel_err(r.partial_widths[1], ref.partial_widths[1])});
}

double param_error(const BWPoleParams& p, const BWPoleParams& ref)
{
    auto e = [](double x, double r) { return std::abs(x - r) / std::max(std::abs(r), 0.1); };
    return std::max({e(p.E1, ref.E1), e(p.a1, ref.a1), e(p.a2, ref.a2), e(p.a, ref.a), e(p.b1, ref.b1),
                     e(p.b2, ref.b2), e(p.b, ref.b)});
}

} // namespace

TEST_CASE("initial guess is exact on pole-form data")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const BWPoleParams p = random_pole_params(rng, 1.0, 3.0, 3.0);
        const BWPoleParams g = initial_guess(synthetic_samples(p, 40));
        CHECK(rel_err(g.E1, p.E1) < 1e-2);
        CHECK(param_error(g, p) < 1e-6);
    }
}

TEST_CASE("initial guess needs a pole passage")
{
    std::vector<KSample> flat(10);
    for (int i = 0; i < 10; ++i) {
        flat[static_cast<std::size_t>(i)].K.energy = 0.1 * i;
        flat[static_cast<std::size_t>(i)].K.entries = RealMatrix::Constant(2, 2, 0.7);
    }
    try {
        initial_guess(flat);
        FAIL("constant samples accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Bracket);
    }
}

TEST_CASE("noiseless round trip")
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const BWPoleParams p = random_pole_params(rng, 1.0, 3.0, 3.0);
        const FitResult r = fit({synthetic_samples(p, 40), {}, FitModel::General});
        CHECK(r.converged);
        CHECK(param_error(r.params, p) < 1e-8);
        CHECK(report_error(r.report, resonance_from_pole(p)) < 1e-8);
        CHECK(r.rank_defect <= 1e-12 * std::max(r.params.b1 * r.params.b2, r.params.b * r.params.b));
    }
}

TEST_CASE("noisy round trip")
{
    std::mt19937_64 rng(13);
    std::vector<double> errors;
    for (int trial = 0; trial < 100; ++trial) {
        const BWPoleParams p = random_pole_params(rng, 1.0, 3.0, 3.0);
        const FitResult r = fit({synthetic_samples(p, 40, 5.0, 1e-5, &rng), {}, FitModel::General});
        errors.push_back(report_error(r.report, resonance_from_pole(p)));
    }
    std::sort(errors.begin(), errors.end());
    CHECK(errors[94] < 1e-3);
}

TEST_CASE("fit is invariant under sample order")
{
    std::mt19937_64 rng(14);
    const BWPoleParams p = random_pole_params(rng, 1.0, 3.0, 3.0);
    std::vector<KSample> s = synthetic_samples(p, 30, 5.0, 1e-4, &rng);
    const FitResult a = fit({s, {}, FitModel::General});
    std::shuffle(s.begin(), s.end(), rng);
    const FitResult b = fit({s, {}, FitModel::General});
    CHECK(rel_err(a.report.E0, b.report.E0) < 1e-10);
    CHECK(rel_err(a.report.Gamma, b.report.Gamma) < 1e-10);
}

TEST_CASE("model comparison")
{
    std::mt19937_64 rng(15);
    SUBCASE("no background coupling: models agree")
    {
        for (int trial = 0; trial < 20; ++trial) {
            BWPoleParams p = random_pole_params(rng, 1.0, 3.0, 3.0);
            p.a = 0.0;
            const ModelComparison c = compare_models(synthetic_samples(p, 40));
            CHECK(std::abs(c.general.report.E0 - c.diagonal.report.E0) < 1e-6);
            CHECK(rel_err(c.general.report.Gamma, c.diagonal.report.Gamma) < 1e-6);
            CHECK(std::abs(c.branching_shift) < 1e-6);
            CHECK(c.general.residual <= c.diagonal.residual + 1e-12);
        }
    }
    SUBCASE("background coupling shifts the diagonal model")
    {
        for (int trial = 0; trial < 20; ++trial) {
            BWPoleParams p = random_pole_params(rng, 1.0, 3.0, 3.0);
            p.a = 0.3;
            const ResonanceReport truth = resonance_from_pole(p);
            const ModelComparison c = compare_models(synthetic_samples(p, 40));
            CHECK(std::abs(c.general.report.branching[1] - truth.branching[1]) < 1e-6);
            CHECK(c.diagonal.residual > 10.0 * c.general.residual);
            CHECK(std::abs(c.diagonal.report.branching[1] - truth.branching[1]) > 1e-3);
        }
    }
}

TEST_CASE("fit problem validation")
{
    std::mt19937_64 rng(16);
    const BWPoleParams p = random_pole_params(rng);
    CHECK_THROWS_AS(fit({synthetic_samples(p, 6), {}, FitModel::General}), Error);
    CHECK_THROWS_AS(fit({synthetic_samples(p, 20), {1.0, 2.0}, FitModel::General}), Error);
    CHECK(parse_fit_model("diagonal") == FitModel::Diagonal);
    CHECK_THROWS_AS(parse_fit_model("other"), Error);
}
