#pragma once

// Least-squares fit of sampled two-channel K(E) to the rank-one pole form
//   K(E) = A - u u^T / (E - E1),
// with b1 = u1^2, b2 = u2^2, b = u1 u2 so the residue is rank one exactly.

#include "hsres/error.hpp"
#include "hsres/radial.hpp"
#include "hsres/scattering.hpp"

#include <string>
#include <vector>

namespace hsres {

enum class FitModel { General, Diagonal };

const char* to_string(FitModel model) noexcept;
FitModel parse_fit_model(const std::string& name);

struct FitProblem {
    std::vector<KSample> samples;
    std::vector<double> weights; // empty: uniform
    FitModel model = FitModel::General;

    void validate() const;
};

struct FitOptions {
    int max_iterations = 1000;
    double tolerance = 1e-10;
};

struct FitResult {
    BWPoleParams params;
    double residual = 0.0; // weighted rms over all matrix entries
    double rank_defect = 0.0;
    ResonanceReport report;
    FitModel model = FitModel::General;
    int iterations = 0;
    bool converged = false;
    std::string weighting = "uniform";
};

/// Thrown when the iteration budget runs out; carries the best point found.
class FitFailure : public Error {
public:
    FitFailure(const std::string& what, FitResult best)
        : Error(ErrorKind::Convergence, what), best_(std::move(best)) {}
    const FitResult& best() const noexcept { return best_; }

private:
    FitResult best_;
};

/// Algebraic start: E K(E) = A E + E1 K(E) - C is linear in (E1, A, C) and is
/// solved in the least-squares sense with one E1 shared by all entries.
BWPoleParams initial_guess(const std::vector<KSample>& samples);

FitResult fit(const FitProblem& problem, const FitOptions& options = {});

/// Weighted rms misfit of a parameter set against the samples.
double fit_residual(const FitProblem& problem, const BWPoleParams& params);

struct ModelComparison {
    FitResult general;
    FitResult diagonal;
    double residual_ratio = 0.0;   // diagonal / general
    double branching_shift = 0.0;  // diagonal minus general, channel 2
};

ModelComparison compare_models(const std::vector<KSample>& samples, const std::vector<double>& weights = {},
                               const FitOptions& options = {});

} // namespace hsres
