#pragma once

// Coupled radial equations
//
//   -f'' + W(rho) f + Q(rho) f' + (Q(rho) f)' = E f,
//
// with W symmetric (channel terms, the 15/(4 rho^2) barrier and the second
// nonadiabatic coupling) and Q antisymmetric.  The weak form is symmetric, so
// one Lagrange finite-element discretization serves both the scattering
// solution (Dirichlet-to-Neumann march) and the box eigenproblem of the
// stabilization method.

#include "hsres/scattering.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace hsres {

class RadialCouplings {
public:
    virtual ~RadialCouplings() = default;
    virtual int channels() const = 0;
    virtual void evaluate(double rho, RealMatrix& W, RealMatrix& Q) const = 0;
};

/// Couplings given in closed form; no first-derivative coupling.
class AnalyticCouplings final : public RadialCouplings {
public:
    using Potential = std::function<void(double rho, RealMatrix& W)>;

    AnalyticCouplings(int channels, Potential potential)
        : n_(channels), potential_(std::move(potential)) {}

    int channels() const override { return n_; }
    void evaluate(double rho, RealMatrix& W, RealMatrix& Q) const override;

private:
    int n_;
    Potential potential_;
};

struct RadialMeshOptions {
    int order = 8;
    double max_element = 2.0;
    double min_element = 1e-3;
    // element length <= relative_element * rho; 0 disables the geometric grading
    double relative_element = 0.25;
    // highest energy of interest, fixes the local wavelength resolution
    double energy_max = 0.0;
    double elements_per_wavelength = 2.0;
    int extra_quadrature = 4;
};

struct KSample {
    KMatrix K;
    double asymmetry_defect = 0.0;
};

class RadialProblem {
public:
    RadialProblem(std::shared_ptr<const RadialCouplings> couplings, ChannelSet channels,
                  double rho_start, double rho_match, RadialMeshOptions options = {});

    int channels() const noexcept { return n_; }
    const ChannelSet& channel_set() const noexcept { return channel_set_; }
    double rho_start() const noexcept { return rho_start_; }
    double rho_match() const noexcept { return rho_match_; }
    const std::vector<double>& mesh() const noexcept { return mesh_; }
    const RadialMeshOptions& options() const noexcept { return options_; }
    const RadialCouplings& couplings() const noexcept { return *couplings_; }

    /// Symmetric matrix Y with (f' - Q f)(rho_end) = Y f(rho_end) for the
    /// solutions regular at rho_start. rho_end must be a mesh node or lie
    /// inside the meshed range.
    RealMatrix log_derivative(double energy, std::optional<double> rho_end = std::nullopt) const;

    /// Lower bound of the spectrum of the discretized operator on any box.
    double spectral_lower_bound() const;

    struct ElementMatrices {
        double left = 0.0;
        double right = 0.0;
        RealMatrix stiffness; // (order+1) N square, node-major dof ordering
        RealMatrix mass;      // (order+1) square scalar mass matrix
    };
    ElementMatrices element(double left, double right) const;
    const std::vector<ElementMatrices>& elements() const noexcept { return elements_; }

private:
    std::shared_ptr<const RadialCouplings> couplings_;
    ChannelSet channel_set_;
    int n_;
    double rho_start_;
    double rho_match_;
    RadialMeshOptions options_;
    std::vector<double> mesh_;
    std::vector<ElementMatrices> elements_;
};

/// K-matrix of the open channels at `energy`, matched at rho_match. Open
/// channels are the leading channels of the problem's ChannelSet below
/// `energy`; all others are matched to decaying exponentials.
KSample extract_k(const RadialProblem& problem, double energy);

struct BoxLevels {
    double alpha = 0.0;
    std::vector<double> values; // ascending
    int first_index = 0;        // 0-based position of values[0] in the box spectrum
    Eigen::MatrixXd vectors;    // mass-orthonormal eigenvectors, node-major dofs
};

/// Dirichlet eigenvalues on [rho_start, alpha]. Without a target the lowest
/// n_levels are returned; with a target the n_levels nearest to it.
BoxLevels stabilization_eigenvalues(const RadialProblem& problem, double alpha, int n_levels,
                                    std::optional<double> target = std::nullopt,
                                    bool keep_vectors = false);

} // namespace hsres
