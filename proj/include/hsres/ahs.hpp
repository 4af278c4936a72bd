#pragma once

// Adiabatic hyperspherical basis for three charged particles at J = 0: two
// heavy particles (1, 2) and a light one of unit mass. Hyperradius and
// hyperangles:
//   rho^2 = 2 mu r^2 + 2 M R^2,  tan(chi/2) = sqrt(mu/M) r/R,  cos(theta) = r.R/(rR),
// with R from particle 1 to particle 2 and r from their center of mass to the
// light particle. The adiabatic Hamiltonian is
//   h = (4/rho^2) L(chi, theta) + C(chi, theta)/rho,
// L the grand-angular operator with measure sin^2(chi) sin(theta).

#include "hsres/eigensolver.hpp"
#include "hsres/radial.hpp"

#include <optional>
#include <vector>

namespace hsres {

struct ThreeBodyMasses {
    // dt-mu defaults: triton and deuteron in muon masses (CODATA electron-mass ratios)
    double m1 = 5496.92153573 / 206.7682830;
    double m2 = 3670.48296788 / 206.7682830;
    int z1 = 1;
    int z2 = 1;
    int z_light = -1;

    void validate() const;
    double mu() const;        // light particle against the heavy pair
    double M() const;         // heavy pair
    double beta(int heavy) const; // distance of heavy k from the pair's center, in units of R
    /// Hyperangle chi at which the light particle meets heavy k (1 or 2);
    /// the coalescence lies at theta = pi for k = 1 and theta = 0 for k = 2.
    double coalescence_chi(int heavy) const;
    /// Hydrogen-like level n of the light particle bound to heavy k.
    double atomic_level(int heavy, int n) const;
    /// Reduced mass of (atom of heavy k) + other heavy particle.
    double channel_reduced_mass(int heavy) const;
    /// Scaled Coulomb interaction rho V at hyperangles (chi, theta).
    double scaled_potential(double chi, double theta) const;
};

enum class PotentialMode { Coulomb, Free };

struct HyperangularGrid {
    int n_chi = 131;
    int n_theta = 61;
    // Nodes cluster around the particle-coalescence points: exponential
    // densities with decay lengths width_scale and width_scale * halo_scale
    // Bohr radii (mapped to hyperangles at the current rho), plus a
    // logarithmic peak of relative weight cusp_weight at the cusp itself.
    bool graded = true;
    double cluster_fraction = 0.95;
    double width_scale = 1.5;
    double halo_scale = 5.0;
    double cusp_weight = 0.3;
    double cusp_width = 0.02;

    void validate() const;
};

/// Node coordinates of the tensor mesh of second-order elements; element e
/// spans nodes 2e..2e+2 in each direction.
struct AngularMesh {
    std::vector<double> chi;
    std::vector<double> theta;

    int nodes() const noexcept { return static_cast<int>(chi.size() * theta.size()); }
    int index(int i_chi, int i_theta) const noexcept
    {
        return i_theta * static_cast<int>(chi.size()) + i_chi;
    }
    /// Values of the nodal field `u` at (c, t) by biquadratic interpolation.
    double interpolate(const Eigen::VectorXd& u, double c, double t) const;
    /// Nodal values of `u` (given on this mesh) at the nodes of `other`.
    Eigen::VectorXd transfer(const Eigen::VectorXd& u, const AngularMesh& other) const;
};

AngularMesh build_mesh(const ThreeBodyMasses& masses, const HyperangularGrid& grid, double rho);
/// Every element split in two, so the coarse space is nested in the fine one.
AngularMesh refine(const AngularMesh& mesh);

/// Operator pieces on a fixed mesh: h(rho) = (4/rho^2) K + C/rho, metric M.
struct AdiabaticOperator {
    AngularMesh mesh;
    SparseMatrix K;
    SparseMatrix C;
    SparseMatrix M;

    SparseMatrix at(double rho) const;
};

AdiabaticOperator assemble_adiabatic_operator(const ThreeBodyMasses& masses, const AngularMesh& mesh,
                                              PotentialMode mode = PotentialMode::Coulomb);

struct AngularStates {
    double rho = 0.0;
    Eigen::VectorXd energies;  // ascending
    Eigen::MatrixXd vectors;   // M-orthonormal nodal values
};

/// Lowest n eigenpairs of h(rho) on the operator's mesh. Signs: positive
/// M-weighted mean, or the larger-magnitude extremum when the mean vanishes.
/// `lowest` is an estimate of the lowest eigenvalue used to place the shift;
/// the shift is verified by inertia either way.
AngularStates solve_angular(const AdiabaticOperator& op, double rho, int n,
                            std::optional<double> lowest = std::nullopt);

struct AdiabaticOptions {
    int n_terms = 6;
    // relative hyperradial step of the centered derivative
    double derivative_step = 2e-4;
    unsigned threads = 0;
    // bisection passes where the basis turns by more than max_rotation
    // between neighbors, down to intervals of min_interval * rho
    int refine_passes = 12;
    double max_rotation = 0.2;
    double min_interval = 1e-3;
};

/// Terms and couplings on a hyperradial grid. H and Q follow
///   H_jk = <d phi_j/d rho | d phi_k/d rho>,  Q_jk = -<phi_j | d phi_k/d rho>.
struct AdiabaticSolution {
    std::vector<double> rho;
    RealMatrix terms;             // rho x N
    std::vector<RealMatrix> H;    // per rho
    std::vector<RealMatrix> Q;    // per rho
    double min_overlap = 1.0;     // worst neighbor overlap used for sign continuity

    int n_terms() const noexcept { return static_cast<int>(terms.cols()); }
};

std::vector<double> geometric_grid(double rho_min, double rho_max, int points);

AdiabaticSolution compute_adiabatic(const ThreeBodyMasses& masses, const HyperangularGrid& grid,
                                    std::vector<double> rho_grid, const AdiabaticOptions& options = {},
                                    PotentialMode mode = PotentialMode::Coulomb);

/// Radial couplings W = diag(eps) + 15/(4 rho^2) + H and Q, interpolated
/// from the tables by natural cubic splines in rho.
class AdiabaticCouplings final : public RadialCouplings {
public:
    explicit AdiabaticCouplings(const AdiabaticSolution& solution, int channels = 0);

    int channels() const override { return n_; }
    void evaluate(double rho, RealMatrix& W, RealMatrix& Q) const override;
    double rho_min() const;
    double rho_max() const;

private:
    int n_;
    std::vector<double> rho_; // log rho
    // one spline per table entry: value and second-derivative columns
    Eigen::MatrixXd values_;
    Eigen::MatrixXd second_;
};

/// The two lowest open channels: atoms of heavy 1 and heavy 2 in their
/// ground state, ordered by threshold.
ChannelSet atomic_channels(const ThreeBodyMasses& masses);

} // namespace hsres
