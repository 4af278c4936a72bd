#pragma once

// K- and S-matrix algebra, the generalized Breit-Wigner model and closed-form
// resonance parameters of a two-channel pole fit.

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace hsres {

using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using cplx = std::complex<double>;

/// Open scattering channels: asymptotic thresholds eps_i(inf) and the reduced
/// masses mu_i of the fragment pairs. Channel momenta follow
/// q_i^2 = E - threshold_i, physical wave numbers k_i = sqrt(2 mu_i) q_i.
class ChannelSet {
public:
    ChannelSet(std::vector<double> thresholds, std::vector<double> reduced_masses,
               int angular_momentum = 0);

    int n_open() const noexcept { return static_cast<int>(thresholds_.size()); }
    int angular_momentum() const noexcept { return angular_momentum_; }
    const std::vector<double>& thresholds() const noexcept { return thresholds_; }
    const std::vector<double>& reduced_masses() const noexcept { return reduced_masses_; }

    double momentum(int channel, double energy) const;
    double wave_number(int channel, double energy) const;
    bool all_open(double energy) const noexcept;

private:
    std::vector<double> thresholds_;
    std::vector<double> reduced_masses_;
    int angular_momentum_;
};

struct KMatrix {
    double energy = 0.0;
    RealMatrix entries;

    /// Throws Validation unless square, finite and symmetric to
    /// 1e-10 * max(1, |K_ij|).
    void validate() const;
};

struct SMatrix {
    double energy = 0.0;
    ComplexMatrix entries;

    double unitarity_defect() const;
    double symmetry_defect() const;
};

/// Six-parameter pole form of a two-channel K-matrix,
///   K(E) = [[a1, a], [a, a2]] - [[b1, b], [b, b2]] / (E - E1),
/// with a rank-one residue b1 * b2 = b^2 and b1, b2 >= 0.
struct BWPoleParams {
    double E1 = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
    double a = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
    double b = 0.0;

    /// Residue from signed amplitudes: b1 = u1^2, b2 = u2^2, b = u1 u2.
    static BWPoleParams from_amplitudes(double E1, double a1, double a2, double a,
                                        double u1, double u2);

    double rank_defect() const noexcept;
    void validate(double tol_rank = 1e-8) const;
};

/// S-matrix side of the same resonance: pole E0 - i Gamma/2, eigenphases of
/// the background, real eigen-amplitudes and the orthogonal matrix R with
/// S^b = R^T diag(exp(2i Delta)) R.  Valid for any channel count.
struct BreitWignerS {
    double E0 = 0.0;
    double Gamma = 0.0;
    RealVector eigenphases;
    RealVector beta_tilde;
    RealMatrix R;
};

struct ResonanceReport {
    double E0 = 0.0;
    double Gamma = 0.0;
    std::vector<double> partial_widths;
    std::vector<double> branching;
    std::vector<double> eigenphases;
    double mixing_angle = 0.0;
    std::vector<double> beta_tilde;
    std::vector<cplx> beta;
    double d = 0.0;
    double f = 0.0;
    double g = 0.0;
    double h = 0.0;
    // eigenphases coincide, mixing angle not identifiable and reported as 0
    bool degenerate_background = false;
    // some |Delta_j| > 1.5 rad
    bool ill_conditioned_background = false;
};

SMatrix k_to_s(const KMatrix& K);
KMatrix s_to_k(const SMatrix& S);

/// Two-channel s-wave partial cross sections, in the same area units as
/// 1/k^2. Row index is the entrance channel.
Eigen::Matrix2d cross_sections(const KMatrix& K, const ChannelSet& channels);

KMatrix bw_k(const BWPoleParams& params, double energy);
SMatrix bw_s(const BreitWignerS& model, double energy);

/// 2x2 rotation parametrized by the mixing angle nu.
Eigen::Matrix2d mixing_rotation(double nu);

/// Background eigen-decomposition and eigen-amplitudes of a pole fit. The
/// mixing angle is taken in [-pi/4, pi/4], eigenphases on the principal
/// branch of arctan and beta_tilde_1 follows the sign of the fitted residue.
BreitWignerS decompose(const BWPoleParams& params);

ResonanceReport resonance_from_pole(const BWPoleParams& params);

/// Lower bound on Gamma_i / Gamma for two channels with background mixing nu.
double partial_width_lower_bound(double nu, double delta1, double delta2);

} // namespace hsres
