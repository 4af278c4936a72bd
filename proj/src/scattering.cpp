#include "hsres/scattering.hpp"

#include "hsres/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hsres {

namespace {

std::string energy_tag(double energy)
{
    std::ostringstream os;
    os.precision(17);
    os << "E=" << energy;
    return os.str();
}

} // namespace

ChannelSet::ChannelSet(std::vector<double> thresholds, std::vector<double> reduced_masses,
                       int angular_momentum)
    : thresholds_(std::move(thresholds)),
      reduced_masses_(std::move(reduced_masses)),
      angular_momentum_(angular_momentum)
{
    require(!thresholds_.empty(), ErrorKind::Validation, "channel set needs n_open >= 1");
    require(thresholds_.size() == reduced_masses_.size(), ErrorKind::Validation,
            "one reduced mass per channel required");
    for (std::size_t i = 0; i < thresholds_.size(); ++i) {
        require(std::isfinite(thresholds_[i]), ErrorKind::Validation, "non-finite threshold");
        require(reduced_masses_[i] > 0.0, ErrorKind::Validation, "reduced masses must be positive");
        if (i > 0)
            require(thresholds_[i] > thresholds_[i - 1], ErrorKind::Validation,
                    "thresholds must be strictly ascending");
    }
    require(angular_momentum_ >= 0, ErrorKind::Validation, "angular momentum must be >= 0");
}

double ChannelSet::momentum(int channel, double energy) const
{
    require(channel >= 0 && channel < n_open(), ErrorKind::Domain, "channel index out of range");
    const double q2 = energy - thresholds_[static_cast<std::size_t>(channel)];
    require(q2 > 0.0, ErrorKind::ClosedChannel,
            "channel " + std::to_string(channel + 1) + " closed at " + energy_tag(energy));
    return std::sqrt(q2);
}

double ChannelSet::wave_number(int channel, double energy) const
{
    return std::sqrt(2.0 * reduced_masses_[static_cast<std::size_t>(channel)]) *
           momentum(channel, energy);
}

bool ChannelSet::all_open(double energy) const noexcept
{
    return energy > thresholds_.back();
}

void KMatrix::validate() const
{
    require(entries.rows() == entries.cols() && entries.rows() > 0, ErrorKind::Validation,
            "K-matrix must be square and non-empty");
    for (Eigen::Index i = 0; i < entries.rows(); ++i)
        for (Eigen::Index j = 0; j < entries.cols(); ++j) {
            const double kij = entries(i, j);
            require(std::isfinite(kij), ErrorKind::Validation,
                    "non-finite K-matrix entry at " + energy_tag(energy));
            require(std::abs(kij - entries(j, i)) <= 1e-10 * std::max(1.0, std::abs(kij)),
                    ErrorKind::Validation, "K-matrix not symmetric at " + energy_tag(energy));
        }
}

double SMatrix::unitarity_defect() const
{
    const auto n = entries.rows();
    return (entries * entries.adjoint() - ComplexMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
}

double SMatrix::symmetry_defect() const
{
    return (entries - entries.transpose()).cwiseAbs().maxCoeff();
}

SMatrix k_to_s(const KMatrix& K)
{
    K.validate();
    const auto n = K.entries.rows();
    const ComplexMatrix iK = cplx(0.0, 1.0) * K.entries.cast<cplx>();
    const ComplexMatrix one = ComplexMatrix::Identity(n, n);
    Eigen::PartialPivLU<ComplexMatrix> lu(one - iK);
    const double det = std::abs(lu.determinant());
    require(std::isfinite(det) && det > 1e-300, ErrorKind::SingularMatrix,
            "1 - iK is singular at " + energy_tag(K.energy));
    // (1 + iK) and (1 - iK)^{-1} commute
    SMatrix S;
    S.energy = K.energy;
    S.entries = lu.solve(one + iK);
    return S;
}

KMatrix s_to_k(const SMatrix& S)
{
    const auto n = S.entries.rows();
    const ComplexMatrix one = ComplexMatrix::Identity(n, n);
    Eigen::PartialPivLU<ComplexMatrix> lu(one + S.entries);
    const double det = std::abs(lu.determinant());
    require(std::isfinite(det) && det > 1e-300, ErrorKind::SingularMatrix,
            "1 + S is singular at " + energy_tag(S.energy));
    const ComplexMatrix K = cplx(0.0, 1.0) * lu.solve(one - S.entries);
    KMatrix out;
    out.energy = S.energy;
    out.entries = K.real();
    out.entries = 0.5 * (out.entries + out.entries.transpose()).eval();
    return out;
}

Eigen::Matrix2d cross_sections(const KMatrix& K, const ChannelSet& channels)
{
    require(channels.n_open() == 2 && K.entries.rows() == 2, ErrorKind::UnsupportedShape,
            "cross sections are defined for exactly two open channels");
    K.validate();
    const auto& k = K.entries;
    const double D = k(0, 0) * k(1, 1) - k(0, 1) * k(1, 0);
    const double F = k(0, 0) + k(1, 1);
    const double denom = (1.0 - D) * (1.0 - D) + F * F;
    Eigen::Matrix2d sigma;
    for (int i = 0; i < 2; ++i) {
        const double ki = channels.wave_number(i, K.energy);
        const double scale = 4.0 * std::numbers::pi / (ki * ki);
        for (int j = 0; j < 2; ++j)
            sigma(i, j) = scale * ((i == j ? D * D : 0.0) + k(i, j) * k(i, j)) / denom;
    }
    return sigma;
}

BWPoleParams BWPoleParams::from_amplitudes(double E1, double a1, double a2, double a,
                                           double u1, double u2)
{
    BWPoleParams p;
    p.E1 = E1;
    p.a1 = a1;
    p.a2 = a2;
    p.a = a;
    p.b1 = u1 * u1;
    p.b2 = u2 * u2;
    p.b = u1 * u2;
    return p;
}

double BWPoleParams::rank_defect() const noexcept
{
    return std::abs(b1 * b2 - b * b);
}

void BWPoleParams::validate(double tol_rank) const
{
    for (double v : {E1, a1, a2, a, b1, b2, b})
        require(std::isfinite(v), ErrorKind::Validation, "non-finite pole parameter");
    require(b1 >= 0.0 && b2 >= 0.0, ErrorKind::Validation, "diagonal residues must be >= 0");
    require(rank_defect() <= tol_rank * std::max(b1 * b2, b * b), ErrorKind::Validation,
            "residue matrix is not rank one");
}

KMatrix bw_k(const BWPoleParams& p, double energy)
{
    require(energy != p.E1, ErrorKind::PoleEvaluation,
            "K-matrix pole model evaluated at its pole " + energy_tag(energy));
    const double inv = 1.0 / (energy - p.E1);
    KMatrix K;
    K.energy = energy;
    K.entries.resize(2, 2);
    K.entries(0, 0) = p.a1 - p.b1 * inv;
    K.entries(1, 1) = p.a2 - p.b2 * inv;
    K.entries(0, 1) = K.entries(1, 0) = p.a - p.b * inv;
    return K;
}

SMatrix bw_s(const BreitWignerS& m, double energy)
{
    const auto n = m.R.rows();
    require(m.R.cols() == n && m.eigenphases.size() == n && m.beta_tilde.size() == n,
            ErrorKind::Validation, "Breit-Wigner model dimensions disagree");
    require(m.Gamma > 0.0, ErrorKind::Validation, "Gamma must be positive");
    require((m.R * m.R.transpose() - RealMatrix::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10,
            ErrorKind::Validation, "R is not orthogonal");
    require(std::abs(m.beta_tilde.squaredNorm() - 1.0) <= 1e-10, ErrorKind::Validation,
            "eigen-amplitudes are not normalized");

    const cplx I(0.0, 1.0);
    ComplexVector phase(n);
    for (Eigen::Index j = 0; j < n; ++j)
        phase(j) = std::exp(I * m.eigenphases(j));
    const ComplexVector w = m.beta_tilde.cast<cplx>().cwiseProduct(phase);

    const cplx pole = m.Gamma / (energy - m.E0 + I * 0.5 * m.Gamma);
    ComplexMatrix inner = -I * pole * (w * w.transpose());
    inner.diagonal() += phase.cwiseProduct(phase);

    const ComplexMatrix Rc = m.R.cast<cplx>();
    SMatrix S;
    S.energy = energy;
    S.entries = Rc.transpose() * inner * Rc;
    return S;
}

Eigen::Matrix2d mixing_rotation(double nu)
{
    const double c = std::cos(nu), s = std::sin(nu);
    Eigen::Matrix2d R;
    R << c, s, -s, c;
    return R;
}

namespace {

struct BackgroundEigen {
    double nu = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;
    bool degenerate = false;
};

BackgroundEigen background_eigen(const BWPoleParams& p)
{
    BackgroundEigen out;
    const double diff = p.a1 - p.a2;
    const double scale = 1.0 + std::abs(p.a1) + std::abs(p.a2) + std::abs(p.a);
    const double split = std::hypot(diff, 2.0 * p.a);
    if (split <= 1e-12 * scale) {
        out.degenerate = true;
        out.nu = 0.0;
    } else if (diff == 0.0) {
        out.nu = std::copysign(std::numbers::pi / 4.0, p.a);
    } else {
        out.nu = 0.5 * std::atan(2.0 * p.a / diff);
    }
    const double c = std::cos(out.nu), s = std::sin(out.nu);
    out.t1 = p.a1 * c * c + 2.0 * p.a * c * s + p.a2 * s * s;
    out.t2 = p.a1 * s * s - 2.0 * p.a * c * s + p.a2 * c * c;
    return out;
}

} // namespace

BreitWignerS decompose(const BWPoleParams& p)
{
    p.validate();
    const BackgroundEigen bg = background_eigen(p);
    const Eigen::Matrix2d R = mixing_rotation(bg.nu);

    // C = u u^T, and R C R^T = (Gamma/2) gamma gamma^T with gamma_j = beta_j / cos(Delta_j)
    const double u2sign = p.b < 0.0 ? -1.0 : 1.0;
    const Eigen::Vector2d u(std::sqrt(p.b1), u2sign * std::sqrt(p.b2));
    const Eigen::Vector2d gamma = R * u;
    const Eigen::Vector2d delta(std::atan(bg.t1), std::atan(bg.t2));
    const Eigen::Vector2d x(gamma(0) * std::cos(delta(0)), gamma(1) * std::cos(delta(1)));
    const double half_gamma = x.squaredNorm();
    require(half_gamma > 0.0, ErrorKind::InconsistentParameters, "vanishing residue");

    BreitWignerS m;
    m.Gamma = 2.0 * half_gamma;
    m.eigenphases = delta;
    m.beta_tilde = x / std::sqrt(half_gamma);
    m.R = R;
    m.E0 = p.E1 + half_gamma * (m.beta_tilde(0) * m.beta_tilde(0) * bg.t1 +
                                m.beta_tilde(1) * m.beta_tilde(1) * bg.t2);
    return m;
}

ResonanceReport resonance_from_pole(const BWPoleParams& p)
{
    p.validate();
    ResonanceReport r;
    r.d = p.a1 * p.a2 - p.a * p.a;
    r.f = p.a1 + p.a2;
    r.g = p.b1 + p.b2;
    r.h = p.a1 * p.b2 + p.a2 * p.b1 - 2.0 * p.a * p.b;
    const double one_d = 1.0 - r.d;
    const double denom = one_d * one_d + r.f * r.f;
    require(denom > 0.0 && std::isfinite(denom), ErrorKind::DegenerateBackground,
            "(1-d)^2 + f^2 vanishes");

    r.E0 = p.E1 - (r.h * one_d - r.f * r.g) / denom;
    const double gamma1 = 2.0 * (r.h * p.a2 + p.b1 - r.d * p.b2) / denom;
    const double gamma2 = 2.0 * (r.h * p.a1 + p.b2 - r.d * p.b1) / denom;
    r.Gamma = 2.0 * (r.f * r.h + r.g * one_d) / denom;
    require(r.Gamma > 0.0, ErrorKind::InconsistentParameters, "non-positive total width");
    require(std::abs(r.Gamma - (gamma1 + gamma2)) <= 1e-10 * std::abs(r.Gamma),
            ErrorKind::InconsistentParameters, "partial widths do not sum to the total width");
    require(gamma1 >= -1e-10 * r.Gamma && gamma2 >= -1e-10 * r.Gamma,
            ErrorKind::InconsistentParameters, "negative partial width");
    r.partial_widths = {gamma1, gamma2};
    r.branching = {gamma1 / r.Gamma, gamma2 / r.Gamma};

    const BackgroundEigen bg = background_eigen(p);
    const BreitWignerS m = decompose(p);
    r.degenerate_background = bg.degenerate;
    r.mixing_angle = bg.nu;
    r.eigenphases = {m.eigenphases(0), m.eigenphases(1)};
    r.beta_tilde = {m.beta_tilde(0), m.beta_tilde(1)};
    r.ill_conditioned_background =
        std::abs(m.eigenphases(0)) > 1.5 || std::abs(m.eigenphases(1)) > 1.5;

    const cplx I(0.0, 1.0);
    for (int j = 0; j < 2; ++j) {
        cplx bj = 0.0;
        for (int l = 0; l < 2; ++l)
            bj += m.R(l, j) * m.beta_tilde(l) * std::exp(I * (m.eigenphases(l) - m.eigenphases(j)));
        r.beta.push_back(bj);
    }
    return r;
}

double partial_width_lower_bound(double nu, double delta1, double delta2)
{
    const double c = std::cos(delta1 - delta2);
    const double s2 = std::sin(2.0 * nu);
    const double c2 = std::cos(2.0 * nu);
    const double radical = std::sqrt(std::min(1.0, c * c * s2 * s2 + c2 * c2));
    return 0.5 * (1.0 - radical);
}

} // namespace hsres
