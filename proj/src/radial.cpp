#include "hsres/radial.hpp"

#include "hsres/eigensolver.hpp"
#include "hsres/error.hpp"
#include "hsres/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

namespace hsres {

void AnalyticCouplings::evaluate(double rho, RealMatrix& W, RealMatrix& Q) const
{
    W.setZero(n_, n_);
    Q.setZero(n_, n_);
    potential_(rho, W);
}

namespace {

double lowest_eigenvalue(const RealMatrix& W, const RealMatrix& Q)
{
    const RealMatrix A = W - Q.transpose() * Q;
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

struct ElementBasis {
    LagrangeBasis basis;
    QuadratureRule rule;
    // values and reference derivatives at the quadrature points
    std::vector<std::vector<double>> phi;
    std::vector<std::vector<double>> dphi;

    ElementBasis(int order, int extra)
        : basis(gauss_lobatto_nodes(order)), rule(gauss_legendre(order + extra))
    {
        const std::size_t nq = rule.nodes.size();
        phi.assign(nq, std::vector<double>(static_cast<std::size_t>(order + 1)));
        dphi = phi;
        for (std::size_t q = 0; q < nq; ++q)
            basis.evaluate(rule.nodes[q], phi[q].data(), dphi[q].data());
    }
};

} // namespace

RadialProblem::RadialProblem(std::shared_ptr<const RadialCouplings> couplings, ChannelSet channels,
                             double rho_start, double rho_match, RadialMeshOptions options)
    : couplings_(std::move(couplings)), channel_set_(std::move(channels)), n_(0),
      rho_start_(rho_start), rho_match_(rho_match), options_(options)
{
    require(couplings_ != nullptr, ErrorKind::Validation, "radial problem without couplings");
    n_ = couplings_->channels();
    require(n_ >= 1, ErrorKind::Validation, "radial problem needs at least one channel");
    require(n_ >= channel_set_.n_open(), ErrorKind::Validation,
            "retained channel count smaller than the number of open channels");
    require(rho_start >= 0.0 && rho_match > rho_start, ErrorKind::Validation,
            "need 0 <= rho_start < rho_match");
    require(options_.order >= 1 && options_.max_element > 0.0 && options_.min_element > 0.0 &&
                options_.min_element <= options_.max_element && options_.elements_per_wavelength > 0.0,
            ErrorKind::Validation, "invalid radial mesh options");

    RealMatrix W, Q;
    auto local_bound = [&](double x) {
        couplings_->evaluate(std::max(x, 1e-12), W, Q);
        return lowest_eigenvalue(W, Q);
    };
    auto step_at = [&](double x) {
        double h = options_.max_element;
        if (options_.relative_element > 0.0)
            h = std::min(h, options_.relative_element * x);
        const double k2 = options_.energy_max - local_bound(x);
        if (k2 > 0.0)
            h = std::min(h, 2.0 * std::numbers::pi / std::sqrt(k2) / options_.elements_per_wavelength);
        return std::max(h, options_.min_element);
    };

    mesh_.push_back(rho_start_);
    double x = rho_start_;
    while (x < rho_match_) {
        double h = step_at(x);
        // the potential may deepen inside the element
        h = std::min(h, step_at(std::min(x + 0.5 * h, rho_match_)));
        h = std::min(h, step_at(std::min(x + h, rho_match_)));
        if (x + 1.3 * h >= rho_match_)
            h = rho_match_ - x;
        x = (h == rho_match_ - x) ? rho_match_ : x + h;
        mesh_.push_back(x);
    }

    elements_.reserve(mesh_.size() - 1);
    for (std::size_t e = 0; e + 1 < mesh_.size(); ++e)
        elements_.push_back(element(mesh_[e], mesh_[e + 1]));
}

RadialProblem::ElementMatrices RadialProblem::element(double left, double right) const
{
    require(right > left, ErrorKind::Domain, "empty radial element");
    const int p = options_.order;
    const int n = n_;
    // cached per thread: the basis tables depend only on the options
    thread_local int cached_order = -1, cached_extra = -1;
    thread_local std::unique_ptr<ElementBasis> eb;
    if (!eb || cached_order != p || cached_extra != options_.extra_quadrature) {
        eb = std::make_unique<ElementBasis>(p, options_.extra_quadrature);
        cached_order = p;
        cached_extra = options_.extra_quadrature;
    }

    ElementMatrices out;
    out.left = left;
    out.right = right;
    const int nd = (p + 1) * n;
    out.stiffness.setZero(nd, nd);
    out.mass.setZero(p + 1, p + 1);

    const double h = right - left;
    RealMatrix W, Q;
    for (std::size_t q = 0; q < eb->rule.nodes.size(); ++q) {
        const double x = left + 0.5 * (eb->rule.nodes[q] + 1.0) * h;
        const double w = eb->rule.weights[q] * 0.5 * h;
        couplings_->evaluate(x, W, Q);
        const auto& f = eb->phi[q];
        const auto& df = eb->dphi[q];
        for (int a = 0; a <= p; ++a) {
            const double fa = f[static_cast<std::size_t>(a)];
            const double da = df[static_cast<std::size_t>(a)] * 2.0 / h;
            for (int b = 0; b <= p; ++b) {
                const double fb = f[static_cast<std::size_t>(b)];
                const double db = df[static_cast<std::size_t>(b)] * 2.0 / h;
                out.mass(a, b) += w * fa * fb;
                auto block = out.stiffness.block(a * n, b * n, n, n);
                block.diagonal().array() += w * da * db;
                block.noalias() += (w * fa * fb) * W;
                block.noalias() += (w * (fa * db - da * fb)) * Q;
            }
        }
    }
    return out;
}

RealMatrix RadialProblem::log_derivative(double energy, std::optional<double> rho_end) const
{
    const double end = rho_end.value_or(rho_match_);
    require(end > rho_start_ && end <= rho_match_ * (1.0 + 1e-14), ErrorKind::Domain,
            "log-derivative requested outside the radial mesh");
    const int p = options_.order;
    const int n = n_;
    const int nd = (p + 1) * n;

    RealMatrix S;
    bool first = true;
    auto absorb = [&](const ElementMatrices& el) {
        RealMatrix L = el.stiffness;
        for (int a = 0; a <= p; ++a)
            for (int b = 0; b <= p; ++b)
                L.block(a * n, b * n, n, n).diagonal().array() -= energy * el.mass(a, b);
        const int lo = first ? n : 0;
        if (!first)
            L.topLeftCorner(n, n) += S;
        const int m = nd - n - lo;
        if (m == 0) {
            S = L.bottomRightCorner(n, n);
        } else {
            const RealMatrix X = L.block(lo, lo, m, m);
            const RealMatrix B = L.block(lo, nd - n, m, n);
            Eigen::PartialPivLU<RealMatrix> lu(X);
            S = L.bottomRightCorner(n, n) - B.transpose() * lu.solve(B);
        }
        S = 0.5 * (S + S.transpose()).eval();
        first = false;
    };

    const double tol = 1e-12 * std::max(1.0, end);
    for (const auto& el : elements_) {
        if (el.right < end - tol) {
            absorb(el);
        } else if (el.right <= end + tol) {
            absorb(el);
            break;
        } else {
            absorb(element(el.left, end));
            break;
        }
    }
    return S;
}

double RadialProblem::spectral_lower_bound() const
{
    RealMatrix W, Q;
    double bound = std::numeric_limits<double>::infinity();
    const QuadratureRule rule = gauss_legendre(options_.order + options_.extra_quadrature);
    for (const auto& el : elements_) {
        for (double t : rule.nodes) {
            const double x = el.left + 0.5 * (t + 1.0) * (el.right - el.left);
            couplings_->evaluate(x, W, Q);
            bound = std::min(bound, lowest_eigenvalue(W, Q));
        }
    }
    return bound;
}

KSample extract_k(const RadialProblem& problem, double energy)
{
    const ChannelSet& cs = problem.channel_set();
    const int n = problem.channels();
    int no = 0;
    for (int j = 0; j < cs.n_open(); ++j) {
        const double d = energy - cs.thresholds()[static_cast<std::size_t>(j)];
        if (std::abs(d) <= 1e-12) {
            std::ostringstream os;
            os << "energy " << energy << " coincides with threshold " << j + 1;
            throw Error(ErrorKind::Domain, os.str());
        }
        if (d > 0.0)
            ++no;
    }
    if (no == 0) {
        std::ostringstream os;
        os << "all channels closed at E=" << energy;
        throw Error(ErrorKind::NoOpenChannel, os.str());
    }

    const double rs = problem.rho_match();
    RealMatrix W, Q;
    problem.couplings().evaluate(rs, W, Q);
    // f' = (Y + Q) f at the matching radius
    const RealMatrix Y = problem.log_derivative(energy) + Q;

    const int nc = n - no;
    RealMatrix Yeff = Y.topLeftCorner(no, no);
    if (nc > 0) {
        RealMatrix D = Y.bottomRightCorner(nc, nc);
        for (int j = 0; j < nc; ++j) {
            const int c = no + j;
            double kappa2 = 0.0;
            if (c < cs.n_open())
                kappa2 = cs.thresholds()[static_cast<std::size_t>(c)] - energy;
            else
                kappa2 = W(c, c) - energy;
            if (kappa2 <= 0.0) {
                std::ostringstream os;
                os << "channel " << c + 1 << " is open at E=" << energy
                   << " but has no asymptotic threshold";
                throw Error(ErrorKind::ClosedChannel, os.str());
            }
            // decaying solution: f' = -kappa f
            D(j, j) += std::sqrt(kappa2);
        }
        Eigen::FullPivLU<RealMatrix> lu(D);
        require(lu.isInvertible(), ErrorKind::SingularMatrix, "closed-channel block is singular");
        Yeff -= Y.block(0, no, no, nc) * lu.solve(Y.block(no, 0, nc, no));
    }

    const double phase_shift = 0.5 * std::numbers::pi * cs.angular_momentum();
    RealMatrix Jm = RealMatrix::Zero(no, no), Jd = Jm, Nm = Jm, Nd = Jm;
    for (int j = 0; j < no; ++j) {
        const double q = cs.momentum(j, energy);
        const double th = q * rs - phase_shift;
        const double s = 1.0 / std::sqrt(q);
        Jm(j, j) = s * std::sin(th);
        Jd(j, j) = s * q * std::cos(th);
        Nm(j, j) = s * std::cos(th);
        Nd(j, j) = -s * q * std::sin(th);
    }
    // F = J + N K with F' = Yeff F
    const RealMatrix A = Yeff * Nm - Nd;
    Eigen::FullPivLU<RealMatrix> lu(A);
    require(lu.isInvertible(), ErrorKind::SingularMatrix, "K-matrix matching system is singular");
    const RealMatrix K = lu.solve(Jd - Yeff * Jm);

    double defect = 0.0;
    for (int i = 0; i < no; ++i)
        for (int j = i + 1; j < no; ++j)
            defect = std::max(defect, std::abs(K(i, j) - K(j, i)) /
                                          std::max(1.0, std::abs(0.5 * (K(i, j) + K(j, i)))));
    if (defect > 1e-4) {
        std::ostringstream os;
        os << "K asymmetry " << defect << " at E=" << energy;
        throw Error(ErrorKind::MatchingQuality, os.str());
    }

    KSample out;
    out.K.energy = energy;
    out.K.entries = 0.5 * (K + K.transpose());
    out.asymmetry_defect = defect;
    return out;
}

BoxLevels stabilization_eigenvalues(const RadialProblem& problem, double alpha, int n_levels,
                                    std::optional<double> target, bool keep_vectors)
{
    require(n_levels >= 1, ErrorKind::Domain, "need at least one level");
    {
        std::ostringstream os;
        os << "box size alpha=" << alpha << " outside (" << problem.rho_start() << ", "
           << problem.rho_match() << "]";
        require(alpha > problem.rho_start() && alpha <= problem.rho_match() * (1.0 + 1e-14),
                ErrorKind::Domain, os.str());
    }

    // whole elements up to a node near alpha, then one adjusted element ending at alpha
    const auto& els = problem.elements();
    std::vector<const RadialProblem::ElementMatrices*> used;
    RadialProblem::ElementMatrices last;
    for (std::size_t e = 0; e < els.size(); ++e) {
        const auto& el = els[e];
        const double h = el.right - el.left;
        if (std::abs(el.right - alpha) <= 1e-12 * std::max(1.0, alpha)) {
            used.push_back(&el);
            break;
        }
        if (el.right < alpha - 0.5 * h) {
            used.push_back(&el);
            continue;
        }
        last = problem.element(el.left, alpha);
        used.push_back(&last);
        break;
    }

    const int p = problem.options().order;
    const int n = problem.channels();
    const int ne = static_cast<int>(used.size());
    const int interior_nodes = ne * p - 1;
    const int ndof = interior_nodes * n;
    require(ndof >= n_levels, ErrorKind::Domain, "box too small for the requested level count");

    std::vector<Eigen::Triplet<double>> ta, tm;
    ta.reserve(static_cast<std::size_t>(ne) * (p + 1) * (p + 1) * n * n);
    tm.reserve(static_cast<std::size_t>(ne) * (p + 1) * (p + 1) * n);
    for (int e = 0; e < ne; ++e) {
        const auto& el = *used[static_cast<std::size_t>(e)];
        for (int a = 0; a <= p; ++a) {
            const int ga = e * p + a - 1;
            if (ga < 0 || ga >= interior_nodes)
                continue;
            for (int b = 0; b <= p; ++b) {
                const int gb = e * p + b - 1;
                if (gb < 0 || gb >= interior_nodes)
                    continue;
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < n; ++j) {
                        const double v = el.stiffness(a * n + i, b * n + j);
                        if (v != 0.0)
                            ta.emplace_back(ga * n + i, gb * n + j, v);
                    }
                    tm.emplace_back(ga * n + i, gb * n + i, el.mass(a, b));
                }
            }
        }
    }
    SparseMatrix A(ndof, ndof), M(ndof, ndof);
    A.setFromTriplets(ta.begin(), ta.end());
    M.setFromTriplets(tm.begin(), tm.end());
    SparseMatrix At = A.transpose();
    A = 0.5 * (A + At);

    double sigma = 0.0;
    if (target) {
        sigma = *target;
    } else {
        const double lb = problem.spectral_lower_bound();
        sigma = lb - 1e-3 * std::max(1.0, std::abs(lb));
    }

    EigenPairs pairs;
    int below = 0;
    try {
        ShiftInvertSolver solver(A, M, sigma);
        if (!target)
            require(solver.count_below() == 0, ErrorKind::Convergence,
                    "spectral lower bound is not below the box spectrum");
        pairs = solver.nearest(n_levels);
        below = solver.count_below();
    } catch (const Error& err) {
        std::ostringstream os;
        os << err.what() << " (box alpha=" << alpha << ")";
        throw Error(err.kind() == ErrorKind::SingularMatrix ? ErrorKind::Convergence : err.kind(), os.str());
    }

    BoxLevels out;
    out.alpha = alpha;
    out.values.assign(pairs.values.data(), pairs.values.data() + pairs.values.size());
    int n_under = 0;
    for (double v : out.values)
        if (v < sigma)
            ++n_under;
    out.first_index = below - n_under;
    if (keep_vectors)
        out.vectors = pairs.vectors;
    return out;
}

} // namespace hsres
