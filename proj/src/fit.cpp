#include "hsres/fit.hpp"

#include "hsres/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hsres {

const char* to_string(FitModel model) noexcept
{
    return model == FitModel::General ? "general" : "diagonal";
}

FitModel parse_fit_model(const std::string& name)
{
    if (name == "general")
        return FitModel::General;
    if (name == "diagonal")
        return FitModel::Diagonal;
    throw Error(ErrorKind::Validation, "unknown fit model '" + name + "' (general or diagonal)");
}

void FitProblem::validate() const
{
    const std::size_t need = model == FitModel::General ? 7 : 6;
    std::ostringstream os;
    os << "fit needs at least " << need << " samples, got " << samples.size();
    require(samples.size() >= need, ErrorKind::Validation, os.str());
    require(weights.empty() || weights.size() == samples.size(), ErrorKind::Validation,
            "one weight per sample required");
    for (double w : weights)
        require(std::isfinite(w) && w >= 0.0, ErrorKind::Validation, "weights must be finite and >= 0");
    double lo = samples.front().K.energy, hi = lo;
    for (const auto& s : samples) {
        require(s.K.entries.rows() == 2 && s.K.entries.cols() == 2, ErrorKind::UnsupportedShape,
                "pole fit needs 2x2 K-matrices");
        require(s.K.entries.allFinite(), ErrorKind::Validation, "non-finite K sample");
        lo = std::min(lo, s.K.energy);
        hi = std::max(hi, s.K.energy);
    }
    require(hi > lo, ErrorKind::Validation, "sample energies are all equal");
}

namespace {

struct Scaling {
    double center = 0.0;
    double scale = 1.0;
};

Scaling energy_scaling(const std::vector<KSample>& samples)
{
    double lo = samples.front().K.energy, hi = lo, sum = 0.0;
    for (const auto& s : samples) {
        lo = std::min(lo, s.K.energy);
        hi = std::max(hi, s.K.energy);
        sum += s.K.energy;
    }
    Scaling sc;
    sc.center = sum / static_cast<double>(samples.size());
    sc.scale = hi > lo ? hi - lo : 1.0;
    return sc;
}

// theta = (x1, a1, a2, a, v1, v2) in scaled energy units, v = u / sqrt(scale)
using Theta = Eigen::Matrix<double, 6, 1>;

Theta to_theta(const BWPoleParams& p, const Scaling& sc)
{
    const double u1 = std::sqrt(std::max(p.b1, 0.0));
    double u2 = std::sqrt(std::max(p.b2, 0.0));
    if (p.b < 0.0)
        u2 = -u2;
    const double r = std::sqrt(sc.scale);
    Theta t;
    t << (p.E1 - sc.center) / sc.scale, p.a1, p.a2, p.a, u1 / r, u2 / r;
    return t;
}

BWPoleParams from_theta(const Theta& t, const Scaling& sc)
{
    const double r = std::sqrt(sc.scale);
    return BWPoleParams::from_amplitudes(sc.center + sc.scale * t(0), t(1), t(2), t(3), t(4) * r, t(5) * r);
}

class Objective {
public:
    Objective(const FitProblem& problem, const Scaling& sc) : problem_(problem)
    {
        const std::size_t n = problem.samples.size();
        x_.resize(static_cast<Eigen::Index>(n));
        sw_.resize(static_cast<Eigen::Index>(n));
        double wsum = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            x_(static_cast<Eigen::Index>(s)) = (problem.samples[s].K.energy - sc.center) / sc.scale;
            const double w = problem.weights.empty() ? 1.0 : problem.weights[s];
            sw_(static_cast<Eigen::Index>(s)) = std::sqrt(w);
            wsum += w;
        }
        norm_ = 4.0 * wsum;
    }

    Eigen::Index size() const { return 3 * x_.size(); }

    Eigen::VectorXd residual(const Theta& t) const
    {
        Eigen::VectorXd r(size());
        for (Eigen::Index s = 0; s < x_.size(); ++s) {
            const RealMatrix& K = problem_.samples[static_cast<std::size_t>(s)].K.entries;
            const double d = x_(s) - t(0);
            const double m11 = t(1) - t(4) * t(4) / d;
            const double m22 = t(2) - t(5) * t(5) / d;
            const double m12 = t(3) - t(4) * t(5) / d;
            r(3 * s) = sw_(s) * (m11 - K(0, 0));
            r(3 * s + 1) = std::sqrt(2.0) * sw_(s) * (m12 - 0.5 * (K(0, 1) + K(1, 0)));
            r(3 * s + 2) = sw_(s) * (m22 - K(1, 1));
        }
        return r;
    }

    Eigen::MatrixXd jacobian(const Theta& t) const
    {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(size(), 6);
        const double r2 = std::sqrt(2.0);
        for (Eigen::Index s = 0; s < x_.size(); ++s) {
            const double d = x_(s) - t(0);
            const double w = sw_(s);
            const double v1 = t(4), v2 = t(5);
            // d/dx1 of -v v^T / (x - x1) is -v v^T / (x - x1)^2
            J(3 * s, 0) = -w * v1 * v1 / (d * d);
            J(3 * s + 1, 0) = -r2 * w * v1 * v2 / (d * d);
            J(3 * s + 2, 0) = -w * v2 * v2 / (d * d);
            J(3 * s, 1) = w;
            J(3 * s + 2, 2) = w;
            J(3 * s + 1, 3) = r2 * w;
            J(3 * s, 4) = -w * 2.0 * v1 / d;
            J(3 * s + 1, 4) = -r2 * w * v2 / d;
            J(3 * s + 1, 5) = -r2 * w * v1 / d;
            J(3 * s + 2, 5) = -w * 2.0 * v2 / d;
        }
        return J;
    }

    double rms(const Eigen::VectorXd& r) const { return std::sqrt(r.squaredNorm() / norm_); }

private:
    const FitProblem& problem_;
    Eigen::VectorXd x_;
    Eigen::VectorXd sw_;
    double norm_ = 1.0;
};

struct Minimum {
    Theta theta;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
};

Minimum levenberg_marquardt(const Objective& f, Theta t, bool fix_a, const FitOptions& options)
{
    if (fix_a)
        t(3) = 0.0;
    std::vector<int> free = fix_a ? std::vector<int>{0, 1, 2, 4, 5} : std::vector<int>{0, 1, 2, 3, 4, 5};
    const int np = static_cast<int>(free.size());

    Eigen::VectorXd r = f.residual(t);
    double cost = r.allFinite() ? r.squaredNorm() : std::numeric_limits<double>::infinity();
    double lambda = 1e-3;
    Minimum out;
    for (int it = 0; it < options.max_iterations; ++it) {
        out.iterations = it + 1;
        const Eigen::MatrixXd Jfull = f.jacobian(t);
        Eigen::MatrixXd J(Jfull.rows(), np);
        for (int k = 0; k < np; ++k)
            J.col(k) = Jfull.col(free[static_cast<std::size_t>(k)]);
        const Eigen::MatrixXd H = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        if (g.cwiseAbs().maxCoeff() <= 1e-300 || cost == 0.0) {
            out.converged = true;
            break;
        }

        bool accepted = false;
        Theta next = t;
        double next_cost = cost;
        while (lambda < 1e20) {
            Eigen::MatrixXd A = H;
            for (int k = 0; k < np; ++k)
                A(k, k) += lambda * std::max(H(k, k), 1e-30);
            const Eigen::VectorXd delta = A.ldlt().solve(-g);
            next = t;
            for (int k = 0; k < np; ++k)
                next(free[static_cast<std::size_t>(k)]) += delta(k);
            if (next(4) < 0.0) {
                next(4) = -next(4);
                next(5) = -next(5);
            }
            const Eigen::VectorXd rn = f.residual(next);
            next_cost = rn.allFinite() ? rn.squaredNorm() : std::numeric_limits<double>::infinity();
            if (next_cost < cost) {
                accepted = true;
                r = rn;
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) {
            // no descent direction left at working precision
            out.converged = true;
            break;
        }
        const double step = (next - t).norm();
        const double change = cost - next_cost;
        t = next;
        cost = next_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        if (step <= options.tolerance * (t.norm() + options.tolerance) && change <= options.tolerance * cost) {
            out.converged = true;
            break;
        }
        if (cost <= 1e-30 * static_cast<double>(r.size())) {
            out.converged = true;
            break;
        }
    }
    out.theta = t;
    out.cost = cost;
    return out;
}

} // namespace

BWPoleParams initial_guess(const std::vector<KSample>& samples)
{
    require(samples.size() >= 3, ErrorKind::Validation, "initial guess needs at least 3 samples");
    std::vector<const KSample*> sorted;
    for (const auto& s : samples) {
        require(s.K.entries.rows() == 2 && s.K.entries.cols() == 2, ErrorKind::UnsupportedShape,
                "pole fit needs 2x2 K-matrices");
        sorted.push_back(&s);
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const KSample* a, const KSample* b) { return a->K.energy < b->K.energy; });
    bool sign_change = false;
    for (std::size_t k = 0; k + 1 < sorted.size() && !sign_change; ++k) {
        const RealMatrix& A = sorted[k]->K.entries;
        const RealMatrix& B = sorted[k + 1]->K.entries;
        for (int i = 0; i < 2; ++i)
            for (int j = i; j < 2; ++j)
                if (A(i, j) * B(i, j) < 0.0)
                    sign_change = true;
    }
    require(sign_change, ErrorKind::Bracket, "no K entry changes sign: no pole passage in the samples");

    // the residue trace is positive, so tr K drops from +inf to -inf across E1
    std::size_t bracket = 0;
    double drop = 0.0;
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        const double d = sorted[k]->K.entries.trace() - sorted[k + 1]->K.entries.trace();
        if (d > drop) {
            drop = d;
            bracket = k;
        }
    }
    require(drop > 0.0, ErrorKind::Bracket, "tr K never decreases: no pole passage in the samples");

    const Scaling sc = energy_scaling(samples);
    const std::size_t n = samples.size();
    std::vector<double> x(n);
    for (std::size_t s = 0; s < n; ++s)
        x[s] = (samples[s].K.energy - sc.center) / sc.scale;
    const int entry[3][2] = {{0, 0}, {0, 1}, {1, 1}};
    auto value = [&](std::size_t s, int e) {
        const RealMatrix& K = samples[s].K.entries;
        return e == 1 ? 0.5 * (K(0, 1) + K(1, 0)) : K(entry[e][0], entry[e][1]);
    };
    // for fixed x1 every entry is linear in (A, B): K = A - B / (x - x1)
    auto project = [&](double x1, Eigen::Vector3d& A, Eigen::Vector3d& B) {
        double cost = 0.0;
        for (int e = 0; e < 3; ++e) {
            Eigen::Matrix2d N = Eigen::Matrix2d::Zero();
            Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
            for (std::size_t s = 0; s < n; ++s) {
                const Eigen::Vector2d row(1.0, -1.0 / (x[s] - x1));
                N += row * row.transpose();
                rhs += row * value(s, e);
            }
            const Eigen::Vector2d c = N.ldlt().solve(rhs);
            A(e) = c(0);
            B(e) = c(1);
            for (std::size_t s = 0; s < n; ++s) {
                const double r = c(0) - c(1) / (x[s] - x1) - value(s, e);
                cost += (e == 1 ? 2.0 : 1.0) * r * r;
            }
        }
        return cost;
    };

    const double lo = (sorted[bracket]->K.energy - sc.center) / sc.scale;
    const double hi = (sorted[bracket + 1]->K.energy - sc.center) / sc.scale;
    // golden-section search over the open bracket
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 0.0, b = 1.0;
    Eigen::Vector3d A, B;
    auto at = [&](double t) { return project(lo + t * (hi - lo), A, B); };
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = at(c), fd = at(d);
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = at(d);
        }
    }
    const double x1 = lo + 0.5 * (a + b) * (hi - lo);
    project(x1, A, B);

    Theta t;
    t << x1, A(0), A(2), A(1), std::sqrt(std::max(B(0), 0.0)), std::sqrt(std::max(B(2), 0.0));
    if (B(1) < 0.0)
        t(5) = -t(5);
    return from_theta(t, sc);
}

double fit_residual(const FitProblem& problem, const BWPoleParams& params)
{
    const Scaling sc = energy_scaling(problem.samples);
    const Objective f(problem, sc);
    return f.rms(f.residual(to_theta(params, sc)));
}

namespace {

FitResult finish(const FitProblem& problem, const Objective& f, const Scaling& sc, const Minimum& m)
{
    FitResult res;
    res.params = from_theta(m.theta, sc);
    if (problem.model == FitModel::Diagonal)
        res.params.a = 0.0;
    res.residual = f.rms(f.residual(m.theta));
    res.rank_defect = res.params.rank_defect();
    res.model = problem.model;
    res.iterations = m.iterations;
    res.converged = m.converged;
    res.weighting = problem.weights.empty() ? "uniform" : "per-sample";
    return res;
}

} // namespace

FitResult fit(const FitProblem& problem, const FitOptions& options)
{
    problem.validate();
    const Scaling sc = energy_scaling(problem.samples);
    const Objective f(problem, sc);
    const bool diagonal = problem.model == FitModel::Diagonal;

    const Theta start = to_theta(initial_guess(problem.samples), sc);
    Minimum best = levenberg_marquardt(f, start, diagonal, options);
    if (!diagonal) {
        // nested start: the background-free optimum is a point of the general model
        const Minimum d = levenberg_marquardt(f, start, true, options);
        const Minimum g = levenberg_marquardt(f, d.theta, false, options);
        if (g.cost < best.cost)
            best = g;
    }

    FitResult res = finish(problem, f, sc, best);
    if (!best.converged) {
        std::ostringstream os;
        os << "pole fit did not converge in " << options.max_iterations << " iterations (rms "
           << res.residual << ")";
        throw FitFailure(os.str(), res);
    }
    try {
        res.report = resonance_from_pole(res.params);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InconsistentParameters)
            throw Error(ErrorKind::InconsistentParameters, std::string("fitted pole is unphysical: ") + e.what());
        throw;
    }
    return res;
}

ModelComparison compare_models(const std::vector<KSample>& samples, const std::vector<double>& weights,
                               const FitOptions& options)
{
    ModelComparison out;
    FitProblem p{samples, weights, FitModel::General};
    out.general = fit(p, options);
    p.model = FitModel::Diagonal;
    out.diagonal = fit(p, options);
    out.residual_ratio = out.diagonal.residual == out.general.residual
                             ? 1.0
                             : out.diagonal.residual / std::max(out.general.residual, 1e-300);
    out.branching_shift = out.diagonal.report.branching[1] - out.general.report.branching[1];
    return out;
}

} // namespace hsres
