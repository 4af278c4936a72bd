#include "hsres/eigensolver.hpp"

#include "hsres/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace hsres {

ShiftInvertSolver::ShiftInvertSolver(const SparseMatrix& A, const SparseMatrix& M, double sigma)
    : A_(A), M_(M), sigma_(sigma)
{
    require(A.rows() == A.cols() && M.rows() == M.cols() && A.rows() == M.rows(),
            ErrorKind::Validation, "pencil dimensions disagree");
    SparseMatrix shifted = A - sigma * M;
    factor_.compute(shifted);
    std::ostringstream os;
    os << "factorization of A - sigma M failed at sigma=" << sigma;
    require(factor_.info() == Eigen::Success, ErrorKind::SingularMatrix, os.str());
    const auto& D = factor_.vectorD();
    for (Eigen::Index i = 0; i < D.size(); ++i) {
        require(D(i) != 0.0 && std::isfinite(D(i)), ErrorKind::SingularMatrix, os.str());
        if (D(i) < 0.0)
            ++count_below_;
    }
}

EigenPairs ShiftInvertSolver::nearest(int k, const ShiftInvertOptions& options) const
{
    const Eigen::Index n = A_.rows();
    require(k >= 1 && k <= n, ErrorKind::Domain, "requested eigenpair count out of range");
    int m = options.krylov_dim > 0 ? options.krylov_dim : std::max(2 * k + 20, 40);
    m = static_cast<int>(std::min<Eigen::Index>(m, n));
    if (m <= k)
        m = static_cast<int>(std::min<Eigen::Index>(k + 1, n));

    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(n, m + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;
    auto random_vector = [&] {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v(i) = normal(rng);
        return v;
    };
    auto m_norm = [&](const Eigen::VectorXd& v) { return std::sqrt(v.dot(M_ * v)); };

    {
        Eigen::VectorXd v0 = random_vector();
        V.col(0) = v0 / m_norm(v0);
    }

    int kept = 0;
    Eigen::VectorXd theta;
    Eigen::MatrixXd Y;
    std::vector<int> order;
    int restarts = 0;
    // last Krylov size actually built (m unless the space is exhausted)
    int dim = m;

    for (;; ++restarts) {
        dim = m;
        for (int j = kept; j < m; ++j) {
            Eigen::VectorXd w = factor_.solve(M_ * V.col(j));
            for (int pass = 0; pass < 2; ++pass) {
                const Eigen::VectorXd Mw = M_ * w;
                const Eigen::VectorXd h = V.leftCols(j + 1).transpose() * Mw;
                w -= V.leftCols(j + 1) * h;
                H.col(j).head(j + 1) += h;
            }
            double beta = m_norm(w);
            const double scale = H.col(j).head(j + 1).norm();
            if (beta <= 1e-12 * std::max(scale, 1e-300)) {
                // invariant subspace: continue with a fresh orthogonal direction
                H(j + 1, j) = 0.0;
                if (j + 1 >= n) {
                    dim = j + 1;
                    break;
                }
                Eigen::VectorXd r = random_vector();
                for (int pass = 0; pass < 2; ++pass)
                    r -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * (M_ * r));
                V.col(j + 1) = r / m_norm(r);
                continue;
            }
            H(j + 1, j) = beta;
            V.col(j + 1) = w / beta;
        }

        const Eigen::MatrixXd T = 0.5 * (H.topLeftCorner(dim, dim) + H.topLeftCorner(dim, dim).transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        theta = es.eigenvalues();
        Y = es.eigenvectors();
        order.resize(static_cast<std::size_t>(dim));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return std::abs(theta(a)) > std::abs(theta(b)); });

        const Eigen::RowVectorXd brow = H.row(dim).head(dim);
        bool converged = true;
        for (int i = 0; i < k; ++i) {
            const int c = order[static_cast<std::size_t>(i)];
            const double res = std::abs(brow.dot(Y.col(c)));
            if (res > options.tol * std::abs(theta(c))) {
                converged = false;
                break;
            }
        }
        if (converged || dim < m)
            break;
        if (restarts >= options.max_restarts) {
            std::ostringstream os;
            os << "shift-invert solver did not converge after " << restarts
               << " restarts (sigma=" << sigma_ << ")";
            throw Error(ErrorKind::Convergence, os.str());
        }

        // Krylov-Schur restart: keep the best Ritz vectors plus the residual direction
        const int l = std::min(k + (m - k) / 2, m - 1);
        Eigen::MatrixXd Yl(dim, l);
        for (int i = 0; i < l; ++i)
            Yl.col(i) = Y.col(order[static_cast<std::size_t>(i)]);
        Eigen::MatrixXd Vnew = V.leftCols(dim) * Yl;
        const Eigen::VectorXd next = V.col(dim);
        const Eigen::RowVectorXd bnew = brow * Yl;
        V.setZero();
        H.setZero();
        V.leftCols(l) = Vnew;
        V.col(l) = next;
        for (int i = 0; i < l; ++i) {
            H(i, i) = theta(order[static_cast<std::size_t>(i)]);
            H(l, i) = bnew(i);
        }
        kept = l;
    }

    EigenPairs out;
    out.iterations = restarts;
    std::vector<std::pair<double, Eigen::VectorXd>> pairs;
    for (int i = 0; i < k; ++i) {
        const int c = order[static_cast<std::size_t>(i)];
        Eigen::VectorXd x = V.leftCols(dim) * Y.col(c);
        x /= m_norm(x);
        // Rayleigh quotient on the original pencil
        const double lambda = x.dot(A_ * x);
        pairs.emplace_back(lambda, std::move(x));
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    out.values.resize(k);
    out.vectors.resize(n, k);
    out.residuals.resize(k);
    for (int i = 0; i < k; ++i) {
        out.values(i) = pairs[static_cast<std::size_t>(i)].first;
        out.vectors.col(i) = pairs[static_cast<std::size_t>(i)].second;
        const Eigen::VectorXd Mx = M_ * out.vectors.col(i);
        const Eigen::VectorXd r = A_ * out.vectors.col(i) - out.values(i) * Mx;
        out.residuals(i) = r.norm() / std::max(std::abs(out.values(i)) * Mx.norm(), 1e-300);
    }
    return out;
}

} // namespace hsres
