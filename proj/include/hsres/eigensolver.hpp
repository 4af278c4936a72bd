#pragma once

// Shift-invert Krylov-Schur solver for sparse symmetric pencils A x = lambda M x
// with M positive definite.

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cstdint>

namespace hsres {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct EigenPairs {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // M-orthonormal columns
    Eigen::VectorXd residuals; // |A x - lambda M x| / (|lambda| |M x|)
    int iterations = 0;
};

struct ShiftInvertOptions {
    int krylov_dim = 0;  // 0: chosen from the number of wanted pairs
    int max_restarts = 300;
    double tol = 1e-13;
    std::uint64_t seed = 0x5eed;
};

class ShiftInvertSolver {
public:
    ShiftInvertSolver(const SparseMatrix& A, const SparseMatrix& M, double sigma);

    double shift() const noexcept { return sigma_; }

    /// Number of eigenvalues strictly below the shift (Sylvester inertia of
    /// A - sigma M).
    int count_below() const noexcept { return count_below_; }

    /// The k eigenpairs nearest to the shift. Throws Convergence if the
    /// restart budget is exhausted.
    EigenPairs nearest(int k, const ShiftInvertOptions& options = {}) const;

private:
    SparseMatrix A_;
    SparseMatrix M_;
    double sigma_;
    Eigen::SimplicialLDLT<SparseMatrix> factor_;
    int count_below_ = 0;
};

} // namespace hsres
