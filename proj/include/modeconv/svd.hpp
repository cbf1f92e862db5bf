#pragma once

#include <complex>

#include <Eigen/Dense>

namespace modeconv::svd {

struct SvdResult {
    Eigen::MatrixXcd U;         // m x n, orthonormal columns
    Eigen::VectorXd sigma;      // length n, descending, non-negative
    Eigen::MatrixXcd V;         // n x n, unitary
    std::size_t sweeps = 0;
};

/// Complex SVD by one-sided Jacobi rotations: A = U diag(sigma) V^H.
/// Singular values descending; the largest-magnitude entry of each U
/// column is made real-positive. Columns belonging to (near-)zero
/// singular values are completed to an orthonormal basis.
/// Throws NumericError with the sweep count on non-convergence.
SvdResult jacobi_svd(const Eigen::MatrixXcd& A, double tol = 1e-14,
                     std::size_t max_sweeps = 64);

}  // namespace modeconv::svd
