#include "modeconv/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "modeconv/errors.hpp"

namespace modeconv::svd {

namespace {

using Complex = std::complex<double>;

/// Orthogonalize the work columns p and q with a unitary plane rotation
/// applied from the right to both W and V. Returns the off-diagonal mass
/// removed (|a_p^H a_q| relative to column norms).
double rotate_pair(Eigen::MatrixXcd& W, Eigen::MatrixXcd& V,
                   Eigen::Index p, Eigen::Index q) {
    const double a = W.col(p).squaredNorm();
    const double b = W.col(q).squaredNorm();
    const Complex c = W.col(p).dot(W.col(q));  // conj(a_p) . a_q
    const double abs_c = std::abs(c);
    if (abs_c == 0.0 || a == 0.0 || b == 0.0) return 0.0;

    const double rel = abs_c / std::sqrt(a * b);
    const Complex phase = c / abs_c;

    // Real Jacobi rotation on the phase-aligned 2x2 Gram matrix
    // [[a, |c|], [|c|, b]].
    const double zeta = (b - a) / (2.0 * abs_c);
    const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
    const double cs = 1.0 / std::sqrt(1.0 + t * t);
    const double sn = cs * t;

    // Right-multiplication by the unitary J =
    //   [ cs              sn            ]
    //   [ -conj(phase) sn  conj(phase) cs ]
    const Complex ph = std::conj(phase);
    Eigen::VectorXcd wp = W.col(p), wq = W.col(q);
    W.col(p) = cs * wp - (ph * sn) * wq;
    W.col(q) = sn * wp + (ph * cs) * wq;
    Eigen::VectorXcd vp = V.col(p), vq = V.col(q);
    V.col(p) = cs * vp - (ph * sn) * vq;
    V.col(q) = sn * vp + (ph * cs) * vq;
    return rel;
}

}  // namespace

SvdResult jacobi_svd(const Eigen::MatrixXcd& A, double tol, std::size_t max_sweeps) {
    if (A.size() == 0) throw modeconv::DomainError("SVD of an empty matrix");
    if (!A.allFinite()) throw modeconv::DomainError("SVD input must be finite");

    const Eigen::Index m = A.rows();
    const Eigen::Index n = A.cols();
    if (m < n)
        throw modeconv::DomainError("jacobi_svd expects rows >= cols; transpose the input");

    Eigen::MatrixXcd W = A;
    Eigen::MatrixXcd V = Eigen::MatrixXcd::Identity(n, n);

    std::size_t sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double worst = 0.0;
        for (Eigen::Index p = 0; p < n - 1; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q)
                worst = std::max(worst, rotate_pair(W, V, p, q));
        if (worst <= tol) break;
    }
    if (sweep == max_sweeps)
        throw modeconv::NumericError("one-sided Jacobi SVD did not converge after " +
                                     std::to_string(max_sweeps) + " sweeps");

    SvdResult res;
    res.sweeps = sweep + 1;
    res.sigma.resize(n);
    res.U.resize(m, n);
    res.V.resize(n, n);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd norms(n);
    for (Eigen::Index k = 0; k < n; ++k) norms[k] = W.col(k).norm();
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return norms[x] > norms[y]; });

    const double sigma_max = norms[order[0]];
    const double null_cut = sigma_max * 1e-14;
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[std::size_t(k)];
        res.sigma[k] = norms[src];
        res.V.col(k) = V.col(src);
        if (norms[src] > null_cut && norms[src] > 0.0) {
            res.U.col(k) = W.col(src) / norms[src];
        } else {
            res.sigma[k] = norms[src];
            res.U.col(k).setZero();  // completed below
        }
    }

    // Complete null-space columns of U to an orthonormal set using
    // canonical basis vectors, deterministically.
    for (Eigen::Index k = 0; k < n; ++k) {
        if (res.U.col(k).norm() > 0.5) continue;
        for (Eigen::Index e = 0; e < m; ++e) {
            Eigen::VectorXcd cand = Eigen::VectorXcd::Zero(m);
            cand[e] = 1.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == k || res.U.col(j).norm() < 0.5) continue;
                cand -= res.U.col(j).dot(cand) * res.U.col(j);
            }
            const double nn = cand.norm();
            if (nn > 1e-6) {
                res.U.col(k) = cand / nn;
                break;
            }
        }
    }

    // Phase convention: largest-magnitude entry of each U column made
    // real-positive; V rotated by the same phase so U sigma V^H is kept.
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index imax = 0;
        res.U.col(k).cwiseAbs().maxCoeff(&imax);
        const Complex pivot = res.U(imax, k);
        if (std::abs(pivot) > 0.0) {
            const Complex ph = std::conj(pivot) / std::abs(pivot);
            res.U.col(k) *= ph;
            res.V.col(k) *= ph;
        }
    }
    return res;
}

}  // namespace modeconv::svd
