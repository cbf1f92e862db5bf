#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "modeconv/core.hpp"
#include "modeconv/signal.hpp"
#include "modeconv/structure.hpp"

namespace modeconv::filters {

/// Exact multiply-add counters, reset per measurement.
struct OpCounter {
    std::uint64_t multiply_adds = 0;
    void reset() { multiply_adds = 0; }
};

/// How S_ij and H are combined into S_yy.
enum class PsdWeighting {
    MatrixTranspose,   // S_yy = S_ij * H^T (as displayed in the source relation)
    Elementwise,       // S_yy = S_ij .* H
    MatrixHermitian,   // S_yy = H * S_ij * H^H (classical OMA form)
};

struct WeightedPsd {
    Eigen::VectorXd omega_grid;
    std::vector<Eigen::MatrixXcd> S_yy;
};

/// Retained left singular vectors and singular values of one layer.
struct ComplexFilterBank {
    Eigen::MatrixXcd U;        // n x m, orthonormal columns
    Eigen::VectorXd epsilon;   // descending, length m

    std::string to_json() const;
    static ComplexFilterBank from_json(const std::string& text);
};

struct ChebFilter {
    std::size_t order = 0;                   // K
    std::vector<Eigen::MatrixXd> theta;      // K+1 matrices, each d_in x d_out
    Eigen::MatrixXd scaled_laplacian;        // 2 L / lambda_max - I
};

struct NormalizedGraph {
    Eigen::MatrixXd A_norm;    // D^-1/2 (A + I) D^-1/2
    Eigen::MatrixXd L;         // I - A_norm
    double lambda_max = 0.0;   // largest eigenvalue of L, dense solve
    std::size_t edge_count = 0;
};

WeightedPsd weighted_psd(const signal::SpectralEstimate& spectrum,
                         const structure::FrfEvaluation& frf,
                         PsdWeighting mode = PsdWeighting::MatrixTranspose);

/// Bin indices of the m largest trace magnitudes, used as the per-batch
/// frequency selection.
std::vector<std::size_t> select_peak_bins(const std::vector<Eigen::MatrixXcd>& S,
                                          std::size_t m);

/// SVD of S_yy aggregated over the selected bins; retain the first m
/// left singular vectors and singular values.
ComplexFilterBank filter_bank(const WeightedPsd& weighted, std::size_t m,
                              std::optional<std::vector<std::size_t>> selected_bins = std::nullopt);

/// Modal projection filter: y = mix([Re, Im] of U (U^H x) (W_r + i W_i)).
/// mix is (2 d_outc) x d_out real.
Eigen::MatrixXd modeconv_fast_forward(const Eigen::MatrixXd& x,
                                      const ComplexFilterBank& bank,
                                      const Eigen::MatrixXd& W_r,
                                      const Eigen::MatrixXd& W_i,
                                      const Eigen::MatrixXd& mix,
                                      OpCounter* counter = nullptr);

/// Complex message passing: Yc = A_norm Xc (W_r + i W_i); returns the
/// real and imaginary output channels.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd>
modeconv_laplace_forward(const Eigen::MatrixXd& x_real, const Eigen::MatrixXd& x_imag,
                         const NormalizedGraph& graph,
                         const Eigen::MatrixXd& W_r, const Eigen::MatrixXd& W_i,
                         OpCounter* counter = nullptr);

/// Symmetric normalized Laplacian with optional self-loops; lambda_max
/// by dense eigensolve.
NormalizedGraph normalized_laplacian(const SensorGraph& graph, bool add_self_loops = true);

/// Chebyshev recursion T_k = 2 L~ T_{k-1} - T_{k-2}; y = sum theta_k T_k x.
Eigen::MatrixXd cheb_forward(const Eigen::MatrixXd& x, const ChebFilter& filter,
                             OpCounter* counter = nullptr);

}  // namespace modeconv::filters
