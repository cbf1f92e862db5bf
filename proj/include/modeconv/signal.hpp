#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "modeconv/core.hpp"

namespace modeconv::signal {

/// Pairwise covariances C_ij(tau) and normalized cross-correlations
/// R_ij(tau) of the first sensor channel over one window.
struct CorrelationSet {
    std::vector<std::size_t> lags;          // non-negative lags, in samples
    std::vector<Eigen::MatrixXd> C;         // one n x n matrix per lag
    std::vector<Eigen::MatrixXd> R;         // normalized, same layout
    Eigen::VectorXd autocovariance;         // C_ii(0)
    std::size_t window_length = 0;          // valid samples behind the estimate
};

/// Complex cross-PSD S_ij(f) on a one-sided frequency grid.
struct SpectralEstimate {
    Eigen::VectorXd frequencies;            // Hz, 0 .. fs/2
    std::vector<Eigen::MatrixXcd> S;        // one n x n Hermitian matrix per bin
};

/// Degenerate-signal cutoff for the normalization rule.
inline constexpr double kAutocovarianceEpsilon = 1e-12;

/// C_ij(tau) = mean over the valid overlap of (x_i(t) - mu_i)(x_j(t+tau) - mu_j),
/// population normalization, padding samples excluded. Uses channel 0.
std::vector<Eigen::MatrixXd> covariance(const SignalWindow& window,
                                        const std::vector<std::size_t>& lags);

/// R_ij(tau) = C_ij(tau) / sqrt(C_ii(0) C_jj(0)); zero when either
/// autocovariance falls below kAutocovarianceEpsilon.
CorrelationSet cross_correlation(const SignalWindow& window,
                                 const std::vector<std::size_t>& lags);

/// Wiener-Khinchin: transform of R over the symmetric lag grid
/// (R_ij(-tau) = R_ji(tau)) evaluated on l one-sided bins from 0 to fs/2.
/// Each lag carries the weight (1 - tau/(tau_max+1)) * (T-tau)/T with
/// T = window_length, i.e. a Bartlett lag window over bias-corrected
/// covariances. That combination is the smallest change to the plain
/// DFT that keeps every per-window diagonal non-negative (the estimate
/// equals a Fejer-kernel average of the periodogram). The weights are
/// deterministic, so the map stays invertible on the bin grid.
SpectralEstimate psd(const CorrelationSet& corr, double sample_rate,
                     std::size_t bin_count);

/// weight(i,j) = |R_ij(0)|, self-loops 1; replaces existing weights.
void edge_weights_from_correlation(const CorrelationSet& corr, SensorGraph& graph);

/// Full per-window chain with the default lag grid {0..l-1}.
SpectralEstimate spectral_estimate(const SignalWindow& window);

/// Debug dump of C, R, S for one window.
std::string dump_json(const CorrelationSet& corr, const SpectralEstimate& spec);

}  // namespace modeconv::signal
