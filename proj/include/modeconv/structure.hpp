#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "modeconv/core.hpp"

namespace modeconv::structure {

/// Lumped mass-spring-damper chain matrices with Rayleigh damping
/// C = alpha M + beta K.
struct StructuralMatrices {
    Eigen::MatrixXd M;   // diagonal, kg
    Eigen::MatrixXd K;   // series pattern: 2k diagonal, -k off-diagonal
    Eigen::MatrixXd C;   // N s / m
    double stiffness = 0.0;
    double damping_ratio = 0.0;
    double rayleigh_alpha = 0.0;
    double rayleigh_beta = 0.0;
};

/// Result of the undamped eigenproblem K phi = omega^2 M phi plus the
/// modal projections and pole/residue data.
struct ModalModel {
    Eigen::VectorXd omega;            // natural angular frequencies, ascending (rad/s)
    Eigen::VectorXd frequency_hz;     // omega / 2 pi
    Eigen::MatrixXd shapes;           // columns max-normalized to 1
    Eigen::VectorXd modal_mass;       // diagonal of Phi^T M Phi
    Eigen::VectorXd modal_stiffness;  // diagonal of Phi^T K Phi
    Eigen::VectorXd modal_damping;    // diagonal of Phi^T C Phi
    Eigen::VectorXd modal_xi;         // per-mode damping ratios
    Eigen::VectorXcd poles;           // lambda_r = -xi_r omega_r + i omega_d,r
    Eigen::VectorXcd residue_scale;   // Q_r = 1 / (2 i omega_d,r m_r)

    std::string to_json() const;
};

struct FrfEvaluation {
    Eigen::VectorXd omega_grid;             // rad/s
    std::vector<Eigen::MatrixXcd> H;        // one n x n matrix per grid point
};

enum class FrfForm { Direct, Modal };

/// M = diag(masses); K per series pattern (single node: K = [k]);
/// Rayleigh alpha/beta met exactly at the two reference natural
/// frequencies (1-based mode indices, default (1, n)).
StructuralMatrices assemble_matrices(const SensorGraph& graph, double k, double xi,
                                     std::pair<std::size_t, std::size_t> reference_modes = {0, 0});

/// Solve K phi = omega^2 M phi via the diagonal-M square-root
/// similarity; frequencies ascending, shapes max-normalized with
/// positive sign at the max entry.
ModalModel solve_eigenmodes(const Eigen::MatrixXd& M, const Eigen::MatrixXd& K);

/// Fill modal mass/stiffness/damping, poles and residue scales.
/// Throws NumericError when C is not diagonalized by the undamped shapes.
void modal_projection(const StructuralMatrices& mats, ModalModel& model);

/// Convenience: eigenmodes + projection in one call.
ModalModel modal_model(const StructuralMatrices& mats);

/// Frequency response H(omega); direct form by per-frequency linear
/// solve, modal form as the sum of residue pairs.
FrfEvaluation frequency_response(const StructuralMatrices& mats, const ModalModel& model,
                                 const Eigen::VectorXd& omega_grid, FrfForm form);

}  // namespace modeconv::structure
