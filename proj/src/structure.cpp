#include "modeconv/structure.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace modeconv::structure {

namespace {

Eigen::VectorXd undamped_frequencies(const Eigen::MatrixXd& M, const Eigen::MatrixXd& K) {
    const Eigen::VectorXd inv_sqrt_m = M.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd B = inv_sqrt_m.asDiagonal() * K * inv_sqrt_m.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    if (es.info() != Eigen::Success)
        throw NumericError("symmetric eigensolver failed on reduced stiffness matrix");
    return es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

StructuralMatrices assemble_matrices(const SensorGraph& graph, double k, double xi,
                                     std::pair<std::size_t, std::size_t> reference_modes) {
    graph.validate();
    if (!(k > 0.0)) throw DomainError("stiffness k must be positive");
    if (!(xi >= 0.0 && xi < 1.0)) throw DomainError("damping ratio must be in [0,1)");
    const auto n = Eigen::Index(graph.node_count);

    StructuralMatrices out;
    out.stiffness = k;
    out.damping_ratio = xi;
    out.M = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) out.M(i, i) = graph.node_masses[std::size_t(i)];

    out.K = Eigen::MatrixXd::Zero(n, n);
    if (n == 1) {
        out.K(0, 0) = k;  // single mass on a single spring
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            out.K(i, i) = 2.0 * k;
            if (i + 1 < n) {
                out.K(i, i + 1) = -k;
                out.K(i + 1, i) = -k;
            }
        }
    }

    const Eigen::VectorXd omega = undamped_frequencies(out.M, out.K);
    if (n == 1) {
        out.rayleigh_alpha = 0.0;
        out.rayleigh_beta = 2.0 * xi / omega[0];
    } else {
        std::size_t r1 = reference_modes.first == 0 ? 1 : reference_modes.first;
        std::size_t r2 = reference_modes.second == 0 ? std::size_t(n) : reference_modes.second;
        if (r1 < 1 || r2 < 1 || r1 > std::size_t(n) || r2 > std::size_t(n) || r1 == r2)
            throw DomainError("invalid Rayleigh reference modes");
        const double w1 = omega[Eigen::Index(r1 - 1)];
        const double w2 = omega[Eigen::Index(r2 - 1)];
        // 2 xi w = alpha / w + beta w at w1 and w2
        out.rayleigh_alpha = 2.0 * xi * w1 * w2 / (w1 + w2);
        out.rayleigh_beta = 2.0 * xi / (w1 + w2);
    }
    out.C = out.rayleigh_alpha * out.M + out.rayleigh_beta * out.K;
    return out;
}

ModalModel solve_eigenmodes(const Eigen::MatrixXd& M, const Eigen::MatrixXd& K) {
    const Eigen::Index n = K.rows();
    if (M.rows() != n || M.cols() != n || K.cols() != n)
        throw DomainError("M and K must be square with equal dimensions");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(M(i, i) > 0.0)) throw DomainError("mass matrix diagonal must be positive");
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw DomainError("stiffness matrix is not symmetric");

    const Eigen::VectorXd inv_sqrt_m = M.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd B = inv_sqrt_m.asDiagonal() * K * inv_sqrt_m.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    if (es.info() != Eigen::Success)
        throw NumericError("symmetric eigensolver failed to converge");

    ModalModel model;
    model.omega = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    model.frequency_hz = model.omega / (2.0 * std::numbers::pi);
    model.shapes.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::VectorXd phi = inv_sqrt_m.asDiagonal() * es.eigenvectors().col(r);
        Eigen::Index imax = 0;
        phi.cwiseAbs().maxCoeff(&imax);
        phi /= phi[imax];  // max entry exactly 1 with positive sign
        model.shapes.col(r) = phi;
    }
    return model;
}

void modal_projection(const StructuralMatrices& mats, ModalModel& model) {
    const Eigen::MatrixXd& Phi = model.shapes;
    const Eigen::Index n = Phi.cols();

    const Eigen::MatrixXd Mm = Phi.transpose() * mats.M * Phi;
    const Eigen::MatrixXd Km = Phi.transpose() * mats.K * Phi;
    const Eigen::MatrixXd Cm = Phi.transpose() * mats.C * Phi;

    auto offdiag_mass = [](const Eigen::MatrixXd& A) {
        const double diag = A.diagonal().cwiseAbs().sum();
        const double all = A.cwiseAbs().sum();
        return diag > 0.0 ? (all - diag) / diag : all;
    };
    if (offdiag_mass(Mm) > 1e-8 || offdiag_mass(Km) > 1e-8)
        throw NumericError("modal projection failed to diagonalize M or K");
    if (offdiag_mass(Cm) > 1e-6)
        throw NumericError("damping matrix violates proportionality: relative off-diagonal mass " +
                           std::to_string(offdiag_mass(Cm)));

    model.modal_mass = Mm.diagonal();
    model.modal_stiffness = Km.diagonal();
    model.modal_damping = Cm.diagonal();

    model.modal_xi.resize(n);
    model.poles.resize(n);
    model.residue_scale.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double wr = model.omega[r];
        const double mr = model.modal_mass[r];
        const double xi_r = wr > 0.0 ? model.modal_damping[r] / (2.0 * wr * mr) : 0.0;
        model.modal_xi[r] = xi_r;
        const double wd = wr * std::sqrt(std::max(0.0, 1.0 - xi_r * xi_r));
        model.poles[r] = std::complex<double>(-xi_r * wr, wd);
        // Unit-modal-mass residue scaling; kept in one place so the
        // convention can be swapped.
        model.residue_scale[r] =
            wd > 0.0 ? 1.0 / (std::complex<double>(0.0, 2.0 * wd * mr))
                     : std::complex<double>(0.0, 0.0);
    }
}

ModalModel modal_model(const StructuralMatrices& mats) {
    ModalModel model = solve_eigenmodes(mats.M, mats.K);
    modal_projection(mats, model);
    return model;
}

FrfEvaluation frequency_response(const StructuralMatrices& mats, const ModalModel& model,
                                 const Eigen::VectorXd& omega_grid, FrfForm form) {
    const Eigen::Index n = mats.K.rows();
    FrfEvaluation out;
    out.omega_grid = omega_grid;
    out.H.reserve(std::size_t(omega_grid.size()));

    if (mats.damping_ratio == 0.0) {
        for (Eigen::Index g = 0; g < omega_grid.size(); ++g)
            for (Eigen::Index r = 0; r < model.omega.size(); ++r)
                if (model.omega[r] > 0.0 &&
                    std::abs(omega_grid[g] - model.omega[r]) <= 1e-6 * model.omega[r])
                    throw DomainError("undamped FRF grid hits resonance at omega = " +
                                      std::to_string(model.omega[r]));
    }

    for (Eigen::Index g = 0; g < omega_grid.size(); ++g) {
        const double w = omega_grid[g];
        Eigen::MatrixXcd H(n, n);
        if (form == FrfForm::Direct) {
            Eigen::MatrixXcd A = (-w * w) * mats.M.cast<std::complex<double>>() +
                                 std::complex<double>(0.0, w) * mats.C.cast<std::complex<double>>() +
                                 mats.K.cast<std::complex<double>>();
            Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
            H = lu.solve(Eigen::MatrixXcd::Identity(n, n));
            const double residual = (A * H - Eigen::MatrixXcd::Identity(n, n)).norm();
            if (!H.allFinite() || residual > 1e-6 * double(n))
                throw NumericError("singular system matrix at omega = " + std::to_string(w));
        } else {
            H.setZero();
            const std::complex<double> iw(0.0, w);
            for (Eigen::Index r = 0; r < model.omega.size(); ++r) {
                const Eigen::VectorXcd phi = model.shapes.col(r).cast<std::complex<double>>();
                const Eigen::MatrixXcd outer = phi * phi.transpose();
                const std::complex<double> Q = model.residue_scale[r];
                const std::complex<double> lam = model.poles[r];
                H += Q * outer / (iw - lam);
                H += std::conj(Q) * outer.conjugate() / (iw - std::conj(lam));
            }
        }
        out.H.push_back(std::move(H));
    }
    return out;
}

std::string ModalModel::to_json() const {
    nlohmann::ordered_json j;
    j["frequencies_hz"] = std::vector<double>(frequency_hz.begin(), frequency_hz.end());
    j["omega"] = std::vector<double>(omega.begin(), omega.end());
    nlohmann::ordered_json shapes_j = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < shapes.cols(); ++r) {
        std::vector<double> col(std::size_t(shapes.rows()));
        for (Eigen::Index i = 0; i < shapes.rows(); ++i) col[std::size_t(i)] = shapes(i, r);
        shapes_j.push_back(col);
    }
    j["mode_shapes"] = shapes_j;
    nlohmann::ordered_json poles_j = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < poles.size(); ++r)
        poles_j.push_back({poles[r].real(), poles[r].imag()});
    j["poles"] = poles_j;
    j["modal_mass"] = std::vector<double>(modal_mass.begin(), modal_mass.end());
    j["modal_stiffness"] = std::vector<double>(modal_stiffness.begin(), modal_stiffness.end());
    j["modal_damping"] = std::vector<double>(modal_damping.begin(), modal_damping.end());
    return j.dump(2);
}

}  // namespace modeconv::structure
