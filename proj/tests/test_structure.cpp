#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>

#include "modeconv/errors.hpp"
#include "modeconv/structure.hpp"

using namespace modeconv;

namespace {

structure::StructuralMatrices chain_matrices(std::size_t n, double k = 1.0,
                                             double xi = 0.0) {
    return structure::assemble_matrices(SensorGraph::chain(n), k, xi);
}

Eigen::VectorXd grid_between(double lo, double hi, std::size_t points) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(points));
    for (std::size_t i = 0; i < points; ++i)
        g[Eigen::Index(i)] = lo + (hi - lo) * double(i) / double(points - 1);
    return g;
}

}  // namespace

TEST_CASE("matrix assembly") {
    SUBCASE("3-node series stiffness pattern") {
        auto mats = chain_matrices(3);
        Eigen::MatrixXd expected(3, 3);
        expected << 2, -1, 0, -1, 2, -1, 0, -1, 2;
        CHECK((mats.K - expected).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("masses fill the diagonal") {
        auto mats = structure::assemble_matrices(SensorGraph::chain(2, 2.0), 1.0, 0.0);
        CHECK(mats.M(0, 0) == 2.0);
        CHECK(mats.M(1, 1) == 2.0);
        CHECK(mats.M(0, 1) == 0.0);
    }
    SUBCASE("single node with unit parameters gives C = [0.04]") {
        auto mats = chain_matrices(1, 1.0, 0.02);
        CHECK(mats.K(0, 0) == doctest::Approx(1.0));
        CHECK(mats.C(0, 0) == doctest::Approx(0.04).epsilon(1e-12));
    }
    SUBCASE("Rayleigh form holds") {
        auto mats = chain_matrices(4, 2.0, 0.02);
        const Eigen::MatrixXd expected =
            mats.rayleigh_alpha * mats.M + mats.rayleigh_beta * mats.K;
        CHECK((mats.C - expected).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("bad parameters rejected") {
        CHECK_THROWS_AS(chain_matrices(2, 0.0), DomainError);
        CHECK_THROWS_AS(chain_matrices(2, 1.0, 1.0), DomainError);
    }
}

TEST_CASE("eigenmodes") {
    SUBCASE("2-DOF chain squared frequencies are 1 and 3") {
        auto mats = chain_matrices(2);
        auto modes = structure::solve_eigenmodes(mats.M, mats.K);
        CHECK(modes.omega[0] * modes.omega[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(modes.omega[1] * modes.omega[1] == doctest::Approx(3.0).epsilon(1e-12));
    }
    SUBCASE("scalar case") {
        Eigen::MatrixXd M = Eigen::MatrixXd::Identity(1, 1);
        Eigen::MatrixXd K = 4.0 * M;
        auto modes = structure::solve_eigenmodes(M, K);
        CHECK(modes.omega[0] == doctest::Approx(2.0));
        CHECK(modes.shapes(0, 0) == 1.0);
    }
    SUBCASE("shapes max-normalized with positive sign") {
        auto mats = chain_matrices(5);
        auto modes = structure::solve_eigenmodes(mats.M, mats.K);
        for (Eigen::Index r = 0; r < 5; ++r) {
            CHECK(modes.shapes.col(r).cwiseAbs().maxCoeff() == doctest::Approx(1.0));
            Eigen::Index imax = 0;
            modes.shapes.col(r).cwiseAbs().maxCoeff(&imax);
            CHECK(modes.shapes(imax, r) > 0.0);
        }
    }
    SUBCASE("M-orthogonality and eigen residual") {
        auto mats = chain_matrices(6, 1.5);
        auto modes = structure::solve_eigenmodes(mats.M, mats.K);
        const Eigen::MatrixXd G = modes.shapes.transpose() * mats.M * modes.shapes;
        for (Eigen::Index i = 0; i < 6; ++i)
            for (Eigen::Index j = 0; j < 6; ++j)
                if (i != j) CHECK(std::abs(G(i, j)) < 1e-8 * std::abs(G(i, i)));
        for (Eigen::Index r = 0; r < 6; ++r) {
            const Eigen::VectorXd res =
                mats.K * modes.shapes.col(r) -
                modes.omega[r] * modes.omega[r] * mats.M * modes.shapes.col(r);
            CHECK(res.norm() / (mats.K * modes.shapes.col(r)).norm() < 1e-8);
        }
    }
    SUBCASE("frequency scaling law") {
        auto a = chain_matrices(4, 1.0);
        auto b = chain_matrices(4, 2.5);
        auto ma = structure::solve_eigenmodes(a.M, a.K);
        auto mb = structure::solve_eigenmodes(b.M, b.K);
        for (Eigen::Index r = 0; r < 4; ++r)
            CHECK(mb.omega[r] ==
                  doctest::Approx(std::sqrt(2.5) * ma.omega[r]).epsilon(1e-9));
    }
    SUBCASE("non-symmetric K rejected") {
        Eigen::MatrixXd M = Eigen::MatrixXd::Identity(2, 2);
        Eigen::MatrixXd K(2, 2);
        K << 2, -1, -0.5, 2;
        CHECK_THROWS_AS(structure::solve_eigenmodes(M, K), DomainError);
    }
}

TEST_CASE("modal projection") {
    SUBCASE("undamped 2-DOF: modal stiffness = omega^2 * modal mass") {
        auto mats = chain_matrices(2);
        auto model = structure::modal_model(mats);
        for (Eigen::Index r = 0; r < 2; ++r)
            CHECK(model.modal_stiffness[r] ==
                  doctest::Approx(model.omega[r] * model.omega[r] *
                                  model.modal_mass[r]).epsilon(1e-10));
    }
    SUBCASE("undamped poles purely imaginary") {
        auto model = structure::modal_model(chain_matrices(3, 1.0, 0.0));
        for (Eigen::Index r = 0; r < 3; ++r) {
            CHECK(model.poles[r].real() == doctest::Approx(0.0));
            CHECK(model.poles[r].imag() == doctest::Approx(model.omega[r]));
        }
    }
    SUBCASE("Rayleigh damping projects to alpha m + beta k per mode") {
        auto mats = chain_matrices(4, 1.0, 0.02);
        auto model = structure::modal_model(mats);
        for (Eigen::Index r = 0; r < 4; ++r)
            CHECK(model.modal_damping[r] ==
                  doctest::Approx(mats.rayleigh_alpha * model.modal_mass[r] +
                                  mats.rayleigh_beta * model.modal_stiffness[r])
                      .epsilon(1e-9));
    }
    SUBCASE("damping ratio met at the reference modes") {
        auto mats = chain_matrices(5, 1.0, 0.02);
        auto model = structure::modal_model(mats);
        CHECK(model.modal_xi[0] == doctest::Approx(0.02).epsilon(1e-9));
        CHECK(model.modal_xi[4] == doctest::Approx(0.02).epsilon(1e-9));
    }
    SUBCASE("non-proportional damping rejected") {
        auto mats = chain_matrices(3, 1.0, 0.02);
        mats.C(0, 2) += 0.5;
        mats.C(2, 0) += 0.5;
        structure::ModalModel model = structure::solve_eigenmodes(mats.M, mats.K);
        CHECK_THROWS_AS(structure::modal_projection(mats, model), NumericError);
    }
}

TEST_CASE("frequency response") {
    SUBCASE("static compliance of 1-DOF") {
        auto mats = chain_matrices(1, 4.0, 0.02);
        auto model = structure::modal_model(mats);
        Eigen::VectorXd grid(1);
        grid << 0.0;
        auto frf = structure::frequency_response(mats, model, grid,
                                                 structure::FrfForm::Direct);
        CHECK(frf.H[0](0, 0).real() == doctest::Approx(0.25).epsilon(1e-10));
        CHECK(std::abs(frf.H[0](0, 0).imag()) < 1e-12);
    }
    SUBCASE("direct and modal forms agree on 2-DOF") {
        auto mats = chain_matrices(2, 1.0, 0.02);
        auto model = structure::modal_model(mats);
        Eigen::VectorXd grid = grid_between(0.1, 2.5, 64);
        auto direct = structure::frequency_response(mats, model, grid,
                                                    structure::FrfForm::Direct);
        auto modal = structure::frequency_response(mats, model, grid,
                                                   structure::FrfForm::Modal);
        double worst = 0.0;
        for (std::size_t k = 0; k < 64; ++k) {
            const double denom = direct.H[k].norm();
            worst = std::max(worst, (direct.H[k] - modal.H[k]).norm() / denom);
        }
        CHECK(worst < 1e-6);
    }
    SUBCASE("1-DOF magnitude peaks nearest the damped frequency") {
        auto mats = chain_matrices(1, 1.0, 0.05);
        auto model = structure::modal_model(mats);
        Eigen::VectorXd grid = grid_between(0.5, 1.5, 201);
        auto frf = structure::frequency_response(mats, model, grid,
                                                 structure::FrfForm::Direct);
        std::size_t argmax = 0;
        for (std::size_t k = 1; k < 201; ++k)
            if (std::abs(frf.H[k](0, 0)) > std::abs(frf.H[argmax](0, 0))) argmax = k;
        // peak of |H| sits at omega_r sqrt(1 - 2 xi^2) for a 1-DOF system
        const double peak = model.omega[0] * std::sqrt(1.0 - 2.0 * 0.05 * 0.05);
        double best = 1e9;
        std::size_t nearest = 0;
        for (std::size_t k = 0; k < 201; ++k)
            if (std::abs(grid[Eigen::Index(k)] - peak) < best) {
                best = std::abs(grid[Eigen::Index(k)] - peak);
                nearest = k;
            }
        CHECK(argmax == nearest);
    }
    SUBCASE("reciprocity") {
        auto mats = chain_matrices(4, 1.0, 0.02);
        auto model = structure::modal_model(mats);
        Eigen::VectorXd grid = grid_between(0.2, 2.0, 16);
        auto frf = structure::frequency_response(mats, model, grid,
                                                 structure::FrfForm::Direct);
        for (const auto& H : frf.H)
            CHECK((H - H.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("undamped grid near resonance rejected") {
        auto mats = chain_matrices(1, 1.0, 0.0);
        auto model = structure::modal_model(mats);
        Eigen::VectorXd grid(1);
        grid << model.omega[0];
        CHECK_THROWS_WITH_AS(structure::frequency_response(mats, model, grid,
                                                           structure::FrfForm::Direct),
                             doctest::Contains("resonance"), DomainError);
    }
}

TEST_CASE("modal model serialization") {
    auto model = structure::modal_model(chain_matrices(2, 1.0, 0.02));
    const std::string j = model.to_json();
    CHECK(j.find("\"omega\"") != std::string::npos);
    CHECK(j.find("\"mode_shapes\"") != std::string::npos);
    CHECK(j.find("\"poles\"") != std::string::npos);
}
