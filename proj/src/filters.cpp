#include "modeconv/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "modeconv/svd.hpp"

namespace modeconv::filters {

WeightedPsd weighted_psd(const signal::SpectralEstimate& spectrum,
                         const structure::FrfEvaluation& frf,
                         PsdWeighting mode) {
    if (spectrum.S.size() != frf.H.size())
        throw DomainError("frequency grid mismatch between PSD and FRF");
    WeightedPsd out;
    out.omega_grid = frf.omega_grid;
    out.S_yy.reserve(spectrum.S.size());
    for (std::size_t k = 0; k < spectrum.S.size(); ++k) {
        const Eigen::MatrixXcd& S = spectrum.S[k];
        const Eigen::MatrixXcd& H = frf.H[k];
        if (S.rows() != H.rows() || S.cols() != H.cols())
            throw DomainError("PSD and FRF dimension mismatch");
        switch (mode) {
            case PsdWeighting::MatrixTranspose:
                out.S_yy.push_back(S * H.transpose());
                break;
            case PsdWeighting::Elementwise:
                out.S_yy.push_back(S.cwiseProduct(H));
                break;
            case PsdWeighting::MatrixHermitian:
                out.S_yy.push_back(H * S * H.adjoint());
                break;
        }
    }
    return out;
}

std::vector<std::size_t> select_peak_bins(const std::vector<Eigen::MatrixXcd>& S,
                                          std::size_t m) {
    std::vector<std::size_t> idx(S.size());
    std::iota(idx.begin(), idx.end(), std::size_t(0));
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(S[a].trace()) > std::abs(S[b].trace());
    });
    idx.resize(std::min(m, idx.size()));
    std::sort(idx.begin(), idx.end());
    return idx;
}

ComplexFilterBank filter_bank(const WeightedPsd& weighted, std::size_t m,
                              std::optional<std::vector<std::size_t>> selected_bins) {
    if (weighted.S_yy.empty()) throw DomainError("empty weighted PSD");
    const Eigen::Index n = weighted.S_yy.front().rows();
    if (m < 1 || m > std::size_t(n))
        throw DomainError("retained mode count m must satisfy 1 <= m <= n");

    std::vector<std::size_t> bins =
        selected_bins ? *selected_bins : select_peak_bins(weighted.S_yy, m);
    Eigen::MatrixXcd aggregate = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t b : bins) {
        if (b >= weighted.S_yy.size()) throw DomainError("selected bin out of range");
        aggregate += weighted.S_yy[b];
    }

    svd::SvdResult dec = svd::jacobi_svd(aggregate);
    ComplexFilterBank bank;
    bank.U = dec.U.leftCols(Eigen::Index(m));
    bank.epsilon = dec.sigma.head(Eigen::Index(m));
    return bank;
}

Eigen::MatrixXd modeconv_fast_forward(const Eigen::MatrixXd& x,
                                      const ComplexFilterBank& bank,
                                      const Eigen::MatrixXd& W_r,
                                      const Eigen::MatrixXd& W_i,
                                      const Eigen::MatrixXd& mix,
                                      OpCounter* counter) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d_in = x.cols();
    const Eigen::Index m = bank.U.cols();
    const Eigen::Index d_outc = W_r.cols();
    if (bank.U.rows() != n) throw DomainError("filter bank node dimension mismatch");
    if (W_r.rows() != d_in || W_i.rows() != d_in || W_i.cols() != d_outc)
        throw DomainError("weight dimension mismatch");
    if (mix.rows() != 2 * d_outc) throw DomainError("mix matrix must have 2*d_out rows");
    if (!x.allFinite()) throw DomainError("input features must be finite");

    const Eigen::MatrixXcd p = bank.U.adjoint() * x.cast<std::complex<double>>();
    const Eigen::MatrixXcd Wc =
        W_r.cast<std::complex<double>>() + std::complex<double>(0.0, 1.0) * W_i.cast<std::complex<double>>();
    const Eigen::MatrixXcd q = p * Wc;
    const Eigen::MatrixXcd z = bank.U * q;

    Eigen::MatrixXd cat(n, 2 * d_outc);
    cat << z.real(), z.imag();
    Eigen::MatrixXd y = cat * mix;

    if (counter) {
        counter->multiply_adds += std::uint64_t(2 * m * n * d_in);        // U^H x (complex * real)
        counter->multiply_adds += std::uint64_t(4 * m * d_in * d_outc);   // p Wc
        counter->multiply_adds += std::uint64_t(4 * n * m * d_outc);      // U q
        counter->multiply_adds += std::uint64_t(n * 2 * d_outc * mix.cols());
    }
    return y;
}

namespace {

struct Triplet {
    Eigen::Index i, j;
    double v;
};

std::vector<Triplet> nonzeros(const Eigen::MatrixXd& A) {
    std::vector<Triplet> out;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            if (A(i, j) != 0.0) out.push_back({i, j, A(i, j)});
    return out;
}

/// Sparse multiply over stored nonzeros; cost nnz * cols(X).
Eigen::MatrixXd sparse_apply(const std::vector<Triplet>& trips, Eigen::Index n,
                             const Eigen::MatrixXd& X, OpCounter* counter) {
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, X.cols());
    for (const Triplet& t : trips) Y.row(t.i) += t.v * X.row(t.j);
    if (counter) counter->multiply_adds += std::uint64_t(trips.size()) * std::uint64_t(X.cols());
    return Y;
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::MatrixXd>
modeconv_laplace_forward(const Eigen::MatrixXd& x_real, const Eigen::MatrixXd& x_imag,
                         const NormalizedGraph& graph,
                         const Eigen::MatrixXd& W_r, const Eigen::MatrixXd& W_i,
                         OpCounter* counter) {
    const Eigen::Index n = x_real.rows();
    const Eigen::Index d_in = x_real.cols();
    if (x_imag.rows() != n || x_imag.cols() != d_in)
        throw DomainError("real and imaginary inputs must share a shape");
    if (graph.A_norm.rows() != n) throw DomainError("graph dimension mismatch");
    if (W_r.rows() != d_in || W_i.rows() != d_in || W_r.cols() != W_i.cols())
        throw DomainError("weight dimension mismatch");
    if (!W_r.allFinite() || !W_i.allFinite()) throw DomainError("weights must be finite");

    // Complex product (W_r x_r - W_i x_im) + i (W_r x_im + W_i x_r)
    const Eigen::MatrixXd m_real = x_real * W_r - x_imag * W_i;
    const Eigen::MatrixXd m_imag = x_real * W_i + x_imag * W_r;
    if (counter)
        counter->multiply_adds += std::uint64_t(4 * n * d_in * W_r.cols());

    const std::vector<Triplet> trips = nonzeros(graph.A_norm);
    Eigen::MatrixXd y_real = sparse_apply(trips, n, m_real, counter);
    Eigen::MatrixXd y_imag = sparse_apply(trips, n, m_imag, counter);
    return {std::move(y_real), std::move(y_imag)};
}

NormalizedGraph normalized_laplacian(const SensorGraph& graph, bool add_self_loops) {
    graph.validate();
    const auto n = Eigen::Index(graph.node_count);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (const Edge& e : graph.edges) {
        if (e.weight < 0.0) throw DomainError("negative edge weight");
        if (e.i == e.j) {
            A(Eigen::Index(e.i), Eigen::Index(e.i)) += e.weight;
        } else {
            A(Eigen::Index(e.i), Eigen::Index(e.j)) = e.weight;
            A(Eigen::Index(e.j), Eigen::Index(e.i)) = e.weight;
        }
    }
    if (add_self_loops) A.diagonal().array() += 1.0;

    Eigen::VectorXd deg = A.rowwise().sum();
    Eigen::VectorXd inv_sqrt(n);
    for (Eigen::Index i = 0; i < n; ++i)
        inv_sqrt[i] = deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0;

    NormalizedGraph out;
    out.A_norm = inv_sqrt.asDiagonal() * A * inv_sqrt.asDiagonal();
    out.L = Eigen::MatrixXd::Identity(n, n) - out.A_norm;
    out.edge_count = 0;
    for (const Edge& e : graph.edges)
        if (e.i != e.j) ++out.edge_count;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.L);
    if (es.info() != Eigen::Success)
        throw NumericError("eigensolver failed on normalized Laplacian");
    out.lambda_max = es.eigenvalues().maxCoeff();
    return out;
}

Eigen::MatrixXd cheb_forward(const Eigen::MatrixXd& x, const ChebFilter& filter,
                             OpCounter* counter) {
    if (filter.theta.size() != filter.order + 1)
        throw DomainError("theta must hold K+1 coefficient matrices");
    const Eigen::Index n = x.rows();
    const Eigen::Index d_in = x.cols();
    if (filter.scaled_laplacian.rows() != n)
        throw DomainError("scaled Laplacian dimension mismatch");
    for (const auto& th : filter.theta)
        if (th.rows() != d_in || !th.allFinite())
            throw DomainError("theta coefficient dimension mismatch");

    const Eigen::Index d_out = filter.theta.front().cols();
    const std::vector<Triplet> trips = nonzeros(filter.scaled_laplacian);

    Eigen::MatrixXd T_prev2 = x;                 // T_0
    Eigen::MatrixXd y = T_prev2 * filter.theta[0];
    if (counter) counter->multiply_adds += std::uint64_t(n * d_in * d_out);

    if (filter.order >= 1) {
        Eigen::MatrixXd T_prev1 = sparse_apply(trips, n, x, counter);  // T_1
        y += T_prev1 * filter.theta[1];
        if (counter) counter->multiply_adds += std::uint64_t(n * d_in * d_out);
        for (std::size_t k = 2; k <= filter.order; ++k) {
            Eigen::MatrixXd T_k = 2.0 * sparse_apply(trips, n, T_prev1, counter) - T_prev2;
            y += T_k * filter.theta[k];
            if (counter) counter->multiply_adds += std::uint64_t(n * d_in * d_out);
            T_prev2 = std::move(T_prev1);
            T_prev1 = std::move(T_k);
        }
    }
    return y;
}

std::string ComplexFilterBank::to_json() const {
    nlohmann::ordered_json j;
    j["epsilon"] = std::vector<double>(epsilon.begin(), epsilon.end());
    nlohmann::ordered_json u = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < U.rows(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < U.cols(); ++c)
            row.push_back({U(r, c).real(), U(r, c).imag()});
        u.push_back(row);
    }
    j["U"] = u;
    return j.dump();
}

ComplexFilterBank ComplexFilterBank::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ComplexFilterBank bank;
    const auto& eps = j.at("epsilon");
    bank.epsilon.resize(Eigen::Index(eps.size()));
    for (std::size_t k = 0; k < eps.size(); ++k)
        bank.epsilon[Eigen::Index(k)] = eps[k].get<double>();
    const auto& u = j.at("U");
    const auto rows = Eigen::Index(u.size());
    const Eigen::Index cols = rows > 0 ? Eigen::Index(u[0].size()) : 0;
    bank.U.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            bank.U(r, c) = std::complex<double>(u[std::size_t(r)][std::size_t(c)][0].get<double>(),
                                                u[std::size_t(r)][std::size_t(c)][1].get<double>());
    return bank;
}

}  // namespace modeconv::filters
