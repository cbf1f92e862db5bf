#include "modeconv/signal.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace modeconv::signal {

std::vector<Eigen::MatrixXd> covariance(const SignalWindow& window,
                                        const std::vector<std::size_t>& lags) {
    if (window.samples < 2) throw DomainError("window length must be >= 2 for covariance");
    const std::size_t n = window.nodes;
    const std::size_t valid = window.valid_samples();

    for (std::size_t tau : lags)
        if (tau >= window.samples)
            throw DomainError("lag " + std::to_string(tau) + " >= window length " +
                              std::to_string(window.samples));

    Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t t = 0; t < valid; ++t) s += window.at(i, 0, t);
        mu[i] = valid > 0 ? s / double(valid) : 0.0;
    }

    std::vector<Eigen::MatrixXd> C;
    C.reserve(lags.size());
    for (std::size_t tau : lags) {
        Eigen::MatrixXd Ct = Eigen::MatrixXd::Zero(n, n);
        const std::size_t overlap = valid > tau ? valid - tau : 0;
        if (overlap > 0) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t t = 0; t < overlap; ++t)
                        acc += (window.at(i, 0, t) - mu[i]) * (window.at(j, 0, t + tau) - mu[j]);
                    Ct(i, j) = acc / double(overlap);
                }
        }
        C.push_back(std::move(Ct));
    }
    return C;
}

CorrelationSet cross_correlation(const SignalWindow& window,
                                 const std::vector<std::size_t>& lags) {
    CorrelationSet out;
    out.lags = lags;
    out.C = covariance(window, lags);

    auto zero_it = std::find(lags.begin(), lags.end(), std::size_t(0));
    if (zero_it == lags.end())
        throw DomainError("lag grid must contain tau = 0 for normalization");
    const Eigen::MatrixXd& C0 = out.C[std::size_t(zero_it - lags.begin())];
    const std::size_t n = window.nodes;
    out.autocovariance = C0.diagonal();
    out.window_length = window.valid_samples();

    out.R.reserve(out.C.size());
    for (const Eigen::MatrixXd& Ct : out.C) {
        Eigen::MatrixXd Rt = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double ci = out.autocovariance[i];
                const double cj = out.autocovariance[j];
                if (ci < kAutocovarianceEpsilon || cj < kAutocovarianceEpsilon) {
                    Rt(i, j) = 0.0;
                } else {
                    Rt(i, j) = Ct(i, j) / std::sqrt(ci * cj);
                }
            }
        out.R.push_back(std::move(Rt));
    }
    return out;
}

SpectralEstimate psd(const CorrelationSet& corr, double sample_rate,
                     std::size_t bin_count) {
    if (corr.lags.empty() || corr.R.empty())
        throw DomainError("empty lag grid");
    const std::size_t n = std::size_t(corr.R.front().rows());

    SpectralEstimate out;
    out.frequencies.resize(Eigen::Index(bin_count));
    for (std::size_t k = 0; k < bin_count; ++k)
        out.frequencies[Eigen::Index(k)] =
            bin_count > 1 ? 0.5 * sample_rate * double(k) / double(bin_count - 1) : 0.0;

    std::size_t tau_max = 0;
    for (std::size_t tau : corr.lags) tau_max = std::max(tau_max, tau);
    const double T = corr.window_length > tau_max ? double(corr.window_length)
                                                  : double(tau_max + 1);
    // Bartlett lag window times the bias correction back to the
    // divide-by-T covariance estimate; keeps S(f) >= 0 per window.
    auto lag_weight = [&](std::size_t tau) {
        return (1.0 - double(tau) / double(tau_max + 1)) * (T - double(tau)) / T;
    };

    out.S.reserve(bin_count);
    for (std::size_t k = 0; k < bin_count; ++k) {
        const double f = out.frequencies[Eigen::Index(k)];
        Eigen::MatrixXcd Sk = Eigen::MatrixXcd::Zero(n, n);
        for (std::size_t li = 0; li < corr.lags.size(); ++li) {
            const double tau = double(corr.lags[li]);
            const double g = lag_weight(corr.lags[li]);
            const double w = 2.0 * std::numbers::pi * f * tau / sample_rate;
            const std::complex<double> e_neg(std::cos(w), -std::sin(w));
            if (corr.lags[li] == 0) {
                Sk += g * corr.R[li].cast<std::complex<double>>();
            } else {
                // positive lag tau and its mirror R_ij(-tau) = R_ji(tau)
                Sk += g * corr.R[li].cast<std::complex<double>>() * e_neg;
                Sk += g * corr.R[li].transpose().cast<std::complex<double>>() * std::conj(e_neg);
            }
        }
        out.S.push_back(std::move(Sk));
    }
    return out;
}

void edge_weights_from_correlation(const CorrelationSet& corr, SensorGraph& graph) {
    auto zero_it = std::find(corr.lags.begin(), corr.lags.end(), std::size_t(0));
    if (zero_it == corr.lags.end())
        throw DomainError("correlation set lacks tau = 0");
    const Eigen::MatrixXd& R0 = corr.R[std::size_t(zero_it - corr.lags.begin())];
    for (Edge& e : graph.edges)
        e.weight = e.i == e.j ? 1.0 : std::abs(R0(Eigen::Index(e.i), Eigen::Index(e.j)));
}

SpectralEstimate spectral_estimate(const SignalWindow& window) {
    std::vector<std::size_t> lags(window.samples);
    for (std::size_t t = 0; t < window.samples; ++t) lags[t] = t;
    CorrelationSet corr = cross_correlation(window, lags);
    return psd(corr, window.sample_rate, window.samples);
}

std::string dump_json(const CorrelationSet& corr, const SpectralEstimate& spec) {
    nlohmann::ordered_json j;
    j["lags"] = corr.lags;
    auto real_tensor = [](const std::vector<Eigen::MatrixXd>& ms) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& m : ms) {
            nlohmann::ordered_json jm = nlohmann::ordered_json::array();
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                nlohmann::ordered_json row = nlohmann::ordered_json::array();
                for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
                jm.push_back(row);
            }
            arr.push_back(jm);
        }
        return arr;
    };
    j["C"] = real_tensor(corr.C);
    j["R"] = real_tensor(corr.R);
    j["frequencies"] = std::vector<double>(spec.frequencies.begin(), spec.frequencies.end());
    nlohmann::ordered_json s_arr = nlohmann::ordered_json::array();
    for (const auto& m : spec.S) {
        nlohmann::ordered_json jm = nlohmann::ordered_json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                row.push_back({m(r, c).real(), m(r, c).imag()});
            jm.push_back(row);
        }
        s_arr.push_back(jm);
    }
    j["S"] = s_arr;
    return j.dump();
}

}  // namespace modeconv::signal
