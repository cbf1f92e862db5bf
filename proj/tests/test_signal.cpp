#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "modeconv/errors.hpp"
#include "modeconv/signal.hpp"

using namespace modeconv;

namespace {

SignalWindow make_window(const std::vector<std::vector<double>>& node_signals,
                         double sample_rate = 1.0, std::size_t pad = 0) {
    SignalWindow w;
    w.sample_rate = sample_rate;
    w.nodes = node_signals.size();
    w.channels = 1;
    w.samples = node_signals.front().size();
    w.pad_count = pad;
    w.data.resize(w.nodes * w.samples);
    for (std::size_t i = 0; i < w.nodes; ++i)
        for (std::size_t t = 0; t < w.samples; ++t)
            w.at(i, 0, t) = node_signals[i][t];
    return w;
}

std::vector<std::size_t> default_lags(std::size_t l) {
    std::vector<std::size_t> lags(l);
    for (std::size_t i = 0; i < l; ++i) lags[i] = i;
    return lags;
}

}  // namespace

TEST_CASE("covariance") {
    SUBCASE("zero signal gives zero covariance") {
        auto C = signal::covariance(make_window({{0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}}),
                                    default_lags(5));
        for (const auto& m : C) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("ramp pair at lag zero is 2.0") {
        auto C = signal::covariance(make_window({{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}}), {0});
        CHECK(C[0](0, 1) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("negated ramp gives -2.0") {
        auto C = signal::covariance(make_window({{1, 2, 3, 4, 5}, {5, 4, 3, 2, 1}}), {0});
        CHECK(C[0](0, 1) == doctest::Approx(-2.0).epsilon(1e-12));
    }
    SUBCASE("lag out of range") {
        CHECK_THROWS_AS(signal::covariance(make_window({{1, 2, 3}}), {3}), DomainError);
    }
    SUBCASE("lag-zero matrix symmetric, diagonal non-negative") {
        auto C = signal::covariance(
            make_window({{1, -2, 3, 0, 1}, {0.5, 2, -1, 1, 0}}), {0});
        CHECK(std::abs(C[0](0, 1) - C[0](1, 0)) < 1e-12);
        CHECK(C[0](0, 0) >= 0.0);
        CHECK(C[0](1, 1) >= 0.0);
    }
    SUBCASE("padding samples excluded") {
        // valid part [1..3]; the trailing zeros must not contribute
        auto padded = signal::covariance(make_window({{1, 2, 3, 0, 0}}, 1.0, 2), {0});
        auto clean = signal::covariance(make_window({{1, 2, 3}}), {0});
        CHECK(padded[0](0, 0) == doctest::Approx(clean[0](0, 0)).epsilon(1e-12));
    }
    SUBCASE("Cauchy-Schwarz at lag zero") {
        auto C = signal::covariance(
            make_window({{1, 4, -2, 0.5, 3}, {2, -1, 0, 1, -3}}), {0});
        CHECK(std::abs(C[0](0, 1)) <=
              std::sqrt(C[0](0, 0) * C[0](1, 1)) + 1e-12);
    }
}

TEST_CASE("cross correlation") {
    SUBCASE("identical signals correlate to 1") {
        auto corr = signal::cross_correlation(
            make_window({{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}}), {0});
        CHECK(corr.R[0](0, 1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(corr.R[0](0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("negated signals correlate to -1") {
        auto corr = signal::cross_correlation(
            make_window({{1, 2, 3, 4, 5}, {-1, -2, -3, -4, -5}}), {0});
        CHECK(corr.R[0](0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
    }
    SUBCASE("constant signals fall back to zero") {
        auto corr = signal::cross_correlation(
            make_window({{3, 3, 3, 3, 3}, {7, 7, 7, 7, 7}}), {0});
        CHECK(corr.R[0](0, 1) == 0.0);
        CHECK(corr.R[0](0, 0) == 0.0);
    }
    SUBCASE("bounded by one") {
        auto corr = signal::cross_correlation(
            make_window({{1, -2, 0, 4, -1}, {0, 1, -1, 2, 2}}), default_lags(5));
        for (const auto& m : corr.R)
            CHECK(m.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    }
    SUBCASE("scale invariance") {
        auto a = signal::cross_correlation(
            make_window({{1, -2, 0, 4, -1}, {0, 1, -1, 2, 2}}), default_lags(5));
        auto b = signal::cross_correlation(
            make_window({{7, -14, 0, 28, -7}, {0, 1, -1, 2, 2}}), default_lags(5));
        for (std::size_t k = 0; k < a.R.size(); ++k)
            CHECK((a.R[k] - b.R[k]).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("psd") {
    SUBCASE("zero correlation gives zero spectrum") {
        auto corr = signal::cross_correlation(
            make_window({{0, 0, 0, 0, 0}}), default_lags(5));
        auto spec = signal::psd(corr, 1.0, 5);
        for (const auto& S : spec.S) CHECK(S.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("impulse autocorrelation is flat") {
        signal::CorrelationSet corr;
        corr.lags = default_lags(5);
        for (std::size_t k = 0; k < 5; ++k) {
            corr.C.push_back(Eigen::MatrixXd::Zero(1, 1));
            corr.R.push_back(Eigen::MatrixXd::Zero(1, 1));
        }
        corr.R[0](0, 0) = 1.0;
        corr.autocovariance = Eigen::VectorXd::Ones(1);
        corr.window_length = 5;
        auto spec = signal::psd(corr, 1.0, 5);
        const double first = spec.S[0](0, 0).real();
        for (const auto& S : spec.S)
            CHECK(S(0, 0).real() == doctest::Approx(first).epsilon(1e-12));
    }
    SUBCASE("cosine autocorrelation peaks at its frequency") {
        const double fs = 10.0;
        const double f0 = 2.5;  // bin 2 of the 5-bin grid 0, 1.25, .., 5 Hz
        const std::size_t l = 5;
        signal::CorrelationSet corr;
        corr.lags = default_lags(l);
        for (std::size_t tau = 0; tau < l; ++tau) {
            Eigen::MatrixXd R(1, 1);
            R(0, 0) = std::cos(2.0 * std::numbers::pi * f0 * double(tau) / fs);
            corr.C.push_back(R);
            corr.R.push_back(R);
        }
        corr.autocovariance = Eigen::VectorXd::Ones(1);
        corr.window_length = l;
        auto spec = signal::psd(corr, fs, l);
        std::size_t argmax = 0;
        for (std::size_t k = 1; k < l; ++k)
            if (spec.S[k](0, 0).real() > spec.S[argmax](0, 0).real()) argmax = k;
        CHECK(spec.frequencies[Eigen::Index(argmax)] == doctest::Approx(f0));
    }
    SUBCASE("Hermitian per bin with non-negative diagonal") {
        auto corr = signal::cross_correlation(
            make_window({{1, -2, 0, 4, -1}, {0, 1, -1, 2, 2}}), default_lags(5));
        auto spec = signal::psd(corr, 1.0, 5);
        for (const auto& S : spec.S) {
            CHECK((S - S.adjoint()).cwiseAbs().maxCoeff() < 1e-9);
            for (Eigen::Index i = 0; i < S.rows(); ++i)
                CHECK(S(i, i).real() >= -1e-9);
        }
    }
    SUBCASE("empty lag grid is a domain error") {
        signal::CorrelationSet corr;
        CHECK_THROWS_AS(signal::psd(corr, 1.0, 5), DomainError);
    }
}

TEST_CASE("Wiener-Khinchin inverse recovery") {
    // The one-sided l-bin transform is a square linear map in the l
    // non-negative lags once the documented lag weights are folded in;
    // solving that system is an independent route back to R.
    const std::size_t l = 5;
    const double fs = 4.0;
    auto corr = signal::cross_correlation(
        make_window({{0.3, -1.2, 2.0, 0.7, -0.4}}, fs), default_lags(l));
    auto spec = signal::psd(corr, fs, l);

    const double T = double(l);
    auto weight = [&](std::size_t tau) {
        return (1.0 - double(tau) / T) * (T - double(tau)) / T;
    };
    Eigen::MatrixXcd Fsym(l, l);
    for (std::size_t k = 0; k < l; ++k) {
        const double f = 0.5 * fs * double(k) / double(l - 1);
        Fsym(Eigen::Index(k), 0) = weight(0);
        for (std::size_t tau = 1; tau < l; ++tau)
            Fsym(Eigen::Index(k), Eigen::Index(tau)) =
                weight(tau) * 2.0 *
                std::cos(2.0 * std::numbers::pi * f * double(tau) / fs);
    }
    Eigen::VectorXcd s(l);
    for (std::size_t k = 0; k < l; ++k) s[Eigen::Index(k)] = spec.S[k](0, 0);
    Eigen::VectorXcd r = Fsym.colPivHouseholderQr().solve(s);
    for (std::size_t tau = 0; tau < l; ++tau) {
        CHECK(std::abs(r[Eigen::Index(tau)].imag()) < 1e-8);
        CHECK(r[Eigen::Index(tau)].real() ==
              doctest::Approx(corr.R[tau](0, 0)).epsilon(1e-8));
    }
}

TEST_CASE("per-window spectrum diagonal never negative") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t w = 0; w < 500; ++w) {
        std::vector<double> x(5);
        for (auto& v : x) v = gauss(rng);
        auto spec = signal::spectral_estimate(make_window({x}));
        for (const auto& S : spec.S) CHECK(S(0, 0).real() >= -1e-9);
    }
}

TEST_CASE("white noise spectrum is flat") {
    // statistical tolerance: mean PSD across >= 1000 windows within 10%;
    // long windows with the short default lag grid keep the estimate in
    // its low-bias regime
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t T = 256, bins = 5, runs = 1200;
    Eigen::VectorXd mean_psd = Eigen::VectorXd::Zero(bins);
    for (std::size_t w = 0; w < runs; ++w) {
        std::vector<double> x(T);
        for (auto& v : x) v = gauss(rng);
        auto corr = signal::cross_correlation(make_window({x}), default_lags(bins));
        auto spec = signal::psd(corr, 1.0, bins);
        for (std::size_t k = 0; k < bins; ++k)
            mean_psd[Eigen::Index(k)] += spec.S[k](0, 0).real();
    }
    mean_psd /= double(runs);
    const double avg = mean_psd.mean();
    for (std::size_t k = 0; k < bins; ++k)
        CHECK(std::abs(mean_psd[Eigen::Index(k)] - avg) / avg < 0.10);
}

TEST_CASE("edge weights from correlation") {
    SUBCASE("identical signals give unit weights") {
        SensorGraph g = SensorGraph::chain(2);
        auto corr = signal::cross_correlation(
            make_window({{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}}), {0});
        signal::edge_weights_from_correlation(corr, g);
        for (const auto& e : g.edges) CHECK(e.weight == doctest::Approx(1.0));
    }
    SUBCASE("orthogonal signals give zero weight") {
        SensorGraph g = SensorGraph::chain(2);
        auto corr = signal::cross_correlation(
            make_window({{1, -1, 1, -1}, {1, 1, -1, -1}}), {0});
        signal::edge_weights_from_correlation(corr, g);
        CHECK(std::abs(g.edges[0].weight) < 1e-12);
    }
    SUBCASE("weights are scale invariant") {
        SensorGraph g1 = SensorGraph::chain(2), g2 = SensorGraph::chain(2);
        auto c1 = signal::cross_correlation(
            make_window({{1, -2, 0, 4, -1}, {0, 1, -1, 2, 2}}), {0});
        auto c2 = signal::cross_correlation(
            make_window({{5, -10, 0, 20, -5}, {0, 1, -1, 2, 2}}), {0});
        signal::edge_weights_from_correlation(c1, g1);
        signal::edge_weights_from_correlation(c2, g2);
        CHECK(g1.edges[0].weight == doctest::Approx(g2.edges[0].weight).epsilon(1e-10));
    }
}

TEST_CASE("debug dump is valid json-ish") {
    auto corr = signal::cross_correlation(make_window({{1, 2, 3, 4, 5}}), {0, 1});
    auto spec = signal::psd(corr, 1.0, 5);
    const std::string dump = signal::dump_json(corr, spec);
    CHECK(dump.find("\"R\"") != std::string::npos);
    CHECK(dump.find("\"S\"") != std::string::npos);
}
