#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "modeconv/core.hpp"
#include "modeconv/errors.hpp"
#include "modeconv/simulator.hpp"

using namespace modeconv;

namespace {

simulator::ScenarioSpec short_spec(std::size_t nodes = 4) {
    simulator::ScenarioSpec spec;
    spec.node_count = nodes;
    spec.sample_rate_hz = 64.0;
    spec.duration_s = 4.0;
    spec.sensor_noise_snr_db = 0.0;  // disables additive sensor noise
    spec.seed = 11;
    return spec;
}

simulator::DamageZone uniform_damage(std::size_t nodes, double factor, double onset,
                                     double ramp = 0.0) {
    simulator::DamageZone z;
    z.node_lo = 0;
    z.node_hi = nodes - 1;
    z.factor = factor;
    z.onset_s = onset;
    z.ramp_s = ramp;
    return z;
}

/// Plain DFT magnitude at one frequency; independent of any PSD code.
double dft_magnitude(const std::vector<float>& x, double f_hz, double fs) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t)
        acc += double(x[t]) *
               std::exp(std::complex<double>(0.0, -2.0 * std::numbers::pi * f_hz *
                                                      double(t) / fs));
    return std::abs(acc);
}

}  // namespace

TEST_CASE("scenario schedule") {
    SUBCASE("uniform damage scales the stiffness matrix by the factor") {
        auto spec = short_spec();
        spec.damage = {uniform_damage(4, 0.7, 2.0)};
        auto sched = simulator::build_scenario(spec);
        const Eigen::MatrixXd K0 = sched.stiffness_at(0.0);
        const Eigen::MatrixXd Kd = sched.stiffness_at(3.0);
        CHECK((Kd - 0.7 * K0).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(!sched.damage_active(1.9));
        CHECK(sched.damage_active(2.0));
    }
    SUBCASE("ramp midpoint interpolates the factor linearly") {
        auto spec = short_spec();
        spec.damage = {uniform_damage(4, 0.7, 1.0, 2.0)};
        auto sched = simulator::build_scenario(spec);
        const Eigen::MatrixXd K0 = sched.stiffness_at(0.5);
        const Eigen::MatrixXd Km = sched.stiffness_at(2.0);  // halfway through the ramp
        CHECK((Km - 0.85 * K0).cwiseAbs().maxCoeff() < 1e-12);
        const Eigen::MatrixXd Kend = sched.stiffness_at(3.5);
        CHECK((Kend - 0.7 * K0).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("factor 1 changes nothing") {
        auto spec = short_spec();
        spec.damage = {uniform_damage(4, 1.0, 1.0)};
        auto sched = simulator::build_scenario(spec);
        CHECK((sched.stiffness_at(0.0) - sched.stiffness_at(3.0)).cwiseAbs().maxCoeff() ==
              0.0);
        CHECK(!sched.damage_active(3.0));
    }
    SUBCASE("1-DOF Rayleigh damping is stiffness-proportional") {
        auto spec = short_spec(1);
        spec.stiffness = 4.0;
        spec.damping_ratio = 0.02;
        auto sched = simulator::build_scenario(spec);
        // ground springs at both ends: K = 2k = 8, omega = sqrt(8),
        // c = 2 xi omega m
        CHECK(sched.C(0, 0) ==
              doctest::Approx(2.0 * 0.02 * std::sqrt(8.0)).epsilon(1e-12));
    }
    SUBCASE("damping stays at the baseline after damage") {
        auto spec = short_spec();
        spec.damage = {uniform_damage(4, 0.5, 0.0)};
        auto with = simulator::build_scenario(spec);
        spec.damage.clear();
        auto without = simulator::build_scenario(spec);
        CHECK((with.C - without.C).cwiseAbs().maxCoeff() == 0.0);
        CHECK((with.M - without.M).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("scenario validation") {
    SUBCASE("overlapping zones with conflicting factors rejected") {
        auto spec = short_spec();
        spec.damage = {uniform_damage(4, 0.7, 1.0), uniform_damage(4, 0.5, 2.0)};
        CHECK_THROWS_AS(spec.validate(), DomainError);
    }
    SUBCASE("overlapping zones with the same factor accepted") {
        auto spec = short_spec();
        spec.damage = {uniform_damage(4, 0.7, 1.0), uniform_damage(4, 0.7, 2.0)};
        CHECK_NOTHROW(spec.validate());
    }
    SUBCASE("sweep must respect the Nyquist limit") {
        auto spec = short_spec();
        simulator::SweptSine sweep;
        sweep.f_start_hz = 2.0;
        sweep.f_end_hz = 40.0;  // fs = 64 < 80
        spec.sweep = sweep;
        CHECK_THROWS_AS(spec.validate(), DomainError);
    }
    SUBCASE("damage onset outside the run rejected") {
        auto spec = short_spec();
        spec.damage = {uniform_damage(4, 0.7, 5.0)};
        CHECK_THROWS_AS(spec.validate(), DomainError);
    }
    SUBCASE("non-positive factor rejected") {
        auto spec = short_spec();
        spec.damage = {uniform_damage(4, 0.0, 1.0)};
        CHECK_THROWS_AS(spec.validate(), DomainError);
    }
    SUBCASE("zone range past the chain rejected") {
        auto spec = short_spec();
        auto z = uniform_damage(4, 0.7, 1.0);
        z.node_hi = 4;
        spec.damage = {z};
        CHECK_THROWS_AS(spec.validate(), DomainError);
    }
    SUBCASE("stiffening factors above 1 allowed") {
        auto spec = short_spec();
        spec.damage = {uniform_damage(4, 1.3, 1.0)};
        CHECK_NOTHROW(spec.validate());
    }
}

TEST_CASE("integration") {
    SUBCASE("zero excitation stays at rest") {
        auto spec = short_spec();
        spec.noise_force_std = 0.0;
        auto out = simulator::integrate(spec, simulator::build_scenario(spec));
        for (const auto& series : out.accelerations)
            for (float x : series) CHECK(x == 0.0f);
    }
    SUBCASE("response stays finite over a long run") {
        auto spec = short_spec();
        spec.duration_s = 30.0;
        spec.damping_ratio = 0.0;
        auto out = simulator::integrate(spec, simulator::build_scenario(spec));
        for (const auto& series : out.accelerations)
            for (float x : series) REQUIRE(std::isfinite(x));
    }
    SUBCASE("same seed reproduces the run bitwise") {
        auto spec = short_spec();
        auto a = simulator::integrate(spec, simulator::build_scenario(spec));
        auto b = simulator::integrate(spec, simulator::build_scenario(spec));
        CHECK(a.accelerations == b.accelerations);
        spec.seed = 12;
        auto c = simulator::integrate(spec, simulator::build_scenario(spec));
        CHECK(a.accelerations != c.accelerations);
    }
    SUBCASE("forced 1-DOF spectrum peaks near the resonance") {
        simulator::ScenarioSpec spec;
        spec.node_count = 1;
        spec.node_mass_kg = 1.0;
        // two ground springs act in series on the single mass: k_total = 2k
        const double f0 = 2.0;
        const double w0 = 2.0 * std::numbers::pi * f0;
        spec.stiffness = w0 * w0 / 2.0;
        spec.damping_ratio = 0.02;
        spec.sample_rate_hz = 64.0;
        spec.duration_s = 120.0;
        spec.sensor_noise_snr_db = 0.0;
        spec.seed = 3;
        auto out = simulator::integrate(spec, simulator::build_scenario(spec));
        double best_f = 0.0, best_mag = 0.0;
        for (double f = 0.5; f <= 8.0; f += 0.05) {
            const double mag = dft_magnitude(out.accelerations[0], f, 64.0);
            if (mag > best_mag) {
                best_mag = mag;
                best_f = f;
            }
        }
        CHECK(best_f == doctest::Approx(f0).epsilon(0.08));
    }
    SUBCASE("uniform 0.7 damage shifts every frequency by sqrt(0.7)") {
        auto spec = short_spec();
        spec.damage = {uniform_damage(4, 0.7, 2.0)};
        auto out = simulator::integrate(spec, simulator::build_scenario(spec));
        for (Eigen::Index r = 0; r < 4; ++r)
            CHECK(out.final_modes.omega[r] ==
                  doctest::Approx(std::sqrt(0.7) * out.baseline_modes.omega[r])
                      .epsilon(1e-9));
    }
    SUBCASE("window labels flip once damage is active") {
        auto spec = short_spec();
        spec.window_length = 8;
        spec.stride = 8;
        spec.damage = {uniform_damage(4, 0.7, 2.0)};
        auto out = simulator::integrate(spec, simulator::build_scenario(spec));
        const std::size_t steps = 4 * 64;
        CHECK(out.window_labels.size() == (steps + 7) / 8);
        CHECK(out.window_labels.front() == 0);
        CHECK(out.window_labels.back() == 1);
        // labels are monotone for a single permanent zone
        for (std::size_t w = 1; w < out.window_labels.size(); ++w)
            CHECK(out.window_labels[w] >= out.window_labels[w - 1]);
    }
    SUBCASE("sensor noise changes samples but not their count") {
        auto spec = short_spec();
        auto clean = simulator::integrate(spec, simulator::build_scenario(spec));
        spec.sensor_noise_snr_db = 20.0;
        auto noisy = simulator::integrate(spec, simulator::build_scenario(spec));
        REQUIRE(noisy.accelerations[0].size() == clean.accelerations[0].size());
        CHECK(noisy.accelerations != clean.accelerations);
        // 20 dB SNR: noise power is 1% of signal power, so series stay close
        double num = 0.0, den = 0.0;
        for (std::size_t t = 0; t < clean.accelerations[0].size(); ++t) {
            const double d =
                double(noisy.accelerations[0][t]) - double(clean.accelerations[0][t]);
            num += d * d;
            den += double(clean.accelerations[0][t]) * double(clean.accelerations[0][t]);
        }
        CHECK(num / den < 0.05);
    }
}

TEST_CASE("dataset emission") {
    namespace fs = std::filesystem;
    const std::string dir =
        (fs::temp_directory_path() / "modeconv_sim_test").string();
    fs::remove_all(dir);

    auto spec = short_spec(3);
    spec.damage = {uniform_damage(3, 0.7, 2.0)};
    auto out = simulator::integrate(spec, simulator::build_scenario(spec));

    SUBCASE("binary round trip is bit-exact") {
        const std::string manifest_path =
            simulator::emit_dataset(out, spec, dir, simulator::OutputFormat::Binary);
        auto manifest = DatasetManifest::load(manifest_path);
        REQUIRE(manifest.nodes.size() == 3);
        CHECK(manifest.sample_rate == spec.sample_rate_hz);
        CHECK(manifest.window_labels == out.window_labels);
        CHECK(manifest.edges.size() == 2);
        CHECK(manifest.seed == spec.seed);
        CHECK(manifest.spec_hash == spec.hash());
        for (std::size_t i = 0; i < 3; ++i) {
            const std::string path =
                (fs::path(dir) / manifest.nodes[i].files[0]).string();
            std::ifstream f(path, std::ios::binary);
            REQUIRE(f.good());
            std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(f), {});
            auto series = ingest_binary(bytes);
            REQUIRE(series.size() == out.accelerations[i].size());
            for (std::size_t t = 0; t < series.size(); ++t)
                CHECK(series[t].value == out.accelerations[i][t]);
        }
    }
    SUBCASE("csv variant carries the same sample count") {
        const std::string manifest_path =
            simulator::emit_dataset(out, spec, dir, simulator::OutputFormat::Csv);
        auto manifest = DatasetManifest::load(manifest_path);
        std::ifstream f((fs::path(dir) / manifest.nodes[0].files[0]).string());
        REQUIRE(f.good());
        std::string text((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
        auto table = ingest_csv(text);
        REQUIRE(table.size() == 1);
        CHECK(table.begin()->second.size() == out.accelerations[0].size());
    }
    fs::remove_all(dir);
}

TEST_CASE("scenario spec serialization") {
    auto spec = short_spec();
    spec.damage = {uniform_damage(4, 0.7, 2.0, 0.5)};
    simulator::SweptSine sweep;
    spec.sweep = sweep;

    auto restored = simulator::ScenarioSpec::from_json(spec.to_json());
    CHECK(restored.node_count == 4);
    CHECK(restored.damage.size() == 1);
    CHECK(restored.damage[0].factor == 0.7);
    CHECK(restored.damage[0].ramp_s == 0.5);
    REQUIRE(restored.sweep.has_value());
    CHECK(restored.sweep->f_end_hz == sweep.f_end_hz);
    CHECK(restored.hash() == spec.hash());

    SUBCASE("hash reacts to any field change") {
        auto other = spec;
        other.seed += 1;
        CHECK(other.hash() != spec.hash());
    }
    SUBCASE("partial JSON keeps defaults") {
        auto s = simulator::ScenarioSpec::from_json("{\"node_count\": 2}");
        CHECK(s.node_count == 2);
        CHECK(s.sample_rate_hz == 256.0);
        CHECK(!s.sweep.has_value());
    }
    SUBCASE("malformed JSON is a format error") {
        CHECK_THROWS_AS(simulator::ScenarioSpec::from_json("{"), FormatError);
    }
    SUBCASE("wrong field type is a domain error") {
        CHECK_THROWS_AS(
            simulator::ScenarioSpec::from_json("{\"node_count\": \"two\"}"),
            DomainError);
    }
}
