#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "modeconv/core.hpp"
#include "modeconv/structure.hpp"

namespace modeconv::simulator {

struct DamageZone {
    std::size_t node_lo = 0;
    std::size_t node_hi = 0;       // inclusive
    double factor = 1.0;           // stiffness multiplier, > 0
    double onset_s = 0.0;
    double ramp_s = 0.0;           // 0 = instantaneous
};

struct SweptSine {
    double f_start_hz = 2.5;
    double f_end_hz = 10.0;
    double sweep_rate_hz_per_s = 0.02;
    double amplitude_n = 1.0;
};

struct ScenarioSpec {
    std::size_t node_count = 8;
    double node_mass_kg = 1.0;
    double stiffness = 1.0;
    double damping_ratio = 0.02;
    std::vector<DamageZone> damage;
    double noise_force_std = 1.0;          // white-noise excitation sigma_f (N)
    std::optional<SweptSine> sweep;
    double sample_rate_hz = 256.0;
    double duration_s = 600.0;
    double sensor_noise_snr_db = 20.0;     // additive Gaussian on accelerations
    std::size_t window_length = 5;
    std::size_t stride = 5;
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_json() const;
    static ScenarioSpec from_json(const std::string& text);
    static ScenarioSpec load(const std::string& path);
    /// Hash over the canonical JSON serialization.
    std::string hash() const;
};

/// Piecewise-linear stiffness schedule; M and the Rayleigh damping
/// matrix stay fixed at their baseline values.
struct StructuralSchedule {
    Eigen::MatrixXd M;
    Eigen::MatrixXd C;
    Eigen::VectorXd baseline_springs;      // n+1 chain springs, ground at both ends
    std::vector<DamageZone> damage;
    double damping_ratio = 0.0;

    Eigen::MatrixXd stiffness_at(double t_s) const;
    /// True when any zone with factor != 1 has started ramping.
    bool damage_active(double t_s) const;
};

struct SimOutput {
    double sample_rate_hz = 0.0;
    std::vector<std::vector<float>> accelerations;  // per node
    std::vector<int> window_labels;
    structure::ModalModel baseline_modes;
    structure::ModalModel final_modes;
};

StructuralSchedule build_scenario(const ScenarioSpec& spec);

/// Newmark-beta (beta = 1/4, gamma = 1/2) time integration of the
/// scheduled system under noise + optional swept-sine forcing.
/// Deterministic for a fixed seed.
SimOutput integrate(const ScenarioSpec& spec, const StructuralSchedule& schedule);

enum class OutputFormat { Binary, Csv };

/// Write per-node series plus the dataset manifest; returns the
/// manifest path.
std::string emit_dataset(const SimOutput& output, const ScenarioSpec& spec,
                         const std::string& out_dir,
                         OutputFormat format = OutputFormat::Binary);

}  // namespace modeconv::simulator
