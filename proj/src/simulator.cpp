#include "modeconv/simulator.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace modeconv::simulator {

namespace {

std::uint64_t next_u64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double next_uniform(std::uint64_t& state) {
    return double(next_u64(state) >> 11) * 0x1.0p-53;
}

/// Box-Muller; platform-independent unlike std::normal_distribution.
double next_gaussian(std::uint64_t& state) {
    double u1 = next_uniform(state);
    while (u1 <= 0.0) u1 = next_uniform(state);
    const double u2 = next_uniform(state);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

double zone_factor(const DamageZone& z, double t_s) {
    if (t_s < z.onset_s) return 1.0;
    if (z.ramp_s <= 0.0) return z.factor;
    const double progress = std::min(1.0, (t_s - z.onset_s) / z.ramp_s);
    return 1.0 + progress * (z.factor - 1.0);
}

Eigen::MatrixXd assemble_from_springs(const Eigen::VectorXd& springs) {
    const Eigen::Index n = springs.size() - 1;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = springs[i] + springs[i + 1];
        if (i + 1 < n) {
            K(i, i + 1) = -springs[i + 1];
            K(i + 1, i) = -springs[i + 1];
        }
    }
    return K;
}

}  // namespace

void ScenarioSpec::validate() const {
    if (node_count < 1) throw DomainError("scenario needs at least one node");
    if (!(node_mass_kg > 0.0)) throw DomainError("node mass must be positive");
    if (!(stiffness > 0.0)) throw DomainError("stiffness must be positive");
    if (!(damping_ratio >= 0.0 && damping_ratio < 1.0))
        throw DomainError("damping ratio must be in [0,1)");
    if (!(sample_rate_hz > 0.0)) throw DomainError("sample rate must be positive");
    if (!(duration_s > 0.0)) throw DomainError("duration must be positive");
    for (const DamageZone& z : damage) {
        if (z.node_hi >= node_count || z.node_lo > z.node_hi)
            throw DomainError("damage zone node range out of bounds");
        if (!(z.factor > 0.0)) throw DomainError("stiffness factor must be positive");
        if (z.onset_s < 0.0 || z.onset_s > duration_s)
            throw DomainError("damage onset must lie within the run duration");
        if (z.ramp_s < 0.0) throw DomainError("ramp duration must be non-negative");
    }
    for (std::size_t a = 0; a < damage.size(); ++a)
        for (std::size_t b = a + 1; b < damage.size(); ++b) {
            const DamageZone& za = damage[a];
            const DamageZone& zb = damage[b];
            const bool overlap = za.node_lo <= zb.node_hi && zb.node_lo <= za.node_hi;
            if (overlap && za.factor != zb.factor)
                throw DomainError("overlapping damage zones with conflicting factors");
        }
    if (sweep && !(sample_rate_hz > 2.0 * sweep->f_end_hz))
        throw DomainError("sample rate must exceed twice the sweep end frequency");
    if (window_length < 1 || stride < 1)
        throw DomainError("window length and stride must be >= 1");
}

StructuralSchedule build_scenario(const ScenarioSpec& spec) {
    spec.validate();
    const auto n = Eigen::Index(spec.node_count);

    StructuralSchedule sched;
    sched.damage = spec.damage;
    sched.damping_ratio = spec.damping_ratio;
    sched.M = Eigen::MatrixXd::Zero(n, n);
    sched.M.diagonal().setConstant(spec.node_mass_kg);
    sched.baseline_springs = Eigen::VectorXd::Constant(n + 1, spec.stiffness);

    // Rayleigh damping fixed at the baseline band edges.
    const Eigen::MatrixXd K0 = assemble_from_springs(sched.baseline_springs);
    const Eigen::VectorXd inv_sqrt_m = sched.M.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        inv_sqrt_m.asDiagonal() * K0 * inv_sqrt_m.asDiagonal());
    const Eigen::VectorXd omega = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    double alpha = 0.0, beta = 0.0;
    const double xi = spec.damping_ratio;
    if (n == 1) {
        beta = omega[0] > 0.0 ? 2.0 * xi / omega[0] : 0.0;
    } else {
        const double w1 = omega[0], w2 = omega[n - 1];
        alpha = 2.0 * xi * w1 * w2 / (w1 + w2);
        beta = 2.0 * xi / (w1 + w2);
    }
    sched.C = alpha * sched.M + beta * K0;
    return sched;
}

Eigen::MatrixXd StructuralSchedule::stiffness_at(double t_s) const {
    Eigen::VectorXd springs = baseline_springs;
    for (const DamageZone& z : damage) {
        const double f = zone_factor(z, t_s);
        if (f == 1.0) continue;
        // springs touching any node in the zone
        for (std::size_t s = z.node_lo; s <= z.node_hi + 1; ++s)
            springs[Eigen::Index(s)] = baseline_springs[Eigen::Index(s)] * f;
    }
    return assemble_from_springs(springs);
}

bool StructuralSchedule::damage_active(double t_s) const {
    for (const DamageZone& z : damage)
        if (z.factor != 1.0 && t_s >= z.onset_s) return true;
    return false;
}

SimOutput integrate(const ScenarioSpec& spec, const StructuralSchedule& schedule) {
    spec.validate();
    const auto n = Eigen::Index(spec.node_count);
    const double dt = 1.0 / spec.sample_rate_hz;
    const auto steps = std::size_t(std::llround(spec.duration_s * spec.sample_rate_hz));

    // Newmark-beta constants, average acceleration variant.
    constexpr double beta = 0.25;
    constexpr double gamma = 0.5;
    const double a0 = 1.0 / (beta * dt * dt);
    const double a1 = gamma / (beta * dt);
    const double a2 = 1.0 / (beta * dt);
    const double a3 = 1.0 / (2.0 * beta) - 1.0;
    const double a4 = gamma / beta - 1.0;
    const double a5 = dt * (gamma / (2.0 * beta) - 1.0);

    std::uint64_t rng = spec.seed * 0x2545F4914F6CDD1Dull + 0x853c49e6748fea9bull;

    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);

    auto force_at = [&](double t) {
        Eigen::VectorXd f(n);
        for (Eigen::Index i = 0; i < n; ++i)
            f[i] = spec.noise_force_std > 0.0 ? spec.noise_force_std * next_gaussian(rng) : 0.0;
        if (spec.sweep) {
            const SweptSine& s = *spec.sweep;
            // Sweep holds at f_end once reached.
            const double t_cap = s.sweep_rate_hz_per_s > 0.0
                                     ? (s.f_end_hz - s.f_start_hz) / s.sweep_rate_hz_per_s
                                     : spec.duration_s;
            const double tc = std::min(t, t_cap);
            double cycles = s.f_start_hz * tc + 0.5 * s.sweep_rate_hz_per_s * tc * tc;
            if (t > t_cap) cycles += s.f_end_hz * (t - t_cap);
            f[n / 2] += s.amplitude_n * std::sin(2.0 * std::numbers::pi * cycles);
        }
        return f;
    };

    Eigen::MatrixXd K = schedule.stiffness_at(0.0);
    Eigen::VectorXd f = force_at(0.0);
    Eigen::VectorXd a = schedule.M.ldlt().solve(f - schedule.C * v - K * u);

    SimOutput out;
    out.sample_rate_hz = spec.sample_rate_hz;
    out.accelerations.assign(std::size_t(n), {});
    for (auto& series : out.accelerations) series.reserve(steps);

    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    bool lu_valid = false;
    double last_k_time = -1.0;

    for (std::size_t step = 0; step < steps; ++step) {
        const double t_next = double(step + 1) * dt;
        const bool k_changes =
            !schedule.damage.empty() &&
            (last_k_time < 0.0 ||
             (K - schedule.stiffness_at(t_next)).cwiseAbs().maxCoeff() > 0.0);
        if (k_changes || !lu_valid) {
            K = schedule.stiffness_at(t_next);
            const Eigen::MatrixXd K_eff = K + a1 * schedule.C + a0 * schedule.M;
            lu.compute(K_eff);
            lu_valid = true;
            last_k_time = t_next;
        }
        f = force_at(t_next);
        const Eigen::VectorXd rhs =
            f + schedule.M * (a0 * u + a2 * v + a3 * a) +
            schedule.C * (a1 * u + a4 * v + a5 * a);
        const Eigen::VectorXd u_next = lu.solve(rhs);
        const Eigen::VectorXd a_next = a0 * (u_next - u) - a2 * v - a3 * a;
        const Eigen::VectorXd v_next = v + dt * ((1.0 - gamma) * a + gamma * a_next);
        u = u_next;
        v = v_next;
        a = a_next;
        for (Eigen::Index i = 0; i < n; ++i)
            out.accelerations[std::size_t(i)].push_back(float(a[i]));
    }

    // Additive sensor noise at the requested SNR.
    if (spec.sensor_noise_snr_db > 0.0) {
        for (auto& series : out.accelerations) {
            double rms = 0.0;
            for (float x : series) rms += double(x) * double(x);
            rms = series.empty() ? 0.0 : std::sqrt(rms / double(series.size()));
            const double noise_std = rms / std::pow(10.0, spec.sensor_noise_snr_db / 20.0);
            for (float& x : series)
                x = float(double(x) + noise_std * next_gaussian(rng));
        }
    }

    // Window labels: anomalous when damage is active anywhere inside.
    const std::size_t count =
        steps == 0 ? 0 : (steps + spec.stride - 1) / spec.stride;
    for (std::size_t w = 0; w < count; ++w) {
        const double t_start = double(w * spec.stride) * dt;
        const double t_end = double(w * spec.stride + spec.window_length) * dt;
        const bool active =
            schedule.damage_active(t_start) || schedule.damage_active(std::min(t_end, spec.duration_s));
        out.window_labels.push_back(active ? 1 : 0);
    }

    structure::StructuralMatrices base;
    base.M = schedule.M;
    base.K = schedule.stiffness_at(0.0);
    base.C = schedule.C;
    base.damping_ratio = spec.damping_ratio;
    out.baseline_modes = structure::solve_eigenmodes(base.M, base.K);
    out.final_modes = structure::solve_eigenmodes(base.M, schedule.stiffness_at(spec.duration_s));
    return out;
}

std::string emit_dataset(const SimOutput& output, const ScenarioSpec& spec,
                         const std::string& out_dir, OutputFormat format) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    DatasetManifest manifest;
    manifest.sample_rate = spec.sample_rate_hz;
    manifest.window_length = spec.window_length;
    manifest.stride = spec.stride;
    manifest.window_labels = output.window_labels;
    manifest.seed = spec.seed;
    manifest.spec_hash = spec.hash();

    for (std::size_t i = 0; i < output.accelerations.size(); ++i) {
        ManifestNode node;
        node.id = "s" + std::to_string(i);
        node.mass = spec.node_mass_kg;
        node.channels = {"acceleration"};

        TimeSeries series;
        series.reserve(output.accelerations[i].size());
        for (std::size_t t = 0; t < output.accelerations[i].size(); ++t)
            series.push_back({std::int32_t(t), output.accelerations[i][t]});

        if (format == OutputFormat::Binary) {
            const std::string name = node.id + "_acceleration.bin";
            const std::string path = (fs::path(out_dir) / name).string();
            const auto bytes = emit_binary(series);
            std::ofstream f(path, std::ios::binary);
            if (!f) throw IoError("cannot open for writing: " + path);
            f.write(reinterpret_cast<const char*>(bytes.data()),
                    std::streamsize(bytes.size()));
            if (!f) throw IoError("write failure: " + path);
            node.files = {name};
        } else {
            const std::string name = node.id + "_acceleration.csv";
            const std::string path = (fs::path(out_dir) / name).string();
            std::ofstream f(path, std::ios::binary);
            if (!f) throw IoError("cannot open for writing: " + path);
            f << emit_csv({{{node.id, "acceleration"}, series}});
            if (!f) throw IoError("write failure: " + path);
            node.files = {name};
        }
        manifest.nodes.push_back(std::move(node));
    }
    for (std::size_t i = 0; i + 1 < output.accelerations.size(); ++i)
        manifest.edges.push_back({i, i + 1, 1.0});

    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    manifest.save(manifest_path);
    return manifest_path;
}

// ---------------------------------------------------------------------------
// ScenarioSpec serialization
// ---------------------------------------------------------------------------

std::string ScenarioSpec::to_json() const {
    nlohmann::ordered_json j;
    j["node_count"] = node_count;
    j["node_mass_kg"] = node_mass_kg;
    j["stiffness"] = stiffness;
    j["damping_ratio"] = damping_ratio;
    j["damage"] = nlohmann::ordered_json::array();
    for (const DamageZone& z : damage)
        j["damage"].push_back({{"node_lo", z.node_lo},
                               {"node_hi", z.node_hi},
                               {"factor", z.factor},
                               {"onset_s", z.onset_s},
                               {"ramp_s", z.ramp_s}});
    j["noise_force_std"] = noise_force_std;
    if (sweep)
        j["sweep"] = {{"f_start_hz", sweep->f_start_hz},
                      {"f_end_hz", sweep->f_end_hz},
                      {"sweep_rate_hz_per_s", sweep->sweep_rate_hz_per_s},
                      {"amplitude_n", sweep->amplitude_n}};
    j["sample_rate_hz"] = sample_rate_hz;
    j["duration_s"] = duration_s;
    j["sensor_noise_snr_db"] = sensor_noise_snr_db;
    j["window_length"] = window_length;
    j["stride"] = stride;
    j["seed"] = seed;
    return j.dump(2);
}

ScenarioSpec ScenarioSpec::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("scenario JSON parse failure: ") + e.what(), 0);
    }
    ScenarioSpec s;
    auto field = [&](const char* name, auto& dst) {
        using T = std::decay_t<decltype(dst)>;
        if (!j.contains(name)) return;
        try {
            dst = j.at(name).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw DomainError(std::string("scenario field '") + name + "' has the wrong type");
        }
    };
    field("node_count", s.node_count);
    field("node_mass_kg", s.node_mass_kg);
    field("stiffness", s.stiffness);
    field("damping_ratio", s.damping_ratio);
    field("noise_force_std", s.noise_force_std);
    field("sample_rate_hz", s.sample_rate_hz);
    field("duration_s", s.duration_s);
    field("sensor_noise_snr_db", s.sensor_noise_snr_db);
    field("window_length", s.window_length);
    field("stride", s.stride);
    field("seed", s.seed);
    if (j.contains("damage")) {
        for (const auto& jz : j.at("damage")) {
            DamageZone z;
            try {
                z.node_lo = jz.at("node_lo").get<std::size_t>();
                z.node_hi = jz.at("node_hi").get<std::size_t>();
                z.factor = jz.at("factor").get<double>();
                z.onset_s = jz.at("onset_s").get<double>();
                z.ramp_s = jz.value("ramp_s", 0.0);
            } catch (const nlohmann::json::exception& e) {
                throw DomainError(std::string("scenario field 'damage': ") + e.what());
            }
            s.damage.push_back(z);
        }
    }
    if (j.contains("sweep") && !j.at("sweep").is_null()) {
        SweptSine sw;
        try {
            const auto& js = j.at("sweep");
            sw.f_start_hz = js.at("f_start_hz").get<double>();
            sw.f_end_hz = js.at("f_end_hz").get<double>();
            sw.sweep_rate_hz_per_s = js.at("sweep_rate_hz_per_s").get<double>();
            sw.amplitude_n = js.at("amplitude_n").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw DomainError(std::string("scenario field 'sweep': ") + e.what());
        }
        s.sweep = sw;
    }
    s.validate();
    return s;
}

ScenarioSpec ScenarioSpec::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scenario spec: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::string ScenarioSpec::hash() const {
    return hash_hex(stable_hash(to_json()));
}

}  // namespace modeconv::simulator
