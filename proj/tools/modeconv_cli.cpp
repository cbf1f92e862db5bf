// modeconv: simulate / train / eval / bench for the vibration pipeline.
//
// Exit codes: 0 success, 2 validation error (bad flags, bad config,
// out-of-contract input), 1 anything else. All reports are free of
// timestamps so identical inputs and seeds give byte-identical files.

#include <chrono>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "modeconv/anomaly.hpp"
#include "modeconv/core.hpp"
#include "modeconv/errors.hpp"
#include "modeconv/filters.hpp"
#include "modeconv/nn.hpp"
#include "modeconv/pipeline.hpp"
#include "modeconv/simulator.hpp"
#include "modeconv/svd.hpp"

namespace fs = std::filesystem;
using namespace modeconv;

namespace {

constexpr const char* kCodeVersion = "modeconv 1.0.0";

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failure: " + path);
}

LayerKind layer_from_name(const std::string& name) {
    if (name == "fast") return LayerKind::ModeConvFast;
    if (name == "laplace") return LayerKind::ModeConvLaplace;
    if (name == "cheb") return LayerKind::ChebConv;
    throw ConfigError("unknown layer kind: " + name);
}

std::string layer_name(LayerKind k) {
    switch (k) {
        case LayerKind::ModeConvFast: return "fast";
        case LayerKind::ModeConvLaplace: return "laplace";
        case LayerKind::ChebConv: return "cheb";
    }
    return "fast";
}

nlohmann::ordered_json run_config_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["window_length"] = c.window_length;
    j["stride"] = c.stride;
    j["batch_size"] = c.batch_size;
    j["layer_count"] = c.layer_count;
    j["hidden_dim"] = c.hidden_dim;
    j["bottleneck"] = c.bottleneck;
    j["cheb_order"] = c.cheb_order;
    j["retained_modes"] = c.retained_modes;
    j["damping_ratio"] = c.damping_ratio;
    j["percentile"] = c.percentile;
    j["learning_rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["seed"] = c.seed;
    j["layer_kind"] = layer_name(c.layer_kind);
    return j;
}

/// Partial run-config file: absent keys keep their defaults.
RunConfig run_config_from_file(const std::string& path) {
    RunConfig c;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("window_length", c.window_length);
    get("stride", c.stride);
    get("batch_size", c.batch_size);
    get("layer_count", c.layer_count);
    get("hidden_dim", c.hidden_dim);
    get("bottleneck", c.bottleneck);
    get("cheb_order", c.cheb_order);
    get("retained_modes", c.retained_modes);
    get("damping_ratio", c.damping_ratio);
    get("percentile", c.percentile);
    get("learning_rate", c.learning_rate);
    get("epochs", c.epochs);
    get("seed", c.seed);
    if (j.contains("layer_kind"))
        c.layer_kind = layer_from_name(j.at("layer_kind").get<std::string>());
    return c;
}

std::string config_hash(const RunConfig& c) {
    return hash_hex(stable_hash(run_config_json(c).dump()));
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, const std::string& format) {
    simulator::ScenarioSpec spec = simulator::ScenarioSpec::load(config_path);
    if (seed) spec.seed = *seed;
    spec.validate();
    simulator::StructuralSchedule schedule = simulator::build_scenario(spec);
    simulator::SimOutput output = simulator::integrate(spec, schedule);
    const auto fmt = format == "csv" ? simulator::OutputFormat::Csv
                                     : simulator::OutputFormat::Binary;
    const std::string manifest = simulator::emit_dataset(output, spec, out_dir, fmt);
    std::cout << manifest << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

std::string loss_history_csv(const nn::TrainState& state) {
    std::ostringstream csv;
    csv << "epoch,train_loss,validation_loss,gradient_norm\n";
    for (std::size_t e = 0; e < state.train_loss.size(); ++e) {
        csv << (e + 1) << ',' << state.train_loss[e] << ','
            << (e < state.validation_loss.size() ? state.validation_loss[e] : 0.0) << ','
            << (e < state.gradient_norms.size() ? state.gradient_norms[e] : 0.0) << '\n';
    }
    return csv.str();
}

int cmd_train(const std::string& manifest_path, const std::string& out_dir,
              const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> epochs, const std::string& layer,
              const std::string& resume_path) {
    pipeline::LoadedDataset ds = pipeline::load_dataset(manifest_path);

    nn::Checkpoint resume;
    const bool resuming = !resume_path.empty();
    RunConfig config;
    if (resuming) {
        resume = nn::Checkpoint::load(resume_path);
        config = resume.config;
    } else if (!config_path.empty()) {
        config = run_config_from_file(config_path);
    }
    if (seed) config.seed = *seed;
    if (epochs) config.epochs = *epochs;
    if (!layer.empty()) config.layer_kind = layer_from_name(layer);
    config.window_length = ds.manifest.window_length;
    config.stride = ds.manifest.stride;
    config.validate(ds.graph.node_count);

    for (int label : ds.labels)
        if (label != 0 && label != 1)
            throw DataError("window label outside {0, 1}");

    std::vector<SignalWindow> windows = ds.windows;
    Normalization norm;
    DatasetSplit split = split_and_normalize(windows, ds.labels, SplitRatios{}, &norm);
    for (std::size_t idx : split.train)
        if (ds.labels[idx] != 0)
            throw ConfigError("training split contains anomalous windows");

    nn::TrainingSet data;
    data.features = pipeline::extract_features(windows);
    data.train = split.train;
    data.validation = split.validation;
    const std::size_t feature_width = std::size_t(data.features.front().cols());

    pipeline::ModelContext ctx = pipeline::build_model_context(
        ds.graph, ds.manifest.sample_rate, ds.manifest.window_length, config.damping_ratio);
    nn::BankProvider provider = pipeline::make_bank_provider(ctx, config.retained_modes);

    nn::AutoencoderParams params =
        resuming ? resume.params
                 : nn::build_autoencoder(ds.graph.node_count, feature_width, config);
    if (resuming && config.epochs <= resume.state.epoch) {
        throw ConfigError("resume target epoch " + std::to_string(config.epochs) +
                          " not beyond checkpoint epoch " + std::to_string(resume.state.epoch));
    }

    RunConfig run = config;
    if (resuming) run.epochs = config.epochs - resume.state.epoch;
    nn::AutoencoderParams best;
    nn::TrainState state = nn::train(data, params, run, ctx.norm_graph, provider, &best);

    nn::Checkpoint ckpt;
    ckpt.config = config;
    ckpt.params = params;
    ckpt.best_params = best;
    ckpt.normalization = norm;
    ckpt.state = state;
    if (resuming) {
        // stitch the histories so the checkpoint reads like one run
        nn::TrainState merged = resume.state;
        merged.epoch += state.epoch;
        merged.train_loss.insert(merged.train_loss.end(), state.train_loss.begin(),
                                 state.train_loss.end());
        merged.validation_loss.insert(merged.validation_loss.end(),
                                      state.validation_loss.begin(),
                                      state.validation_loss.end());
        merged.gradient_norms.insert(merged.gradient_norms.end(),
                                     state.gradient_norms.begin(),
                                     state.gradient_norms.end());
        if (state.best_validation_loss < resume.state.best_validation_loss) {
            merged.best_validation_loss = state.best_validation_loss;
            merged.best_epoch = resume.state.epoch + state.best_epoch;
        } else {
            ckpt.best_params = resume.best_params;
        }
        ckpt.state = merged;
    }

    fs::create_directories(out_dir);
    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.json").string();
    ckpt.save(ckpt_path);
    write_text((fs::path(out_dir) / "loss_history.csv").string(),
               loss_history_csv(ckpt.state));
    std::cout << ckpt_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint_path, const std::string& manifest_path,
             const std::string& extra_manifest, const std::string& threshold_name,
             const std::string& out_dir) {
    nn::Checkpoint ckpt = nn::Checkpoint::load(checkpoint_path);
    pipeline::LoadedDataset primary = pipeline::load_dataset(manifest_path);
    std::optional<pipeline::LoadedDataset> extra;
    if (!extra_manifest.empty()) extra = pipeline::load_dataset(extra_manifest);

    const anomaly::ThresholdKind kind = threshold_name == "mahalanobis"
                                            ? anomaly::ThresholdKind::Mahalanobis
                                            : anomaly::ThresholdKind::L1;
    pipeline::EvalResult result =
        pipeline::evaluate(ckpt, primary, extra ? &*extra : nullptr, kind);

    nlohmann::ordered_json j = nlohmann::ordered_json::parse(result.report.to_json());
    j["threshold_kind"] = threshold_name;
    j["config_hash"] = config_hash(ckpt.config);
    j["code_version"] = kCodeVersion;

    fs::create_directories(out_dir);
    write_text((fs::path(out_dir) / "report.json").string(), j.dump(2) + "\n");
    write_text((fs::path(out_dir) / "report.csv").string(),
               anomaly::AnomalyReport::csv_header() + "\n" +
                   result.report.to_csv_row() + "\n");

    std::ostringstream scores;
    scores << "window,score,flag,truth\n";
    for (std::size_t i = 0; i < result.report.scores.size(); ++i)
        scores << i << ',' << result.report.scores[i] << ',' << result.report.flags[i]
               << ',' << result.truth[i] << '\n';
    write_text((fs::path(out_dir) / "scores.csv").string(), scores.str());

    std::cout << "auc " << result.report.auc << " f1 " << result.report.f1 << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchRow {
    std::string kind;
    std::size_t n = 0;
    std::size_t edges = 0;
    std::size_t order_or_modes = 0;
    std::uint64_t multiply_adds = 0;
    double median_us = 0.0;
};

filters::ComplexFilterBank random_bank(std::size_t n, std::size_t m, std::uint64_t seed) {
    // orthonormal columns from the SVD of a seeded random complex matrix
    std::uint64_t s = seed * 0x2545F4914F6CDD1Dull + 0x9e3779b97f4a7c15ull;
    auto next = [&s]() {
        s += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return double((z >> 11)) * 0x1.0p-53 * 2.0 - 1.0;
    };
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n),
                                                static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index k = 0; k < A.cols(); ++k)
            A(i, k) = std::complex<double>(next(), next());
    svd::SvdResult dec = svd::jacobi_svd(A);
    filters::ComplexFilterBank bank;
    bank.U = dec.U.leftCols(Eigen::Index(m));
    bank.epsilon = dec.sigma.head(Eigen::Index(m));
    return bank;
}

int cmd_bench(const std::vector<std::size_t>& sizes, const std::vector<std::string>& kinds,
              std::size_t order, std::size_t repetitions, std::uint64_t seed,
              const std::string& out_dir) {
    constexpr std::size_t d = 8;
    std::vector<BenchRow> rows;

    for (std::size_t n : sizes) {
        if (n < 2) throw ConfigError("bench sizes must be >= 2 nodes");
        const SensorGraph graph = SensorGraph::fully_connected(n);
        const filters::NormalizedGraph norm = filters::normalized_laplacian(graph);
        const std::size_t m = std::max<std::size_t>(1, n / 4);

        std::uint64_t s = seed + n;
        auto next = [&s]() {
            s += 0x9e3779b97f4a7c15ull;
            std::uint64_t z = s;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            return double((z >> 11)) * 0x1.0p-53 * 2.0 - 1.0;
        };
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                  static_cast<Eigen::Index>(d));
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index k = 0; k < x.cols(); ++k) x(i, k) = next();

        for (const std::string& kind : kinds) {
            BenchRow row;
            row.kind = kind;
            row.n = n;
            row.edges = norm.edge_count;
            std::vector<double> times;
            filters::OpCounter counter;
            if (kind == "fast") {
                const filters::ComplexFilterBank bank = random_bank(n, m, seed);
                Eigen::MatrixXd W_r = Eigen::MatrixXd::Constant(d, d, 0.1);
                Eigen::MatrixXd W_i = Eigen::MatrixXd::Constant(d, d, 0.05);
                Eigen::MatrixXd mix = Eigen::MatrixXd::Constant(2 * d, d, 0.1);
                row.order_or_modes = m;
                for (std::size_t r = 0; r < repetitions; ++r) {
                    counter.reset();
                    const auto t0 = std::chrono::steady_clock::now();
                    volatile double sink =
                        filters::modeconv_fast_forward(x, bank, W_r, W_i, mix, &counter)
                            .sum();
                    (void)sink;
                    const auto t1 = std::chrono::steady_clock::now();
                    times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
                }
            } else if (kind == "laplace") {
                Eigen::MatrixXd W_r = Eigen::MatrixXd::Constant(d, d, 0.1);
                Eigen::MatrixXd W_i = Eigen::MatrixXd::Constant(d, d, 0.05);
                Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(d));
                row.order_or_modes = 0;
                for (std::size_t r = 0; r < repetitions; ++r) {
                    counter.reset();
                    const auto t0 = std::chrono::steady_clock::now();
                    volatile double sink =
                        filters::modeconv_laplace_forward(x, zero, norm, W_r, W_i, &counter)
                            .first.sum();
                    (void)sink;
                    const auto t1 = std::chrono::steady_clock::now();
                    times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
                }
            } else if (kind == "cheb") {
                filters::ChebFilter filter;
                filter.order = order;
                filter.scaled_laplacian =
                    2.0 / norm.lambda_max * norm.L -
                    Eigen::MatrixXd::Identity(Eigen::Index(n), Eigen::Index(n));
                for (std::size_t k = 0; k <= order; ++k)
                    filter.theta.push_back(Eigen::MatrixXd::Constant(d, d, 0.1));
                row.order_or_modes = order;
                for (std::size_t r = 0; r < repetitions; ++r) {
                    counter.reset();
                    const auto t0 = std::chrono::steady_clock::now();
                    volatile double sink = filters::cheb_forward(x, filter, &counter).sum();
                    (void)sink;
                    const auto t1 = std::chrono::steady_clock::now();
                    times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
                }
            } else {
                throw ConfigError("unknown bench kind: " + kind);
            }
            row.multiply_adds = counter.multiply_adds;
            std::sort(times.begin(), times.end());
            row.median_us = times[times.size() / 2];
            rows.push_back(row);
        }
    }

    nlohmann::ordered_json j;
    j["code_version"] = kCodeVersion;
    j["feature_width"] = d;
    j["repetitions"] = repetitions;
    j["rows"] = nlohmann::ordered_json::array();
    std::ostringstream csv;
    csv << "kind,n,edges,order_or_modes,multiply_adds,median_us\n";
    for (const BenchRow& r : rows) {
        nlohmann::ordered_json jr;
        jr["kind"] = r.kind;
        jr["n"] = r.n;
        jr["edges"] = r.edges;
        jr["edges_expected"] = r.n * (r.n - 1) / 2;
        jr["order_or_modes"] = r.order_or_modes;
        jr["multiply_adds"] = r.multiply_adds;
        jr["median_us"] = r.median_us;
        j["rows"].push_back(jr);
        csv << r.kind << ',' << r.n << ',' << r.edges << ',' << r.order_or_modes << ','
            << r.multiply_adds << ',' << r.median_us << '\n';
        std::cout << r.kind << " n=" << r.n << " |E|=" << r.edges
                  << " multiply_adds=" << r.multiply_adds << " median_us=" << r.median_us
                  << "\n";
    }
    if (!out_dir.empty()) {
        write_text((fs::path(out_dir) / "bench.json").string(), j.dump(2) + "\n");
        write_text((fs::path(out_dir) / "bench.csv").string(), csv.str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vibration-based anomaly detection pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", manifest_path, extra_manifest;
    std::string checkpoint_path, resume_path, layer, threshold_name = "l1";
    std::string format = "binary";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::vector<std::size_t> sizes{32, 64, 128};
    std::vector<std::string> kinds{"fast", "cheb"};
    std::size_t order = 5, repetitions = 5;

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
    sim->add_option("--config", config_path, "Scenario JSON")->required();
    sim->add_option("--out", out_dir, "Output directory")->required();
    sim->add_option("--seed", seed, "Override the scenario seed");
    sim->add_option("--format", format, "binary or csv")
        ->check(CLI::IsMember({"binary", "csv"}));

    auto* train = app.add_subcommand("train", "Train the graph autoencoder");
    train->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    train->add_option("--out", out_dir, "Output directory")->required();
    train->add_option("--config", config_path, "Run-config JSON (partial allowed)");
    train->add_option("--seed", seed, "Initialization seed");
    train->add_option("--epochs", epochs, "Total epoch count");
    train->add_option("--layer", layer, "fast, laplace or cheb")
        ->check(CLI::IsMember({"fast", "laplace", "cheb"}));
    train->add_option("--resume", resume_path, "Checkpoint to continue from");

    auto* eval = app.add_subcommand("eval", "Score a dataset against a checkpoint");
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON")->required();
    eval->add_option("--manifest", manifest_path, "Primary dataset manifest")->required();
    eval->add_option("--damaged", extra_manifest, "Extra manifest scored in full");
    eval->add_option("--threshold", threshold_name, "l1 or mahalanobis")
        ->check(CLI::IsMember({"l1", "mahalanobis"}));
    eval->add_option("--out", out_dir, "Output directory")->required();

    auto* bench = app.add_subcommand("bench", "Count and time layer forwards");
    bench->add_option("--sizes", sizes, "Node counts, fully connected graphs");
    bench->add_option("--kinds", kinds, "Subset of fast, laplace, cheb");
    bench->add_option("--order", order, "Chebyshev order K");
    bench->add_option("--repetitions", repetitions, "Timing repetitions (median)");
    bench->add_option("--seed", seed, "Input seed");
    bench->add_option("--out", out_dir, "Output directory (optional)");

    try {
        app.parse(argc, argv);
        if (sim->parsed()) return cmd_simulate(config_path, out_dir, seed, format);
        if (train->parsed())
            return cmd_train(manifest_path, out_dir, config_path, seed, epochs, layer,
                             resume_path);
        if (eval->parsed())
            return cmd_eval(checkpoint_path, manifest_path, extra_manifest,
                            threshold_name, out_dir);
        if (bench->parsed())
            return cmd_bench(sizes, kinds, order, repetitions, seed.value_or(0), out_dir);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
