#include "modeconv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace modeconv::pipeline {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open data file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

TimeSeries load_channel(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open data file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        auto grouped = ingest_csv(buf.str());
        if (grouped.empty()) return {};
        return grouped.begin()->second;
    }
    return ingest_binary(read_file(path));
}

}  // namespace

LoadedDataset load_dataset(const std::string& manifest_path) {
    LoadedDataset out;
    out.manifest = DatasetManifest::load(manifest_path);
    out.graph = out.manifest.graph();
    out.base_dir = fs::path(manifest_path).parent_path().string();

    const std::size_t n = out.manifest.nodes.size();
    if (n == 0) throw DomainError("manifest lists no nodes");
    const std::size_t c = out.manifest.nodes.front().channels.size();

    // Load every channel; the first channel defines the time base.
    std::vector<std::vector<TimeSeries>> series(n);
    std::size_t base_len = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const ManifestNode& node = out.manifest.nodes[i];
        if (node.files.size() != node.channels.size())
            throw DomainError("node '" + node.id + "' file/channel count mismatch");
        for (const std::string& file : node.files) {
            const std::string path = (fs::path(out.base_dir) / file).string();
            series[i].push_back(load_channel(path));
        }
        base_len = std::max(base_len, series[i].front().size());
    }

    AlignedSeries aligned;
    aligned.sample_rate = out.manifest.sample_rate;
    aligned.nodes = n;
    aligned.channels = c;
    aligned.length = base_len;
    aligned.data.assign(n * c * base_len, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const TimeSeries& base = series[i].front();
        std::vector<std::int32_t> base_ts(base.size());
        for (std::size_t t = 0; t < base.size(); ++t) base_ts[t] = base[t].timestamp;
        for (std::size_t ch = 0; ch < c; ++ch) {
            if (ch == 0) {
                for (std::size_t t = 0; t < base.size(); ++t)
                    aligned.at(i, 0, t) = base[t].value;
            } else {
                // slow channels forward-filled onto the fast base
                const std::vector<double> filled = forward_fill(series[i][ch], base_ts);
                for (std::size_t t = 0; t < filled.size(); ++t)
                    aligned.at(i, ch, t) = filled[t];
            }
        }
    }

    out.windows = window_and_pad(aligned, out.manifest.window_length, out.manifest.stride);
    out.labels = out.manifest.window_labels;
    if (out.labels.size() != out.windows.size())
        throw DomainError("manifest label count " + std::to_string(out.labels.size()) +
                          " does not match window count " + std::to_string(out.windows.size()));
    return out;
}

std::vector<Eigen::MatrixXd> extract_features(const std::vector<SignalWindow>& windows) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(windows.size());
    for (const SignalWindow& w : windows) {
        const std::size_t aux = w.channels - 1;
        const std::size_t d = w.samples + 4 * aux;
        Eigen::MatrixXd x(w.nodes, d);
        for (std::size_t i = 0; i < w.nodes; ++i) {
            for (std::size_t t = 0; t < w.samples; ++t) x(Eigen::Index(i), Eigen::Index(t)) = w.at(i, 0, t);
            for (std::size_t ch = 1; ch < w.channels; ++ch) {
                double mean = 0.0, var = 0.0;
                double lo = w.at(i, ch, 0), hi = lo;
                const std::size_t valid = std::max<std::size_t>(1, w.valid_samples());
                for (std::size_t t = 0; t < valid; ++t) {
                    const double v = w.at(i, ch, t);
                    mean += v;
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                mean /= double(valid);
                for (std::size_t t = 0; t < valid; ++t) {
                    const double dv = w.at(i, ch, t) - mean;
                    var += dv * dv;
                }
                var /= double(valid);
                const std::size_t off = w.samples + 4 * (ch - 1);
                x(Eigen::Index(i), Eigen::Index(off + 0)) = mean;
                x(Eigen::Index(i), Eigen::Index(off + 1)) = std::sqrt(var);
                x(Eigen::Index(i), Eigen::Index(off + 2)) = lo;
                x(Eigen::Index(i), Eigen::Index(off + 3)) = hi;
            }
        }
        out.push_back(std::move(x));
    }
    return out;
}

ModelContext build_model_context(const SensorGraph& graph, double sample_rate,
                                 std::size_t window_length, double damping_ratio,
                                 double stiffness, filters::PsdWeighting weighting) {
    ModelContext ctx;
    ctx.sample_rate = sample_rate;
    ctx.window_length = window_length;
    ctx.weighting = weighting;
    ctx.norm_graph = filters::normalized_laplacian(graph);
    ctx.matrices = structure::assemble_matrices(graph, stiffness, damping_ratio);
    ctx.modes = structure::modal_model(ctx.matrices);

    // FRF on the PSD bin grid (angular frequencies).
    Eigen::VectorXd omega = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(window_length));
    for (std::size_t k = 0; k < window_length; ++k) {
        const double f = window_length > 1
                             ? 0.5 * sample_rate * double(k) / double(window_length - 1)
                             : 0.0;
        omega[Eigen::Index(k)] = 2.0 * std::numbers::pi * f;
    }
    ctx.frf = structure::frequency_response(ctx.matrices, ctx.modes, omega,
                                            structure::FrfForm::Direct);
    return ctx;
}

nn::BankProvider make_bank_provider(const ModelContext& ctx, std::size_t retained_modes) {
    const ModelContext* c = &ctx;
    return [c, retained_modes](const std::vector<Eigen::MatrixXd>& batch) {
        if (batch.empty()) throw DomainError("bank provider needs a non-empty batch");
        const std::size_t n = std::size_t(batch.front().rows());
        const std::size_t l = c->window_length;

        // Batch-averaged cross-PSD of the first-channel samples.
        signal::SpectralEstimate mean_spec;
        bool first = true;
        for (const Eigen::MatrixXd& x : batch) {
            SignalWindow w;
            w.sample_rate = c->sample_rate;
            w.nodes = n;
            w.channels = 1;
            w.samples = l;
            w.pad_count = 0;
            w.data.resize(n * l);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t t = 0; t < l; ++t)
                    w.at(i, 0, t) = x(Eigen::Index(i), Eigen::Index(t));
            signal::SpectralEstimate spec = signal::spectral_estimate(w);
            if (first) {
                mean_spec = std::move(spec);
                first = false;
            } else {
                for (std::size_t k = 0; k < mean_spec.S.size(); ++k)
                    mean_spec.S[k] += spec.S[k];
            }
        }
        for (auto& S : mean_spec.S) S /= double(batch.size());

        filters::WeightedPsd weighted = filters::weighted_psd(mean_spec, c->frf, c->weighting);
        return filters::filter_bank(weighted, retained_modes);
    };
}

ResidualSet compute_residuals(const std::vector<Eigen::MatrixXd>& features,
                              const std::vector<std::size_t>& indices,
                              const nn::AutoencoderParams& params,
                              const ModelContext& ctx,
                              const nn::BankProvider& provider,
                              std::size_t batch_size) {
    ResidualSet out;
    const bool needs_bank = std::any_of(
        params.layers.begin(), params.layers.end(),
        [](const nn::Layer& l) { return l.kind == LayerKind::ModeConvFast; });

    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t end = std::min(indices.size(), start + batch_size);
        std::vector<Eigen::MatrixXd> batch;
        batch.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) batch.push_back(features[indices[i]]);

        filters::ComplexFilterBank bank;
        nn::ForwardContext fctx;
        fctx.graph = &ctx.norm_graph;
        if (needs_bank) {
            bank = provider(batch);
            fctx.bank = &bank;
        }
        const std::vector<Eigen::MatrixXd> rec = nn::forward(batch, params, fctx);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const Eigen::MatrixXd residual = rec[b] - batch[b];
            Eigen::VectorXd flat(residual.size());
            Eigen::Index idx = 0;
            for (Eigen::Index r = 0; r < residual.rows(); ++r)
                for (Eigen::Index cc = 0; cc < residual.cols(); ++cc)
                    flat[idx++] = residual(r, cc);
            out.l1_errors.push_back(flat.cwiseAbs().sum());
            out.residuals.push_back(std::move(flat));
        }
    }
    return out;
}

EvalResult evaluate(const nn::Checkpoint& checkpoint, const LoadedDataset& primary,
                    const LoadedDataset* extra, anomaly::ThresholdKind kind) {
    const RunConfig& config = checkpoint.config;

    auto prepare = [&](const LoadedDataset& ds) {
        std::vector<SignalWindow> windows = ds.windows;
        apply_normalization(windows, checkpoint.normalization);
        return extract_features(windows);
    };

    const std::vector<Eigen::MatrixXd> primary_features = prepare(primary);

    // Same deterministic split layout as training.
    std::vector<SignalWindow> scratch = primary.windows;
    Normalization ignored;
    DatasetSplit split = split_and_normalize(scratch, primary.labels, SplitRatios{}, &ignored);

    ModelContext ctx = build_model_context(primary.graph, primary.manifest.sample_rate,
                                           primary.manifest.window_length,
                                           config.damping_ratio);
    nn::BankProvider provider = make_bank_provider(ctx, config.retained_modes);
    const nn::AutoencoderParams& params = checkpoint.best_params.layers.empty()
                                              ? checkpoint.params
                                              : checkpoint.best_params;

    ResidualSet train_res = compute_residuals(primary_features, split.train, params, ctx,
                                              provider, config.batch_size);

    anomaly::ThresholdModel model;
    if (kind == anomaly::ThresholdKind::L1) {
        model = anomaly::fit_l1(train_res.l1_errors, config.percentile);
    } else {
        model = anomaly::fit_mahalanobis(train_res.residuals, config.percentile);
    }

    // Test pool: primary test split plus every extra window.
    std::vector<double> scores;
    std::vector<int> truth;
    ResidualSet test_res = compute_residuals(primary_features, split.test, params, ctx,
                                             provider, config.batch_size);
    for (std::size_t k = 0; k < split.test.size(); ++k) {
        scores.push_back(kind == anomaly::ThresholdKind::L1
                             ? test_res.l1_errors[k]
                             : model.score(test_res.residuals[k]));
        truth.push_back(primary.labels[split.test[k]]);
    }
    if (extra) {
        const std::vector<Eigen::MatrixXd> extra_features = prepare(*extra);
        std::vector<std::size_t> all(extra_features.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        ResidualSet extra_res = compute_residuals(extra_features, all, params, ctx,
                                                  provider, config.batch_size);
        for (std::size_t k = 0; k < all.size(); ++k) {
            scores.push_back(kind == anomaly::ThresholdKind::L1
                                 ? extra_res.l1_errors[k]
                                 : model.score(extra_res.residuals[k]));
            truth.push_back(extra->labels[k]);
        }
    }

    EvalResult result;
    result.threshold = model;
    const std::vector<int> flags = anomaly::classify(scores, model);
    result.report = anomaly::metrics(flags, truth, scores);
    result.report.threshold = model.threshold;
    result.truth = truth;
    return result;
}

}  // namespace modeconv::pipeline
