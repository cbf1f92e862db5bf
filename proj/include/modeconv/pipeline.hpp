#pragma once

#include <string>
#include <vector>

#include "modeconv/anomaly.hpp"
#include "modeconv/core.hpp"
#include "modeconv/filters.hpp"
#include "modeconv/nn.hpp"
#include "modeconv/signal.hpp"
#include "modeconv/structure.hpp"

namespace modeconv::pipeline {

struct LoadedDataset {
    DatasetManifest manifest;
    SensorGraph graph;
    std::vector<SignalWindow> windows;   // raw, not yet normalized
    std::vector<int> labels;
    std::string base_dir;
};

/// Read the manifest and every referenced channel file, align channels
/// per node onto the acceleration time base, window and label.
LoadedDataset load_dataset(const std::string& manifest_path);

/// Node features per window: the l samples of the first channel,
/// followed by mean/std/min/max summaries of each auxiliary channel.
std::vector<Eigen::MatrixXd> extract_features(const std::vector<SignalWindow>& windows);

/// Everything the ModeConv layers need besides the batch itself.
struct ModelContext {
    filters::NormalizedGraph norm_graph;
    structure::StructuralMatrices matrices;
    structure::ModalModel modes;
    structure::FrfEvaluation frf;        // evaluated on the PSD bin grid
    double sample_rate = 1.0;
    std::size_t window_length = 5;
    filters::PsdWeighting weighting = filters::PsdWeighting::MatrixTranspose;
};

ModelContext build_model_context(const SensorGraph& graph, double sample_rate,
                                 std::size_t window_length, double damping_ratio,
                                 double stiffness = 1.0,
                                 filters::PsdWeighting weighting =
                                     filters::PsdWeighting::MatrixTranspose);

/// Per-batch filter bank: batch-averaged cross-PSD, FRF weighting, SVD.
nn::BankProvider make_bank_provider(const ModelContext& ctx, std::size_t retained_modes);

struct ResidualSet {
    std::vector<double> l1_errors;             // per window
    std::vector<Eigen::VectorXd> residuals;    // flattened n x d residual per window
};

/// Reconstruction residuals over the given window indices, batched the
/// same way as training so the per-batch banks match.
ResidualSet compute_residuals(const std::vector<Eigen::MatrixXd>& features,
                              const std::vector<std::size_t>& indices,
                              const nn::AutoencoderParams& params,
                              const ModelContext& ctx,
                              const nn::BankProvider& provider,
                              std::size_t batch_size);

struct EvalResult {
    anomaly::ThresholdModel threshold;
    anomaly::AnomalyReport report;
    std::vector<int> truth;      // aligned with report.scores
};

/// Fit the threshold on the training-split residuals of the primary
/// dataset, then score the test windows (primary test split plus every
/// window of the optional extra dataset).
EvalResult evaluate(const nn::Checkpoint& checkpoint, const LoadedDataset& primary,
                    const LoadedDataset* extra, anomaly::ThresholdKind kind);

}  // namespace modeconv::pipeline
