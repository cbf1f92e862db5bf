#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "modeconv/core.hpp"
#include "modeconv/filters.hpp"

namespace modeconv::nn {

/// One graph convolution layer of the autoencoder. Inter-layer
/// activations are real matrices [n x width]; a Laplace layer outputs
/// its real and imaginary channels concatenated (width = 2 * d_c) and a
/// deeper Laplace layer consumes them as a complex pair again.
struct Layer {
    LayerKind kind = LayerKind::ModeConvFast;
    std::size_t in_width = 0;    // real width as seen in the stack
    std::size_t out_width = 0;
    bool complex_input = false;  // Laplace layer fed by a Laplace layer

    Eigen::MatrixXd W_r, W_i;            // fast / laplace
    Eigen::MatrixXd mix;                 // fast: (2 d_c) x d_out
    std::vector<Eigen::MatrixXd> theta;  // cheb: K+1 of d_in x d_out
    Eigen::VectorXd bias;                // d_out (for laplace: 2 d_c)
};

struct AutoencoderParams {
    std::vector<Layer> layers;
    Eigen::MatrixXd readout;        // last width x feature width, linear output
    Eigen::VectorXd readout_bias;
    std::size_t nodes = 0;
    std::size_t feature_width = 0;
    std::size_t bottleneck = 0;
    std::size_t cheb_order = 5;
    std::size_t retained_modes = 1;

    std::string to_json() const;
    static AutoencoderParams from_json(const std::string& text);
};

/// Mirrors AutoencoderParams; one gradient tensor per weight tensor.
struct Gradients {
    std::vector<Layer> layers;       // only the weight fields are meaningful
    Eigen::MatrixXd readout;
    Eigen::VectorXd readout_bias;
};

/// Per-batch inputs the layers need beyond the features.
struct ForwardContext {
    const filters::ComplexFilterBank* bank = nullptr;   // fast layers
    const filters::NormalizedGraph* graph = nullptr;    // laplace + cheb layers
};

struct TrainState {
    std::size_t epoch = 0;
    double learning_rate = 0.0;
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    std::uint64_t seed = 0;
    std::vector<double> gradient_norms;
    double best_validation_loss = 0.0;
    std::size_t best_epoch = 0;
};

struct GraphConConfig {
    double dt = 1.0;
    double alpha = 1.0;     // [0, 2]
    double gamma = 1.0;     // [0, 2]
    double dropout = 0.0;   // [0, 1)

    void validate() const;
};

/// Deterministic Glorot-uniform initialization of all weights.
AutoencoderParams build_autoencoder(std::size_t nodes, std::size_t feature_width,
                                    const RunConfig& config);

/// Forward pass over a batch of [n x d] samples. ReLU between layers,
/// linear at the readout. Deterministic.
std::vector<Eigen::MatrixXd> forward(const std::vector<Eigen::MatrixXd>& batch,
                                     const AutoencoderParams& params,
                                     const ForwardContext& ctx);

double mse_loss(const std::vector<Eigen::MatrixXd>& target,
                const std::vector<Eigen::MatrixXd>& reconstruction);

/// Analytic reverse-mode gradients of mse_loss w.r.t. every weight.
/// The filter bank U is treated as a constant. Returns the loss.
double backward(const std::vector<Eigen::MatrixXd>& batch,
                const AutoencoderParams& params, const ForwardContext& ctx,
                Gradients& grads);

Gradients zero_gradients(const AutoencoderParams& params);

/// params -= lr * grads, skipping frozen groups ("layer<k>.W_r",
/// "layer<k>.W_i", "layer<k>.mix", "layer<k>.theta", "layer<k>.bias",
/// "readout", "readout_bias").
void sgd_step(AutoencoderParams& params, const Gradients& grads, double lr,
              const std::set<std::string>& frozen = {});

/// One training sample: node features plus its context.
struct TrainingSet {
    std::vector<Eigen::MatrixXd> features;   // per window, [n x d]
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

/// Recomputes the per-batch filter bank when the net has fast layers.
using BankProvider =
    std::function<filters::ComplexFilterBank(const std::vector<Eigen::MatrixXd>& batch)>;

/// Plain gradient descent, fixed batch order, fully deterministic for a
/// given seed. Keeps the best-validation checkpoint in `best`.
TrainState train(const TrainingSet& data, AutoencoderParams& params,
                 const RunConfig& config, const filters::NormalizedGraph& graph,
                 const BankProvider& bank_provider,
                 AutoencoderParams* best = nullptr);

/// One GraphCON IMEX update around an arbitrary layer map:
/// Y' = Y + dt (ReLU(layer(X)) - alpha Y - gamma X); X' = X + dt Y'.
/// Dropout applies only in training mode, driven by the given RNG.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd>
graphcon_step(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
              const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& layer,
              const GraphConConfig& cfg, bool training = false,
              std::uint64_t* rng_state = nullptr);

// Checkpoint: params + config + normalization + seed, versioned JSON.
struct Checkpoint {
    int version = 1;
    AutoencoderParams params;
    AutoencoderParams best_params;
    RunConfig config;
    Normalization normalization;
    TrainState state;

    std::string to_json() const;
    static Checkpoint from_json(const std::string& text);
    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace modeconv::nn
