#include "modeconv/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace modeconv::nn {

namespace {

// splitmix64; self-contained so results never depend on libstdc++
// distribution internals.
std::uint64_t next_u64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double next_uniform(std::uint64_t& state) {
    return double(next_u64(state) >> 11) * 0x1.0p-53;  // [0, 1)
}

Eigen::MatrixXd glorot(std::uint64_t& state, Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / double(rows + cols));
    Eigen::MatrixXd W(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            W(r, c) = (2.0 * next_uniform(state) - 1.0) * limit;
    return W;
}

Eigen::VectorXd colsum(const Eigen::MatrixXd& G) { return G.colwise().sum().transpose(); }

// ---------------------------------------------------------------------------
// Per-layer forward/backward with tape
// ---------------------------------------------------------------------------

struct LayerTape {
    Eigen::MatrixXd input;                 // real activation entering the layer
    Eigen::MatrixXcd p;                    // fast: U^H x
    Eigen::MatrixXd cat;                   // fast: [Re z, Im z]
    Eigen::MatrixXd m_real, m_imag;        // laplace messages before aggregation
    std::vector<Eigen::MatrixXd> cheb_t;   // cheb: T_0..T_K
    Eigen::MatrixXd pre_activation;
    Eigen::ArrayXXd relu_mask;             // empty when no ReLU applied
};

Eigen::MatrixXd layer_forward(const Layer& layer, const Eigen::MatrixXd& x,
                              const ForwardContext& ctx, LayerTape& tape) {
    if (std::size_t(x.cols()) != layer.in_width)
        throw DomainError("layer input width mismatch: expected " +
                          std::to_string(layer.in_width) + ", got " +
                          std::to_string(x.cols()));
    tape.input = x;
    Eigen::MatrixXd y;

    switch (layer.kind) {
        case LayerKind::ModeConvFast: {
            if (!ctx.bank) throw DomainError("ModeConvFast layer requires a filter bank");
            const Eigen::MatrixXcd& U = ctx.bank->U;
            const Eigen::MatrixXcd Wc =
                layer.W_r.cast<std::complex<double>>() +
                std::complex<double>(0, 1) * layer.W_i.cast<std::complex<double>>();
            tape.p = U.adjoint() * x.cast<std::complex<double>>();
            const Eigen::MatrixXcd z = U * (tape.p * Wc);
            tape.cat.resize(x.rows(), 2 * layer.W_r.cols());
            tape.cat << z.real(), z.imag();
            y = tape.cat * layer.mix;
            y.rowwise() += layer.bias.transpose();
            break;
        }
        case LayerKind::ModeConvLaplace: {
            if (!ctx.graph) throw DomainError("ModeConvLaplace layer requires a graph");
            const Eigen::Index d_c = layer.W_r.cols();
            Eigen::MatrixXd xr, xi;
            if (layer.complex_input) {
                const Eigen::Index half = x.cols() / 2;
                xr = x.leftCols(half);
                xi = x.rightCols(half);
            } else {
                xr = x;
                xi = Eigen::MatrixXd::Zero(x.rows(), x.cols());
            }
            tape.m_real = xr * layer.W_r - xi * layer.W_i;
            tape.m_imag = xr * layer.W_i + xi * layer.W_r;
            y.resize(x.rows(), 2 * d_c);
            y << ctx.graph->A_norm * tape.m_real, ctx.graph->A_norm * tape.m_imag;
            y.rowwise() += layer.bias.transpose();
            break;
        }
        case LayerKind::ChebConv: {
            if (!ctx.graph) throw DomainError("ChebConv layer requires a graph");
            const double lmax = ctx.graph->lambda_max > 0.0 ? ctx.graph->lambda_max : 2.0;
            const Eigen::MatrixXd Ls =
                2.0 / lmax * ctx.graph->L -
                Eigen::MatrixXd::Identity(ctx.graph->L.rows(), ctx.graph->L.cols());
            tape.cheb_t.clear();
            tape.cheb_t.push_back(x);
            if (layer.theta.size() > 1) tape.cheb_t.push_back(Ls * x);
            for (std::size_t k = 2; k < layer.theta.size(); ++k)
                tape.cheb_t.push_back(2.0 * Ls * tape.cheb_t[k - 1] - tape.cheb_t[k - 2]);
            y = Eigen::MatrixXd::Zero(x.rows(), layer.theta.front().cols());
            for (std::size_t k = 0; k < layer.theta.size(); ++k)
                y += tape.cheb_t[k] * layer.theta[k];
            y.rowwise() += layer.bias.transpose();
            break;
        }
    }
    tape.pre_activation = y;
    return y;
}

/// dL/dx given dL/d(pre-activation); accumulates into grads.
Eigen::MatrixXd layer_backward(const Layer& layer, const LayerTape& tape,
                               const ForwardContext& ctx, const Eigen::MatrixXd& G,
                               Layer& grad) {
    switch (layer.kind) {
        case LayerKind::ModeConvFast: {
            const Eigen::MatrixXcd& U = ctx.bank->U;
            const Eigen::Index d_c = layer.W_r.cols();
            grad.bias += colsum(G);
            grad.mix += tape.cat.transpose() * G;
            const Eigen::MatrixXd Gcat = G * layer.mix.transpose();
            const Eigen::MatrixXcd Gz =
                Gcat.leftCols(d_c).cast<std::complex<double>>() +
                std::complex<double>(0, 1) * Gcat.rightCols(d_c).cast<std::complex<double>>();
            const Eigen::MatrixXcd Gq = U.adjoint() * Gz;
            const Eigen::MatrixXcd gWc = tape.p.adjoint() * Gq;
            grad.W_r += gWc.real();
            grad.W_i += gWc.imag();
            const Eigen::MatrixXcd Wc =
                layer.W_r.cast<std::complex<double>>() +
                std::complex<double>(0, 1) * layer.W_i.cast<std::complex<double>>();
            const Eigen::MatrixXcd Gp = Gq * Wc.adjoint();
            return (U * Gp).real();
        }
        case LayerKind::ModeConvLaplace: {
            const Eigen::Index d_c = layer.W_r.cols();
            grad.bias += colsum(G);
            const Eigen::MatrixXd Gyr = G.leftCols(d_c);
            const Eigen::MatrixXd Gyi = G.rightCols(d_c);
            const Eigen::MatrixXd& A = ctx.graph->A_norm;  // symmetric
            const Eigen::MatrixXd GMr = A * Gyr;
            const Eigen::MatrixXd GMi = A * Gyi;
            Eigen::MatrixXd xr, xi;
            if (layer.complex_input) {
                const Eigen::Index half = tape.input.cols() / 2;
                xr = tape.input.leftCols(half);
                xi = tape.input.rightCols(half);
            } else {
                xr = tape.input;
                xi = Eigen::MatrixXd::Zero(tape.input.rows(), tape.input.cols());
            }
            grad.W_r += xr.transpose() * GMr + xi.transpose() * GMi;
            grad.W_i += xr.transpose() * GMi - xi.transpose() * GMr;
            const Eigen::MatrixXd GXr = GMr * layer.W_r.transpose() + GMi * layer.W_i.transpose();
            if (!layer.complex_input) return GXr;
            const Eigen::MatrixXd GXi = GMi * layer.W_r.transpose() - GMr * layer.W_i.transpose();
            Eigen::MatrixXd Gx(tape.input.rows(), tape.input.cols());
            Gx << GXr, GXi;
            return Gx;
        }
        case LayerKind::ChebConv: {
            grad.bias += colsum(G);
            const double lmax = ctx.graph->lambda_max > 0.0 ? ctx.graph->lambda_max : 2.0;
            const Eigen::MatrixXd Ls =
                2.0 / lmax * ctx.graph->L -
                Eigen::MatrixXd::Identity(ctx.graph->L.rows(), ctx.graph->L.cols());
            const std::size_t K1 = layer.theta.size();
            std::vector<Eigen::MatrixXd> adj(K1);
            for (std::size_t k = 0; k < K1; ++k) {
                grad.theta[k] += tape.cheb_t[k].transpose() * G;
                adj[k] = G * layer.theta[k].transpose();
            }
            // Reverse the recursion T_k = 2 Ls T_{k-1} - T_{k-2}.
            for (std::size_t k = K1; k-- > 2;) {
                adj[k - 1] += 2.0 * (Ls * adj[k]);
                adj[k - 2] -= adj[k];
            }
            Eigen::MatrixXd Gx = adj[0];
            if (K1 > 1) Gx += Ls * adj[1];  // T_1 = Ls x
            return Gx;
        }
    }
    throw NumericError("unreachable layer kind");
}

}  // namespace

void GraphConConfig::validate() const {
    if (!(dt > 0.0)) throw DomainError("GraphCON dt must be positive");
    if (alpha < 0.0 || alpha > 2.0 || gamma < 0.0 || gamma > 2.0)
        throw DomainError("GraphCON alpha and gamma must lie in [0,2]");
    if (dropout < 0.0 || dropout >= 1.0)
        throw DomainError("GraphCON dropout must lie in [0,1)");
}

AutoencoderParams build_autoencoder(std::size_t nodes, std::size_t feature_width,
                                    const RunConfig& config) {
    config.validate(nodes);
    AutoencoderParams params;
    params.nodes = nodes;
    params.feature_width = feature_width;
    params.bottleneck = config.bottleneck;
    params.cheb_order = config.cheb_order;
    params.retained_modes = config.retained_modes;

    const std::size_t L = config.layer_count;
    // Nominal widths: encoder non-increasing to the bottleneck, decoder
    // mirror; the linear readout restores the feature width.
    std::vector<std::size_t> widths(L + 1);
    widths[0] = feature_width;
    const std::size_t enc = (L + 1) / 2;
    const std::size_t hidden = std::min(config.hidden_dim, feature_width);
    const std::size_t bott = std::min(config.bottleneck, hidden);
    for (std::size_t k = 1; k < enc; ++k) widths[k] = hidden;
    widths[enc] = bott;
    for (std::size_t k = enc + 1; k <= L; ++k)
        widths[k] = widths[L - k];  // mirror of the encoder side

    std::uint64_t rng = config.seed * 0x2545F4914F6CDD1Dull + 0x9e3779b97f4a7c15ull;

    std::size_t real_width = feature_width;
    bool prev_laplace = false;
    for (std::size_t k = 0; k < L; ++k) {
        Layer layer;
        layer.kind = config.layer_kind;
        layer.in_width = real_width;
        const std::size_t d_c = std::max<std::size_t>(1, widths[k + 1]);
        switch (config.layer_kind) {
            case LayerKind::ModeConvFast: {
                layer.W_r = glorot(rng, Eigen::Index(real_width), Eigen::Index(d_c));
                layer.W_i = glorot(rng, Eigen::Index(real_width), Eigen::Index(d_c));
                layer.mix = glorot(rng, Eigen::Index(2 * d_c), Eigen::Index(d_c));
                layer.bias = Eigen::VectorXd::Zero(Eigen::Index(d_c));
                layer.out_width = d_c;
                break;
            }
            case LayerKind::ModeConvLaplace: {
                layer.complex_input = prev_laplace;
                const std::size_t d_inc = layer.complex_input ? real_width / 2 : real_width;
                layer.W_r = glorot(rng, Eigen::Index(d_inc), Eigen::Index(d_c));
                layer.W_i = glorot(rng, Eigen::Index(d_inc), Eigen::Index(d_c));
                layer.bias = Eigen::VectorXd::Zero(Eigen::Index(2 * d_c));
                layer.out_width = 2 * d_c;
                prev_laplace = true;
                break;
            }
            case LayerKind::ChebConv: {
                layer.theta.resize(config.cheb_order + 1);
                for (auto& th : layer.theta)
                    th = glorot(rng, Eigen::Index(real_width), Eigen::Index(d_c));
                layer.bias = Eigen::VectorXd::Zero(Eigen::Index(d_c));
                layer.out_width = d_c;
                break;
            }
        }
        real_width = layer.out_width;
        params.layers.push_back(std::move(layer));
    }
    params.readout = glorot(rng, Eigen::Index(real_width), Eigen::Index(feature_width));
    params.readout_bias = Eigen::VectorXd::Zero(Eigen::Index(feature_width));
    return params;
}

namespace {

struct SampleTape {
    std::vector<LayerTape> layers;
    Eigen::MatrixXd last_activation;
    Eigen::MatrixXd output;
};

SampleTape forward_one(const Eigen::MatrixXd& x, const AutoencoderParams& params,
                       const ForwardContext& ctx) {
    SampleTape tape;
    tape.layers.resize(params.layers.size());
    Eigen::MatrixXd h = x;
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        h = layer_forward(params.layers[k], h, ctx, tape.layers[k]);
        const bool relu = k + 1 < params.layers.size();  // linear before readout
        if (relu) {
            tape.layers[k].relu_mask = (h.array() > 0.0).cast<double>();
            h = h.cwiseMax(0.0);
        }
    }
    tape.last_activation = h;
    tape.output = h * params.readout;
    tape.output.rowwise() += params.readout_bias.transpose();
    return tape;
}

}  // namespace

std::vector<Eigen::MatrixXd> forward(const std::vector<Eigen::MatrixXd>& batch,
                                     const AutoencoderParams& params,
                                     const ForwardContext& ctx) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(batch.size());
    for (const Eigen::MatrixXd& x : batch) {
        if (std::size_t(x.rows()) != params.nodes ||
            std::size_t(x.cols()) != params.feature_width)
            throw DomainError("batch sample shape mismatch");
        out.push_back(forward_one(x, params, ctx).output);
    }
    return out;
}

double mse_loss(const std::vector<Eigen::MatrixXd>& target,
                const std::vector<Eigen::MatrixXd>& reconstruction) {
    if (target.size() != reconstruction.size())
        throw DomainError("mse_loss batch size mismatch");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < target.size(); ++b) {
        if (target[b].rows() != reconstruction[b].rows() ||
            target[b].cols() != reconstruction[b].cols())
            throw DomainError("mse_loss shape mismatch");
        acc += (reconstruction[b] - target[b]).squaredNorm();
        count += std::size_t(target[b].size());
    }
    return count > 0 ? acc / double(count) : 0.0;
}

Gradients zero_gradients(const AutoencoderParams& params) {
    Gradients g;
    g.layers.resize(params.layers.size());
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const Layer& l = params.layers[k];
        Layer& gl = g.layers[k];
        gl.kind = l.kind;
        if (l.W_r.size()) gl.W_r = Eigen::MatrixXd::Zero(l.W_r.rows(), l.W_r.cols());
        if (l.W_i.size()) gl.W_i = Eigen::MatrixXd::Zero(l.W_i.rows(), l.W_i.cols());
        if (l.mix.size()) gl.mix = Eigen::MatrixXd::Zero(l.mix.rows(), l.mix.cols());
        gl.theta.resize(l.theta.size());
        for (std::size_t t = 0; t < l.theta.size(); ++t)
            gl.theta[t] = Eigen::MatrixXd::Zero(l.theta[t].rows(), l.theta[t].cols());
        if (l.bias.size()) gl.bias = Eigen::VectorXd::Zero(l.bias.size());
    }
    g.readout = Eigen::MatrixXd::Zero(params.readout.rows(), params.readout.cols());
    g.readout_bias = Eigen::VectorXd::Zero(params.readout_bias.size());
    return g;
}

double backward(const std::vector<Eigen::MatrixXd>& batch,
                const AutoencoderParams& params, const ForwardContext& ctx,
                Gradients& grads) {
    double loss_acc = 0.0;
    std::size_t count = 0;
    for (const Eigen::MatrixXd& x : batch) count += std::size_t(x.size());
    if (count == 0) return 0.0;

    for (const Eigen::MatrixXd& x : batch) {
        SampleTape tape = forward_one(x, params, ctx);
        const Eigen::MatrixXd residual = tape.output - x;
        loss_acc += residual.squaredNorm();

        Eigen::MatrixXd G = 2.0 / double(count) * residual;  // dL/d output
        grads.readout += tape.last_activation.transpose() * G;
        grads.readout_bias += colsum(G);
        Eigen::MatrixXd Gh = G * params.readout.transpose();

        for (std::size_t k = params.layers.size(); k-- > 0;) {
            if (tape.layers[k].relu_mask.size())
                Gh = (Gh.array() * tape.layers[k].relu_mask).matrix();
            Gh = layer_backward(params.layers[k], tape.layers[k], ctx, Gh, grads.layers[k]);
        }
    }
    return loss_acc / double(count);
}

void sgd_step(AutoencoderParams& params, const Gradients& grads, double lr,
              const std::set<std::string>& frozen) {
    auto live = [&](const std::string& name) { return frozen.find(name) == frozen.end(); };
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const std::string p = "layer" + std::to_string(k) + ".";
        Layer& l = params.layers[k];
        const Layer& g = grads.layers[k];
        if (l.W_r.size() && live(p + "W_r")) l.W_r -= lr * g.W_r;
        if (l.W_i.size() && live(p + "W_i")) l.W_i -= lr * g.W_i;
        if (l.mix.size() && live(p + "mix")) l.mix -= lr * g.mix;
        if (live(p + "theta"))
            for (std::size_t t = 0; t < l.theta.size(); ++t) l.theta[t] -= lr * g.theta[t];
        if (l.bias.size() && live(p + "bias")) l.bias -= lr * g.bias;
    }
    if (live("readout")) params.readout -= lr * grads.readout;
    if (live("readout_bias")) params.readout_bias -= lr * grads.readout_bias;
}

TrainState train(const TrainingSet& data, AutoencoderParams& params,
                 const RunConfig& config, const filters::NormalizedGraph& graph,
                 const BankProvider& bank_provider,
                 AutoencoderParams* best) {
    if (data.train.empty()) throw ConfigError("training split is empty");
    const bool needs_bank = std::any_of(
        params.layers.begin(), params.layers.end(),
        [](const Layer& l) { return l.kind == LayerKind::ModeConvFast; });
    if (needs_bank && !bank_provider)
        throw ConfigError("ModeConvFast layers require a bank provider");

    TrainState state;
    state.learning_rate = config.learning_rate;
    state.seed = config.seed;
    state.best_validation_loss = std::numeric_limits<double>::infinity();

    auto run_batches = [&](const std::vector<std::size_t>& indices, bool update) {
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < indices.size(); start += config.batch_size) {
            const std::size_t end = std::min(indices.size(), start + config.batch_size);
            std::vector<Eigen::MatrixXd> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i)
                batch.push_back(data.features[indices[i]]);

            filters::ComplexFilterBank bank;
            ForwardContext ctx;
            ctx.graph = &graph;
            if (needs_bank) {
                bank = bank_provider(batch);
                ctx.bank = &bank;
            }
            if (update) {
                Gradients grads = zero_gradients(params);
                const double loss = backward(batch, params, ctx, grads);
                double gnorm2 = grads.readout.squaredNorm() + grads.readout_bias.squaredNorm();
                for (const Layer& g : grads.layers) {
                    gnorm2 += g.W_r.squaredNorm() + g.W_i.squaredNorm() + g.mix.squaredNorm();
                    if (g.bias.size()) gnorm2 += g.bias.squaredNorm();
                    for (const auto& th : g.theta) gnorm2 += th.squaredNorm();
                }
                state.gradient_norms.push_back(std::sqrt(gnorm2));
                sgd_step(params, grads, config.learning_rate);
                loss_sum += loss;
            } else {
                const auto rec = forward(batch, params, ctx);
                loss_sum += mse_loss(batch, rec);
            }
            ++batches;
        }
        return batches > 0 ? loss_sum / double(batches) : 0.0;
    };

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double train_loss = run_batches(data.train, true);
        if (!std::isfinite(train_loss))
            throw NumericError("training diverged (non-finite loss) at epoch " +
                               std::to_string(epoch));
        const double val_loss =
            data.validation.empty() ? train_loss : run_batches(data.validation, false);
        state.train_loss.push_back(train_loss);
        state.validation_loss.push_back(val_loss);
        state.epoch = epoch + 1;
        if (val_loss < state.best_validation_loss) {
            state.best_validation_loss = val_loss;
            state.best_epoch = epoch + 1;
            if (best) *best = params;
        }
    }
    return state;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd>
graphcon_step(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
              const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& layer,
              const GraphConConfig& cfg, bool training, std::uint64_t* rng_state) {
    cfg.validate();
    if (X.rows() != Y.rows() || X.cols() != Y.cols())
        throw DomainError("GraphCON X and Y must share a shape");

    const Eigen::MatrixXd coupled = layer(X).cwiseMax(0.0);  // ReLU
    Eigen::MatrixXd Yn = Y + cfg.dt * (coupled - cfg.alpha * Y - cfg.gamma * X);
    Eigen::MatrixXd Xn = X + cfg.dt * Yn;

    if (training && cfg.dropout > 0.0) {
        std::uint64_t local = 0x6a09e667f3bcc908ull;
        std::uint64_t& rng = rng_state ? *rng_state : local;
        const double keep = 1.0 - cfg.dropout;
        auto drop = [&](Eigen::MatrixXd& M) {
            for (Eigen::Index r = 0; r < M.rows(); ++r)
                for (Eigen::Index c = 0; c < M.cols(); ++c)
                    M(r, c) = next_uniform(rng) < cfg.dropout ? 0.0 : M(r, c) / keep;
        };
        drop(Yn);
        drop(Xn);
    }
    return {std::move(Xn), std::move(Yn)};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json mat_json(const Eigen::MatrixXd& M) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd mat_from(const nlohmann::json& j) {
    const auto rows = Eigen::Index(j.size());
    const Eigen::Index cols = rows > 0 ? Eigen::Index(j[0].size()) : 0;
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            M(r, c) = j[std::size_t(r)][std::size_t(c)].get<double>();
    return M;
}

nlohmann::ordered_json vec_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.begin(), v.end());
}

Eigen::VectorXd vec_from(const nlohmann::json& j) {
    Eigen::VectorXd v(Eigen::Index(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[Eigen::Index(i)] = j[i].get<double>();
    return v;
}

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::ModeConvFast: return "fast";
        case LayerKind::ModeConvLaplace: return "laplace";
        case LayerKind::ChebConv: return "cheb";
    }
    return "fast";
}

LayerKind kind_from(const std::string& s) {
    if (s == "fast") return LayerKind::ModeConvFast;
    if (s == "laplace") return LayerKind::ModeConvLaplace;
    if (s == "cheb") return LayerKind::ChebConv;
    throw DomainError("unknown layer kind '" + s + "'");
}

}  // namespace

std::string AutoencoderParams::to_json() const {
    nlohmann::ordered_json j;
    j["nodes"] = nodes;
    j["feature_width"] = feature_width;
    j["bottleneck"] = bottleneck;
    j["cheb_order"] = cheb_order;
    j["retained_modes"] = retained_modes;
    j["layers"] = nlohmann::ordered_json::array();
    for (const Layer& l : layers) {
        nlohmann::ordered_json jl;
        jl["kind"] = kind_name(l.kind);
        jl["in_width"] = l.in_width;
        jl["out_width"] = l.out_width;
        jl["complex_input"] = l.complex_input;
        jl["W_r"] = mat_json(l.W_r);
        jl["W_i"] = mat_json(l.W_i);
        jl["mix"] = mat_json(l.mix);
        jl["theta"] = nlohmann::ordered_json::array();
        for (const auto& th : l.theta) jl["theta"].push_back(mat_json(th));
        jl["bias"] = vec_json(l.bias);
        j["layers"].push_back(jl);
    }
    j["readout"] = mat_json(readout);
    j["readout_bias"] = vec_json(readout_bias);
    return j.dump();
}

AutoencoderParams AutoencoderParams::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    AutoencoderParams p;
    p.nodes = j.at("nodes").get<std::size_t>();
    p.feature_width = j.at("feature_width").get<std::size_t>();
    p.bottleneck = j.at("bottleneck").get<std::size_t>();
    p.cheb_order = j.at("cheb_order").get<std::size_t>();
    p.retained_modes = j.at("retained_modes").get<std::size_t>();
    for (const auto& jl : j.at("layers")) {
        Layer l;
        l.kind = kind_from(jl.at("kind").get<std::string>());
        l.in_width = jl.at("in_width").get<std::size_t>();
        l.out_width = jl.at("out_width").get<std::size_t>();
        l.complex_input = jl.at("complex_input").get<bool>();
        l.W_r = mat_from(jl.at("W_r"));
        l.W_i = mat_from(jl.at("W_i"));
        l.mix = mat_from(jl.at("mix"));
        for (const auto& th : jl.at("theta")) l.theta.push_back(mat_from(th));
        l.bias = vec_from(jl.at("bias"));
        p.layers.push_back(std::move(l));
    }
    p.readout = mat_from(j.at("readout"));
    p.readout_bias = vec_from(j.at("readout_bias"));
    return p;
}

namespace {

nlohmann::ordered_json config_json(const RunConfig& c) {
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
    j["layer_kind"] = kind_name(c.layer_kind);
    return j;
}

RunConfig config_from(const nlohmann::json& j) {
    RunConfig c;
    c.window_length = j.at("window_length").get<std::size_t>();
    c.stride = j.at("stride").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.layer_count = j.at("layer_count").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.bottleneck = j.at("bottleneck").get<std::size_t>();
    c.cheb_order = j.at("cheb_order").get<std::size_t>();
    c.retained_modes = j.at("retained_modes").get<std::size_t>();
    c.damping_ratio = j.at("damping_ratio").get<double>();
    c.percentile = j.at("percentile").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.layer_kind = kind_from(j.at("layer_kind").get<std::string>());
    return c;
}

}  // namespace

std::string Checkpoint::to_json() const {
    nlohmann::ordered_json j;
    j["version"] = version;
    j["config"] = nlohmann::ordered_json::parse(config_json(config).dump());
    j["params"] = nlohmann::ordered_json::parse(params.to_json());
    j["best_params"] = nlohmann::ordered_json::parse(best_params.to_json());
    j["normalization"]["mean"] = normalization.mean;
    j["normalization"]["std"] = normalization.std_dev;
    j["state"]["epoch"] = state.epoch;
    j["state"]["train_loss"] = state.train_loss;
    j["state"]["validation_loss"] = state.validation_loss;
    j["state"]["best_validation_loss"] = state.best_validation_loss;
    j["state"]["best_epoch"] = state.best_epoch;
    j["state"]["seed"] = state.seed;
    return j.dump();
}

Checkpoint Checkpoint::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Checkpoint c;
    c.version = j.at("version").get<int>();
    c.config = config_from(j.at("config"));
    c.params = AutoencoderParams::from_json(j.at("params").dump());
    c.best_params = AutoencoderParams::from_json(j.at("best_params").dump());
    c.normalization.mean = j.at("normalization").at("mean").get<std::vector<double>>();
    c.normalization.std_dev = j.at("normalization").at("std").get<std::vector<double>>();
    c.state.epoch = j.at("state").at("epoch").get<std::size_t>();
    c.state.train_loss = j.at("state").at("train_loss").get<std::vector<double>>();
    c.state.validation_loss = j.at("state").at("validation_loss").get<std::vector<double>>();
    c.state.best_validation_loss = j.at("state").at("best_validation_loss").get<double>();
    c.state.best_epoch = j.at("state").at("best_epoch").get<std::size_t>();
    c.state.seed = j.at("state").at("seed").get<std::uint64_t>();
    return c;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out << to_json() << '\n';
    if (!out) throw IoError("write failure: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

}  // namespace modeconv::nn
