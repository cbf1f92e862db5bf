#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modeconv/errors.hpp"

namespace modeconv {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;
    double weight = 1.0;
};

/// Sensor network: nodes are sensor mass points, edges carry correlation
/// weights updated per window.
struct SensorGraph {
    std::size_t node_count = 0;
    std::vector<Edge> edges;
    std::vector<double> node_masses;           // kg, strictly positive
    std::vector<std::string> channel_names;    // per-node feature channels

    /// Throws DomainError on out-of-range indices, duplicate undirected
    /// edges, non-finite weights or non-positive masses.
    void validate() const;

    static SensorGraph chain(std::size_t n, double mass = 1.0, double weight = 1.0);
    static SensorGraph fully_connected(std::size_t n, double mass = 1.0, double weight = 1.0);
};

/// One timestamped measurement of the intermediate binary format.
struct Sample {
    std::int32_t timestamp = 0;
    float value = 0.0f;
};

using TimeSeries = std::vector<Sample>;

/// Padded fixed-length slice of the multivariate series.
/// Layout: value(node, channel, t), dense row-major [n][c][l].
struct SignalWindow {
    std::int64_t start_timestamp = 0;
    double sample_rate = 1.0;
    std::size_t nodes = 0;
    std::size_t channels = 0;
    std::size_t samples = 0;      // l, after padding
    std::size_t pad_count = 0;    // trailing zero samples, < l
    std::vector<double> data;

    double& at(std::size_t node, std::size_t channel, std::size_t t) {
        return data[(node * channels + channel) * samples + t];
    }
    double at(std::size_t node, std::size_t channel, std::size_t t) const {
        return data[(node * channels + channel) * samples + t];
    }
    /// Number of non-padding samples.
    std::size_t valid_samples() const { return samples - pad_count; }

    void validate() const;
};

/// Multichannel series on a shared time base, source for windowing.
struct AlignedSeries {
    std::int64_t start_timestamp = 0;
    double sample_rate = 1.0;
    std::size_t nodes = 0;
    std::size_t channels = 0;
    std::size_t length = 0;       // T
    std::vector<double> data;     // [n][c][T] row-major

    double& at(std::size_t node, std::size_t channel, std::size_t t) {
        return data[(node * channels + channel) * length + t];
    }
    double at(std::size_t node, std::size_t channel, std::size_t t) const {
        return data[(node * channels + channel) * length + t];
    }
};

/// Disjoint ordered window index lists plus per-window anomaly labels.
struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    std::vector<int> labels;      // 0 = normal, 1 = anomalous, per window
};

/// Per-channel affine normalization fitted on the training split.
struct Normalization {
    std::vector<double> mean;     // size = channels
    std::vector<double> std_dev;  // size = channels; 0 marks pass-through
};

enum class LayerKind { ModeConvFast, ModeConvLaplace, ChebConv };

/// Hyperparameters shared across the pipeline.
struct RunConfig {
    std::size_t window_length = 5;
    std::size_t stride = 1;
    std::size_t batch_size = 256;
    std::size_t layer_count = 1;          // {1,3,5,10}
    std::size_t hidden_dim = 8;           // {4,8,16}
    std::size_t bottleneck = 2;           // {1,2,4}
    std::size_t cheb_order = 5;           // K in {2..8}
    std::size_t retained_modes = 4;       // m <= n
    double damping_ratio = 0.02;
    double percentile = 0.95;
    double learning_rate = 0.01;
    std::size_t epochs = 50;
    std::uint64_t seed = 0;
    LayerKind layer_kind = LayerKind::ModeConvFast;

    void validate(std::size_t node_count) const;
};

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

/// Decode the intermediate binary format: little-endian int32 timestamp
/// followed by little-endian float32 value, repeated.
TimeSeries ingest_binary(const std::vector<std::uint8_t>& bytes);

/// Inverse of ingest_binary, bit-exact round trip.
std::vector<std::uint8_t> emit_binary(const TimeSeries& series);

/// CSV schema: timestamp,sensor_id,channel,value with header row.
/// Output grouped by (sensor, channel) and sorted by timestamp.
std::map<std::pair<std::string, std::string>, TimeSeries>
ingest_csv(const std::string& text);

std::string emit_csv(const std::map<std::pair<std::string, std::string>, TimeSeries>& series);

/// Forward-fill a slow channel onto a fast time base.
std::vector<double> forward_fill(const TimeSeries& slow, const std::vector<std::int32_t>& base_timestamps);

// ---------------------------------------------------------------------------
// Windowing and splitting
// ---------------------------------------------------------------------------

/// Slice into ceil(T / stride) windows of exactly l samples; the tail is
/// zero-padded with pad_count recorded.
std::vector<SignalWindow> window_and_pad(const AlignedSeries& series,
                                         std::size_t l, std::size_t stride);

struct SplitRatios {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
};

/// Split windows by ratio (training only from normal-labeled windows) and
/// z-normalize every split with training-set statistics. Padding samples
/// are excluded from the statistics; std = 0 channels pass through.
DatasetSplit split_and_normalize(std::vector<SignalWindow>& windows,
                                 const std::vector<int>& labels,
                                 const SplitRatios& ratios,
                                 Normalization* out_norm = nullptr);

/// Fit per-channel statistics on the given windows (padding excluded).
Normalization fit_normalization(const std::vector<SignalWindow>& windows,
                                const std::vector<std::size_t>& indices);

void apply_normalization(std::vector<SignalWindow>& windows, const Normalization& norm);

// ---------------------------------------------------------------------------
// Dataset manifest (JSON)
// ---------------------------------------------------------------------------

struct ManifestNode {
    std::string id;
    double mass = 1.0;
    std::vector<std::string> files;       // one binary file per channel
    std::vector<std::string> channels;
};

struct DatasetManifest {
    double sample_rate = 1.0;
    std::size_t window_length = 5;
    std::size_t stride = 5;
    std::vector<ManifestNode> nodes;
    std::vector<Edge> edges;
    std::vector<int> window_labels;
    std::uint64_t seed = 0;
    std::string spec_hash;

    std::string to_json() const;
    static DatasetManifest from_json(const std::string& text);
    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);

    SensorGraph graph() const;
};

/// FNV-1a over a canonical string; stable across platforms and runs.
std::uint64_t stable_hash(const std::string& canonical);
std::string hash_hex(std::uint64_t h);

}  // namespace modeconv
