#include "modeconv/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace modeconv {

// ---------------------------------------------------------------------------
// SensorGraph
// ---------------------------------------------------------------------------

void SensorGraph::validate() const {
    if (node_count == 0) throw DomainError("graph must have at least one node");
    if (node_masses.size() != node_count)
        throw DomainError("node_masses size does not match node_count");
    for (double m : node_masses)
        if (!(m > 0.0) || !std::isfinite(m))
            throw DomainError("node masses must be strictly positive and finite");
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const Edge& e : edges) {
        if (e.i >= node_count || e.j >= node_count)
            throw DomainError("edge index out of range");
        if (!std::isfinite(e.weight))
            throw DomainError("edge weight must be finite");
        auto key = std::minmax(e.i, e.j);
        if (!seen.insert({key.first, key.second}).second)
            throw DomainError("duplicate undirected edge (" + std::to_string(e.i) +
                              "," + std::to_string(e.j) + ")");
    }
}

SensorGraph SensorGraph::chain(std::size_t n, double mass, double weight) {
    SensorGraph g;
    g.node_count = n;
    g.node_masses.assign(n, mass);
    for (std::size_t i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1, weight});
    g.channel_names = {"acceleration"};
    return g;
}

SensorGraph SensorGraph::fully_connected(std::size_t n, double mass, double weight) {
    SensorGraph g;
    g.node_count = n;
    g.node_masses.assign(n, mass);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) g.edges.push_back({i, j, weight});
    g.channel_names = {"acceleration"};
    return g;
}

void SignalWindow::validate() const {
    if (samples == 0) throw DomainError("window length must be >= 1");
    if (pad_count >= samples) throw DomainError("pad_count must be < window length");
    if (data.size() != nodes * channels * samples)
        throw DomainError("window data size mismatch");
    for (double v : data)
        if (!std::isfinite(v)) throw DataError("window contains non-finite value");
}

void RunConfig::validate(std::size_t node_count) const {
    if (window_length < 1) throw ConfigError("window_length must be >= 1");
    if (stride < 1) throw ConfigError("stride must be >= 1");
    auto one_of = [](std::size_t v, std::initializer_list<std::size_t> allowed) {
        return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
    };
    if (!one_of(layer_count, {1, 3, 5, 10}))
        throw ConfigError("layer_count must be one of {1,3,5,10}");
    if (!one_of(hidden_dim, {4, 8, 16}))
        throw ConfigError("hidden_dim must be one of {4,8,16}");
    if (!one_of(bottleneck, {1, 2, 4}))
        throw ConfigError("bottleneck must be one of {1,2,4}");
    if (cheb_order < 2 || cheb_order > 8)
        throw ConfigError("cheb_order must be in {2..8}");
    if (retained_modes < 1 || retained_modes > node_count)
        throw ConfigError("retained_modes must satisfy 1 <= m <= n");
    if (!(damping_ratio >= 0.0 && damping_ratio < 1.0))
        throw ConfigError("damping_ratio must be in [0,1)");
    if (!(percentile > 0.0 && percentile < 1.0))
        throw ConfigError("percentile must be in (0,1)");
}

// ---------------------------------------------------------------------------
// Binary format
// ---------------------------------------------------------------------------

namespace {

std::int32_t read_i32_le(const std::uint8_t* p) {
    std::uint32_t u = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                      std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
    return std::bit_cast<std::int32_t>(u);
}

float read_f32_le(const std::uint8_t* p) {
    std::uint32_t u = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                      std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
    return std::bit_cast<float>(u);
}

void write_u32_le(std::vector<std::uint8_t>& out, std::uint32_t u) {
    out.push_back(std::uint8_t(u & 0xff));
    out.push_back(std::uint8_t((u >> 8) & 0xff));
    out.push_back(std::uint8_t((u >> 16) & 0xff));
    out.push_back(std::uint8_t((u >> 24) & 0xff));
}

}  // namespace

TimeSeries ingest_binary(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() % 8 != 0)
        throw FormatError("truncated record", bytes.size() - bytes.size() % 8);
    TimeSeries out;
    out.reserve(bytes.size() / 8);
    for (std::size_t off = 0; off < bytes.size(); off += 8) {
        Sample s;
        s.timestamp = read_i32_le(bytes.data() + off);
        s.value = read_f32_le(bytes.data() + off + 4);
        if (std::isnan(s.value))
            throw DataError("NaN value at record index " + std::to_string(off / 8));
        out.push_back(s);
    }
    return out;
}

std::vector<std::uint8_t> emit_binary(const TimeSeries& series) {
    std::vector<std::uint8_t> out;
    out.reserve(series.size() * 8);
    for (const Sample& s : series) {
        write_u32_le(out, std::bit_cast<std::uint32_t>(s.timestamp));
        write_u32_le(out, std::bit_cast<std::uint32_t>(s.value));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::map<std::pair<std::string, std::string>, TimeSeries>
ingest_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("missing header row", 0);
    // tolerate trailing \r from CRLF files
    auto strip = [](std::string s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
        return s;
    };
    if (strip(line) != "timestamp,sensor_id,channel,value")
        throw FormatError("schema error: expected header 'timestamp,sensor_id,channel,value', got '" + strip(line) + "'", 0);

    std::map<std::pair<std::string, std::string>, TimeSeries> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip(line);
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string ts_s, sensor, channel, value_s;
        if (!std::getline(row, ts_s, ',') || !std::getline(row, sensor, ',') ||
            !std::getline(row, channel, ',') || !std::getline(row, value_s))
            throw DomainError("unparseable row at line " + std::to_string(lineno));
        Sample s;
        try {
            std::size_t pos = 0;
            s.timestamp = std::stoi(ts_s, &pos);
            if (pos != ts_s.size()) throw std::invalid_argument(ts_s);
            s.value = std::stof(value_s, &pos);
            if (pos != value_s.size()) throw std::invalid_argument(value_s);
        } catch (const std::exception&) {
            throw DomainError("unparseable row at line " + std::to_string(lineno));
        }
        out[{sensor, channel}].push_back(s);
    }
    for (auto& [key, series] : out)
        std::stable_sort(series.begin(), series.end(),
                         [](const Sample& a, const Sample& b) { return a.timestamp < b.timestamp; });
    return out;
}

std::string emit_csv(const std::map<std::pair<std::string, std::string>, TimeSeries>& series) {
    std::ostringstream out;
    out << "timestamp,sensor_id,channel,value\n";
    for (const auto& [key, s] : series)
        for (const Sample& sample : s)
            out << sample.timestamp << ',' << key.first << ',' << key.second << ','
                << sample.value << '\n';
    return out.str();
}

std::vector<double> forward_fill(const TimeSeries& slow,
                                 const std::vector<std::int32_t>& base_timestamps) {
    std::vector<double> out(base_timestamps.size(), 0.0);
    std::size_t k = 0;
    double current = slow.empty() ? 0.0 : slow.front().value;
    for (std::size_t t = 0; t < base_timestamps.size(); ++t) {
        while (k < slow.size() && slow[k].timestamp <= base_timestamps[t])
            current = slow[k++].value;
        out[t] = current;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

std::vector<SignalWindow> window_and_pad(const AlignedSeries& series,
                                         std::size_t l, std::size_t stride) {
    if (l < 1) throw DomainError("window length must be >= 1");
    if (stride < 1) throw DomainError("stride must be >= 1");
    std::vector<SignalWindow> out;
    if (series.length == 0) return out;

    const std::size_t count = (series.length + stride - 1) / stride;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = w * stride;
        SignalWindow win;
        win.sample_rate = series.sample_rate;
        win.start_timestamp = series.start_timestamp + static_cast<std::int64_t>(start);
        win.nodes = series.nodes;
        win.channels = series.channels;
        win.samples = l;
        const std::size_t avail = series.length > start ? series.length - start : 0;
        const std::size_t valid = std::min(l, avail);
        win.pad_count = l - valid;
        win.data.assign(win.nodes * win.channels * l, 0.0);
        for (std::size_t i = 0; i < win.nodes; ++i)
            for (std::size_t c = 0; c < win.channels; ++c)
                for (std::size_t t = 0; t < valid; ++t)
                    win.at(i, c, t) = series.at(i, c, start + t);
        out.push_back(std::move(win));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Split and normalize
// ---------------------------------------------------------------------------

Normalization fit_normalization(const std::vector<SignalWindow>& windows,
                                const std::vector<std::size_t>& indices) {
    Normalization norm;
    if (indices.empty()) return norm;
    const std::size_t channels = windows[indices[0]].channels;
    norm.mean.assign(channels, 0.0);
    norm.std_dev.assign(channels, 0.0);

    std::vector<double> sum(channels, 0.0), sumsq(channels, 0.0);
    std::vector<std::size_t> count(channels, 0);
    for (std::size_t idx : indices) {
        const SignalWindow& w = windows[idx];
        for (std::size_t i = 0; i < w.nodes; ++i)
            for (std::size_t c = 0; c < w.channels; ++c)
                for (std::size_t t = 0; t < w.valid_samples(); ++t) {
                    double v = w.at(i, c, t);
                    sum[c] += v;
                    sumsq[c] += v * v;
                    ++count[c];
                }
    }
    for (std::size_t c = 0; c < channels; ++c) {
        if (count[c] == 0) continue;
        double mu = sum[c] / double(count[c]);
        double var = sumsq[c] / double(count[c]) - mu * mu;
        norm.mean[c] = mu;
        norm.std_dev[c] = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    return norm;
}

void apply_normalization(std::vector<SignalWindow>& windows, const Normalization& norm) {
    for (SignalWindow& w : windows)
        for (std::size_t i = 0; i < w.nodes; ++i)
            for (std::size_t c = 0; c < w.channels && c < norm.mean.size(); ++c) {
                if (norm.std_dev[c] <= 0.0) continue;  // constant channel passes through
                for (std::size_t t = 0; t < w.valid_samples(); ++t)
                    w.at(i, c, t) = (w.at(i, c, t) - norm.mean[c]) / norm.std_dev[c];
            }
}

DatasetSplit split_and_normalize(std::vector<SignalWindow>& windows,
                                 const std::vector<int>& labels,
                                 const SplitRatios& ratios,
                                 Normalization* out_norm) {
    if (labels.size() != windows.size())
        throw DomainError("label count does not match window count");
    const double sum = ratios.train + ratios.validation + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1");

    std::vector<std::size_t> normal;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == 0) normal.push_back(i);
    if (normal.empty())
        throw ConfigError("no normal-labeled windows available for training");

    DatasetSplit split;
    split.labels = labels;

    const std::size_t n_train =
        std::min<std::size_t>(normal.size(),
                              std::size_t(std::llround(ratios.train * double(windows.size()))));
    split.train.assign(normal.begin(), normal.begin() + n_train);

    std::vector<char> in_train(windows.size(), 0);
    for (std::size_t i : split.train) in_train[i] = 1;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < windows.size(); ++i)
        if (!in_train[i]) rest.push_back(i);

    const double denom = ratios.validation + ratios.test;
    const std::size_t n_val =
        denom > 0.0 ? std::size_t(std::llround(ratios.validation / denom * double(rest.size())))
                    : 0;
    split.validation.assign(rest.begin(), rest.begin() + std::min(n_val, rest.size()));
    split.test.assign(rest.begin() + std::min(n_val, rest.size()), rest.end());

    Normalization norm = fit_normalization(windows, split.train);
    apply_normalization(windows, norm);
    if (out_norm) *out_norm = norm;
    return split;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::string DatasetManifest::to_json() const {
    nlohmann::ordered_json j;
    j["sample_rate"] = sample_rate;
    j["window_length"] = window_length;
    j["stride"] = stride;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const ManifestNode& n : nodes) {
        nlohmann::ordered_json jn;
        jn["id"] = n.id;
        jn["mass"] = n.mass;
        jn["files"] = n.files;
        jn["channels"] = n.channels;
        j["nodes"].push_back(jn);
    }
    j["edges"] = nlohmann::ordered_json::array();
    for (const Edge& e : edges) j["edges"].push_back({e.i, e.j, e.weight});
    j["window_labels"] = window_labels;
    j["seed"] = seed;
    j["spec_hash"] = spec_hash;
    return j.dump(2);
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest JSON parse failure: ") + e.what(), 0);
    }
    DatasetManifest m;
    try {
        m.sample_rate = j.at("sample_rate").get<double>();
        m.window_length = j.at("window_length").get<std::size_t>();
        m.stride = j.at("stride").get<std::size_t>();
        for (const auto& jn : j.at("nodes")) {
            ManifestNode n;
            n.id = jn.at("id").get<std::string>();
            n.mass = jn.at("mass").get<double>();
            n.files = jn.at("files").get<std::vector<std::string>>();
            n.channels = jn.at("channels").get<std::vector<std::string>>();
            m.nodes.push_back(std::move(n));
        }
        for (const auto& je : j.at("edges"))
            m.edges.push_back({je.at(0).get<std::size_t>(), je.at(1).get<std::size_t>(),
                               je.at(2).get<double>()});
        m.window_labels = j.at("window_labels").get<std::vector<int>>();
        m.seed = j.value("seed", std::uint64_t(0));
        m.spec_hash = j.value("spec_hash", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("manifest field error: ") + e.what());
    }
    return m;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open manifest for writing: " + path);
    out << to_json() << '\n';
    if (!out) throw IoError("write failure: " + path);
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

SensorGraph DatasetManifest::graph() const {
    SensorGraph g;
    g.node_count = nodes.size();
    for (const ManifestNode& n : nodes) g.node_masses.push_back(n.mass);
    g.edges = edges;
    if (!nodes.empty()) g.channel_names = nodes.front().channels;
    g.validate();
    return g;
}

std::uint64_t stable_hash(const std::string& canonical) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

}  // namespace modeconv
