#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "modeconv/core.hpp"
#include "modeconv/errors.hpp"

using namespace modeconv;

namespace {

std::vector<std::uint8_t> encode_record(std::int32_t t, float v) {
    std::vector<std::uint8_t> bytes(8);
    std::memcpy(bytes.data(), &t, 4);
    std::memcpy(bytes.data() + 4, &v, 4);
    return bytes;
}

AlignedSeries make_series(std::size_t nodes, std::size_t channels,
                          const std::vector<double>& channel0) {
    AlignedSeries s;
    s.sample_rate = 1.0;
    s.nodes = nodes;
    s.channels = channels;
    s.length = channel0.size();
    s.data.assign(nodes * channels * channel0.size(), 0.0);
    for (std::size_t i = 0; i < nodes; ++i)
        for (std::size_t t = 0; t < channel0.size(); ++t)
            s.at(i, 0, t) = channel0[t];
    return s;
}

}  // namespace

TEST_CASE("sensor graph validation") {
    SensorGraph g = SensorGraph::chain(3);
    CHECK(g.node_count == 3);
    CHECK(g.edges.size() == 2);
    CHECK_NOTHROW(g.validate());

    SUBCASE("out-of-range edge") {
        g.edges.push_back({0, 5, 1.0});
        CHECK_THROWS_AS(g.validate(), DomainError);
    }
    SUBCASE("duplicate undirected edge") {
        g.edges.push_back({1, 0, 1.0});
        CHECK_THROWS_AS(g.validate(), DomainError);
    }
    SUBCASE("non-positive mass") {
        g.node_masses[1] = 0.0;
        CHECK_THROWS_AS(g.validate(), DomainError);
    }
    SUBCASE("fully connected edge count") {
        CHECK(SensorGraph::fully_connected(8).edges.size() == 28);
    }
}

TEST_CASE("binary ingestion") {
    SUBCASE("empty stream") {
        CHECK(ingest_binary({}).empty());
    }
    SUBCASE("single record") {
        TimeSeries s = ingest_binary(encode_record(1, 2.5f));
        REQUIRE(s.size() == 1);
        CHECK(s[0].timestamp == 1);
        CHECK(s[0].value == 2.5f);
    }
    SUBCASE("truncated stream reports the offset") {
        std::vector<std::uint8_t> bytes = encode_record(1, 2.5f);
        bytes.resize(12);
        try {
            ingest_binary(bytes);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() == 8);
        }
    }
    SUBCASE("NaN value rejected") {
        CHECK_THROWS_AS(ingest_binary(encode_record(0, std::nanf(""))),
                        DataError);
    }
    SUBCASE("round trip is bit exact") {
        TimeSeries s{{-3, 1.25f}, {0, -0.0f}, {7, 3.0e-30f}};
        CHECK(ingest_binary(emit_binary(s)).size() == 3);
        const auto bytes = emit_binary(s);
        const TimeSeries back = ingest_binary(bytes);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(back[i].timestamp == s[i].timestamp);
            CHECK(std::memcmp(&back[i].value, &s[i].value, 4) == 0);
        }
    }
}

TEST_CASE("csv ingestion") {
    SUBCASE("header only") {
        CHECK(ingest_csv("timestamp,sensor_id,channel,value\n").empty());
    }
    SUBCASE("grouping and sorting") {
        const std::string text =
            "timestamp,sensor_id,channel,value\n"
            "3,s0,acc,3.0\n"
            "1,s0,acc,1.0\n"
            "2,s0,acc,2.0\n";
        auto grouped = ingest_csv(text);
        REQUIRE(grouped.size() == 1);
        const TimeSeries& s = grouped.begin()->second;
        REQUIRE(s.size() == 3);
        CHECK(s[0].timestamp == 1);
        CHECK(s[1].timestamp == 2);
        CHECK(s[2].timestamp == 3);
    }
    SUBCASE("missing column") {
        CHECK_THROWS_AS(ingest_csv("timestamp,sensor_id,value\n1,s0,1.0\n"),
                        FormatError);
    }
    SUBCASE("round trip through emit_csv") {
        const std::string text =
            "timestamp,sensor_id,channel,value\n"
            "1,s0,acc,1.5\n"
            "2,s1,acc,-2\n";
        auto grouped = ingest_csv(text);
        auto again = ingest_csv(emit_csv(grouped));
        CHECK(again.size() == grouped.size());
    }
}

TEST_CASE("forward fill") {
    TimeSeries slow{{0, 10.0f}, {4, 20.0f}};
    std::vector<std::int32_t> base{0, 1, 2, 3, 4, 5};
    const std::vector<double> filled = forward_fill(slow, base);
    REQUIRE(filled.size() == 6);
    CHECK(filled[0] == 10.0);
    CHECK(filled[3] == 10.0);
    CHECK(filled[4] == 20.0);
    CHECK(filled[5] == 20.0);
}

TEST_CASE("windowing") {
    SUBCASE("T=10 l=5 stride=5 gives two full windows") {
        auto windows = window_and_pad(make_series(1, 1, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), 5, 5);
        REQUIRE(windows.size() == 2);
        CHECK(windows[0].pad_count == 0);
        CHECK(windows[1].pad_count == 0);
        CHECK(windows[1].at(0, 0, 0) == 5.0);
    }
    SUBCASE("T=7 l=5 stride=5 pads the tail with three zeros") {
        auto windows = window_and_pad(make_series(1, 1, {1, 2, 3, 4, 5, 6, 7}), 5, 5);
        REQUIRE(windows.size() == 2);
        CHECK(windows[1].pad_count == 3);
        CHECK(windows[1].at(0, 0, 1) == 7.0);
        CHECK(windows[1].at(0, 0, 2) == 0.0);
        CHECK(windows[1].valid_samples() == 2);
    }
    SUBCASE("empty series") {
        CHECK(window_and_pad(make_series(1, 1, {}), 5, 5).empty());
    }
    SUBCASE("window count is ceil(T / stride)") {
        auto windows = window_and_pad(make_series(2, 1, {1, 2, 3, 4, 5, 6, 7}), 5, 2);
        CHECK(windows.size() == 4);
    }
    SUBCASE("stride=l windows tile the series") {
        const std::vector<double> base{1, 2, 3, 4, 5, 6, 7, 8};
        auto windows = window_and_pad(make_series(1, 1, base), 4, 4);
        std::vector<double> glued;
        for (const auto& w : windows)
            for (std::size_t t = 0; t < w.valid_samples(); ++t)
                glued.push_back(w.at(0, 0, t));
        CHECK(glued == base);
    }
}

TEST_CASE("split and normalize") {
    auto make_windows = [](std::size_t count) {
        std::vector<SignalWindow> windows;
        for (std::size_t i = 0; i < count; ++i) {
            SignalWindow w;
            w.nodes = 1;
            w.channels = 2;
            w.samples = 4;
            w.data.assign(8, 0.0);
            for (std::size_t t = 0; t < 4; ++t) {
                w.at(0, 0, t) = double(i) + double(t);
                w.at(0, 1, t) = 3.0;  // constant channel
            }
            windows.push_back(w);
        }
        return windows;
    };

    SUBCASE("all-normal 10 windows split 8/1/1 disjoint") {
        auto windows = make_windows(10);
        std::vector<int> labels(10, 0);
        DatasetSplit split = split_and_normalize(windows, labels, SplitRatios{});
        CHECK(split.train.size() == 8);
        CHECK(split.validation.size() == 1);
        CHECK(split.test.size() == 1);
        std::vector<std::size_t> all;
        for (auto v : {split.train, split.validation, split.test})
            all.insert(all.end(), v.begin(), v.end());
        std::sort(all.begin(), all.end());
        CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    }
    SUBCASE("constant channel passes through") {
        auto windows = make_windows(10);
        std::vector<int> labels(10, 0);
        split_and_normalize(windows, labels, SplitRatios{});
        CHECK(windows[0].at(0, 1, 0) == 3.0);
    }
    SUBCASE("training statistics give zero mean unit std") {
        auto windows = make_windows(10);
        std::vector<int> labels(10, 0);
        DatasetSplit split = split_and_normalize(windows, labels, SplitRatios{});
        double sum = 0.0, sq = 0.0;
        std::size_t count = 0;
        for (std::size_t idx : split.train)
            for (std::size_t t = 0; t < 4; ++t) {
                const double v = windows[idx].at(0, 0, t);
                sum += v;
                sq += v * v;
                ++count;
            }
        const double mean = sum / double(count);
        const double var = sq / double(count) - mean * mean;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    }
    SUBCASE("no normal windows is a configuration error") {
        auto windows = make_windows(4);
        std::vector<int> labels(4, 1);
        CHECK_THROWS_AS(split_and_normalize(windows, labels, SplitRatios{}),
                        ConfigError);
    }
    SUBCASE("anomalous windows never land in the training split") {
        auto windows = make_windows(10);
        std::vector<int> labels(10, 0);
        labels[2] = labels[7] = 1;
        DatasetSplit split = split_and_normalize(windows, labels, SplitRatios{});
        for (std::size_t idx : split.train) CHECK(labels[idx] == 0);
    }
}

TEST_CASE("run config validation") {
    RunConfig c;
    CHECK_NOTHROW(c.validate(8));
    SUBCASE("layer count grid") {
        c.layer_count = 2;
        CHECK_THROWS_AS(c.validate(8), ConfigError);
    }
    SUBCASE("cheb order range") {
        c.cheb_order = 9;
        CHECK_THROWS_AS(c.validate(8), ConfigError);
    }
    SUBCASE("retained modes bounded by node count") {
        c.retained_modes = 9;
        CHECK_THROWS_AS(c.validate(8), ConfigError);
    }
    SUBCASE("hidden dim grid") {
        c.hidden_dim = 7;
        CHECK_THROWS_AS(c.validate(8), ConfigError);
    }
}

TEST_CASE("dataset manifest round trip") {
    DatasetManifest m;
    m.sample_rate = 256.0;
    m.window_length = 5;
    m.stride = 5;
    m.seed = 42;
    m.spec_hash = "abc";
    m.window_labels = {0, 0, 1};
    m.nodes.push_back({"s0", 1.0, {"s0.bin"}, {"acceleration"}});
    m.nodes.push_back({"s1", 2.0, {"s1.bin"}, {"acceleration"}});
    m.edges.push_back({0, 1, 1.0});

    DatasetManifest back = DatasetManifest::from_json(m.to_json());
    CHECK(back.sample_rate == 256.0);
    CHECK(back.window_labels == m.window_labels);
    CHECK(back.nodes.size() == 2);
    CHECK(back.nodes[1].mass == 2.0);
    SensorGraph g = back.graph();
    CHECK(g.node_count == 2);
    CHECK(g.node_masses[1] == 2.0);
}

TEST_CASE("stable hash") {
    CHECK(stable_hash("") == 0xcbf29ce484222325ull);
    CHECK(stable_hash("a") != stable_hash("b"));
    CHECK(hash_hex(stable_hash("x")).size() == 16);
}
