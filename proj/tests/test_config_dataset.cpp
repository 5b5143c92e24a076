#include "codenet/config.hpp"
#include "codenet/dataset.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace codenet;

namespace {

ExperimentConfig parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/codenet_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
    void write(const std::vector<unsigned char>& bytes) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  std::streamsize(bytes.size()));
    }
};

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back((x >> 24) & 0xFF);
    v.push_back((x >> 16) & 0xFF);
    v.push_back((x >> 8) & 0xFF);
    v.push_back(x & 0xFF);
}

}  // namespace

TEST_CASE("minimal config parses with defaults") {
    ExperimentConfig cfg = parse_string(R"(
[experiment]
strategy = uncoded
iterations = 1
[network]
layers = 4,3,2
m = 1
n = 1
)");
    REQUIRE(cfg.strategy == StrategyKind::Uncoded);
    REQUIRE(cfg.layers == std::vector<int>{4, 3, 2});
    REQUIRE(cfg.learning_rate == 0.1);
    REQUIRE(cfg.checkpoint_period == 100);
    REQUIRE(cfg.t == 0);
    REQUIRE(cfg.faults.model == FaultSpec::Model::None);
}

TEST_CASE("t outside codenet is a validation error") {
    REQUIRE_THROWS_WITH(parse_string(R"(
[experiment]
strategy = uncoded
iterations = 1
[network]
layers = 4,3,2
m = 1
n = 1
t = 1
)"),
                        Catch::Matchers::ContainsSubstring("t requires codenet"));
}

TEST_CASE("the desk-scale codenet layout reports 38 nodes") {
    ExperimentConfig cfg = parse_string(R"(
[experiment]
strategy = codenet
iterations = 2000
checkpoint_period = 200
[network]
layers = 784,100,100,10
m = 5
n = 4
t = 1
[faults]
model = probabilistic
p = 3e-4
noise = sparse_uniform
density = 0.005
lo = -5
hi = 5
)");
    GridLayout grid = GridLayout::symmetric(cfg.m, cfg.n, cfg.t);
    REQUIRE(grid.total_nodes() == 38);
    REQUIRE(cfg.faults.p == 3e-4);
    REQUIRE(cfg.faults.noise.kind == NoiseKind::SparseUniform);
}

TEST_CASE("unknown keys and malformed lines carry line numbers") {
    REQUIRE_THROWS_WITH(parse_string("[experiment]\nstrategy = uncoded\nbogus_key = 3\n"),
                        Catch::Matchers::ContainsSubstring("line 3") &&
                            Catch::Matchers::ContainsSubstring("bogus_key"));
    REQUIRE_THROWS_WITH(parse_string("[experiment]\nnot a pair\n"),
                        Catch::Matchers::ContainsSubstring("line 2"));
    REQUIRE_THROWS_WITH(parse_string("[nosuch]\n"),
                        Catch::Matchers::ContainsSubstring("unknown section"));
    REQUIRE_THROWS_WITH(parse_string("key = 1\n"),
                        Catch::Matchers::ContainsSubstring("outside any section"));
}

TEST_CASE("adversarial schedule entries parse") {
    ExperimentConfig cfg = parse_string(R"(
[experiment]
strategy = codenet
iterations = 10
[network]
layers = 6,4
m = 2
n = 2
t = 1
[faults]
model = adversarial
inject = iter=5 layer=1 step=O1 row=1 col=0
inject = iter=7 layer=1 step=O3 row=2 col=1
)");
    REQUIRE(cfg.faults.schedule.size() == 2);
    REQUIRE(cfg.faults.schedule[0].iteration == 5);
    REQUIRE(cfg.faults.schedule[0].step == StepKind::O1);
    REQUIRE(cfg.faults.schedule[1].step == StepKind::O3);
    REQUIRE(cfg.faults.schedule[1].row == 2);
}

TEST_CASE("raw values are preserved for provenance") {
    ExperimentConfig cfg = parse_string(
        "[experiment]\nstrategy = uncoded\niterations = 3\n[network]\nlayers = 4,2\nm = "
        "1\nn = 1\n");
    bool saw = false;
    for (const auto& [k, v] : cfg.raw_values)
        if (k == "experiment.iterations" && v == "3") saw = true;
    REQUIRE(saw);
}

TEST_CASE("hand-built idx fixture loads exactly") {
    // Two 2x2 images and two labels, written byte for byte.
    std::vector<unsigned char> img;
    push_be32(img, 0x00000803);
    push_be32(img, 2);
    push_be32(img, 2);
    push_be32(img, 2);
    for (unsigned char b : {0, 51, 102, 153, 204, 255, 0, 255}) img.push_back(b);
    std::vector<unsigned char> lab;
    push_be32(lab, 0x00000801);
    push_be32(lab, 2);
    lab.push_back(7);
    lab.push_back(0);

    TempFile fi("images.idx"), fl("labels.idx");
    fi.write(img);
    fl.write(lab);
    auto data = load_mnist(fi.path, fl.path);
    REQUIRE(data.size() == 2);
    REQUIRE(data[0].x.size() == 4);
    REQUIRE(data[0].x(0) == 0.0);
    REQUIRE(data[0].x(1) == 51.0 / 255.0);
    REQUIRE(data[0].x(2) == 102.0 / 255.0);
    REQUIRE(data[0].x(3) == 153.0 / 255.0);
    REQUIRE(data[1].x(1) == 1.0);
    REQUIRE(data[0].y(7) == 1.0);
    REQUIRE(data[0].y.sum() == 1.0);
    REQUIRE(data[1].y(0) == 1.0);
}

TEST_CASE("idx loader rejects malformed files") {
    std::vector<unsigned char> img;
    push_be32(img, 0x00000802);  // wrong magic
    push_be32(img, 1);
    push_be32(img, 2);
    push_be32(img, 2);
    img.resize(img.size() + 4, 0);
    std::vector<unsigned char> lab;
    push_be32(lab, 0x00000801);
    push_be32(lab, 1);
    lab.push_back(3);

    TempFile fi("bad_images.idx"), fl("ok_labels.idx");
    fi.write(img);
    fl.write(lab);
    REQUIRE_THROWS_WITH(load_mnist(fi.path, fl.path),
                        Catch::Matchers::ContainsSubstring("magic"));

    img[3] = 0x03;  // fix magic, truncate pixel data
    std::vector<unsigned char> truncated(img.begin(), img.end() - 2);
    fi.write(truncated);
    REQUIRE_THROWS_WITH(load_mnist(fi.path, fl.path),
                        Catch::Matchers::ContainsSubstring("truncated"));

    fi.write(img);
    std::vector<unsigned char> lab2;
    push_be32(lab2, 0x00000801);
    push_be32(lab2, 2);  // count mismatch
    lab2.push_back(1);
    lab2.push_back(2);
    fl.write(lab2);
    REQUIRE_THROWS_WITH(load_mnist(fi.path, fl.path),
                        Catch::Matchers::ContainsSubstring("mismatch"));
}

TEST_CASE("synthetic dataset is a pure function of its seed") {
    auto a = synthetic_dataset(42, 50, 12, 4);
    auto b = synthetic_dataset(42, 50, 12, 4);
    REQUIRE(a.size() == 50);
    for (std::size_t k = 0; k < a.size(); ++k) {
        REQUIRE((a[k].x.array() == b[k].x.array()).all());
        REQUIRE((a[k].y.array() == b[k].y.array()).all());
    }
    auto c = synthetic_dataset(43, 50, 12, 4);
    bool any_diff = false;
    for (std::size_t k = 0; k < a.size(); ++k)
        if ((a[k].x - c[k].x).cwiseAbs().maxCoeff() > 0) any_diff = true;
    REQUIRE(any_diff);
    // Balanced labels, values clamped to the pixel range.
    for (const auto& s : a) {
        REQUIRE(s.x.minCoeff() >= 0.0);
        REQUIRE(s.x.maxCoeff() <= 1.0);
        REQUIRE(s.y.sum() == 1.0);
    }
}

TEST_CASE("synthetic clusters are separable enough to learn") {
    auto train = synthetic_dataset(7, 300, 20, 4);
    DnnState net = make_dnn({20, 16, 4}, Activation::Sigmoid, 0.5, 11);
    for (int epoch = 0; epoch < 4; ++epoch)
        for (const auto& s : train) {
            ForwardTrace trace = oracle_feedforward(net, s.x);
            auto deltas = oracle_backprop(net, trace, s.y);
            oracle_update(net, trace, deltas);
        }
    auto eval = synthetic_dataset(7, 300, 20, 4);  // same distribution
    REQUIRE(evaluate_accuracy(net, eval) >= 0.95);
}
