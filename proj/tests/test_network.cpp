#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "aiacr/network.hpp"

using namespace aiacr;

namespace {

NetworkConfig tiny_config() {
    NetworkConfig c;
    c.base_features = 2;
    c.max_features = 4;
    c.depth = 3;
    c.input_size = 8;
    return c;
}

RevisionInput random_input(int size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Grid<double> image({size, size});
    BinaryMask mask({size, size});
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            image(r, c) = u(rng);
            mask.set(r, c, u(rng) < 0.4);
        }
    }
    const ClickMap clicks = encode_clicks({{size / 2, size / 3, 1}}, {size, size});
    return make_revision_input(image, mask, clicks);
}

// Count written out layer by layer from the block structure.
std::size_t expected_parameters(const NetworkConfig& c) {
    const auto w = c.encoder_widths();
    std::size_t total = 0;
    int in = c.in_channels;
    int size = c.input_size;
    for (int i = 0; i < c.depth; ++i) {
        size /= 2;
        total += static_cast<std::size_t>(in) * w[i] * 9 + (size > 1 ? 2 * w[i] : w[i]);
        in = w[i];
    }
    for (int i = c.depth - 2; i >= 0; --i) {
        total += static_cast<std::size_t>(in + w[i]) * w[i] * 9 + 2 * w[i];
        in = w[i];
    }
    return total + static_cast<std::size_t>(in + c.in_channels) * 9 + 1;
}

}  // namespace

TEST_CASE("default configuration is the full-width depth-8 network") {
    const NetworkConfig c;
    CHECK(c.in_channels == 3);
    CHECK(c.out_channels == 1);
    CHECK(c.depth == 8);
    CHECK(c.input_size == 256);
    CHECK(c.encoder_widths() == std::vector<int>{64, 128, 256, 512, 512, 512, 512, 512});
    CHECK(c.input_size / (1 << c.depth) == 1);
    CHECK(parameter_count(c) == expected_parameters(c));
    CHECK(parameter_count(c) == 32195100u);
}

TEST_CASE("invalid configurations are rejected") {
    NetworkConfig c;
    c.input_size = 128;
    CHECK_THROWS_AS(c.validate(), Error);
    c = NetworkConfig{};
    c.in_channels = 4;
    CHECK_THROWS_AS(RevisionNetwork(c, 1), Error);
    c = NetworkConfig{};
    c.max_features = 32;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("forward shapes and determinism on a reduced network") {
    NetworkConfig c;
    c.base_features = 4;
    c.max_features = 16;
    const RevisionNetwork net(c, 7);
    CHECK(net.parameter_count() == expected_parameters(c));
    const RevisionInput in = random_input(256, 1);
    RevisionNetwork::ForwardCache cache;
    const Tensor logits = net.forward_logits(in.channels, &cache);
    CHECK(logits.channels == 1);
    CHECK(logits.height == 256);
    CHECK(logits.width == 256);
    CHECK(cache.encoder.back().output.height == 1);
    CHECK(cache.encoder.back().output.width == 1);

    const ProbabilityMap p1 = net.forward(in);
    const ProbabilityMap p2 = net.forward(in);
    CHECK(p1 == p2);
    for (double v : p1.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    // Masks fed back as the mask channel keep the pipeline well typed.
    const BinaryMask m = to_mask(p1);
    Grid<double> image({256, 256}, 0.5);
    const auto again = net.forward(make_revision_input(image, m, encode_clicks({{3, 3, 1}}, {256, 256})));
    CHECK(again.shape() == Shape{256, 256});
}

TEST_CASE("wrong input size is a ShapeMismatch") {
    const RevisionNetwork net(tiny_config(), 1);
    try {
        net.forward(random_input(16, 2));
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ShapeMismatch);
    }
}

TEST_CASE("to_mask threshold is inclusive") {
    ProbabilityMap p({1, 3});
    p(0, 0) = 0.9;
    p(0, 1) = 0.1;
    p(0, 2) = 0.5;
    const BinaryMask m = to_mask(p);
    CHECK(m(0, 0));
    CHECK_FALSE(m(0, 1));
    CHECK(m(0, 2));
    CHECK(to_mask(ProbabilityMap({4, 4}, 0.9)).count() == 16);
    CHECK(to_mask(ProbabilityMap({4, 4}, 0.1)).empty());
}

TEST_CASE("make_revision_input validates channel ranges") {
    Grid<double> image({4, 4}, 0.5);
    const BinaryMask mask({4, 4});
    ClickMap clicks({4, 4}, 0.0);
    CHECK_NOTHROW(make_revision_input(image, mask, clicks));
    image(0, 0) = 1.5;
    CHECK_THROWS_AS(make_revision_input(image, mask, clicks), Error);
    CHECK_THROWS_AS(make_revision_input(Grid<double>({4, 5}), mask, clicks), Error);
}

TEST_CASE("backward matches finite differences of a linear readout") {
    const NetworkConfig c = tiny_config();
    RevisionNetwork net(c, 3);
    const RevisionInput in = random_input(8, 5);

    std::mt19937 rng(8);
    std::normal_distribution<float> nd(0.0f, 1.0f);
    Tensor readout(1, 8, 8);
    for (auto& v : readout.data) v = nd(rng);
    auto objective = [&](const RevisionNetwork& n) {
        const Tensor z = n.forward_logits(in.channels, nullptr);
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) s += static_cast<double>(z.data[i]) * readout.data[i];
        return s;
    };

    RevisionNetwork::ForwardCache cache;
    net.forward_logits(in.channels, &cache);
    std::vector<float> grads(net.parameter_count(), 0.0f);
    net.backward(cache, readout, grads);

    int checked = 0;
    int agreed = 0;
    std::uniform_int_distribution<std::size_t> pick(0, net.parameter_count() - 1);
    for (int t = 0; t < 60; ++t) {
        const std::size_t i = pick(rng);
        const float saved = net.parameters()[i];
        const float h = 2e-3f;
        net.parameters()[i] = saved + h;
        const double up = objective(net);
        net.parameters()[i] = saved - h;
        const double down = objective(net);
        net.parameters()[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        ++checked;
        if (std::abs(numeric - grads[i]) <= 2e-2 * std::max(1.0, std::abs(numeric))) ++agreed;
    }
    // ReLU kinks can make an occasional float32 difference quotient disagree.
    CHECK(agreed >= checked - 1);
}
