#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "aiacr/click.hpp"
#include "oracles.hpp"

using namespace aiacr;

TEST_CASE("encode_clicks examples") {
    const Shape s{64, 64};
    const auto map = encode_clicks({{20, 20, 1}}, s);
    CHECK(map(20, 20) == 1.0);
    CHECK(map(20, 31) == 0.0);
    CHECK(map(28, 28) == 0.0);  // d = 11.3
    const double sigma = 10.0 / 3.0;
    CHECK(std::abs(map(20, 24) - std::exp(-16.0 / (2.0 * sigma * sigma))) < 1e-12);
    CHECK(map(20, 24) == doctest::Approx(0.4868).epsilon(1e-4));
    CHECK(map(20, 30) > 0.0);  // d = 10 is inside the radius
}

TEST_CASE("encode_clicks rejects bad input") {
    CHECK_THROWS_AS(encode_clicks({{64, 0, 1}}, {64, 64}), Error);
    CHECK_THROWS_AS(encode_clicks({{-1, 5, 1}}, {64, 64}), Error);
    CHECK_THROWS_AS(encode_clicks({}, {64, 64}), Error);
}

TEST_CASE("encode_clicks matches the per-pixel oracle and is monotone in clicks") {
    std::mt19937_64 rng(9);
    const Shape s{40, 48};
    std::vector<Click> clicks;
    ClickMap previous(s, 0.0);
    for (int k = 1; k <= 5; ++k) {
        clicks.push_back({static_cast<int>(rng() % 40), static_cast<int>(rng() % 48), k});
        const auto map = encode_clicks(clicks, s);
        const auto expected = oracle::click_map(clicks, s);
        for (std::size_t i = 0; i < map.size(); ++i) {
            CHECK(std::abs(map.values()[i] - expected.values()[i]) < 1e-12);
            CHECK(map.values()[i] >= previous.values()[i]);
            CHECK(map.values()[i] >= 0.0);
            CHECK(map.values()[i] <= 1.0);
        }
        previous = map;
    }
}

TEST_CASE("well separated clicks each produce exactly one unit peak") {
    const Shape s{100, 100};
    const std::vector<Click> clicks{{10, 10, 1}, {10, 60, 2}, {70, 35, 3}};
    const auto map = encode_clicks(clicks, s);
    CHECK(std::count(map.values().begin(), map.values().end(), 1.0) == 3);
}

TEST_CASE("click_distribution examples") {
    DistanceField f;
    f.entries = {{{0, 0}, 1.0}, {{0, 1}, 3.0}};
    const auto p = click_distribution(f);
    CHECK(p.entries[0].probability == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + std::exp(3.0))));
    CHECK(p.entries[0].probability == doctest::Approx(0.1192).epsilon(1e-3));
    CHECK(p.entries[1].probability == doctest::Approx(0.8808).epsilon(1e-3));

    DistanceField zeros;
    zeros.entries = {{{0, 0}, 0.0}, {{0, 1}, 0.0}, {{0, 2}, 0.0}};
    for (const auto& e : click_distribution(zeros).entries) CHECK(e.probability == doctest::Approx(1.0 / 3.0));

    const auto literal = click_distribution(f, {1.0, SoftmaxSign::PreferSmallError});
    CHECK(literal.entries[0].probability > literal.entries[1].probability);
    CHECK_THROWS_AS(click_distribution(f, {0.0, SoftmaxSign::PreferLargeError}), Error);
}

TEST_CASE("sample_training_click is deterministic and honours degenerate distributions") {
    ClickProbability one;
    one.entries = {{{1, 2}, 0.0}, {{3, 4}, 1.0}, {{5, 6}, 0.0}};
    Rng rng(1);
    for (int i = 0; i < 100; ++i) CHECK(sample_training_click(one, rng).point() == Point{3, 4});

    ClickProbability uniform;
    for (int i = 0; i < 7; ++i) uniform.entries.push_back({{i, i}, 1.0 / 7.0});
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 50; ++i) CHECK(sample_training_click(uniform, a) == sample_training_click(uniform, b));
}

TEST_CASE("oracle_click") {
    const Shape s{8, 8};
    const ContourPointSet gt(s, {{0, 0}, {0, 3}});
    Rng rng(3);
    CHECK(oracle_click(gt, ContourPointSet(s, {{0, 1}}), PixelSpacing{}, rng).point() == Point{0, 3});
    CHECK(oracle_click(gt, gt, PixelSpacing{}, rng).point() == Point{0, 0});

    Rng r1(77);
    Rng r2(77);
    const ContourPointSet empty(s, {});
    const Click c1 = oracle_click(gt, empty, PixelSpacing{}, r1);
    CHECK(gt.contains(c1.point()));
    CHECK(c1 == oracle_click(gt, empty, PixelSpacing{}, r2));

    try {
        oracle_click(empty, gt, PixelSpacing{}, rng);
        FAIL("expected EmptyGroundTruth");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyGroundTruth);
    }
}
