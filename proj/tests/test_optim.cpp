#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aiacr/error.hpp"
#include "aiacr/optim.hpp"

using namespace aiacr;

TEST_CASE("default schedule") {
    const OptimizerSchedule s;
    CHECK(s.beta1 == 0.9);
    CHECK(s.beta2 == 0.999);
    CHECK(s.epsilon == 1e-8);
    CHECK(s.total_iterations == 100000);
    CHECK(s.batch_size == 1);
    CHECK(lr_at(s, 0) == 1e-4);
    CHECK(lr_at(s, 49999) == 1e-4);
    CHECK(lr_at(s, 50000) == 1e-5);
    CHECK(lr_at(s, 74999) == 1e-5);
    CHECK(lr_at(s, 75000) == 1e-6);
    CHECK(lr_at(s, 99999) == 1e-6);
}

TEST_CASE("lr_at range and schedule validation") {
    const OptimizerSchedule s;
    for (std::int64_t it : {std::int64_t{-1}, std::int64_t{100000}}) {
        try {
            lr_at(s, it);
            FAIL("expected OutOfRange");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::OutOfRange);
        }
    }
    OptimizerSchedule bad;
    bad.lr_steps = {{10, 1e-3}};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.lr_steps = {{0, 1e-3}, {0, 1e-4}};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.lr_steps = {{0, -1.0}};
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("Adam first step moves every parameter by about lr against the gradient sign") {
    Adam adam(4, 0.9, 0.999, 1e-8);
    std::vector<float> p{1.0f, -2.0f, 0.5f, 3.0f};
    const std::vector<float> g{0.3f, -7.0f, 1e-3f, 0.0f};
    adam.step(p, g, 0.01);
    CHECK(adam.steps() == 1);
    CHECK(p[0] == doctest::Approx(0.99).epsilon(1e-5));
    CHECK(p[1] == doctest::Approx(-1.99).epsilon(1e-5));
    CHECK(p[2] == doctest::Approx(0.49).epsilon(1e-4));
    CHECK(p[3] == 3.0f);
}

TEST_CASE("Adam matches a double-precision transcription over many steps") {
    const double b1 = 0.9;
    const double b2 = 0.999;
    const double eps = 1e-8;
    Adam adam(1, b1, b2, eps);
    std::vector<float> p{0.0f};
    double x = 0.0;
    double m = 0.0;
    double v = 0.0;
    for (int t = 1; t <= 200; ++t) {
        const double g = 2.0 * (x - 3.0) + std::sin(t);
        const float gf = static_cast<float>(2.0 * (p[0] - 3.0) + std::sin(t));
        adam.step(p, std::vector<float>{gf}, 0.05);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        x -= 0.05 * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    }
    CHECK(p[0] == doctest::Approx(x).epsilon(1e-3));
}

TEST_CASE("Adam restore rejects mismatched sizes") {
    Adam adam(3, 0.9, 0.999, 1e-8);
    CHECK_THROWS_AS(adam.restore(1, {0.0f}, {0.0f, 0.0f, 0.0f}), Error);
    adam.restore(5, {1, 2, 3}, {4, 5, 6});
    CHECK(adam.steps() == 5);
    CHECK(adam.first_moment() == std::vector<float>{1, 2, 3});
}
