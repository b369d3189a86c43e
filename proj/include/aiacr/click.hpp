#pragma once

// Click encoding and simulated clicks.

#include <cstdint>
#include <random>
#include <vector>

#include "aiacr/geometry.hpp"

namespace aiacr {

/// Seeded random source shared by every stochastic routine.
using Rng = std::mt19937_64;

/// Independent stream `stream` of a run seeded with `seed`.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

struct Click {
    int row = 0;
    int col = 0;
    int ordinal = 1;  ///< 1-based index within a revision session

    Point point() const { return {row, col}; }
    bool operator==(const Click&) const = default;
};

struct ClickEncoding {
    double radius = 10.0;  ///< hard truncation radius, pixels
    double sigma() const { return radius / 3.0; }
};

/// Gaussian click image, values in [0, 1].
using ClickMap = Grid<double>;

/// Per-pixel maximum of truncated unit-peak Gaussians centred on the clicks.
ClickMap encode_clicks(const std::vector<Click>& clicks, Shape shape, const ClickEncoding& enc = {});

struct ClickProbability {
    struct Entry {
        Point point;
        double probability = 0.0;
    };
    std::vector<Entry> entries;
};

enum class SoftmaxSign {
    PreferLargeError,  ///< P ∝ exp(+D / T)
    PreferSmallError,  ///< P ∝ exp(-D / T), the literal printed form
};

struct ClickSampling {
    double temperature = 1.0;  ///< in the distance field's units
    SoftmaxSign sign = SoftmaxSign::PreferLargeError;
};

ClickProbability click_distribution(const DistanceField& field, const ClickSampling& sampling = {});

/// Inverse-CDF draw; one uniform variate per call.
Click sample_training_click(const ClickProbability& dist, Rng& rng);

/// Uniform choice over the ground-truth contour, used whenever the prediction
/// has no contour.
Click uniform_contour_click(const ContourPointSet& gt, Rng& rng);

/// Simulated clinician: the ground-truth point with the largest one-sided
/// error; falls back to a uniform draw when `pred` is empty.
Click oracle_click(const ContourPointSet& gt, const ContourPointSet& pred, const PixelSpacing& spacing, Rng& rng);

/// Training-time click: softmax over the distance field in pixel units, or a
/// uniform draw when `pred` is empty.
Click training_click(const ContourPointSet& gt, const ContourPointSet& pred, const ClickSampling& sampling,
                     Rng& rng);

}  // namespace aiacr
