#include "aiacr/click.hpp"

#include <algorithm>
#include <cmath>

namespace aiacr {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

ClickMap encode_clicks(const std::vector<Click>& clicks, Shape shape, const ClickEncoding& enc) {
    if (clicks.empty()) fail(ErrorCode::InvalidArgument, "encode_clicks needs at least one click");
    for (const Click& c : clicks) {
        if (!shape.contains(c.row, c.col)) fail(ErrorCode::OutOfBounds, "click outside the image");
    }
    const double sigma = enc.sigma();
    const double r2max = enc.radius * enc.radius;
    const int reach = static_cast<int>(std::floor(enc.radius));

    ClickMap map(shape, 0.0);
    for (const Click& c : clicks) {
        for (int r = std::max(0, c.row - reach); r <= std::min(shape.height - 1, c.row + reach); ++r) {
            for (int col = std::max(0, c.col - reach); col <= std::min(shape.width - 1, c.col + reach); ++col) {
                const double dr = r - c.row;
                const double dc = col - c.col;
                const double d2 = dr * dr + dc * dc;
                if (d2 > r2max) continue;
                const double g = std::exp(-d2 / (2.0 * sigma * sigma));
                map(r, col) = std::max(map(r, col), g);
            }
        }
    }
    return map;
}

ClickProbability click_distribution(const DistanceField& field, const ClickSampling& sampling) {
    if (field.entries.empty()) fail(ErrorCode::EmptyContour, "click_distribution of an empty field");
    if (!(sampling.temperature > 0.0)) fail(ErrorCode::InvalidArgument, "temperature must be positive");

    const double sign = sampling.sign == SoftmaxSign::PreferLargeError ? 1.0 : -1.0;
    std::vector<double> logits;
    logits.reserve(field.entries.size());
    for (const auto& e : field.entries) logits.push_back(sign * e.distance / sampling.temperature);
    const double peak = *std::max_element(logits.begin(), logits.end());

    double total = 0.0;
    for (double& l : logits) {
        l = std::exp(l - peak);
        total += l;
    }
    ClickProbability dist;
    dist.entries.reserve(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        dist.entries.push_back({field.entries[i].point, logits[i] / total});
    }
    return dist;
}

Click sample_training_click(const ClickProbability& dist, Rng& rng) {
    if (dist.entries.empty()) fail(ErrorCode::InvalidArgument, "sampling from an empty distribution");
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cumulative = 0.0;
    for (const auto& e : dist.entries) {
        cumulative += e.probability;
        if (u < cumulative) return {e.point.row, e.point.col, 1};
    }
    // u landed in the rounding gap above the final cumulative sum.
    for (auto it = dist.entries.rbegin(); it != dist.entries.rend(); ++it) {
        if (it->probability > 0.0) return {it->point.row, it->point.col, 1};
    }
    return {dist.entries.back().point.row, dist.entries.back().point.col, 1};
}

Click uniform_contour_click(const ContourPointSet& gt, Rng& rng) {
    if (gt.empty()) fail(ErrorCode::EmptyGroundTruth, "ground-truth contour is empty");
    std::uniform_int_distribution<std::size_t> pick(0, gt.size() - 1);
    const Point p = gt.points()[pick(rng)];
    return {p.row, p.col, 1};
}

Click oracle_click(const ContourPointSet& gt, const ContourPointSet& pred, const PixelSpacing& spacing, Rng& rng) {
    if (gt.empty()) fail(ErrorCode::EmptyGroundTruth, "ground-truth contour is empty");
    if (pred.empty()) return uniform_contour_click(gt, rng);
    const Point p = largest_error_point(gt, pred, spacing);
    return {p.row, p.col, 1};
}

Click training_click(const ContourPointSet& gt, const ContourPointSet& pred, const ClickSampling& sampling,
                     Rng& rng) {
    if (gt.empty()) fail(ErrorCode::EmptyGroundTruth, "ground-truth contour is empty");
    if (pred.empty()) return uniform_contour_click(gt, rng);
    return sample_training_click(click_distribution(distance_field(gt, pred, PixelSpacing{}), sampling), rng);
}

}  // namespace aiacr
