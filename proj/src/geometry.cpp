#include "aiacr/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace aiacr {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyContour: return "EmptyContour";
        case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::CorruptHeader: return "CorruptHeader";
        case ErrorCode::TooSmall: return "TooSmall";
        case ErrorCode::MixedBudget: return "MixedBudget";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    }
    return "Unknown";
}

BinaryMask BinaryMask::from_values(Shape shape, const std::vector<std::uint8_t>& values) {
    if (values.size() != shape.area()) {
        fail(ErrorCode::ShapeMismatch, "mask value count does not match shape");
    }
    BinaryMask mask(shape);
    auto cells = mask.cells_.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        cells[i] = values[i] != 0 ? 1 : 0;
    }
    return mask;
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(cells_.values().begin(), cells_.values().end(), std::uint8_t{1}));
}

ContourPointSet::ContourPointSet(Shape source_shape, std::vector<Point> points)
    : shape_(source_shape), points_(std::move(points)) {
    for (const Point& p : points_) {
        if (!shape_.contains(p.row, p.col)) {
            fail(ErrorCode::OutOfBounds, "contour point outside source shape");
        }
    }
    std::sort(points_.begin(), points_.end());
    points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
}

bool ContourPointSet::contains(Point p) const { return std::binary_search(points_.begin(), points_.end(), p); }

PixelSpacing::PixelSpacing(double row, double col) : row_mm(row), col_mm(col) {
    if (!(row > 0.0) || !(col > 0.0) || !std::isfinite(row) || !std::isfinite(col)) {
        fail(ErrorCode::InvalidArgument, "pixel spacing must be strictly positive");
    }
}

ContourPointSet extract_contour(const BinaryMask& mask) {
    const int h = mask.height();
    const int w = mask.width();
    auto background = [&](int r, int c) { return r < 0 || c < 0 || r >= h || c >= w || !mask(r, c); };

    std::vector<Point> points;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask(r, c)) continue;
            if (background(r - 1, c) || background(r + 1, c) || background(r, c - 1) || background(r, c + 1)) {
                points.push_back({r, c});
            }
        }
    }
    return ContourPointSet(mask.shape(), std::move(points));
}

namespace {

Grid<std::uint8_t> site_grid(const ContourPointSet& set) {
    Grid<std::uint8_t> sites(set.source_shape(), 0);
    for (const Point& p : set.points()) sites(p.row, p.col) = 1;
    return sites;
}

void require_nonempty(const ContourPointSet& set, const char* what) {
    if (set.empty()) fail(ErrorCode::EmptyContour, what);
}

}  // namespace

DistanceField distance_field(const ContourPointSet& target, const ContourPointSet& reference,
                             const PixelSpacing& spacing) {
    require_nonempty(target, "distance_field target contour is empty");
    require_nonempty(reference, "distance_field reference contour is empty");
    if (target.source_shape() != reference.source_shape()) {
        fail(ErrorCode::ShapeMismatch, "contours come from differently shaped masks");
    }

    // Isotropic spacing keeps squared distances integral so exact ties stay ties.
    const bool iso = spacing.isotropic();
    const Grid<double> sq = iso ? squared_distance_transform(site_grid(reference))
                                : squared_distance_transform(site_grid(reference), spacing.row_mm, spacing.col_mm);

    DistanceField field;
    field.entries.reserve(target.size());
    for (const Point& p : target.points()) {
        const double d = std::sqrt(sq(p.row, p.col));
        field.entries.push_back({p, iso ? spacing.row_mm * d : d});
    }
    return field;
}

double dice(const BinaryMask& a, const BinaryMask& b) {
    if (a.shape() != b.shape()) fail(ErrorCode::ShapeMismatch, "dice of differently shaped masks");
    std::size_t inter = 0;
    std::size_t total = 0;
    const auto av = a.cells().values();
    const auto bv = b.cells().values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        inter += static_cast<std::size_t>(av[i] & bv[i]);
        total += static_cast<std::size_t>(av[i]) + static_cast<std::size_t>(bv[i]);
    }
    if (total == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) fail(ErrorCode::InvalidArgument, "percentile of an empty sample");
    if (q < 0.0 || q > 100.0) fail(ErrorCode::OutOfRange, "percentile rank outside [0, 100]");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

std::vector<double> distances_of(const DistanceField& field) {
    std::vector<double> out;
    out.reserve(field.entries.size());
    for (const auto& e : field.entries) out.push_back(e.distance);
    return out;
}

}  // namespace

double hd95(const ContourPointSet& a, const ContourPointSet& b, const PixelSpacing& spacing) {
    require_nonempty(a, "hd95 contour a is empty");
    require_nonempty(b, "hd95 contour b is empty");
    const double ab = percentile(distances_of(distance_field(a, b, spacing)), 95.0);
    const double ba = percentile(distances_of(distance_field(b, a, spacing)), 95.0);
    return std::max(ab, ba);
}

Point largest_error_point(const ContourPointSet& gt, const ContourPointSet& pred, const PixelSpacing& spacing) {
    const DistanceField field = distance_field(gt, pred, spacing);
    const DistanceField::Entry* best = &field.entries.front();
    for (const auto& e : field.entries) {
        if (e.distance > best->distance) best = &e;
    }
    return best->point;
}

MetricReport evaluate_masks(const BinaryMask& gt, const BinaryMask& pred, const PixelSpacing& spacing) {
    MetricReport report;
    report.dsc = dice(gt, pred);
    const ContourPointSet cg = extract_contour(gt);
    const ContourPointSet cp = extract_contour(pred);
    if (cg.empty() && cp.empty()) return report;
    if (cg.empty() || cp.empty()) {
        const double diag = std::hypot(gt.height() * spacing.row_mm, gt.width() * spacing.col_mm);
        report.hd95_mm = diag;
        report.max_error_mm = diag;
        return report;
    }
    report.hd95_mm = hd95(cg, cp, spacing);
    const auto d = distances_of(distance_field(cg, cp, spacing));
    report.max_error_mm = *std::max_element(d.begin(), d.end());
    return report;
}

}  // namespace aiacr
