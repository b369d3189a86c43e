#pragma once

// Masks, contours, distance fields and segmentation metrics.
//
// Contours are 4-connected inner boundaries: foreground pixels with at least
// one background 4-neighbour, pixels outside the image counting as background.
// Every ordered collection of points uses row-major order, and ties are
// always resolved towards the row-major-first point.

#include <compare>
#include <cstdint>
#include <vector>

#include "aiacr/grid.hpp"

namespace aiacr {

struct Point {
    int row = 0;
    int col = 0;

    auto operator<=>(const Point&) const = default;
};

class BinaryMask {
public:
    BinaryMask() = default;
    explicit BinaryMask(Shape shape) : cells_(shape, 0) {}
    /// Any nonzero input value becomes 1.
    static BinaryMask from_values(Shape shape, const std::vector<std::uint8_t>& values);

    Shape shape() const { return cells_.shape(); }
    int height() const { return cells_.height(); }
    int width() const { return cells_.width(); }

    bool operator()(int row, int col) const { return cells_(row, col) != 0; }
    bool at(Point p) const { return cells_(p.row, p.col) != 0; }
    void set(int row, int col, bool on) { cells_(row, col) = on ? 1 : 0; }
    void set(Point p, bool on) { set(p.row, p.col, on); }

    std::size_t count() const;
    bool empty() const { return count() == 0; }

    const Grid<std::uint8_t>& cells() const { return cells_; }

    bool operator==(const BinaryMask&) const = default;

private:
    Grid<std::uint8_t> cells_;
};

/// Sorted, duplicate-free set of pixel coordinates inside `source_shape`.
class ContourPointSet {
public:
    ContourPointSet() = default;
    ContourPointSet(Shape source_shape, std::vector<Point> points);

    Shape source_shape() const { return shape_; }
    const std::vector<Point>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    bool contains(Point p) const;

    bool operator==(const ContourPointSet&) const = default;

private:
    Shape shape_{};
    std::vector<Point> points_;
};

struct PixelSpacing {
    double row_mm = 1.0;
    double col_mm = 1.0;

    PixelSpacing() = default;
    PixelSpacing(double row, double col);
    bool isotropic() const { return row_mm == col_mm; }
};

/// One entry per target contour point, in the target's row-major order.
struct DistanceField {
    struct Entry {
        Point point;
        double distance = 0.0;
    };
    std::vector<Entry> entries;
};

struct MetricReport {
    double dsc = 0.0;
    double hd95_mm = 0.0;
    double max_error_mm = 0.0;

    bool operator==(const MetricReport&) const = default;
};

ContourPointSet extract_contour(const BinaryMask& mask);

/// Distance from every point of `target` to its nearest point of `reference`,
/// in millimetres under `spacing` (pass PixelSpacing{1, 1} for pixel units).
DistanceField distance_field(const ContourPointSet& target, const ContourPointSet& reference,
                             const PixelSpacing& spacing);

/// 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

/// Max of the two directed 95th percentiles (linear interpolation between
/// order statistics).
double hd95(const ContourPointSet& a, const ContourPointSet& b, const PixelSpacing& spacing);

/// Ground-truth point with the largest distance to `pred`; row-major-first on ties.
Point largest_error_point(const ContourPointSet& gt, const ContourPointSet& pred, const PixelSpacing& spacing);

/// DSC, HD95 and one-sided (gt -> pred) max error. When exactly one contour
/// is empty both distances are reported as the image diagonal in mm.
MetricReport evaluate_masks(const BinaryMask& gt, const BinaryMask& pred, const PixelSpacing& spacing);

/// Linear-interpolation percentile of an unsorted sample, q in [0, 100].
double percentile(std::vector<double> values, double q);

// Distance transforms -------------------------------------------------------

/// Exact squared Euclidean distance from every pixel to the nearest site,
/// with per-axis scale factors. +inf everywhere when there are no sites.
Grid<double> squared_distance_transform(const Grid<std::uint8_t>& sites, double row_scale = 1.0,
                                        double col_scale = 1.0);

/// Unsigned distance (pixels) from every pixel to the mask's contour; all
/// zeros when the mask is empty.
Grid<double> contour_distance_map(const BinaryMask& mask);

// Morphology ---------------------------------------------------------------

/// Square structuring element of half-width `radius` (Chebyshev ball).
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);
/// Translate by (drow, dcol); pixels shifted outside the image are dropped.
BinaryMask shift(const BinaryMask& mask, int drow, int dcol);
/// Marks the given points and fills every region not 4-reachable from the
/// image border.
BinaryMask fill_contour(const ContourPointSet& contour);
/// Number of 4-connected foreground components.
int count_components(const BinaryMask& mask);
/// True when the foreground is one 4-connected component and every
/// background pixel is 4-connected to the image border.
bool is_simply_connected(const BinaryMask& mask);

}  // namespace aiacr
