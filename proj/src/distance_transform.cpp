#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "aiacr/geometry.hpp"

namespace aiacr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), restricted to the
// finite samples so rows without sites stay at +inf.
void squared_edt_1d(const double* f, double* out, int n, std::ptrdiff_t stride, double scale,
                    std::vector<int>& v, std::vector<double>& z) {
    const double s2 = scale * scale;
    int k = -1;
    for (int q = 0; q < n; ++q) {
        const double fq = f[q * stride];
        if (!std::isfinite(fq)) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        double s = 0.0;
        while (true) {
            const int p = v[k];
            const double fp = f[p * stride];
            s = ((fq + s2 * q * q) - (fp + s2 * p * p)) / (2.0 * s2 * (q - p));
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) out[q * stride] = kInf;
        return;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double d = q - v[k];
        out[q * stride] = s2 * d * d + f[v[k] * stride];
    }
}

}  // namespace

Grid<double> squared_distance_transform(const Grid<std::uint8_t>& sites, double row_scale, double col_scale) {
    const int h = sites.height();
    const int w = sites.width();
    Grid<double> init(sites.shape(), kInf);
    for (std::size_t i = 0; i < sites.size(); ++i) {
        if (sites.values()[i] != 0) init.values()[i] = 0.0;
    }
    Grid<double> columns(sites.shape(), kInf);

#pragma omp parallel
    {
        std::vector<int> v(static_cast<std::size_t>(std::max(h, w)) + 1);
        std::vector<double> z(static_cast<std::size_t>(std::max(h, w)) + 2);
#pragma omp for schedule(static)
        for (int c = 0; c < w; ++c) {
            squared_edt_1d(init.data() + c, columns.data() + c, h, w, row_scale, v, z);
        }
#pragma omp for schedule(static)
        for (int r = 0; r < h; ++r) {
            const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(r) * w;
            squared_edt_1d(columns.data() + off, init.data() + off, w, 1, col_scale, v, z);
        }
    }
    return init;
}

Grid<double> contour_distance_map(const BinaryMask& mask) {
    const ContourPointSet contour = extract_contour(mask);
    if (contour.empty()) return Grid<double>(mask.shape(), 0.0);
    Grid<std::uint8_t> sites(mask.shape(), 0);
    for (const Point& p : contour.points()) sites(p.row, p.col) = 1;
    Grid<double> dt = squared_distance_transform(sites);
    for (double& d : dt.values()) d = std::sqrt(d);
    return dt;
}

namespace {

// Separable running max (dilate) or min (erode) over a clipped window.
BinaryMask square_filter(const BinaryMask& mask, int radius, bool take_max) {
    if (radius < 0) fail(ErrorCode::InvalidArgument, "negative structuring element radius");
    if (radius == 0) return mask;
    const int h = mask.height();
    const int w = mask.width();
    std::vector<std::uint8_t> tmp(mask.shape().area());
    std::vector<std::uint8_t> out(mask.shape().area());
    const auto& in = mask.cells();
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            bool acc = !take_max;
            for (int dc = std::max(0, c - radius); dc <= std::min(w - 1, c + radius); ++dc) {
                acc = take_max ? (acc || in(r, dc)) : (acc && in(r, dc));
            }
            tmp[static_cast<std::size_t>(r) * w + c] = acc;
        }
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            bool acc = !take_max;
            for (int dr = std::max(0, r - radius); dr <= std::min(h - 1, r + radius); ++dr) {
                const bool v = tmp[static_cast<std::size_t>(dr) * w + c] != 0;
                acc = take_max ? (acc || v) : (acc && v);
            }
            out[static_cast<std::size_t>(r) * w + c] = acc;
        }
    }
    return BinaryMask::from_values(mask.shape(), out);
}

constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

// 4-connected flood over cells where `passable` holds, seeded from `seeds`.
template <class Passable>
std::vector<std::uint8_t> flood(Shape shape, const std::vector<Point>& seeds, Passable passable) {
    std::vector<std::uint8_t> seen(shape.area(), 0);
    std::deque<Point> queue;
    auto push = [&](Point p) {
        const std::size_t i = static_cast<std::size_t>(p.row) * shape.width + p.col;
        if (seen[i] || !passable(p)) return;
        seen[i] = 1;
        queue.push_back(p);
    };
    for (const Point& s : seeds) push(s);
    while (!queue.empty()) {
        const Point p = queue.front();
        queue.pop_front();
        for (int k = 0; k < 4; ++k) {
            const Point n{p.row + kDr[k], p.col + kDc[k]};
            if (shape.contains(n.row, n.col)) push(n);
        }
    }
    return seen;
}

std::vector<Point> border_pixels(Shape shape) {
    std::vector<Point> out;
    for (int r = 0; r < shape.height; ++r) {
        for (int c = 0; c < shape.width; ++c) {
            if (r == 0 || c == 0 || r == shape.height - 1 || c == shape.width - 1) out.push_back({r, c});
        }
    }
    return out;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, int radius) { return square_filter(mask, radius, true); }

BinaryMask erode(const BinaryMask& mask, int radius) { return square_filter(mask, radius, false); }

BinaryMask shift(const BinaryMask& mask, int drow, int dcol) {
    BinaryMask out(mask.shape());
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            if (mask(r, c) && mask.shape().contains(r + drow, c + dcol)) out.set(r + drow, c + dcol, true);
        }
    }
    return out;
}

BinaryMask fill_contour(const ContourPointSet& contour) {
    const Shape shape = contour.source_shape();
    Grid<std::uint8_t> marked(shape, 0);
    for (const Point& p : contour.points()) marked(p.row, p.col) = 1;
    const auto outside = flood(shape, border_pixels(shape), [&](Point p) { return marked(p.row, p.col) == 0; });
    std::vector<std::uint8_t> filled(shape.area());
    for (std::size_t i = 0; i < filled.size(); ++i) filled[i] = outside[i] ? 0 : 1;
    return BinaryMask::from_values(shape, filled);
}

int count_components(const BinaryMask& mask) {
    const Shape shape = mask.shape();
    std::vector<std::uint8_t> seen(shape.area(), 0);
    int components = 0;
    for (int r = 0; r < shape.height; ++r) {
        for (int c = 0; c < shape.width; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * shape.width + c;
            if (!mask(r, c) || seen[i]) continue;
            ++components;
            const auto reached = flood(shape, {{r, c}}, [&](Point p) { return mask.at(p); });
            for (std::size_t j = 0; j < seen.size(); ++j) seen[j] |= reached[j];
        }
    }
    return components;
}

bool is_simply_connected(const BinaryMask& mask) {
    if (count_components(mask) != 1) return false;
    const auto outside = flood(mask.shape(), border_pixels(mask.shape()), [&](Point p) { return !mask.at(p); });
    for (std::size_t i = 0; i < outside.size(); ++i) {
        if (mask.cells().values()[i] == 0 && !outside[i]) return false;
    }
    return true;
}

}  // namespace aiacr
