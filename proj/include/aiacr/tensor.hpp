#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aiacr/error.hpp"

namespace aiacr {

/// Single-sample feature map, channel-major (C x H x W), float32.
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return data.size(); }

    float* channel(int c) { return data.data() + static_cast<std::size_t>(c) * plane(); }
    const float* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * plane(); }
    float& at(int c, int r, int col) { return data[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(r) * width + col]; }
    float at(int c, int r, int col) const { return data[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(r) * width + col]; }

    bool same_shape(const Tensor& o) const { return channels == o.channels && height == o.height && width == o.width; }
    bool operator==(const Tensor&) const = default;
};

}  // namespace aiacr
