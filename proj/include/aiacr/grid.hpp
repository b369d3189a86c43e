#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aiacr/error.hpp"

namespace aiacr {

struct Shape {
    int height = 0;
    int width = 0;

    std::size_t area() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
    bool contains(int row, int col) const { return row >= 0 && col >= 0 && row < height && col < width; }
    bool operator==(const Shape&) const = default;
};

/// Dense row-major 2D array.
template <class T>
class Grid {
public:
    Grid() = default;
    explicit Grid(Shape shape, T fill = T{}) : shape_(shape), data_(shape.area(), fill) {
        if (shape.height < 0 || shape.width < 0) {
            fail(ErrorCode::InvalidArgument, "negative grid dimension");
        }
    }
    Grid(Shape shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
        if (data_.size() != shape.area()) {
            fail(ErrorCode::ShapeMismatch, "value count does not match grid shape");
        }
    }

    Shape shape() const { return shape_; }
    int height() const { return shape_.height; }
    int width() const { return shape_.width; }
    std::size_t size() const { return data_.size(); }

    T& operator()(int row, int col) { return data_[index(row, col)]; }
    const T& operator()(int row, int col) const { return data_[index(row, col)]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    bool operator==(const Grid&) const = default;

private:
    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_.width) + static_cast<std::size_t>(col);
    }

    Shape shape_{};
    std::vector<T> data_;
};

}  // namespace aiacr
