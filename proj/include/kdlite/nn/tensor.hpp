#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "kdlite/nn/errors.hpp"

namespace kdlite::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

// Dense row-major float64 array. `grad` is empty unless the tensor takes part
// in training, in which case it mirrors `data` element for element.
struct Tensor {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;

    Tensor() = default;

    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(element_count(shape), fill) {}

    Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
        if (data.size() != element_count(shape)) {
            throw DimensionError("tensor: " + std::to_string(data.size()) + " values for shape " +
                                 to_string(shape));
        }
    }

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> values;
        values.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw DimensionError("tensor: ragged matrix literal");
            values.insert(values.end(), row.begin(), row.end());
        }
        return Tensor({r, c}, std::move(values));
    }

    static Tensor vector(std::initializer_list<double> values) {
        return Tensor({values.size()}, std::vector<double>(values));
    }

    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

    std::size_t size() const noexcept { return data.size(); }
    std::size_t rank() const noexcept { return shape.size(); }
    std::size_t dim(std::size_t axis) const { return shape.at(axis); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    bool has_grad() const noexcept { return !grad.empty(); }
    void enable_grad() { grad.assign(data.size(), 0.0); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

    bool all_finite() const noexcept {
        return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
    }

    // Compares shape and values; gradients are ignored.
    bool operator==(const Tensor& other) const { return shape == other.shape && data == other.data; }
};

// Integer and boolean companions used for token ids, labels and padding masks.
template <typename T>
struct BasicArray {
    Shape shape;
    std::vector<T> data;

    BasicArray() = default;
    BasicArray(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        if (data.size() != element_count(shape)) {
            throw DimensionError("array: " + std::to_string(data.size()) + " values for shape " +
                                 to_string(shape));
        }
    }
    explicit BasicArray(Shape s, T fill = T{}) : shape(std::move(s)), data(element_count(shape), fill) {}

    std::size_t size() const noexcept { return data.size(); }
    std::size_t dim(std::size_t axis) const { return shape.at(axis); }
    T& operator[](std::size_t i) { return data[i]; }
    T operator[](std::size_t i) const { return data[i]; }
};

using IntTensor = BasicArray<std::int64_t>;
using BoolTensor = BasicArray<std::uint8_t>;

// Converts a right-padded [B x T] mask into per-row real-token counts.
inline std::vector<std::size_t> prefix_lengths(const BoolTensor& mask) {
    if (mask.shape.size() != 2) throw DimensionError("mask: expected rank 2, got " + to_string(mask.shape));
    const std::size_t rows = mask.shape[0];
    const std::size_t cols = mask.shape[1];
    std::vector<std::size_t> lengths(rows, 0);
    for (std::size_t b = 0; b < rows; ++b) {
        std::size_t len = 0;
        while (len < cols && mask[b * cols + len]) ++len;
        for (std::size_t t = len; t < cols; ++t) {
            if (mask[b * cols + t]) {
                throw MaskError("mask: row " + std::to_string(b) + " is not a right-padded prefix");
            }
        }
        lengths[b] = len;
    }
    return lengths;
}

inline BoolTensor mask_from_lengths(const std::vector<std::size_t>& lengths, std::size_t steps) {
    BoolTensor mask({lengths.size(), steps}, 0);
    for (std::size_t b = 0; b < lengths.size(); ++b) {
        for (std::size_t t = 0; t < std::min(lengths[b], steps); ++t) mask[b * steps + t] = 1;
    }
    return mask;
}

}  // namespace kdlite::nn
