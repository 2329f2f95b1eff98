// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pigment/error.hpp"

namespace pigment {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

// Dense row-major tensor. Embeddings use Tensor<double> ([slots, channels]);
// latents use Tensor<float> ([channels, height, width]).
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{})
        : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

    Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
        if (values_.size() != element_count(shape_)) {
            throw ContractError("shape_mismatch", "tensor of shape " + shape_string(shape_) +
                                                      " given " + std::to_string(values_.size()) +
                                                      " values");
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }
    const std::vector<T>& storage() const noexcept { return values_; }

    T& operator[](std::size_t i) noexcept { return values_[i]; }
    const T& operator[](std::size_t i) const noexcept { return values_[i]; }

    // Index helpers for the two ranks this project uses.
    T& at(std::size_t row, std::size_t col) { return values_[row * shape_[1] + col]; }
    const T& at(std::size_t row, std::size_t col) const { return values_[row * shape_[1] + col]; }
    T& at(std::size_t c, std::size_t y, std::size_t x) {
        return values_[(c * shape_[1] + y) * shape_[2] + x];
    }
    const T& at(std::size_t c, std::size_t y, std::size_t x) const {
        return values_[(c * shape_[1] + y) * shape_[2] + x];
    }

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(values_.size());
        std::transform(values_.begin(), values_.end(), out.begin(),
                       [](T v) { return static_cast<U>(v); });
        return Tensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<T> values_;
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* context) {
    if (!a.same_shape(b)) {
        throw ContractError("shape_mismatch", std::string(context) + ": " + shape_string(a.shape()) +
                                                  " vs " + shape_string(b.shape()));
    }
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "max_abs_diff");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return worst;
}

template <typename T>
double l2_norm(std::span<const T> v) {
    double acc = 0.0;
    for (T x : v) acc += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(acc);
}

}  // namespace pigment
