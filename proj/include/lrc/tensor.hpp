#pragma once

// Dense row-major tensors. Rank 0 (scalar), 1 and 2 are all that the
// MLP math needs; data length always equals the product of the shape.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrc/errors.hpp"

namespace lrc {

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
    if (shape.empty()) return "scalar";
    std::ostringstream os;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    return os.str();
}

template <typename T>
struct TensorT {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    TensorT() = default;
    TensorT(std::vector<std::size_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        for (std::size_t dim : shape) {
            if (dim == 0) {
                throw std::invalid_argument("tensor: zero dimension in shape " + shape_str(shape));
            }
        }
        if (data.size() != shape_numel(shape)) {
            throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
        }
    }

    static TensorT zeros(std::vector<std::size_t> s) {
        std::size_t n = shape_numel(s);
        return TensorT(std::move(s), std::vector<T>(n, T(0)));
    }
    static TensorT full(std::vector<std::size_t> s, T v) {
        std::size_t n = shape_numel(s);
        return TensorT(std::move(s), std::vector<T>(n, v));
    }
    static TensorT scalar(T v) { return TensorT({}, {v}); }
    static TensorT vector(std::vector<T> d) {
        std::size_t n = d.size();
        return TensorT({n}, std::move(d));
    }
    static TensorT matrix(std::size_t rows, std::size_t cols, std::vector<T> d) {
        return TensorT({rows, cols}, std::move(d));
    }

    std::size_t numel() const noexcept { return data.size(); }
    std::size_t rank() const noexcept { return shape.size(); }
    bool is_scalar() const noexcept { return data.size() == 1 && shape.empty(); }
    bool empty() const noexcept { return data.empty() && shape.empty(); }

    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }

    T& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    T value() const {
        if (numel() != 1) {
            throw std::invalid_argument("tensor: value() on non-scalar of shape " + shape_str(shape));
        }
        return data[0];
    }

    bool all_finite() const noexcept {
        for (const T& v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }
};

using Tensor = TensorT<double>;

}  // namespace lrc
