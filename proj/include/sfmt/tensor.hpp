#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "sfmt/error.hpp"

namespace sfmt {

using Shape = std::vector<int>;

inline size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (int e : s) {
        if (e < 0) throw DimError("negative extent in shape");
        n *= static_cast<size_t>(e);
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense row-major tensor. Real is float for training, double for verification.
template <typename Real>
struct Tensor {
    Shape shape;
    std::vector<Real> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<Real> d) : shape(std::move(s)), data(std::move(d)) {
        if (shape_numel(shape) != data.size())
            throw DimError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    }

    static Tensor zeros(Shape s) {
        size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<Real>(n, Real(0)));
    }

    static Tensor full(Shape s, Real v) {
        size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<Real>(n, v));
    }

    size_t numel() const { return data.size(); }
    int ndim() const { return static_cast<int>(shape.size()); }

    // 2-D accessors; most of the engine works on matrices.
    int rows() const { return shape.size() == 2 ? shape[0] : (shape.empty() ? 1 : shape[0]); }
    int cols() const { return shape.size() == 2 ? shape[1] : 1; }

    Real& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    Real at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    bool all_finite() const {
        for (Real v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename Other>
    Tensor<Other> cast() const {
        Tensor<Other> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
        return out;
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace sfmt
