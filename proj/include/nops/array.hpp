#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nops/errors.hpp"

namespace nops {

inline std::size_t numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

/// Dense row-major array of 64-bit floats. Fields use channels-first layout
/// [C,H,W]; scalars use shape [1].
struct DenseArray {
    std::vector<int> shape;
    std::vector<double> data;

    DenseArray() = default;
    DenseArray(std::vector<int> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (numel(shape) != data.size())
            throw dimension_error("DenseArray: shape " + shape_str(shape) +
                                  " does not match data length " + std::to_string(data.size()));
        for (int d : shape)
            if (d <= 0) throw dimension_error("DenseArray: non-positive dimension in " + shape_str(shape));
    }

    static DenseArray zeros(std::vector<int> s) {
        std::size_t n = numel(s);
        return DenseArray(std::move(s), std::vector<double>(n, 0.0));
    }

    static DenseArray full(std::vector<int> s, double v) {
        std::size_t n = numel(s);
        return DenseArray(std::move(s), std::vector<double>(n, v));
    }

    static DenseArray scalar(double v) { return DenseArray({1}, {v}); }

    /// Construction gate for values entering from outside (user input, files):
    /// rejects NaN/Inf.
    static DenseArray from_external(std::vector<int> s, std::vector<double> d) {
        for (double v : d)
            if (!std::isfinite(v))
                throw numeric_error("DenseArray: non-finite value in external data");
        return DenseArray(std::move(s), std::move(d));
    }

    std::size_t size() const { return data.size(); }
    int ndim() const { return static_cast<int>(shape.size()); }

    bool same_shape(const DenseArray& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // Indexing for the common [C,H,W] layout.
    double& at3(int c, int i, int j) {
        return data[(static_cast<std::size_t>(c) * shape[1] + i) * shape[2] + j];
    }
    double at3(int c, int i, int j) const {
        return data[(static_cast<std::size_t>(c) * shape[1] + i) * shape[2] + j];
    }
};

}  // namespace nops
