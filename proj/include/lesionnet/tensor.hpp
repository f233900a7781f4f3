#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lesionnet/errors.hpp"

namespace lesionnet {

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

/// Dense row-major tensor of 64-bit floats. Rank 0 (empty shape) is a
/// scalar with one element. Plain value type: copy/move freely.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        require(data.size() == shape_numel(shape),
                "tensor: data length " + std::to_string(data.size()) + " does not match shape " +
                    shape_str(shape));
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        for (auto& x : t.data) {
            x = v;
        }
        return t;
    }
    static Tensor scalar(double v) { return Tensor({}, {v}); }

    std::size_t size() const { return data.size(); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    /// Flat index into a rank-3 [C,H,W] tensor.
    std::size_t idx3(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * static_cast<std::size_t>(shape[1]) +
                static_cast<std::size_t>(y)) *
                   static_cast<std::size_t>(shape[2]) +
               static_cast<std::size_t>(x);
    }
    double at3(int c, int y, int x) const { return data[idx3(c, y, x)]; }
    double& at3(int c, int y, int x) { return data[idx3(c, y, x)]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    double item() const {
        require(data.size() == 1, "tensor: item() requires exactly one element");
        return data[0];
    }
};

inline std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        require(d > 0, "tensor: dimensions must be positive, got " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            s += ",";
        }
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace lesionnet
