#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "offrec/errors.hpp"

namespace offrec::nn {

// Dense 64-bit float tensor. Everything in this project is at most rank 2;
// vectors are stored as [1, n] rows and scalars as [1, 1].
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : shape{rows, cols}, values(rows * cols, fill) {}

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.values[0] = v;
        return t;
    }
    static Tensor row(std::vector<double> v) {
        Tensor t;
        t.shape = {1, v.size()};
        t.values = std::move(v);
        return t;
    }
    static Tensor column(const std::vector<double>& v) {
        Tensor t(v.size(), 1);
        t.values = v;
        return t;
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
        if (v.size() != rows * cols) throw DimensionError("matrix: data size does not match shape");
        Tensor t;
        t.shape = {rows, cols};
        t.values = std::move(v);
        return t;
    }
    static Tensor zeros_like(const Tensor& other) {
        Tensor t;
        t.shape = other.shape;
        t.values.assign(other.values.size(), 0.0);
        return t;
    }

    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }
    std::size_t size() const { return values.size(); }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    double& operator()(std::size_t r, std::size_t c) { return at(r, c); }
    double operator()(std::size_t r, std::size_t c) const { return at(r, c); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

inline void require_shape(const Tensor& t, std::size_t rows, std::size_t cols, const char* what) {
    if (t.rows() != rows || t.cols() != cols)
        throw DimensionError(std::string(what) + ": expected [" + std::to_string(rows) + ", " +
                             std::to_string(cols) + "], got " + t.shape_str());
}

}  // namespace offrec::nn
