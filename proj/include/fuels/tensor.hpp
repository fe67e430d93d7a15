#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "fuels/error.hpp"

namespace fuels {

// Dense row-major 2-D matrix of doubles. The unit of all numerics in this
// library; value-semantic and safe to move across threads.
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Tensor from(std::initializer_list<std::initializer_list<double>> m) {
        Tensor t(m.size(), m.size() ? m.begin()->size() : 0);
        std::size_t r = 0;
        for (const auto& row : m) {
            if (row.size() != t.cols) throw DimensionError("ragged initializer for Tensor");
            std::size_t c = 0;
            for (double v : row) t.at(r, c++) = v;
            ++r;
        }
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    static Tensor ones(std::size_t r, std::size_t c) { return Tensor(r, c, 1.0); }

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return rows * cols; }
    bool empty() const { return data.empty(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    bool finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool all_zero() const {
        for (double v : data)
            if (v != 0.0) return false;
        return true;
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
    }
};

}  // namespace fuels
