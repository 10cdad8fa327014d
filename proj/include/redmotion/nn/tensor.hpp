#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace redmotion::nn {

// Dense row-major matrix of 64-bit reals. Vectors are [1, n], scalars [1, 1].
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Tensor(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values))
    {
        if (data.size() != r * c) {
            throw std::invalid_argument("tensor: value count " + std::to_string(data.size()) + " does not match shape [" +
                                        std::to_string(r) + ", " + std::to_string(c) + "]");
        }
    }

    static Tensor zeros(std::size_t r, std::size_t c) { return Tensor(r, c); }
    static Tensor filled(std::size_t r, std::size_t c, double v)
    {
        Tensor t(r, c);
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor row(std::initializer_list<double> values)
    {
        return Tensor(1, values.size(), std::vector<double>(values));
    }
    static Tensor identity(std::size_t n)
    {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }

    [[nodiscard]] std::size_t size() const noexcept { return data.size(); }
    [[nodiscard]] bool empty() const noexcept { return data.empty(); }
    [[nodiscard]] bool same_shape(const Tensor& o) const noexcept { return rows == o.rows && cols == o.cols; }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row_span(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row_span(std::size_t r) const { return {data.data() + r * cols, cols}; }

    [[nodiscard]] std::string shape_string() const
    {
        return "[" + std::to_string(rows) + ", " + std::to_string(cols) + "]";
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace redmotion::nn
