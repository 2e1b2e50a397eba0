#ifndef CTWIN_NN_TENSOR_HPP
#define CTWIN_NN_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "ctwin/common.hpp"

namespace ctwin::nn {

/// Dense row-major array of 64-bit reals. Plain value type; all layer math
/// lives in free functions.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (element_count(shape) != data.size())
            throw dimension_error("tensor: shape/data size mismatch");
    }

    static std::size_t element_count(const std::vector<std::size_t> &s) {
        std::size_t n = 1;
        for (std::size_t d : s)
            n *= d;
        return s.empty() ? 0 : n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        Tensor t;
        t.data.assign(element_count(s), 0.0);
        t.shape = std::move(s);
        return t;
    }

    static Tensor full(std::vector<std::size_t> s, double v) {
        Tensor t = zeros(std::move(s));
        for (auto &x : t.data)
            x = v;
        return t;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    bool same_shape(const Tensor &o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v))
                return false;
        return true;
    }
};

} // namespace ctwin::nn

#endif
