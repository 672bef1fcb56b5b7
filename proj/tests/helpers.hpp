#pragma once

#include <cmath>
#include <random>

#include "enf/tensor.hpp"

namespace enf::test {

inline Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t = Tensor::matrix(r, c);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace enf::test
