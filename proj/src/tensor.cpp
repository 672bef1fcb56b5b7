#include "enf/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include "enf/errors.hpp"

namespace enf {

namespace {

std::size_t product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_extents(const Shape& shape) {
    if (shape.empty()) {
        throw DimensionError("tensor must have rank >= 1");
    }
    for (auto e : shape) {
        if (e == 0) {
            throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
        }
    }
}

}  // namespace

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    check_extents(shape_);
    if (data_.size() != product(shape_)) {
        throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_string(shape_));
    }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor(Shape{rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_string(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_string(shape_));
    return shape_[1];
}

Tensor Tensor::reshaped(Shape shape) const {
    check_extents(shape);
    if (product(shape) != data_.size()) {
        throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    Tensor out = *this;
    out.shape_ = std::move(shape);
    return out;
}

Tensor Tensor::transposed() const {
    const std::size_t r = rows();
    const std::size_t c = cols();
    Tensor out = Tensor::matrix(c, r);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(j, i) = (*this)(i, j);
    return out;
}

Tensor& Tensor::round_to_float() {
    for (auto& v : data_) v = static_cast<double>(static_cast<float>(v));
    return *this;
}

bool Tensor::all_finite() const noexcept {
    // Exponent bits all set means inf or NaN; integer form vectorises.
    constexpr std::uint64_t exponent = 0x7ff0000000000000ULL;
    const auto n = data_.size();
    const double* p = data_.data();
    std::uint64_t bad = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, p + i, sizeof bits);
        bad |= static_cast<std::uint64_t>((bits & exponent) == exponent);
    }
    return bad == 0;
}

void require_matrix(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(what) + ": expected a matrix, got " + shape_string(t.shape()));
    }
}

}  // namespace enf
