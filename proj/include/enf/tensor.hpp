#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace enf {

using Shape = std::vector<std::size_t>;

/// Vectorised kernels pick their summation order from the buffer address, so
/// every tensor starts on a 64-byte boundary to keep results bit-reproducible.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

std::string shape_string(const Shape& shape);

/// Dense row-major tensor of doubles. Extents are strictly positive.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor(Shape{rows, cols}, fill);
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
    static Tensor scalar(double v) { return Tensor(Shape{1, 1}, v); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    // Rank-2 accessors; a rank-2 view is required.
    std::size_t rows() const;
    std::size_t cols() const;

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * shape_.back() + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_.back() + c]; }

    /// Same data, new extents with equal product.
    Tensor reshaped(Shape shape) const;
    Tensor transposed() const;

    /// Round every entry to the nearest float (what the on-disk formats store).
    Tensor& round_to_float();

    bool all_finite() const noexcept;
    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    Storage data_;
};

/// Shape of a rank-2 tensor as (rows, cols) for checks.
void require_matrix(const Tensor& t, const char* what);

}  // namespace enf
