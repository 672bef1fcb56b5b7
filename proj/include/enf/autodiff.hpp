#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape owns every node created during a computation; node ids increase in
// creation order, so descending id is a valid reverse topological order.
// Backward rules are themselves written with differentiable ops, which is
// what makes `grad(..., create_graph=true)` usable for second derivatives
// (gradients through an inner optimisation loop).

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "enf/errors.hpp"
#include "enf/tensor.hpp"

namespace enf::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    bool valid() const noexcept { return tape_ != nullptr && id_ >= 0; }
    int id() const noexcept { return id_; }
    Tape& tape() const { return *tape_; }

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    bool requires_grad() const;
    double item() const;

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

using IndexList = std::shared_ptr<const std::vector<std::size_t>>;

IndexList make_index(std::vector<std::size_t> idx);

/// Computes parent gradients from the output gradient. `needed[i]` tells which
/// parents actually need one; the rest may be returned as invalid Vars.
using BackwardFn = std::function<std::vector<Var>(const Var& self, const Var& grad,
                                                  const std::vector<Var>& parents,
                                                  const std::vector<char>& needed)>;

class Tape {
public:
    struct Node {
        Tensor value;
        std::vector<int> parents;
        BackwardFn backward;
        bool requires_grad = false;
        const char* op = "leaf";
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    Var push(Tensor value, const char* op, const std::vector<Var>& parents, BackwardFn backward);

    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t size() const noexcept { return nodes_.size(); }

    bool recording() const noexcept { return recording_; }
    void set_recording(bool on) noexcept { recording_ = on; }

    /// Throw NumericError on any non-finite op result (on by default).
    void set_check_finite(bool on) noexcept { check_finite_ = on; }

    /// Multiply-adds performed by matmul nodes so far (instrumentation).
    std::uint64_t multiply_adds() const noexcept { return multiply_adds_; }
    void count_multiply_adds(std::uint64_t n) noexcept { multiply_adds_ += n; }

private:
    std::deque<Node> nodes_;
    bool recording_ = true;
    bool check_finite_ = true;
    std::uint64_t multiply_adds_ = 0;
};

/// Disables graph recording on a tape for the guard's lifetime.
class NoRecordGuard {
public:
    explicit NoRecordGuard(Tape& tape, bool record = false) : tape_(tape), previous_(tape.recording()) {
        tape_.set_recording(record);
    }
    ~NoRecordGuard() { tape_.set_recording(previous_); }
    NoRecordGuard(const NoRecordGuard&) = delete;
    NoRecordGuard& operator=(const NoRecordGuard&) = delete;

private:
    Tape& tape_;
    bool previous_;
};

/// Gradients of a scalar output with respect to `wrt`. Nodes are visited in
/// reverse creation order, each at most once. With `create_graph` the
/// returned gradients are differentiable nodes; otherwise they are constants.
/// Inputs the output does not depend on receive zero gradients.
std::vector<Var> grad(const Var& output, std::span<const Var> wrt, bool create_graph = false);

// --- primitives -------------------------------------------------------------

Var matmul(const Var& a, const Var& b, bool transpose_a = false, bool transpose_b = false);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var neg(const Var& a);
Var exp(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
/// Sum of all entries as a 1x1 node.
Var sum(const Var& a);
/// Sum of squares of all entries as a 1x1 node.
Var sq_norm(const Var& a);
/// Repeat a 1x1 node into a rows x cols matrix.
Var broadcast_scalar(const Var& s, std::size_t rows, std::size_t cols);
/// out[i] = a[idx[i]] (row gather).
Var gather_rows(const Var& a, const IndexList& idx);
/// out[idx[i]] += a[i], out has `rows` rows.
Var scatter_add_rows(const Var& a, const IndexList& idx, std::size_t rows);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
/// Place `a` at column offset `begin` in a zero matrix with `total` columns.
Var pad_cols(const Var& a, std::size_t begin, std::size_t total);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);
/// Softmax over consecutive blocks of `segment` rows, independently per column.
Var segment_softmax(const Var& a, std::size_t segment);
/// Softmax across the columns of each row.
Var softmax_rows(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

// --- whole-function utilities -----------------------------------------------

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Scalar-valued computation over parameters placed on `tape` as leaves.
using ScalarFn = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct ValueAndGrads {
    double value = 0.0;
    std::vector<Tensor> grads;
};

ValueAndGrads evaluate_with_gradients(const ScalarFn& f, std::span<const NamedTensor> params);

/// The function did not reproduce its value under identical inputs.
class CheckInvalid : public NumericError {
public:
    using NumericError::NumericError;
};

struct FdParamReport {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t probes = 0;
};

struct FdReport {
    std::vector<FdParamReport> params;
    double max_rel_error = 0.0;
    bool pass = false;
};

struct FdOptions {
    double h = 1e-5;
    double tol = 1e-4;
    /// Parameters with more entries than this are probed along random unit
    /// directions instead of per coordinate.
    std::size_t max_coordinates = 64;
    std::size_t directions = 8;
    std::uint64_t seed = 0;
};

/// Central-difference check of reverse-mode gradients. Per parameter, the
/// error is max|ad - fd| divided by max(max|fd|, 1e-12), taken over probes.
FdReport finite_difference_check(const ScalarFn& f, std::span<const NamedTensor> params, const FdOptions& options);

}  // namespace enf::ad
