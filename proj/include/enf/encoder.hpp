#pragma once

// Encoding by optimisation: latent features start at zero and take K plain
// gradient steps on the input reconstruction loss while the latent positions
// stay on a fixed grid.

#include <cstddef>
#include <vector>

#include "enf/autodiff.hpp"
#include "enf/field.hpp"
#include "enf/tensor.hpp"

namespace enf {

/// Axis-aligned box, one [lo, hi] interval per coordinate.
struct BoundingBox {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dim() const { return lo.size(); }
    void validate() const;
};

/// Cell centres of the most square rows x cols grid with rows * cols = n_lat
/// (rows along the second axis, cols >= rows). Prime counts above 3 fall back
/// to a single row and log a warning. Rows are ordered y-major.
Tensor init_latent_positions(const BoundingBox& bbox, std::size_t n_lat);

struct EncoderState {
    EnfParams field;   // theta_a, n_out = n_a
    Tensor positions;  // latent position template, N_lat x d
    std::size_t steps = 3;
    double lr = 1.0;

    std::size_t latent_count() const { return positions.rows(); }
    std::size_t latent_dim() const { return field.latent_dim(); }
    void validate() const;
};

struct InnerLoopTrace {
    /// L^a before the first step and after each step (K + 1 entries).
    std::vector<double> losses;
};

struct Encoding {
    LatentPointCloud z;
    InnerLoopTrace trace;
};

/// (1/M) sum_m |pred_m - target_m|^2.
ad::Var loss_recon(const ad::Var& pred, const ad::Var& target);
double loss_recon(const Tensor& pred, const Tensor& target);

/// Fit latent features to `values` observed at `coords`. Positions are
/// returned bit-identical to the template. Throws NumericError carrying the
/// step index if the loss turns non-finite.
Encoding encode(const Tensor& coords, const Tensor& values, const EncoderState& state);

/// Same procedure restricted to a single latent with the distance penalty
/// disabled (window = 0): the global-latent baseline.
Encoding encode_global(const Tensor& coords, const Tensor& values, const EncoderState& state);

/// Differentiable inner loop on an existing graph. With `second_order` the
/// returned features depend on the field parameters through every step;
/// otherwise they are constants on the tape.
struct InnerLoopResult {
    ad::Var features;
    ad::Var final_loss;
    InnerLoopTrace trace;
};

InnerLoopResult run_inner_loop(const FieldGraph& graph, const ad::Var& target, std::size_t latent_dim,
                               std::size_t steps, double lr, bool second_order);

}  // namespace enf
