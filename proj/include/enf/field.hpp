#pragma once

// Translation-equivariant cross-attention neural field.
//
//   f(x_m) = W_o sum_j att_mj * v(b_jm, c_j),   b_jm = gamma(x_m - p_j)
//   att_mj = softmax_j( q(b_jm)^T k(c_j) / sqrt(d_head) - window * |x_m - p_j|^2 )
//   v(b, c) = (W_v c) * (W_s b) + W_b b
//   gamma(x) = [cos(W x), sin(W x)]
//
// With H heads, d_k and d_v are split into H equal slices; the distance
// penalty is added to every head's logits and the head outputs are
// concatenated before W_o. Everything depends on x_m - p_j only.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "enf/autodiff.hpp"
#include "enf/tensor.hpp"

namespace enf {

/// Sample-specific representation z = {(p_j, c_j)}.
struct LatentPointCloud {
    Tensor positions;  // N_lat x d, domain units
    Tensor features;   // N_lat x l_d

    std::size_t size() const { return positions.rows(); }
};

struct FieldDims {
    std::size_t dim = 2;         // d
    std::size_t latent_dim = 8;  // l_d
    std::size_t out_dim = 1;     // n_out
    std::size_t key_dim = 32;    // d_k
    std::size_t value_dim = 32;  // d_v
    std::size_t rff_dim = 32;    // d_gamma (even)
    std::size_t heads = 2;
    double rff_sigma = 1.0;
    double window = 0.1;  // sigma of the Gaussian distance penalty

    void validate() const;
};

/// Parameters of one field. `fourier` is sampled once and never trained;
/// the six projection matrices are the trainable set (no biases).
struct EnfParams {
    Tensor fourier;  // d_gamma/2 x d
    Tensor w_q;      // d_k x d_gamma
    Tensor w_k;      // d_k x l_d
    Tensor w_v;      // d_v x l_d
    Tensor w_s;      // d_v x d_gamma
    Tensor w_b;      // d_v x d_gamma
    Tensor w_o;      // n_out x d_v
    double window = 0.1;
    std::size_t heads = 1;

    std::size_t dim() const { return fourier.cols(); }
    std::size_t rff_dim() const { return 2 * fourier.rows(); }
    std::size_t key_dim() const { return w_q.rows(); }
    std::size_t value_dim() const { return w_v.rows(); }
    std::size_t latent_dim() const { return w_k.cols(); }
    std::size_t out_dim() const { return w_o.rows(); }

    /// Check mutual consistency of all shapes; throws DimensionError/ConfigError.
    void validate() const;

    static constexpr std::size_t trainable_count = 6;
    std::vector<Tensor*> trainable();
    std::vector<const Tensor*> trainable() const;
    static const char* trainable_name(std::size_t i);
};

/// Fourier matrix entries ~ N(0, rff_sigma^2); projections ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
/// All entries are rounded to float so they survive checkpointing exactly.
EnfParams init_enf_params(const FieldDims& dims, std::mt19937_64& rng);

/// gamma applied to every offset. `offsets` is M x N x d (rank 3) or R x d;
/// the result has the same leading extents with d_gamma as the last one.
Tensor rff_encode(const Tensor& offsets, const Tensor& fourier);

/// Attention weights as an H x M x N_lat tensor; each (h, m) row sums to one.
Tensor attention_weights(const Tensor& queries, const LatentPointCloud& z, const EnfParams& params);

/// v = (W_v c) * (W_s b) + W_b b for rows of `encodings` (R x d_gamma) paired
/// with rows of `features` (R x l_d). Returns R x d_v.
Tensor value_fn(const Tensor& encodings, const Tensor& features, const EnfParams& params);

/// Field values at every query (M x n_out). Queries are processed in chunks.
/// Throws NumericError naming the first query with a non-finite output.
Tensor enf_forward(const LatentPointCloud& z, const Tensor& queries, const EnfParams& params);

// --- differentiable form ------------------------------------------------------

/// The trainable matrices of an EnfParams placed on a tape.
struct EnfVars {
    ad::Var w_q, w_k, w_v, w_s, w_b, w_o;

    static EnfVars leaves(ad::Tape& tape, const EnfParams& params, bool requires_grad);
    static EnfVars from_span(std::span<const ad::Var> vars);
    std::vector<ad::Var> list() const { return {w_q, w_k, w_v, w_s, w_b, w_o}; }
};

/// Everything in the field that does not depend on the latent features:
/// encoded offsets, query projections, distance penalties. Build once per
/// (queries, positions) pair and evaluate for as many feature sets as needed
/// (the inner loop evaluates K+1 times).
class FieldGraph {
public:
    FieldGraph(ad::Tape& tape, const Tensor& queries, const Tensor& positions, const EnfParams& params,
               const EnfVars& vars);

    /// Field values (M x n_out) for features (N_lat x l_d).
    ad::Var evaluate(const ad::Var& features) const;

    /// Attention weights, MN x H with row m * N_lat + j.
    ad::Var attention(const ad::Var& features) const;

    std::size_t queries() const { return m_; }
    std::size_t latents() const { return n_; }

private:
    ad::Tape* tape_;
    EnfVars vars_;
    std::size_t m_ = 0;
    std::size_t n_ = 0;
    ad::IndexList query_of_;
    ad::IndexList latent_of_;
    ad::Var penalty_;      // MN x H
    ad::Var q_;            // MN x d_k
    ad::Var scale_;        // MN x d_v, W_s b
    ad::Var shift_;        // MN x d_v, W_b b
    ad::Var head_sum_;     // d_k x H, includes 1/sqrt(d_head)
    ad::Var head_expand_;  // H x d_v
};

}  // namespace enf
