#pragma once

// Output decoder: append the global parameters to every latent feature, mix
// the latents with residual self-attention blocks, then decode with an
// equivariant field. The blocks never see positions.

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "enf/autodiff.hpp"
#include "enf/field.hpp"

namespace enf {

struct ConditionedLatents {
    Tensor positions;  // N_lat x d, copied from the encoder output
    Tensor features;   // N_lat x (l_d + l_mu), rows [c_j; mu]
};

ConditionedLatents condition_latents(const LatentPointCloud& z, std::span<const double> mu);

/// c~_j = c_j + sum_l softmax_l((W_q c_j)^T (W_k c_l) / sqrt(d_k)) W_v c_l
struct AttentionBlockParams {
    Tensor w_q;  // d_k x D
    Tensor w_k;  // d_k x D
    Tensor w_v;  // D x D

    std::size_t width() const { return w_v.rows(); }
    void validate() const;
};

struct DecoderParams {
    std::vector<AttentionBlockParams> blocks;
    EnfParams field;  // n_out = n_u, latent_dim = l_d + l_mu

    void validate() const;
    std::size_t trainable_count() const { return 3 * blocks.size() + EnfParams::trainable_count; }
    std::vector<Tensor*> trainable();
    std::vector<const Tensor*> trainable() const;
    std::vector<std::string> trainable_names() const;
};

struct DecoderDims {
    FieldDims field;              // latent_dim must already include l_mu
    std::size_t blocks = 2;
    std::size_t block_key_dim = 16;
};

DecoderParams init_decoder_params(const DecoderDims& dims, std::mt19937_64& rng);

Tensor self_attention_block(const Tensor& features, const AttentionBlockParams& params);

/// Field values (M x n_u) at `queries`.
Tensor decode(const ConditionedLatents& latents, const Tensor& queries, const DecoderParams& params);

// --- differentiable form ------------------------------------------------------

struct BlockVars {
    ad::Var w_q, w_k, w_v;
};

ad::Var self_attention_block(const ad::Var& features, const BlockVars& vars);

/// Decoder parameters on a tape, in `trainable()` order.
struct DecoderVars {
    std::vector<BlockVars> blocks;
    EnfVars field;

    static DecoderVars leaves(ad::Tape& tape, const DecoderParams& params, bool requires_grad);
    static DecoderVars from_span(std::span<const ad::Var> vars, std::size_t block_count);
    std::vector<ad::Var> list() const;
};

/// Decoded field for conditioned features held on the tape.
ad::Var decode(ad::Tape& tape, const Tensor& positions, const ad::Var& features, const Tensor& queries,
               const DecoderParams& params, const DecoderVars& vars);

}  // namespace enf
