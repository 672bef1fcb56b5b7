#include "enf/decoder.hpp"

#include <cmath>
#include <string>

#include "enf/errors.hpp"

namespace enf {

namespace {

Tensor uniform_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t = Tensor::matrix(rows, cols);
    for (auto& v : t.values()) v = dist(rng);
    return t.round_to_float();
}

}  // namespace

ConditionedLatents condition_latents(const LatentPointCloud& z, std::span<const double> mu) {
    require_matrix(z.features, "latent features");
    const std::size_t n = z.features.rows();
    const std::size_t l = z.features.cols();
    const std::size_t lm = mu.size();
    ConditionedLatents out;
    out.positions = z.positions;
    out.features = Tensor::matrix(n, l + lm);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < l; ++k) out.features(j, k) = z.features(j, k);
        for (std::size_t k = 0; k < lm; ++k) out.features(j, l + k) = mu[k];
    }
    return out;
}

void AttentionBlockParams::validate() const {
    require_matrix(w_q, "block W_q");
    require_matrix(w_k, "block W_k");
    require_matrix(w_v, "block W_v");
    const std::size_t dim = w_v.rows();
    if (w_v.cols() != dim || w_q.cols() != dim || w_k.cols() != dim || w_q.rows() != w_k.rows()) {
        throw DimensionError("attention block: W_q, W_k must be d_k x D and W_v must be D x D");
    }
}

void DecoderParams::validate() const {
    field.validate();
    for (const auto& b : blocks) {
        b.validate();
        if (b.width() != field.latent_dim()) throw DimensionError("attention block width does not match field latent dim");
    }
}

std::vector<Tensor*> DecoderParams::trainable() {
    std::vector<Tensor*> out;
    for (auto& b : blocks) {
        out.push_back(&b.w_q);
        out.push_back(&b.w_k);
        out.push_back(&b.w_v);
    }
    for (auto* t : field.trainable()) out.push_back(t);
    return out;
}

std::vector<const Tensor*> DecoderParams::trainable() const {
    std::vector<const Tensor*> out;
    for (const auto& b : blocks) {
        out.push_back(&b.w_q);
        out.push_back(&b.w_k);
        out.push_back(&b.w_v);
    }
    for (const auto* t : field.trainable()) out.push_back(t);
    return out;
}

std::vector<std::string> DecoderParams::trainable_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string prefix = "block" + std::to_string(i) + ".";
        out.push_back(prefix + "W_q");
        out.push_back(prefix + "W_k");
        out.push_back(prefix + "W_v");
    }
    for (std::size_t i = 0; i < EnfParams::trainable_count; ++i) out.push_back(EnfParams::trainable_name(i));
    return out;
}

DecoderParams init_decoder_params(const DecoderDims& dims, std::mt19937_64& rng) {
    DecoderParams p;
    p.field = init_enf_params(dims.field, rng);
    const std::size_t width = dims.field.latent_dim;
    if (dims.blocks > 0 && dims.block_key_dim == 0) throw ConfigError("block key dim must be positive");
    for (std::size_t i = 0; i < dims.blocks; ++i) {
        AttentionBlockParams b;
        b.w_q = uniform_matrix(dims.block_key_dim, width, rng);
        b.w_k = uniform_matrix(dims.block_key_dim, width, rng);
        b.w_v = uniform_matrix(width, width, rng);
        p.blocks.push_back(std::move(b));
    }
    return p;
}

ad::Var self_attention_block(const ad::Var& features, const BlockVars& vars) {
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(vars.w_q.rows()));
    auto q = ad::matmul(features, vars.w_q, false, true);
    auto k = ad::matmul(features, vars.w_k, false, true);
    auto v = ad::matmul(features, vars.w_v, false, true);
    auto att = ad::softmax_rows(ad::scale(ad::matmul(q, k, false, true), inv_sqrt));
    return features + ad::matmul(att, v);
}

Tensor self_attention_block(const Tensor& features, const AttentionBlockParams& params) {
    params.validate();
    require_matrix(features, "block features");
    if (features.cols() != params.width()) {
        throw DimensionError("attention block expects width " + std::to_string(params.width()) + ", got " +
                             std::to_string(features.cols()));
    }
    ad::Tape tape;
    BlockVars vars{tape.constant(params.w_q), tape.constant(params.w_k), tape.constant(params.w_v)};
    return self_attention_block(tape.constant(features), vars).value();
}

DecoderVars DecoderVars::leaves(ad::Tape& tape, const DecoderParams& params, bool requires_grad) {
    DecoderVars v;
    for (const auto& b : params.blocks) {
        v.blocks.push_back(
            {tape.leaf(b.w_q, requires_grad), tape.leaf(b.w_k, requires_grad), tape.leaf(b.w_v, requires_grad)});
    }
    v.field = EnfVars::leaves(tape, params.field, requires_grad);
    return v;
}

DecoderVars DecoderVars::from_span(std::span<const ad::Var> vars, std::size_t block_count) {
    if (vars.size() != 3 * block_count + EnfParams::trainable_count) {
        throw DimensionError("DecoderVars::from_span: wrong number of vars");
    }
    DecoderVars v;
    for (std::size_t i = 0; i < block_count; ++i) v.blocks.push_back({vars[3 * i], vars[3 * i + 1], vars[3 * i + 2]});
    v.field = EnfVars::from_span(vars.subspan(3 * block_count));
    return v;
}

std::vector<ad::Var> DecoderVars::list() const {
    std::vector<ad::Var> out;
    for (const auto& b : blocks) {
        out.push_back(b.w_q);
        out.push_back(b.w_k);
        out.push_back(b.w_v);
    }
    for (const auto& f : field.list()) out.push_back(f);
    return out;
}

ad::Var decode(ad::Tape& tape, const Tensor& positions, const ad::Var& features, const Tensor& queries,
               const DecoderParams& params, const DecoderVars& vars) {
    ad::Var c = features;
    for (const auto& b : vars.blocks) c = self_attention_block(c, b);
    FieldGraph graph(tape, queries, positions, params.field, vars.field);
    return graph.evaluate(c);
}

Tensor decode(const ConditionedLatents& latents, const Tensor& queries, const DecoderParams& params) {
    params.validate();
    if (latents.features.cols() != params.field.latent_dim()) {
        throw DimensionError("decode: conditioned feature width " + std::to_string(latents.features.cols()) +
                             " does not match decoder width " + std::to_string(params.field.latent_dim()));
    }
    LatentPointCloud mixed;
    mixed.positions = latents.positions;
    mixed.features = latents.features;
    for (const auto& b : params.blocks) mixed.features = self_attention_block(mixed.features, b);
    return enf_forward(mixed, queries, params.field);
}

}  // namespace enf
