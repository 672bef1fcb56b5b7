#include "enf/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "enf/errors.hpp"

namespace enf {

namespace {

constexpr std::size_t kQueryChunk = 2048;

void check_shape(const Tensor& t, std::size_t rows, std::size_t cols, const char* name) {
    if (t.rank() != 2 || t.rows() != rows || t.cols() != cols) {
        throw DimensionError(std::string(name) + ": expected [" + std::to_string(rows) + "x" + std::to_string(cols) +
                             "], got " + shape_string(t.shape()));
    }
}

Tensor uniform_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t = Tensor::matrix(rows, cols);
    for (auto& v : t.values()) v = dist(rng);
    return t.round_to_float();
}

// Row r = m * N + j holds x_m - p_j.
Tensor pairwise_offsets(const Tensor& queries, const Tensor& positions) {
    const std::size_t m = queries.rows();
    const std::size_t n = positions.rows();
    const std::size_t d = queries.cols();
    Tensor out = Tensor::matrix(m * n, d);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < d; ++k) out(a * n + j, k) = queries(a, k) - positions(j, k);
    return out;
}

}  // namespace

void FieldDims::validate() const {
    if (dim == 0 || latent_dim == 0 || out_dim == 0 || key_dim == 0 || value_dim == 0 || rff_dim == 0 || heads == 0) {
        throw ConfigError("field dimensions must be positive");
    }
    if (rff_dim % 2 != 0) throw ConfigError("Fourier feature dimension must be even, got " + std::to_string(rff_dim));
    if (key_dim % heads != 0 || value_dim % heads != 0) {
        throw ConfigError("key/value dimensions must be divisible by the number of heads");
    }
    if (!(rff_sigma > 0.0)) throw ConfigError("rff_sigma must be positive");
    if (!(window >= 0.0) || !std::isfinite(window)) throw ConfigError("window must be finite and >= 0");
}

void EnfParams::validate() const {
    if (fourier.rank() != 2) throw DimensionError("fourier matrix must be rank 2");
    const std::size_t dg = rff_dim();
    const std::size_t dk = w_q.rows();
    const std::size_t dv = w_v.rows();
    const std::size_t ld = w_k.cols();
    check_shape(w_q, dk, dg, "W_q");
    check_shape(w_k, dk, ld, "W_k");
    check_shape(w_v, dv, ld, "W_v");
    check_shape(w_s, dv, dg, "W_s");
    check_shape(w_b, dv, dg, "W_b");
    check_shape(w_o, w_o.rows(), dv, "W_o");
    if (heads == 0 || dk % heads != 0 || dv % heads != 0) {
        throw ConfigError("key/value dimensions must be divisible by the number of heads");
    }
    if (!(window >= 0.0) || !std::isfinite(window)) throw ConfigError("window must be finite and >= 0");
}

std::vector<Tensor*> EnfParams::trainable() { return {&w_q, &w_k, &w_v, &w_s, &w_b, &w_o}; }
std::vector<const Tensor*> EnfParams::trainable() const { return {&w_q, &w_k, &w_v, &w_s, &w_b, &w_o}; }

const char* EnfParams::trainable_name(std::size_t i) {
    static constexpr const char* names[] = {"W_q", "W_k", "W_v", "W_s", "W_b", "W_o"};
    return names[i];
}

EnfParams init_enf_params(const FieldDims& dims, std::mt19937_64& rng) {
    dims.validate();
    EnfParams p;
    p.fourier = Tensor::matrix(dims.rff_dim / 2, dims.dim);
    std::normal_distribution<double> normal(0.0, dims.rff_sigma);
    for (auto& v : p.fourier.values()) v = normal(rng);
    p.fourier.round_to_float();
    p.w_q = uniform_matrix(dims.key_dim, dims.rff_dim, rng);
    p.w_k = uniform_matrix(dims.key_dim, dims.latent_dim, rng);
    p.w_v = uniform_matrix(dims.value_dim, dims.latent_dim, rng);
    p.w_s = uniform_matrix(dims.value_dim, dims.rff_dim, rng);
    p.w_b = uniform_matrix(dims.value_dim, dims.rff_dim, rng);
    p.w_o = uniform_matrix(dims.out_dim, dims.value_dim, rng);
    p.window = dims.window;
    p.heads = dims.heads;
    return p;
}

Tensor rff_encode(const Tensor& offsets, const Tensor& fourier) {
    require_matrix(fourier, "rff_encode fourier matrix");
    const std::size_t d = fourier.cols();
    const std::size_t half = fourier.rows();
    if (offsets.shape().back() != d) {
        throw DimensionError("rff_encode: offsets last extent " + std::to_string(offsets.shape().back()) +
                             " does not match Fourier input dimension " + std::to_string(d));
    }
    const std::size_t rows = offsets.size() / d;
    Shape out_shape = offsets.shape();
    out_shape.back() = 2 * half;
    Tensor out(out_shape);
    double* o = out.data();
    const double* x = offsets.data();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t f = 0; f < half; ++f) {
            double proj = 0.0;
            for (std::size_t k = 0; k < d; ++k) proj += fourier(f, k) * x[r * d + k];
            o[r * 2 * half + f] = std::cos(proj);
            o[r * 2 * half + half + f] = std::sin(proj);
        }
    }
    return out;
}

Tensor value_fn(const Tensor& encodings, const Tensor& features, const EnfParams& params) {
    params.validate();
    check_shape(encodings, encodings.rows(), params.rff_dim(), "value_fn encodings");
    check_shape(features, encodings.rows(), params.latent_dim(), "value_fn features");
    ad::Tape tape;
    auto b = tape.constant(encodings);
    auto c = tape.constant(features);
    auto wv = tape.constant(params.w_v);
    auto ws = tape.constant(params.w_s);
    auto wb = tape.constant(params.w_b);
    auto v = ad::matmul(c, wv, false, true) * ad::matmul(b, ws, false, true) + ad::matmul(b, wb, false, true);
    return v.value();
}

EnfVars EnfVars::leaves(ad::Tape& tape, const EnfParams& params, bool requires_grad) {
    EnfVars v;
    v.w_q = tape.leaf(params.w_q, requires_grad);
    v.w_k = tape.leaf(params.w_k, requires_grad);
    v.w_v = tape.leaf(params.w_v, requires_grad);
    v.w_s = tape.leaf(params.w_s, requires_grad);
    v.w_b = tape.leaf(params.w_b, requires_grad);
    v.w_o = tape.leaf(params.w_o, requires_grad);
    return v;
}

EnfVars EnfVars::from_span(std::span<const ad::Var> vars) {
    if (vars.size() < EnfParams::trainable_count) throw DimensionError("EnfVars::from_span: need 6 vars");
    return EnfVars{vars[0], vars[1], vars[2], vars[3], vars[4], vars[5]};
}

FieldGraph::FieldGraph(ad::Tape& tape, const Tensor& queries, const Tensor& positions, const EnfParams& params,
                       const EnfVars& vars)
    : tape_(&tape), vars_(vars) {
    params.validate();
    require_matrix(queries, "queries");
    require_matrix(positions, "latent positions");
    if (queries.cols() != params.dim() || positions.cols() != params.dim()) {
        throw DimensionError("query/latent coordinate dimension does not match the field (d = " +
                             std::to_string(params.dim()) + ")");
    }
    m_ = queries.rows();
    n_ = positions.rows();
    const std::size_t h = params.heads;
    const std::size_t dk = params.key_dim();
    const std::size_t dv = params.value_dim();

    std::vector<std::size_t> qi(m_ * n_), li(m_ * n_);
    for (std::size_t r = 0; r < m_ * n_; ++r) {
        qi[r] = r / n_;
        li[r] = r % n_;
    }
    query_of_ = ad::make_index(std::move(qi));
    latent_of_ = ad::make_index(std::move(li));

    const Tensor offsets = pairwise_offsets(queries, positions);
    Tensor penalty = Tensor::matrix(m_ * n_, h);
    for (std::size_t r = 0; r < m_ * n_; ++r) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < offsets.cols(); ++k) d2 += offsets(r, k) * offsets(r, k);
        for (std::size_t k = 0; k < h; ++k) penalty(r, k) = params.window * d2;
    }
    penalty_ = tape.constant(std::move(penalty));

    auto b = tape.constant(rff_encode(offsets, params.fourier));
    q_ = ad::matmul(b, vars.w_q, false, true);
    scale_ = ad::matmul(b, vars.w_s, false, true);
    shift_ = ad::matmul(b, vars.w_b, false, true);

    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk / h));
    Tensor hs = Tensor::matrix(dk, h);
    for (std::size_t k = 0; k < dk; ++k) hs(k, k / (dk / h)) = inv_sqrt;
    head_sum_ = tape.constant(std::move(hs));
    Tensor he = Tensor::matrix(h, dv);
    for (std::size_t k = 0; k < dv; ++k) he(k / (dv / h), k) = 1.0;
    head_expand_ = tape.constant(std::move(he));
}

ad::Var FieldGraph::attention(const ad::Var& features) const {
    if (features.rows() != n_) {
        throw DimensionError("latent feature rows " + std::to_string(features.rows()) + " != latent count " +
                             std::to_string(n_));
    }
    auto k = ad::matmul(features, vars_.w_k, false, true);
    auto k_rep = ad::gather_rows(k, latent_of_);
    auto logits = ad::matmul(q_ * k_rep, head_sum_);
    return ad::segment_softmax(logits - penalty_, n_);
}

ad::Var FieldGraph::evaluate(const ad::Var& features) const {
    auto att = attention(features);
    auto v_rep = ad::gather_rows(ad::matmul(features, vars_.w_v, false, true), latent_of_);
    auto value = v_rep * scale_ + shift_;
    auto weighted = ad::matmul(att, head_expand_) * value;
    auto pooled = ad::scatter_add_rows(weighted, query_of_, m_);
    return ad::matmul(pooled, vars_.w_o, false, true);
}

Tensor attention_weights(const Tensor& queries, const LatentPointCloud& z, const EnfParams& params) {
    ad::Tape tape;
    auto vars = EnfVars::leaves(tape, params, false);
    FieldGraph graph(tape, queries, z.positions, params, vars);
    auto att = graph.attention(tape.constant(z.features)).value();
    const std::size_t m = queries.rows();
    const std::size_t n = z.size();
    const std::size_t h = params.heads;
    Tensor out(Shape{h, m, n});
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < h; ++k) out[(k * m + a) * n + j] = att(a * n + j, k);
    return out;
}

Tensor enf_forward(const LatentPointCloud& z, const Tensor& queries, const EnfParams& params) {
    require_matrix(queries, "queries");
    require_matrix(z.features, "latent features");
    if (z.features.rows() != z.positions.rows()) {
        throw DimensionError("latent positions and features disagree on N_lat");
    }
    const std::size_t m = queries.rows();
    const std::size_t d = queries.cols();
    Tensor out = Tensor::matrix(m, params.out_dim());
    for (std::size_t start = 0; start < m; start += kQueryChunk) {
        const std::size_t len = std::min(kQueryChunk, m - start);
        Tensor chunk = Tensor::matrix(len, d);
        std::copy_n(queries.data() + start * d, len * d, chunk.data());
        ad::Tape tape;
        tape.set_check_finite(false);
        auto vars = EnfVars::leaves(tape, params, false);
        FieldGraph graph(tape, chunk, z.positions, params, vars);
        const Tensor& vals = graph.evaluate(tape.constant(z.features)).value();
        std::copy_n(vals.data(), vals.size(), out.data() + start * params.out_dim());
    }
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t k = 0; k < params.out_dim(); ++k) {
            if (!std::isfinite(out(a, k))) {
                throw NumericError("non-finite field output at query index " + std::to_string(a));
            }
        }
    }
    return out;
}

}  // namespace enf
