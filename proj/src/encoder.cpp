#include "enf/encoder.hpp"

#include <cmath>
#include <string>

#include "enf/errors.hpp"
#include "enf/log.hpp"

namespace enf {

void BoundingBox::validate() const {
    if (lo.empty() || lo.size() != hi.size()) throw ConfigError("bounding box: lo/hi must be non-empty and equal length");
    for (std::size_t k = 0; k < lo.size(); ++k) {
        if (!(lo[k] < hi[k]) || !std::isfinite(lo[k]) || !std::isfinite(hi[k])) {
            throw ConfigError("bounding box: need finite lo < hi on every axis");
        }
    }
}

Tensor init_latent_positions(const BoundingBox& bbox, std::size_t n_lat) {
    bbox.validate();
    if (n_lat == 0) throw ConfigError("N_lat must be >= 1");
    const std::size_t d = bbox.dim();
    Tensor out = Tensor::matrix(n_lat, d);
    if (d == 1) {
        for (std::size_t i = 0; i < n_lat; ++i) {
            out(i, 0) = bbox.lo[0] + (static_cast<double>(i) + 0.5) * (bbox.hi[0] - bbox.lo[0]) / n_lat;
        }
        return out;
    }
    if (d != 2) throw ConfigError("latent grid initialisation supports d = 1 or 2, got " + std::to_string(d));

    std::size_t rows = 1;
    for (std::size_t r = 1; r * r <= n_lat; ++r) {
        if (n_lat % r == 0) rows = r;
    }
    const std::size_t cols = n_lat / rows;
    if (rows == 1 && n_lat > 3) {
        log_warning("N_lat = " + std::to_string(n_lat) + " has no square-ish factorisation; using a 1 x " +
                    std::to_string(n_lat) + " row of latents");
    }
    const double dx = (bbox.hi[0] - bbox.lo[0]) / static_cast<double>(cols);
    const double dy = (bbox.hi[1] - bbox.lo[1]) / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out(r * cols + c, 0) = bbox.lo[0] + (static_cast<double>(c) + 0.5) * dx;
            out(r * cols + c, 1) = bbox.lo[1] + (static_cast<double>(r) + 0.5) * dy;
        }
    }
    return out;
}

void EncoderState::validate() const {
    field.validate();
    require_matrix(positions, "latent positions");
    if (positions.cols() != field.dim()) throw DimensionError("latent positions do not match field dimension");
    if (!(lr > 0.0)) throw ConfigError("inner learning rate must be positive");
}

ad::Var loss_recon(const ad::Var& pred, const ad::Var& target) {
    return ad::scale(ad::sq_norm(pred - target), 1.0 / static_cast<double>(pred.rows()));
}

double loss_recon(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw DimensionError("loss_recon: shape mismatch " + shape_string(pred.shape()) + " vs " +
                             shape_string(target.shape()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = target[i] - pred[i];
        s += e * e;
    }
    return s / static_cast<double>(pred.rows());
}

InnerLoopResult run_inner_loop(const FieldGraph& graph, const ad::Var& target, std::size_t latent_dim,
                               std::size_t steps, double lr, bool second_order) {
    ad::Tape& tape = target.tape();
    InnerLoopResult result;
    ad::Var c = tape.leaf(Tensor::matrix(graph.latents(), latent_dim), true);
    for (std::size_t k = 0;; ++k) {
        ad::Var loss;
        try {
            loss = loss_recon(graph.evaluate(c), target);
        } catch (const NumericError& e) {
            throw NumericError("encode: non-finite loss at inner step " + std::to_string(k) + ": " + e.what());
        }
        const double value = loss.item();
        if (!std::isfinite(value)) throw NumericError("encode: non-finite loss at inner step " + std::to_string(k));
        result.trace.losses.push_back(value);
        if (k == steps) {
            result.features = c;
            result.final_loss = loss;
            break;
        }
        const ad::Var cs[] = {c};
        ad::Var g = ad::grad(loss, cs, second_order)[0];
        if (second_order) {
            c = c - ad::scale(g, lr);
        } else {
            Tensor next = c.value();
            const Tensor& gv = g.value();
            for (std::size_t i = 0; i < next.size(); ++i) next[i] -= lr * gv[i];
            c = tape.leaf(std::move(next), true);
        }
    }
    // First order: every c is a fresh leaf, so the final loss reaches the
    // field parameters only through the last forward pass.
    return result;
}

Encoding encode(const Tensor& coords, const Tensor& values, const EncoderState& state) {
    state.validate();
    require_matrix(coords, "coords");
    require_matrix(values, "values");
    if (coords.rows() != values.rows()) throw DimensionError("encode: coords and values disagree on point count");
    if (values.cols() != state.field.out_dim()) {
        throw DimensionError("encode: input field has " + std::to_string(values.cols()) + " channels, encoder expects " +
                             std::to_string(state.field.out_dim()));
    }
    ad::Tape tape;
    auto vars = EnfVars::leaves(tape, state.field, false);
    FieldGraph graph(tape, coords, state.positions, state.field, vars);
    auto target = tape.constant(values);
    auto inner = run_inner_loop(graph, target, state.latent_dim(), state.steps, state.lr, false);
    Encoding out;
    out.z.positions = state.positions;
    out.z.features = inner.features.value();
    out.trace = std::move(inner.trace);
    return out;
}

Encoding encode_global(const Tensor& coords, const Tensor& values, const EncoderState& state) {
    if (state.latent_count() != 1) throw ConfigError("encode_global: state must have exactly one latent");
    if (state.field.window != 0.0) throw ConfigError("encode_global: distance penalty must be disabled (window = 0)");
    return encode(coords, values, state);
}

}  // namespace enf
