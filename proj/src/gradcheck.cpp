#include "enf/gradcheck.hpp"

#include <random>

#include "enf/decoder.hpp"
#include "enf/encoder.hpp"
#include "enf/field.hpp"

namespace enf {

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor t = Tensor::matrix(r, c);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

FieldDims tiny_dims(std::size_t latent_dim) {
    FieldDims d;
    d.dim = 2;
    d.latent_dim = latent_dim;
    d.out_dim = 2;
    d.key_dim = 4;
    d.value_dim = 4;
    d.rff_dim = 4;
    d.heads = 2;
    d.window = 0.5;
    return d;
}

std::vector<ad::NamedTensor> named(const std::vector<const Tensor*>& ts, const std::vector<std::string>& names) {
    std::vector<ad::NamedTensor> out;
    for (std::size_t i = 0; i < ts.size(); ++i) out.push_back({names[i], *ts[i]});
    return out;
}

std::vector<std::string> field_names() {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < EnfParams::trainable_count; ++i) out.emplace_back(EnfParams::trainable_name(i));
    return out;
}

}  // namespace

std::vector<GradSuite> run_gradient_suites(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<GradSuite> out;

    {
        const EnfParams p = init_enf_params(tiny_dims(3), rng);
        const Tensor pos = random_matrix(3, 2, rng);
        const Tensor feat = random_matrix(3, 3, rng);
        const Tensor x = random_matrix(5, 2, rng);
        const Tensor target = random_matrix(5, 2, rng);
        ad::ScalarFn f = [&](ad::Tape& tape, std::span<const ad::Var> vars) {
            FieldGraph g(tape, x, pos, p, EnfVars::from_span(vars));
            return loss_recon(g.evaluate(tape.constant(feat)), tape.constant(target));
        };
        const auto params = named(p.trainable(), field_names());
        ad::FdOptions opt;
        opt.tol = 1e-4;
        out.push_back({"field", opt.tol, ad::finite_difference_check(f, params, opt)});
    }

    {
        DecoderDims dd;
        dd.field = tiny_dims(3);  // l_d = 2 plus l_mu = 1
        dd.blocks = 2;
        dd.block_key_dim = 2;
        const DecoderParams p = init_decoder_params(dd, rng);
        const Tensor pos = random_matrix(3, 2, rng);
        const Tensor feat = random_matrix(3, 3, rng);
        const Tensor x = random_matrix(5, 2, rng);
        const Tensor target = random_matrix(5, 2, rng);
        ad::ScalarFn f = [&](ad::Tape& tape, std::span<const ad::Var> vars) {
            const auto dv = DecoderVars::from_span(vars, p.blocks.size());
            return loss_recon(decode(tape, pos, tape.constant(feat), x, p, dv), tape.constant(target));
        };
        const auto params = named(p.trainable(), p.trainable_names());
        ad::FdOptions opt;
        opt.tol = 1e-4;
        out.push_back({"decoder", opt.tol, ad::finite_difference_check(f, params, opt)});
    }

    {
        FieldDims d = tiny_dims(2);
        d.out_dim = 1;
        const EnfParams p = init_enf_params(d, rng);
        const Tensor pos = random_matrix(2, 2, rng);
        const Tensor x = random_matrix(10, 2, rng);
        const Tensor target = random_matrix(10, 1, rng);
        ad::ScalarFn f = [&](ad::Tape& tape, std::span<const ad::Var> vars) {
            FieldGraph g(tape, x, pos, p, EnfVars::from_span(vars));
            return run_inner_loop(g, tape.constant(target), 2, 2, 0.5, true).final_loss;
        };
        const auto params = named(p.trainable(), field_names());
        ad::FdOptions opt;
        opt.tol = 1e-3;
        out.push_back({"encoder-second-order", opt.tol, ad::finite_difference_check(f, params, opt)});
    }
    return out;
}

}  // namespace enf
