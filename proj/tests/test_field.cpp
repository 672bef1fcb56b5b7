#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>

#include "enf/errors.hpp"
#include "enf/field.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace enf;
using enf::test::max_abs;
using enf::test::max_abs_diff;
using enf::test::random_matrix;

namespace {

FieldDims small_dims(std::size_t heads = 2) {
    FieldDims d;
    d.dim = 2;
    d.latent_dim = 3;
    d.out_dim = 2;
    d.key_dim = 4;
    d.value_dim = 6;
    d.rff_dim = 8;
    d.heads = heads;
    d.window = 0.7;
    return d;
}

// Random params with entries of order one rather than the small init scale.
EnfParams random_params(const FieldDims& d, std::mt19937_64& rng) {
    EnfParams p = init_enf_params(d, rng);
    for (auto* t : p.trainable()) *t = random_matrix(t->rows(), t->cols(), rng);
    return p;
}

}  // namespace

TEST_CASE("Fourier features of a zero offset") {
    std::mt19937_64 rng(1);
    const Tensor w = random_matrix(4, 2, rng);
    const Tensor b = rff_encode(Tensor::matrix(1, 2, 0.0), w);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(b[i] == 1.0);
        CHECK(b[4 + i] == 0.0);
    }
}

TEST_CASE("Fourier features at a projection of pi") {
    const Tensor w = Tensor::matrix(1, 2, {1.0, 0.0});
    const Tensor b = rff_encode(Tensor::matrix(1, 2, {std::numbers::pi, 0.3}), w);
    CHECK(b[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(std::abs(b[1]) < 1e-15);
}

TEST_CASE("Fourier features are bounded and keep leading extents") {
    std::mt19937_64 rng(2);
    const Tensor w = random_matrix(5, 2, rng, -10, 10);
    Tensor offsets(Shape{7, 3, 2});
    std::uniform_real_distribution<double> u(-5, 5);
    for (auto& v : offsets.values()) v = u(rng);
    const Tensor b = rff_encode(offsets, w);
    CHECK(b.shape() == Shape{7, 3, 10});
    for (double v : b.values()) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("odd Fourier dimension is a configuration error") {
    FieldDims d = small_dims();
    d.rff_dim = 7;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    d = small_dims();
    d.key_dim = 5;
    CHECK_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("a single latent receives all attention") {
    std::mt19937_64 rng(3);
    const auto p = random_params(small_dims(), rng);
    LatentPointCloud z{random_matrix(1, 2, rng), random_matrix(1, 3, rng)};
    const Tensor att = attention_weights(random_matrix(9, 2, rng), z, p);
    for (double v : att.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("attention rows are probability distributions") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = random_params(small_dims(), rng);
        LatentPointCloud z{random_matrix(5, 2, rng), random_matrix(5, 3, rng, -3, 3)};
        const Tensor att = attention_weights(random_matrix(6, 2, rng), z, p);
        for (std::size_t r = 0; r < 2 * 6; ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < 5; ++j) {
                CHECK(att[r * 5 + j] >= 0.0);
                s += att[r * 5 + j];
            }
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("attention weights match the scalar oracle") {
    std::mt19937_64 rng(5);
    const auto p = random_params(small_dims(), rng);
    LatentPointCloud z{random_matrix(3, 2, rng), random_matrix(3, 3, rng)};
    const Tensor x = random_matrix(4, 2, rng);
    const Tensor att = attention_weights(x, z, p);
    const auto ref = test::naive_attention(x, z.positions, z.features, p);
    for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(att[(h * 4 + a) * 3 + j] - ref[h][a][j]) < 1e-12);
}

TEST_CASE("with equal affinities the nearer latent gets more weight") {
    std::mt19937_64 rng(6);
    auto p = random_params(small_dims(), rng);
    p.w_k = Tensor::matrix(4, 3, 0.0);  // q.k = 0 for every latent
    LatentPointCloud z{Tensor::matrix(2, 2, {0.0, 0.0, 1.0, 0.0}), random_matrix(2, 3, rng)};
    const Tensor x = Tensor::matrix(1, 2, {0.3, 0.2});
    const Tensor att = attention_weights(x, z, p);
    CHECK(att[0] > att[1]);
    CHECK(att[2] > att[3]);
}

TEST_CASE("a wider distance penalty concentrates weight on the nearest latent") {
    std::mt19937_64 rng(7);
    auto p = random_params(small_dims(), rng);
    LatentPointCloud z{Tensor::matrix(2, 2, {0.0, 0.0, 1.0, 0.0}), random_matrix(2, 3, rng)};
    const Tensor x = Tensor::matrix(1, 2, {0.2, 0.1});
    double previous = 0.0;
    for (double w : {0.5, 2.0, 8.0, 32.0}) {
        p.window = w;
        const double near = attention_weights(x, z, p)[0];
        CHECK(near > previous);
        previous = near;
    }
    p.window = 1000.0;
    CHECK(attention_weights(x, z, p)[0] > 1.0 - 1e-12);
}

TEST_CASE("value function algebra") {
    std::mt19937_64 rng(8);
    const auto p = random_params(small_dims(), rng);
    const Tensor b = random_matrix(4, 8, rng);
    const Tensor c = random_matrix(4, 3, rng);

    const Tensor v0 = value_fn(b, Tensor::matrix(4, 3, 0.0), p);
    for (std::size_t r = 0; r < 4; ++r) {
        const auto wb = test::matvec(p.w_b, test::row(b, r));
        for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(v0(r, k) - wb[k]) < 1e-14);
    }
    CHECK(max_abs(value_fn(Tensor::matrix(4, 8, 0.0), c, p)) == 0.0);

    const Tensor v = value_fn(b, c, p);
    for (std::size_t r = 0; r < 4; ++r) {
        const auto ref = test::naive_value(test::row(b, r), test::row(c, r), p);
        for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(v(r, k) - ref[k]) < 1e-12);
    }
}

TEST_CASE("field output matches a naive triple loop") {
    std::mt19937_64 rng(9);
    for (std::size_t heads : {1, 2}) {
        const auto p = random_params(small_dims(heads), rng);
        LatentPointCloud z{random_matrix(3, 2, rng), random_matrix(3, 3, rng)};
        const Tensor x = random_matrix(7, 2, rng);
        CHECK(max_abs_diff(enf_forward(z, x, p), test::naive_field(x, z.positions, z.features, p)) < 1e-10);
    }
}

TEST_CASE("a single latent reduces the field to W_o v") {
    std::mt19937_64 rng(10);
    const auto p = random_params(small_dims(), rng);
    LatentPointCloud z{random_matrix(1, 2, rng), random_matrix(1, 3, rng)};
    const Tensor x = random_matrix(5, 2, rng);
    const Tensor out = enf_forward(z, x, p);
    for (std::size_t a = 0; a < 5; ++a) {
        const std::vector<double> off{x(a, 0) - z.positions(0, 0), x(a, 1) - z.positions(0, 1)};
        const auto v = test::naive_value(test::encode_offset(p.fourier, off), test::row(z.features, 0), p);
        const auto o = test::matvec(p.w_o, v);
        for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(out(a, k) - o[k]) < 1e-12);
    }
}

TEST_CASE("joint translation leaves the field unchanged") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> shift(-5.0, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_params(small_dims(), rng);
        LatentPointCloud z{random_matrix(4, 2, rng), random_matrix(4, 3, rng)};
        const Tensor x = random_matrix(6, 2, rng);
        const double dx = shift(rng), dy = shift(rng);
        LatentPointCloud zs = z;
        Tensor xs = x;
        for (std::size_t j = 0; j < 4; ++j) {
            zs.positions(j, 0) += dx;
            zs.positions(j, 1) += dy;
        }
        for (std::size_t a = 0; a < 6; ++a) {
            xs(a, 0) += dx;
            xs(a, 1) += dy;
        }
        const Tensor a = enf_forward(z, x, p);
        const Tensor b = enf_forward(zs, xs, p);
        CHECK(max_abs_diff(a, b) < 1e-10 * std::max(1.0, max_abs(a)));
    }
}

TEST_CASE("output is linear in W_o") {
    std::mt19937_64 rng(12);
    auto p = random_params(small_dims(), rng);
    LatentPointCloud z{random_matrix(3, 2, rng), random_matrix(3, 3, rng)};
    const Tensor x = random_matrix(5, 2, rng);
    const Tensor base = enf_forward(z, x, p);
    for (auto& v : p.w_o.values()) v *= 2.0;
    const Tensor doubled = enf_forward(z, x, p);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(doubled[i] == 2.0 * base[i]);
}

TEST_CASE("field gradients pass the finite-difference check") {
    std::mt19937_64 rng(13);
    const auto p = random_params(small_dims(), rng);
    const Tensor pos = random_matrix(3, 2, rng);
    const Tensor feat = random_matrix(3, 3, rng);
    const Tensor x = random_matrix(5, 2, rng);
    const Tensor target = random_matrix(5, 2, rng);
    ad::ScalarFn f = [&](ad::Tape& tape, std::span<const ad::Var> v) {
        FieldGraph g(tape, x, pos, p, EnfVars::from_span(v));
        auto d = g.evaluate(tape.constant(feat)) - tape.constant(target);
        return ad::scale(ad::sq_norm(d), 1.0 / 5.0);
    };
    std::vector<ad::NamedTensor> params;
    const auto ts = p.trainable();
    for (std::size_t i = 0; i < ts.size(); ++i) params.push_back({EnfParams::trainable_name(i), *ts[i]});
    ad::FdOptions opt;
    opt.tol = 1e-4;
    const auto rep = ad::finite_difference_check(f, params, opt);
    CHECK(rep.pass);
    CHECK(rep.params.size() == 6);
}

TEST_CASE("a non-finite output names the query") {
    std::mt19937_64 rng(14);
    const auto p = random_params(small_dims(), rng);
    LatentPointCloud z{random_matrix(2, 2, rng), random_matrix(2, 3, rng)};
    Tensor x = random_matrix(4, 2, rng);
    x(2, 1) = std::nan("");
    try {
        (void)enf_forward(z, x, p);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("query index 2") != std::string::npos);
    }
}

TEST_CASE("mismatched shapes are rejected") {
    std::mt19937_64 rng(15);
    const auto p = random_params(small_dims(), rng);
    LatentPointCloud z{random_matrix(2, 2, rng), random_matrix(2, 4, rng)};
    CHECK_THROWS_AS(enf_forward(z, random_matrix(3, 2, rng), p), DimensionError);
    LatentPointCloud z3{random_matrix(2, 3, rng), random_matrix(2, 3, rng)};
    CHECK_THROWS_AS(enf_forward(z3, random_matrix(3, 3, rng), p), DimensionError);
}
