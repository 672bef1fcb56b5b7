#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "enf/errors.hpp"
#include "enf/encoder.hpp"
#include "enf/log.hpp"
#include "helpers.hpp"

using namespace enf;
using enf::test::random_matrix;

namespace {

EncoderState small_encoder(std::size_t n_lat, std::size_t steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    FieldDims d;
    d.latent_dim = 3;
    d.out_dim = 1;
    d.key_dim = 4;
    d.value_dim = 4;
    d.rff_dim = 6;
    d.heads = 2;
    d.window = 0.5;
    EncoderState s;
    s.field = init_enf_params(d, rng);
    s.positions = init_latent_positions({{-1.0, -1.0}, {1.0, 1.0}}, n_lat);
    s.steps = steps;
    s.lr = 0.5;
    return s;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("nine latents on the symmetric unit box") {
    const Tensor p = init_latent_positions({{-1.0, -1.0}, {1.0, 1.0}}, 9);
    REQUIRE(p.rows() == 9);
    const double v[] = {-2.0 / 3.0, 0.0, 2.0 / 3.0};
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(p(r * 3 + c, 0) == doctest::Approx(v[c]).epsilon(1e-15));
            CHECK(p(r * 3 + c, 1) == doctest::Approx(v[r]).epsilon(1e-15));
        }
}

TEST_CASE("grid edge cases") {
    const BoundingBox box{{-0.75, -0.75}, {0.75, 0.75}};
    const Tensor one = init_latent_positions({{0.0, 2.0}, {1.0, 4.0}}, 1);
    CHECK(one(0, 0) == 0.5);
    CHECK(one(0, 1) == 3.0);

    const Tensor four = init_latent_positions(box, 4);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(four(j, 0)) == doctest::Approx(0.375));
        CHECK(std::abs(four(j, 1)) == doctest::Approx(0.375));
    }

    set_log_muted(true);
    const Tensor seven = init_latent_positions(box, 7);
    REQUIRE(seven.rows() == 7);
    for (std::size_t j = 0; j < 7; ++j) CHECK(seven(j, 1) == 0.0);
    for (std::size_t j = 1; j < 7; ++j) CHECK(seven(j, 0) > seven(j - 1, 0));

    const Tensor six = init_latent_positions(box, 6);
    std::set<double> xs, ys;
    for (std::size_t j = 0; j < 6; ++j) {
        xs.insert(six(j, 0));
        ys.insert(six(j, 1));
    }
    CHECK(xs.size() == 3);
    CHECK(ys.size() == 2);

    CHECK_THROWS_AS(init_latent_positions(box, 0), ConfigError);
}

TEST_CASE("reconstruction loss") {
    const Tensor a = Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0});
    CHECK(loss_recon(a, a) == 0.0);
    CHECK(loss_recon(Tensor::matrix(2, 1, {0.0, 0.0}), Tensor::matrix(2, 1, {1.0, 3.0})) == 5.0);
    CHECK(loss_recon(Tensor::matrix(1, 2, {0.0, 0.0}), Tensor::matrix(1, 2, {3.0, 4.0})) == 25.0);
}

TEST_CASE("zero steps leave the features at zero") {
    auto s = small_encoder(4, 0, 1);
    std::mt19937_64 rng(2);
    const auto e = encode(random_matrix(20, 2, rng), random_matrix(20, 1, rng), s);
    for (double v : e.z.features.values()) CHECK(v == 0.0);
    CHECK(e.trace.losses.size() == 1);
}

TEST_CASE("inner loop trace and fixed positions") {
    auto s = small_encoder(4, 3, 3);
    std::mt19937_64 rng(4);
    const Tensor x = random_matrix(30, 2, rng);
    const Tensor y = random_matrix(30, 1, rng);
    const auto e = encode(x, y, s);
    CHECK(e.trace.losses.size() == 4);
    CHECK(bit_equal(e.z.positions, s.positions));
    CHECK(e.z.features.rows() == 4);
    CHECK(e.z.features.cols() == 3);
    const auto again = encode(x, y, s);
    CHECK(bit_equal(e.z.features, again.z.features));
}

TEST_CASE("a small step decreases the reconstruction loss") {
    auto s = small_encoder(4, 1, 5);
    s.lr = 1e-3;
    std::mt19937_64 rng(6);
    const auto e = encode(random_matrix(30, 2, rng), random_matrix(30, 1, rng), s);
    CHECK(e.trace.losses[1] < e.trace.losses[0]);
}

TEST_CASE("first- and second-order loops agree on values") {
    auto s = small_encoder(4, 3, 7);
    std::mt19937_64 rng(8);
    const Tensor x = random_matrix(15, 2, rng);
    const Tensor y = random_matrix(15, 1, rng);
    double losses[2];
    Tensor feats[2];
    for (int order = 0; order < 2; ++order) {
        ad::Tape tape;
        auto vars = EnfVars::leaves(tape, s.field, true);
        FieldGraph g(tape, x, s.positions, s.field, vars);
        auto r = run_inner_loop(g, tape.constant(y), 3, 3, s.lr, order == 1);
        losses[order] = r.final_loss.value()[0];
        feats[order] = r.features.value();
    }
    CHECK(losses[0] == losses[1]);
    CHECK(bit_equal(feats[0], feats[1]));
}

TEST_CASE("meta-gradients through the inner loop match finite differences") {
    auto s = small_encoder(2, 2, 9);
    std::mt19937_64 rng(10);
    for (auto* t : s.field.trainable()) *t = random_matrix(t->rows(), t->cols(), rng, -0.7, 0.7);
    const Tensor x = random_matrix(10, 2, rng);
    const Tensor y = random_matrix(10, 1, rng);
    ad::ScalarFn f = [&](ad::Tape& tape, std::span<const ad::Var> v) {
        FieldGraph g(tape, x, s.positions, s.field, EnfVars::from_span(v));
        return run_inner_loop(g, tape.constant(y), 3, 2, s.lr, true).final_loss;
    };
    std::vector<ad::NamedTensor> params;
    const auto ts = s.field.trainable();
    for (std::size_t i = 0; i < ts.size(); ++i) params.push_back({EnfParams::trainable_name(i), *ts[i]});
    ad::FdOptions opt;
    opt.tol = 1e-3;
    const auto rep = ad::finite_difference_check(f, params, opt);
    CHECK(rep.pass);
    CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("the global baseline uses one latent without distance penalty") {
    auto s = small_encoder(1, 2, 11);
    std::mt19937_64 rng(12);
    CHECK_THROWS_AS(encode_global(random_matrix(12, 2, rng), random_matrix(12, 1, rng), s), ConfigError);
    s.field.window = 0.0;
    const auto e = encode_global(random_matrix(12, 2, rng), random_matrix(12, 1, rng), s);
    CHECK(e.z.size() == 1);
    CHECK(e.trace.losses.size() == 3);
}

TEST_CASE("encoder input shapes are checked") {
    auto s = small_encoder(4, 1, 13);
    std::mt19937_64 rng(14);
    CHECK_THROWS_AS(encode(random_matrix(10, 2, rng), random_matrix(9, 1, rng), s), DimensionError);
    CHECK_THROWS_AS(encode(random_matrix(10, 2, rng), random_matrix(10, 2, rng), s), DimensionError);
}
