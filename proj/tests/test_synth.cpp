#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "enf/dataset.hpp"
#include "enf/errors.hpp"
#include "enf/synth.hpp"

using namespace enf;

namespace {

constexpr double kPi = std::numbers::pi;

// Velocity potential Re w with w = U e^{-ib} z + U r^2 e^{ib} / z + i G/(2 pi) log z.
double velocity_potential(const FlowCase& f, const Vec2& x) {
    using C = std::complex<double>;
    const C z(x[0] - f.body.center[0], x[1] - f.body.center[1]);
    const C i(0.0, 1.0);
    const double r = f.body.radius;
    const C w = f.speed * std::exp(-i * f.angle) * z + f.speed * r * r * std::exp(i * f.angle) / z +
                i * f.circulation / (2.0 * kPi) * std::log(z);
    return w.real();
}

FlowCase sample_case() {
    FlowCase f;
    f.speed = 1.3;
    f.angle = 0.2;
    f.circulation = 1.1;
    f.body = {{0.1, -0.2}, 0.4};
    return f;
}

bool same_bits(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("signed distance to a circle") {
    Geometry g{{{{0.0, 0.0}, 0.5}}, {}};
    CHECK(sdf(g, {1.0, 0.0}) == 0.5);
    CHECK(sdf(g, {0.0, 0.0}) == -0.5);
    CHECK(sdf(g, {0.0, 0.5}) == 0.0);
    CHECK(sdf(g, {-0.6, 0.8}) == doctest::Approx(0.5));
}

TEST_CASE("two-body distance is the minimum over bodies") {
    Geometry g{{{{-0.5, 0.0}, 0.5}, {{0.6, 0.3}, 0.2}}, {}};
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
        const Vec2 x{u(rng), u(rng)};
        const double a = std::hypot(x[0] + 0.5, x[1]) - 0.5;
        const double b = std::hypot(x[0] - 0.6, x[1] - 0.3) - 0.2;
        CHECK(sdf(g, x) == std::min(a, b));
    }
}

TEST_CASE("invalid geometry is a domain error") {
    CHECK_THROWS_AS((Geometry{{{{0.0, 0.0}, 0.5}, {{0.6, 0.0}, 0.2}}, {}}.validate()), DomainError);
    CHECK_THROWS_AS((Geometry{{{{1.8, 0.0}, 0.5}}, {}}.validate()), DomainError);
    CHECK_THROWS_AS((Geometry{{}, {}}.validate()), DomainError);
}

TEST_CASE("pressure coefficient at the top and at stagnation without circulation") {
    FlowCase f;
    f.body = {{0.0, 0.0}, 0.5};
    CHECK(potential_flow(f, {0.0, 0.5 + 1e-13}).cp == doctest::Approx(-3.0).epsilon(1e-9));
    CHECK(potential_flow(f, {-0.5 - 1e-13, 0.0}).cp == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(potential_flow(f, {0.1, 0.1}), DomainError);
}

TEST_CASE("velocity is the gradient of the potential") {
    const FlowCase f = sample_case();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> rho(0.45, 1.5), ang(-kPi, kPi);
    const double h = 1e-5;
    int checked = 0;
    while (checked < 50) {
        const double a = ang(rng), r = rho(rng);
        if (std::abs(std::abs(a) - kPi) < 0.2) continue;  // keep off the branch cut of log
        const Vec2 x{f.body.center[0] + r * std::cos(a), f.body.center[1] + r * std::sin(a)};
        const double u = (velocity_potential(f, {x[0] + h, x[1]}) - velocity_potential(f, {x[0] - h, x[1]})) / (2 * h);
        const double v = (velocity_potential(f, {x[0], x[1] + h}) - velocity_potential(f, {x[0], x[1] - h})) / (2 * h);
        const auto p = potential_flow(f, x);
        CHECK(p.velocity[0] == doctest::Approx(u).epsilon(1e-6));
        CHECK(p.velocity[1] == doctest::Approx(v).epsilon(1e-6));
        CHECK(p.cp == doctest::Approx(1.0 - (u * u + v * v) / (f.speed * f.speed)).epsilon(1e-6));
        ++checked;
    }
}

TEST_CASE("flow is divergence free and tends to the freestream") {
    const FlowCase f = sample_case();
    const double h = 1e-4;
    for (const Vec2& x : {Vec2{1.0, 0.3}, Vec2{-0.9, 0.5}, Vec2{0.2, -1.1}}) {
        const double du = potential_flow(f, {x[0] + h, x[1]}).velocity[0] - potential_flow(f, {x[0] - h, x[1]}).velocity[0];
        const double dv = potential_flow(f, {x[0], x[1] + h}).velocity[1] - potential_flow(f, {x[0], x[1] - h}).velocity[1];
        CHECK(std::abs((du + dv) / (2 * h)) < 1e-6);
    }
    const auto far = potential_flow(f, {1e6, 3e5});
    CHECK(far.velocity[0] == doctest::Approx(f.speed * std::cos(f.angle)).epsilon(1e-5));
    CHECK(far.velocity[1] == doctest::Approx(f.speed * std::sin(f.angle)).epsilon(1e-5));
    CHECK(std::abs(far.cp) < 1e-5);
}

TEST_CASE("surface values agree with the field just outside the body") {
    const FlowCase f = sample_case();
    std::mt19937_64 rng(3);
    const FieldSample s = make_flow_sample(f, {}, 300, 40, rng);
    REQUIRE(s.surface_count() == 40);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s.surface[i]) continue;
        CHECK(s.input(i, 0) == 0.0);
        const double dx = s.coords(i, 0) - f.body.center[0], dy = s.coords(i, 1) - f.body.center[1];
        const double scale = 1.0 + 1e-12;
        const Vec2 out{f.body.center[0] + dx * scale, f.body.center[1] + dy * scale};
        CHECK(std::abs(s.output(i, 0) - potential_flow(f, out).cp) < 1e-9);
    }
}

TEST_CASE("surface stagnation points have unit pressure coefficient") {
    FlowCase f = sample_case();
    // Stagnation where 2 sin(theta) = -Gamma / (2 pi U r).
    const double s = -f.circulation / (4.0 * kPi * f.speed * f.body.radius);
    const double theta = std::asin(s) + f.angle;
    const double r = f.body.radius * (1.0 + 1e-13);
    const Vec2 x{f.body.center[0] + r * std::cos(theta), f.body.center[1] + r * std::sin(theta)};
    CHECK(std::abs(potential_flow(f, x).cp - 1.0) < 1e-9);
}

TEST_CASE("mesh properties") {
    Geometry g{{{{0.2, 0.1}, 0.3}}, {}};
    std::mt19937_64 rng(4);
    const MeshPoints m = sample_mesh(g, 4000, 64, rng);
    std::size_t near = 0, far = 0;
    for (std::size_t i = 0; i < 4000; ++i) {
        const Vec2 x{m.coords(i, 0), m.coords(i, 1)};
        CHECK(g.domain.contains(x));
        if (i < 64) {
            CHECK(m.surface[i] == 1);
            CHECK(std::abs(sdf(g, x)) < 1e-12);
            continue;
        }
        CHECK(m.surface[i] == 0);
        CHECK(sdf(g, x) > 0.0);
        const double d = std::hypot(x[0] - 0.2, x[1] - 0.1);
        (d < 0.9 ? near : far) += 1;
    }
    const double near_area = kPi * (0.81 - 0.09);
    const double far_area = 16.0 - kPi * 0.81;
    CHECK(static_cast<double>(near) / near_area >= 2.0 * static_cast<double>(far) / far_area);

    CHECK_THROWS_AS(sample_mesh(g, 10, 10, rng), ConfigError);
}

TEST_CASE("dataset generation is deterministic") {
    FlowDatasetConfig c;
    c.n_train = 3;
    c.n_test = 2;
    c.points = 100;
    c.surface_points = 12;
    c.seed = 42;
    const Dataset a = make_flow_dataset(c), b = make_flow_dataset(c);
    REQUIRE(a.train.size() == 3);
    REQUIRE(a.test.size() == 2);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(same_bits(a.train[i].coords, b.train[i].coords));
        CHECK(same_bits(a.train[i].output, b.train[i].output));
    }
    c.seed = 43;
    CHECK_FALSE(same_bits(make_flow_dataset(c).train[0].coords, a.train[0].coords));
}

TEST_CASE("stored flow samples recover their flow case") {
    const FlowCase f = sample_case();
    std::mt19937_64 rng(5);
    const FlowCase back = flow_case_from_sample(make_flow_sample(f, {}, 200, 32, rng));
    CHECK(back.speed == doctest::Approx(f.speed).epsilon(1e-12));
    CHECK(back.angle == doctest::Approx(f.angle).epsilon(1e-12));
    CHECK(back.circulation == f.circulation);
    CHECK(back.body.radius == doctest::Approx(f.body.radius).epsilon(1e-12));
    CHECK(back.body.center[0] == doctest::Approx(f.body.center[0]).epsilon(1e-12));
}

TEST_CASE("multibody samples") {
    MultibodyConfig c;
    c.n_samples = 6;
    c.n_test = 2;
    c.points = 300;
    c.surface_points = 30;
    const Dataset d = make_multibody_dataset(c);
    CHECK(d.train.size() == 4);
    CHECK(d.test.size() == 2);
    for (const auto& s : d.train) {
        CHECK(same_bits(s.input, s.output));
        CHECK(s.mu.empty());
        CHECK(s.surface_count() == 30);
    }

    c.offset = {1.0, 1.0};
    c.angle_deg = {-20.0, -20.0};
    const Dataset fixed = make_multibody_dataset(c);
    const double a = -20.0 * kPi / 180.0;
    const Geometry g{{c.main_body, {{-0.5 + std::cos(a), std::sin(a)}, 0.2}}, {}};
    for (std::size_t i = 0; i < fixed.train[0].size(); ++i) {
        const Vec2 x{fixed.train[0].coords(i, 0), fixed.train[0].coords(i, 1)};
        CHECK(std::abs(fixed.train[0].input(i, 0) - sdf(g, x)) < 1e-12);
    }
}

TEST_CASE("sample files round trip bit exactly") {
    std::mt19937_64 rng(6);
    const FieldSample s = make_flow_sample(sample_case(), {}, 150, 20, rng).rounded_to_float();
    const std::string bytes = serialize_sample(s);
    const FieldSample back = deserialize_sample(bytes);
    CHECK(same_bits(back.coords, s.coords));
    CHECK(same_bits(back.input, s.input));
    CHECK(same_bits(back.output, s.output));
    CHECK(back.mu == s.mu);
    CHECK(back.surface == s.surface);
    CHECK(serialize_sample(back) == bytes);

    std::string bad = bytes;
    bad[bytes.size() / 3] ^= 1;
    CHECK_THROWS_AS(deserialize_sample(bad), LoadError);
    CHECK_THROWS_AS(deserialize_sample(bytes.substr(0, bytes.size() - 2)), LoadError);

    const auto dir = std::filesystem::temp_directory_path() / "enf_synth_roundtrip";
    std::filesystem::remove_all(dir);
    Dataset ds;
    ds.train = {s};
    ds.test = {s, s};
    save_dataset(dir, ds);
    const Dataset loaded = load_dataset(dir);
    CHECK(loaded.train.size() == 1);
    CHECK(loaded.test.size() == 2);
    CHECK(same_bits(loaded.test[1].output, s.output));
    std::filesystem::remove_all(dir);
}
