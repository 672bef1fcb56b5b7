#include "enf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "enf/errors.hpp"

namespace enf {

namespace {

constexpr double kPi = std::numbers::pi;

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

bool circle_inside(const Circle& c, const Box2& box) {
    return c.center[0] - c.radius >= box.lo[0] && c.center[0] + c.radius <= box.hi[0] &&
           c.center[1] - c.radius >= box.lo[1] && c.center[1] + c.radius <= box.hi[1];
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

void check_range(const Range& r, const char* name) {
    if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
        throw ConfigError(std::string("invalid range for ") + name);
    }
}

}  // namespace

void Geometry::validate() const {
    if (bodies.empty()) throw DomainError("geometry has no bodies");
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        const auto& b = bodies[i];
        if (!(b.radius > 0.0)) throw DomainError("body radius must be positive");
        if (!circle_inside(b, domain)) throw DomainError("body " + std::to_string(i) + " leaves the domain");
        for (std::size_t j = 0; j < i; ++j) {
            if (dist(b.center, bodies[j].center) <= b.radius + bodies[j].radius) {
                throw DomainError("bodies " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
            }
        }
    }
}

double sdf(const Geometry& geometry, const Vec2& x) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : geometry.bodies) best = std::min(best, dist(x, b.center) - b.radius);
    return best;
}

void FlowCase::validate() const {
    if (!(speed > 0.0) || !std::isfinite(speed)) throw DomainError("freestream speed must be positive");
    if (!std::isfinite(circulation) || !std::isfinite(angle)) throw DomainError("flow case must be finite");
    if (!(body.radius > 0.0)) throw DomainError("body radius must be positive");
}

std::vector<double> FlowCase::global_parameters() const {
    return {speed * std::cos(angle), speed * std::sin(angle), circulation};
}

FlowPoint potential_flow(const FlowCase& flow, const Vec2& x) {
    using C = std::complex<double>;
    const C zeta(x[0] - flow.body.center[0], x[1] - flow.body.center[1]);
    const double r = flow.body.radius;
    if (std::abs(zeta) < r) throw DomainError("potential_flow: point lies inside the body");
    const C i(0.0, 1.0);
    const C dw = flow.speed * std::exp(-i * flow.angle) * (1.0 - r * r * std::exp(2.0 * i * flow.angle) / (zeta * zeta)) +
                 i * flow.circulation / (2.0 * kPi * zeta);
    FlowPoint p;
    p.velocity = {dw.real(), -dw.imag()};
    p.cp = 1.0 - std::norm(dw) / (flow.speed * flow.speed);
    return p;
}

double kutta_joukowski_lift(const FlowCase& flow) { return flow.circulation / (flow.speed * flow.body.radius); }

MeshPoints sample_mesh(const Geometry& geometry, std::size_t n_total, std::size_t n_surface, std::mt19937_64& rng,
                       double surface_phase) {
    geometry.validate();
    if (n_surface >= n_total) throw ConfigError("sample_mesh: need n_surface < n_total");

    MeshPoints mesh;
    mesh.coords = Tensor::matrix(n_total, 2);
    mesh.surface.assign(n_total, 0);

    // Split boundary points by circumference (largest remainder).
    const std::size_t nb = geometry.bodies.size();
    double total_r = 0.0;
    for (const auto& b : geometry.bodies) total_r += b.radius;
    std::vector<std::size_t> per(nb);
    std::vector<std::pair<double, std::size_t>> rema;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < nb; ++k) {
        const double share = static_cast<double>(n_surface) * geometry.bodies[k].radius / total_r;
        per[k] = static_cast<std::size_t>(std::floor(share));
        assigned += per[k];
        rema.emplace_back(share - static_cast<double>(per[k]), k);
    }
    std::stable_sort(rema.begin(), rema.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n_surface; ++k, ++assigned) ++per[rema[k % nb].second];

    std::size_t row = 0;
    for (std::size_t k = 0; k < nb; ++k) {
        const auto& b = geometry.bodies[k];
        for (std::size_t i = 0; i < per[k]; ++i) {
            const double t = surface_phase + 2.0 * kPi * static_cast<double>(i) / static_cast<double>(per[k]);
            mesh.coords(row, 0) = b.center[0] + b.radius * std::cos(t);
            mesh.coords(row, 1) = b.center[1] + b.radius * std::sin(t);
            mesh.surface[row] = 1;
            ++row;
        }
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, nb - 1);
    const auto& dom = geometry.domain;
    const std::size_t max_attempts = 1000 * (n_total - n_surface) + 1000;
    std::size_t attempts = 0;
    while (row < n_total) {
        if (++attempts > max_attempts) throw DomainError("sample_mesh: rejection sampling failed to place points");
        Vec2 x;
        if (unit(rng) < 0.5) {
            x = {dom.lo[0] + unit(rng) * (dom.hi[0] - dom.lo[0]), dom.lo[1] + unit(rng) * (dom.hi[1] - dom.lo[1])};
        } else {
            const auto& b = geometry.bodies[pick(rng)];
            const double r2 = b.radius * b.radius;
            const double rho = std::sqrt(r2 + unit(rng) * (9.0 * r2 - r2));
            const double t = 2.0 * kPi * unit(rng);
            x = {b.center[0] + rho * std::cos(t), b.center[1] + rho * std::sin(t)};
        }
        if (!dom.contains(x) || !(sdf(geometry, x) > 0.0)) continue;
        mesh.coords(row, 0) = x[0];
        mesh.coords(row, 1) = x[1];
        ++row;
    }
    return mesh;
}

FieldSample make_flow_sample(const FlowCase& flow, const Box2& domain, std::size_t n_points, std::size_t n_surface,
                             std::mt19937_64& rng) {
    flow.validate();
    Geometry geometry{{flow.body}, domain};
    MeshPoints mesh = sample_mesh(geometry, n_points, n_surface, rng, flow.angle);
    FieldSample s;
    s.input = Tensor::matrix(n_points, 1);
    s.output = Tensor::matrix(n_points, 1);
    for (std::size_t i = 0; i < n_points; ++i) {
        const Vec2 x{mesh.coords(i, 0), mesh.coords(i, 1)};
        if (mesh.surface[i]) {
            s.input(i, 0) = 0.0;
            // On the boundary the analytic form avoids rounding of |zeta| below r.
            const double theta = std::atan2(x[1] - flow.body.center[1], x[0] - flow.body.center[0]) - flow.angle;
            const double tang = 2.0 * std::sin(theta) + flow.circulation / (2.0 * kPi * flow.speed * flow.body.radius);
            s.output(i, 0) = 1.0 - tang * tang;
        } else {
            s.input(i, 0) = sdf(geometry, x);
            s.output(i, 0) = potential_flow(flow, x).cp;
        }
    }
    s.coords = std::move(mesh.coords);
    s.surface = std::move(mesh.surface);
    s.mu = flow.global_parameters();
    return s;
}

FlowCase flow_case_from_sample(const FieldSample& sample) {
    if (sample.mu.size() != 3) throw DataError("flow sample must carry mu = (U cos beta, U sin beta, Gamma)");
    if (sample.dim() != 2) throw DataError("flow sample must be two-dimensional");
    std::vector<Vec2> pts;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        if (sample.surface[i]) pts.push_back({sample.coords(i, 0), sample.coords(i, 1)});
    }
    if (pts.size() < 3) throw DataError("flow sample needs at least 3 surface points");
    Vec2 c{0.0, 0.0};
    for (const auto& p : pts) {
        c[0] += p[0];
        c[1] += p[1];
    }
    c[0] /= static_cast<double>(pts.size());
    c[1] /= static_cast<double>(pts.size());
    double r = 0.0;
    for (const auto& p : pts) r += dist(p, c);
    r /= static_cast<double>(pts.size());
    FlowCase f;
    f.body = {c, r};
    f.speed = std::hypot(sample.mu[0], sample.mu[1]);
    f.angle = std::atan2(sample.mu[1], sample.mu[0]);
    f.circulation = sample.mu[2];
    return f;
}

double Range::draw(std::mt19937_64& rng) const {
    if (lo == hi) return lo;
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
}

void FlowDatasetConfig::validate() const {
    check_range(radius, "radius");
    check_range(speed, "speed");
    check_range(angle_deg, "angle");
    check_range(circulation, "circulation");
    check_range(center_x, "center_x");
    check_range(center_y, "center_y");
    if (!(radius.lo > 0.0)) throw ConfigError("radius range must be positive");
    if (!(speed.lo > 0.0)) throw ConfigError("speed range must be positive");
    if (surface_points >= points) throw ConfigError("surface_points must be below points");
}

std::vector<FlowCase> draw_flow_cases(const FlowDatasetConfig& config, bool test_split) {
    config.validate();
    auto rng = stream(config.seed, test_split ? 0x74657374 : 0x74726e);
    const std::size_t n = test_split ? config.n_test : config.n_train;
    std::vector<FlowCase> cases;
    for (std::size_t i = 0; i < n; ++i) {
        FlowCase f;
        f.body.radius = config.radius.draw(rng);
        f.body.center = {config.center_x.draw(rng), config.center_y.draw(rng)};
        f.speed = config.speed.draw(rng);
        f.angle = config.angle_deg.draw(rng) * kPi / 180.0;
        f.circulation = config.circulation.draw(rng);
        cases.push_back(f);
    }
    return cases;
}

Dataset make_flow_dataset(const FlowDatasetConfig& config) {
    Dataset ds;
    for (int split = 0; split < 2; ++split) {
        const bool test = split == 1;
        auto cases = draw_flow_cases(config, test);
        auto mesh_rng = stream(config.seed, test ? 0x6d7465 : 0x6d7472);
        auto& out = test ? ds.test : ds.train;
        for (const auto& f : cases) {
            out.push_back(make_flow_sample(f, config.domain, config.points, config.surface_points, mesh_rng));
        }
    }
    return ds;
}

void MultibodyConfig::validate() const {
    check_range(offset, "offset");
    check_range(angle_deg, "angle");
    if (n_test > n_samples) throw ConfigError("n_test exceeds n_samples");
    if (!(secondary_radius > 0.0)) throw ConfigError("secondary radius must be positive");
    if (surface_points >= points) throw ConfigError("surface_points must be below points");
}

Dataset make_multibody_dataset(const MultibodyConfig& config) {
    config.validate();
    auto rng = stream(config.seed, 0x6d62);
    Dataset ds;
    for (std::size_t i = 0; i < config.n_samples; ++i) {
        Geometry g;
        g.domain = config.domain;
        bool ok = false;
        for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
            const double d = config.offset.draw(rng);
            const double a = config.angle_deg.draw(rng) * kPi / 180.0;
            Circle second{{config.main_body.center[0] + d * std::cos(a), config.main_body.center[1] + d * std::sin(a)},
                          config.secondary_radius};
            g.bodies = {config.main_body, second};
            try {
                g.validate();
                ok = true;
            } catch (const DomainError&) {
            }
        }
        if (!ok) throw DomainError("gen_multibody: could not draw a non-overlapping configuration");
        MeshPoints mesh = sample_mesh(g, config.points, config.surface_points, rng);
        FieldSample s;
        s.input = Tensor::matrix(config.points, 1);
        for (std::size_t k = 0; k < config.points; ++k) {
            s.input(k, 0) = mesh.surface[k] ? 0.0 : sdf(g, {mesh.coords(k, 0), mesh.coords(k, 1)});
        }
        s.output = s.input;
        s.coords = std::move(mesh.coords);
        s.surface = std::move(mesh.surface);
        (i < config.n_samples - config.n_test ? ds.train : ds.test).push_back(std::move(s));
    }
    return ds;
}

}  // namespace enf
