#pragma once

// Synthetic datasets with exact ground truth.
//
// Flow task: inviscid potential flow with circulation past a circular
// cylinder. Complex velocity, zeta = x - c:
//
//   dw/dzeta = U e^{-i beta} (1 - r^2 e^{2 i beta} / zeta^2) + i Gamma / (2 pi zeta)
//
// Positive Gamma is clockwise circulation, which gives positive lift
// L' = rho U Gamma (unit density) and C_L = Gamma / (U r) with the chord
// taken as the diameter. On the surface, with theta measured from the
// freestream direction, C_p = 1 - (2 sin theta + Gamma / (2 pi U r))^2.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "enf/dataset.hpp"
#include "enf/tensor.hpp"

namespace enf {

using Vec2 = std::array<double, 2>;

struct Circle {
    Vec2 center{0.0, 0.0};
    double radius = 0.5;
};

struct Box2 {
    Vec2 lo{-2.0, -2.0};
    Vec2 hi{2.0, 2.0};

    bool contains(const Vec2& x) const { return x[0] >= lo[0] && x[0] <= hi[0] && x[1] >= lo[1] && x[1] <= hi[1]; }
};

struct Geometry {
    std::vector<Circle> bodies;
    Box2 domain;

    /// Bodies inside the domain, positive radii, no overlaps; throws DomainError.
    void validate() const;
};

/// min over bodies of |x - c| - r (negative inside).
double sdf(const Geometry& geometry, const Vec2& x);

struct FlowCase {
    double speed = 1.0;        // U > 0
    double angle = 0.0;        // beta, radians
    double circulation = 0.0;  // Gamma, clockwise positive
    Circle body;

    void validate() const;
    /// (U cos beta, U sin beta, Gamma): the global parameters of a sample.
    std::vector<double> global_parameters() const;
};

struct FlowPoint {
    Vec2 velocity{0.0, 0.0};
    double cp = 0.0;
};

/// Velocity and pressure coefficient at x; DomainError if x is inside the body.
FlowPoint potential_flow(const FlowCase& flow, const Vec2& x);

/// Closed-form Kutta-Joukowski lift coefficient Gamma / (U r).
double kutta_joukowski_lift(const FlowCase& flow);

struct MeshPoints {
    Tensor coords;                      // N x 2
    std::vector<std::uint8_t> surface;  // first n_surface rows are boundary points
};

/// n_surface points equally spaced in angle on the boundaries (split by
/// circumference, starting at `surface_phase`), the rest rejection-sampled
/// outside all bodies: half uniform over the domain, half in the band of
/// width 2r around a randomly chosen body.
MeshPoints sample_mesh(const Geometry& geometry, std::size_t n_total, std::size_t n_surface, std::mt19937_64& rng,
                       double surface_phase = 0.0);

/// One flow sample: SDF input, C_p output, mu = (U cos beta, U sin beta, Gamma).
FieldSample make_flow_sample(const FlowCase& flow, const Box2& domain, std::size_t n_points, std::size_t n_surface,
                             std::mt19937_64& rng);

/// Recover the flow case from a stored flow sample: the body from its surface
/// points, (U, beta, Gamma) from mu.
FlowCase flow_case_from_sample(const FieldSample& sample);

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    double draw(std::mt19937_64& rng) const;
};

struct FlowDatasetConfig {
    std::size_t n_train = 64;
    std::size_t n_test = 16;
    std::size_t points = 2048;
    std::size_t surface_points = 128;
    Range radius{0.2, 0.5};
    Range speed{0.5, 1.5};
    Range angle_deg{-10.0, 15.0};
    Range circulation{-2.0, 2.0};
    Range center_x{0.0, 0.0};  // body centre; fixed at the origin by default
    Range center_y{0.0, 0.0};
    Box2 domain;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Train and test splits draw from independent seed streams.
Dataset make_flow_dataset(const FlowDatasetConfig& config);
std::vector<FlowCase> draw_flow_cases(const FlowDatasetConfig& config, bool test_split);

struct MultibodyConfig {
    std::size_t n_samples = 200;
    std::size_t n_test = 40;  // taken from the 200
    std::size_t points = 1024;
    std::size_t surface_points = 96;
    Circle main_body{{-0.5, 0.0}, 0.5};
    double secondary_radius = 0.2;
    Range offset{0.85, 1.15};      // distance from main centre to secondary centre
    Range angle_deg{-50.0, 10.0};  // direction of the offset
    Box2 domain;
    std::uint64_t seed = 0;

    void validate() const;
};

/// SDF-only samples (target = input) of a fixed main body plus a moved
/// secondary body. Overlapping draws are rejected and redrawn.
Dataset make_multibody_dataset(const MultibodyConfig& config);

}  // namespace enf
