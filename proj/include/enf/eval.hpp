#pragma once

// Metrics and experiment drivers.
//
// Lift: C_L = -(1 / 2r) * closed integral of C_p (n . e_L) ds, with n the
// outward normal and e_L = (-sin beta, cos beta) perpendicular to the
// freestream (unit density, reference length 2r). Trapezoidal rule over the
// surface points sorted by angle.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "enf/config.hpp"
#include "enf/dataset.hpp"
#include "enf/synth.hpp"
#include "enf/trainer.hpp"

namespace enf {

struct SplitMse {
    double volume = 0.0;
    double surface = 0.0;
};

/// Mean squared error over non-surface and surface points separately.
/// A sample without surface points is a DataError.
SplitMse mse_split(const Tensor& pred, const Tensor& truth, const std::vector<std::uint8_t>& surface);

/// `points` are S x 2 boundary points of flow.body (any order), `cp` their
/// pressure coefficients. Fewer than 8 points is a DataError.
double lift_coefficient(const Tensor& points, const std::vector<double>& cp, const FlowCase& flow);

/// Pearson correlation of (average) ranks. Constant input is a NumericError.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct SampleMetrics {
    double volume_mse = 0.0;
    double surface_mse = 0.0;
    double input_mse = 0.0;  // input-field reconstruction, domain units
    double cl_pred = 0.0;
    double cl_true = 0.0;     // quadrature of the stored C_p
    double cl_closed = 0.0;   // Gamma / (U r)
};

struct MetricReport {
    double volume_mse = 0.0;   // normalised output field
    double surface_mse = 0.0;  // normalised output field
    double input_mse = 0.0;
    double output_mse = 0.0;   // all points, normalised
    bool has_lift = false;
    double cl_mse = 0.0;             // physical C_L
    double cl_mse_normalized = 0.0;  // C_L standardised by the test-set truth
    double spearman_lift = 0.0;
    double seconds_per_sample = 0.0;  // median over repeats, inference only
    std::vector<SampleMetrics> samples;
};

struct EvalOptions {
    std::size_t threads = 1;
    std::size_t timing_repeats = 5;
};

/// Full-mesh inference on every test sample. Lift metrics are computed when
/// samples carry mu = (U cos beta, U sin beta, Gamma) and >= 8 surface points.
MetricReport evaluate_model(const Model& model, const std::vector<FieldSample>& test, const EvalOptions& options = {});

struct SweepRow {
    std::size_t points = 0;
    double volume_mse = 0.0;
    double surface_mse = 0.0;
    double seconds_per_sample = 0.0;
};

/// Re-mesh every test geometry at each resolution (the stored sample is used
/// as is when its size matches) and evaluate with one forward pass each.
std::vector<SweepRow> discretization_sweep(const Model& model, const std::vector<FieldSample>& test,
                                           const std::vector<std::size_t>& resolutions, std::uint64_t seed,
                                           const EvalOptions& options = {}, const Box2& domain = {});

struct LatentShape {
    std::size_t count = 0;
    std::size_t dim = 0;
};

struct CapacityRow {
    LatentShape shape;
    double input_mse = 0.0;
    double output_mse = 0.0;
    TrainReport encoder_report;
    TrainReport decoder_report;
};

/// Train every latent shape with the same seeds and budgets.
std::vector<CapacityRow> ablate_capacity(const Dataset& data, const ModelConfig& base, const TrainConfig& train,
                                         const std::vector<LatentShape>& shapes, const EvalOptions& options = {});

struct LocalGlobalResult {
    double local_mse = 0.0;
    double global_mse = 0.0;
    double ratio = 0.0;  // global / local
    TrainReport local_report;
    TrainReport global_report;
};

/// Input-field reconstruction of a local (anchored) and a global (single
/// latent, no distance penalty) encoder trained with identical budgets.
LocalGlobalResult compare_local_global(const Dataset& data, const ModelConfig& local, const ModelConfig& global,
                                       const TrainConfig& train, const EvalOptions& options = {});

/// Tab-separated table with a header row.
std::string format_tsv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

/// Nearest-point rendering of a scalar field to a binary PPM image.
void write_heatmap_ppm(const std::filesystem::path& path, const Tensor& coords, const std::vector<double>& values,
                       std::size_t width, std::size_t height);

}  // namespace enf
