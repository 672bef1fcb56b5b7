#pragma once

// Normalisation, point downsampling, outer-loop training of the encoder and
// decoder, inference, and the ENFC checkpoint format.
//
// ENFC, little-endian:
//   "ENFC" | u32 version | u32 metadata length | metadata (key=value lines)
//   | u32 count | count x (u16 name length, name, u32 rank, u32 extents...,
//   f32 data) | u32 CRC32 of all preceding bytes

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "enf/config.hpp"
#include "enf/dataset.hpp"
#include "enf/decoder.hpp"
#include "enf/encoder.hpp"

namespace enf {

/// Output channels are standardised, coordinates mapped to [-1, 1] per axis,
/// global parameters standardised (a constant component keeps std 1).
/// The input field is left in domain units.
struct NormStats {
    std::vector<double> out_mean, out_std;
    std::vector<double> coord_min, coord_max;
    std::vector<double> mu_mean, mu_std;

    void validate() const;
};

/// Statistics over the training split. Zero-variance output channels are a ConfigError.
NormStats compute_norm_stats(const std::vector<FieldSample>& train);

FieldSample normalize(const FieldSample& sample, const NormStats& stats);
Tensor normalize_coords(const Tensor& coords, const NormStats& stats);
std::vector<double> normalize_mu(const std::vector<double>& mu, const NormStats& stats);
/// Map standardised output predictions back to physical units.
Tensor denormalize(const Tensor& pred, const NormStats& stats);

/// Uniform random subset of k points without replacement (in random order).
/// k above the mesh size is clamped with a warning.
FieldSample downsample(const FieldSample& sample, std::size_t k, std::mt19937_64& rng);

struct Model {
    ModelConfig config;
    NormStats stats;
    EncoderState encoder;
    DecoderParams decoder;
    bool has_decoder = false;
};

/// Fresh parameters from `seed`; the latent template covers config.latent_box.
Model init_model(const ModelConfig& config, const NormStats& stats, std::uint64_t seed);
/// Fresh (untrained) decoder parameters for model.config; clears has_decoder.
void init_decoder(Model& model, std::uint64_t seed);

struct TrainReport {
    std::vector<double> loss_curve;  // mean batch loss per epoch
    bool diverged = false;
    std::string message;
};

/// Outer loop on theta_a: every batch sample is downsampled, encoded with K
/// inner steps from c = 0, and scored by L^a with the final latents. On
/// divergence the parameters from before the failing step are kept.
TrainReport train_encoder(Model& model, const std::vector<FieldSample>& train, const TrainConfig& config);

/// Outer loop on theta_u with theta_a frozen. Latents are re-encoded every
/// epoch unless config.cache_latents is set.
TrainReport train_decoder(Model& model, const std::vector<FieldSample>& train, const TrainConfig& config);

struct Prediction {
    Encoding encoding;  // latents fitted to the (normalised) input field
    Tensor input;       // reconstructed input field, M x n_a, domain units
    Tensor output;      // standardised output field, M x n_u (empty without decoder)
};

/// Encode on all points of `sample` and decode at the same points.
Prediction predict(const Model& model, const FieldSample& sample);

/// Decode at arbitrary coordinates given latents from `predict`.
Tensor decode_at(const Model& model, const Encoding& encoding, const std::vector<double>& mu, const Tensor& coords);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Model model;
    TrainConfig train;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace enf
