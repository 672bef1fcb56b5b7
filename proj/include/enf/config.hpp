#pragma once

// Model and training configuration with a flat dotted-key view
// ("model.latent_count=9", "train.lr=0.001") shared by config files,
// command-line overrides and checkpoint metadata.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "enf/decoder.hpp"
#include "enf/encoder.hpp"
#include "enf/field.hpp"

namespace enf {

struct ModelConfig {
    std::size_t dim = 2;       // d
    std::size_t in_dim = 1;    // n_a
    std::size_t out_dim = 1;   // n_u
    std::size_t mu_dim = 3;    // l_mu
    std::size_t latent_count = 9;
    std::size_t latent_dim = 8;
    std::size_t key_dim = 32;
    std::size_t value_dim = 32;
    std::size_t rff_dim = 32;
    std::size_t heads = 2;
    double rff_sigma = 1.0;          // encoder Fourier scale
    double decoder_rff_sigma = 3.0;  // decoder Fourier scale
    std::size_t decoder_key_dim = 32;
    std::size_t decoder_value_dim = 32;
    std::size_t decoder_rff_dim = 64;
    double window = 0.1;
    std::size_t steps = 3;  // K
    double inner_lr = 1.0;  // alpha
    std::size_t blocks = 4;
    std::size_t block_key_dim = 16;
    BoundingBox latent_box{{-0.5, -0.5}, {0.5, 0.5}};  // normalised coordinates

    void validate() const;
    FieldDims encoder_dims() const;
    DecoderDims decoder_dims() const;
};

enum class Optimizer { adam, sgd };

struct TrainConfig {
    std::size_t encoder_epochs = 300;
    std::size_t decoder_epochs = 1000;
    double lr = 1e-3;
    double decoder_lr = 3e-3;
    std::size_t batch = 8;
    std::size_t downsample = 512;
    std::uint64_t seed = 0;
    bool second_order = true;
    Optimizer optimizer = Optimizer::adam;
    bool cache_latents = true;
    std::size_t threads = 1;  // not part of the key view; results do not depend on it

    void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

/// Every addressable key with its current value ("model.*", "train.*").
KeyValues to_key_values(const ModelConfig& model, const TrainConfig& train);

/// Set one dotted key; unknown keys and malformed values throw ConfigError.
void apply_key(ModelConfig& model, TrainConfig& train, const std::string& key, const std::string& value);

/// Configuration assembled from a file and command-line overrides; later
/// assignments win.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;

    void apply(const KeyValues& values);
    /// One "key=value" assignment.
    void apply_assignment(const std::string& assignment);
};

/// Parse flat key=value lines with '#' comments.
KeyValues parse_key_values(const std::string& text);
std::string format_key_values(const KeyValues& values);

/// Shortest text that reads back to exactly the same double.
std::string format_double(double v);
double parse_double(const std::string& text);
std::string format_doubles(const std::vector<double>& v);
std::vector<double> parse_doubles(const std::string& text);

}  // namespace enf
