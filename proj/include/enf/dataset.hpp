#pragma once

// Point-cloud samples and the on-disk ENFD sample / manifest formats.
//
// ENFD, little-endian:
//   "ENFD" | u32 version | u32 N | u16 d | u16 n_a | u16 n_u | u16 l_mu
//   | f32 coords[N*d] | f32 a[N*n_a] | f32 u[N*n_u] | f32 mu[l_mu]
//   | u8 mask[N] | u32 CRC32 of all preceding bytes
//
// Manifest: UTF-8 text, "[train]" and "[test]" section headers followed by
// one sample path per line, relative to the manifest's directory.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "enf/tensor.hpp"

namespace enf {

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr const char* kManifestName = "manifest.txt";

struct FieldSample {
    Tensor coords;                      // N x d
    Tensor input;                       // N x n_a (geometry field, e.g. SDF)
    Tensor output;                      // N x n_u (physical field)
    std::vector<double> mu;             // global parameters
    std::vector<std::uint8_t> surface;  // N flags, 1 on a body boundary

    std::size_t size() const { return coords.rows(); }
    std::size_t dim() const { return coords.cols(); }
    std::size_t input_dim() const { return input.cols(); }
    std::size_t output_dim() const { return output.cols(); }
    std::size_t surface_count() const;

    /// Row/extent consistency; throws DataError.
    void validate() const;
    /// Copy restricted to the given rows (in that order).
    FieldSample subset(const std::vector<std::size_t>& rows) const;
    /// Values as stored on disk (every number rounded to float).
    FieldSample rounded_to_float() const;
};

std::string serialize_sample(const FieldSample& sample);
FieldSample deserialize_sample(std::string bytes);

void save_sample(const std::filesystem::path& path, const FieldSample& sample);
FieldSample load_sample(const std::filesystem::path& path);

struct Manifest {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

std::string format_manifest(const Manifest& manifest);
Manifest parse_manifest(const std::string& text);

struct Dataset {
    std::vector<FieldSample> train;
    std::vector<FieldSample> test;
};

/// Write samples as train/NNNN.enfd, test/NNNN.enfd plus manifest.txt.
Manifest save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
/// `path` may be a directory containing manifest.txt or the manifest itself.
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace enf
