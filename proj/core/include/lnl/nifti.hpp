#pragma once

// NIfTI-1 single-file (.nii / .nii.gz) reader and writer.
//
// Only little-endian "n+1" files are accepted. Geometry comes from the sform when
// present, otherwise from the qform, otherwise from pixdim. Axis-aligned affines
// (every direction cosine within 1e-3 of a signed unit vector) are decomposed into
// spacing and axis codes; anything else is rejected with GeometryError. On load the
// volume is permuted/flipped so that the k-axis runs inferior to superior; the other
// two axes keep their on-disk order and direction.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lnl/volume.hpp"

namespace lnl::nifti {

enum class Kind { image, label };

/// On-disk storage for image volumes. `automatic` picks int16 when every voxel is an
/// integer in [-32768, 32767] and float32 otherwise.
enum class ImageStorage { automatic, int16, float32 };

inline constexpr double kObliqueTolerance = 1e-3;

ImageVolume parse_image(std::span<const std::byte> bytes);
LabelVolume parse_labels(std::span<const std::byte> bytes, std::string schema_id = {});

ImageVolume read_image(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path, std::string schema_id = {});
std::variant<ImageVolume, LabelVolume> read(const std::filesystem::path& path, Kind kind);

std::vector<std::byte> encode(const ImageVolume& image, ImageStorage storage = ImageStorage::automatic);
std::vector<std::byte> encode(const Volume<std::uint8_t>& labels);

/// Writes atomically (temporary file + rename). A ".gz" suffix selects gzip compression.
void write(const ImageVolume& image, const std::filesystem::path& path,
           ImageStorage storage = ImageStorage::automatic);
void write(const Volume<std::uint8_t>& labels, const std::filesystem::path& path);

/// Raw helpers, exposed for tests that need hand-built files.
std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
std::vector<std::byte> gunzip(std::span<const std::byte> bytes);
std::vector<std::byte> gzip(std::span<const std::byte> bytes);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace lnl::nifti
