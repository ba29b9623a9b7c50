#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "zkl/linalg.hpp"

namespace zkl {

struct Dataset {
  std::vector<Vector> inputs;
  std::vector<std::size_t> labels;
  std::string name;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return inputs.size(); }
  /// Throws InvalidArgument if inputs/labels disagree in length, an input is not
  /// `input_dim` long, or a label is >= num_classes.
  void validate(std::size_t input_dim, std::size_t num_classes) const;
};

/// V Gaussian blobs with unit covariance and `per_class` points each, class-major order.
/// Class c has mean separation·e_c when V <= input_dim, otherwise separation times a random
/// unit vector drawn from the DataGen stream.
Dataset synth_blobs(std::size_t num_classes, std::size_t input_dim, std::size_t per_class,
                    double separation, std::uint64_t seed);

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Big-endian IDX image file, each image flattened row-major and divided by 255.
/// Throws FormatError on a wrong magic or a short read.
std::vector<Vector> read_idx_images(const std::filesystem::path& path);
std::vector<std::size_t> read_idx_labels(const std::filesystem::path& path);

/// Pixel values are written as bytes; every image must have rows·cols entries in [0, 255].
void write_idx_images(const std::filesystem::path& path, const std::vector<std::vector<std::uint8_t>>& images,
                      std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels);

}  // namespace zkl
