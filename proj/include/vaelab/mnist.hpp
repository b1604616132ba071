#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vaelab/tensor.hpp"

namespace vaelab::inline VAELAB_NS {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::size_t kMnistTrainCount = 60000;
inline constexpr std::size_t kMnistTestCount = 10000;

/// Images are N x 784 with pixels scaled to [0, 1].
struct Dataset {
  Tensor train_images;
  std::vector<std::uint8_t> train_labels;
  Tensor test_images;
  std::vector<std::uint8_t> test_labels;

  std::size_t train_count() const { return train_labels.size(); }
  std::size_t test_count() const { return test_labels.size(); }
};

/// Parses an IDX image file held in memory. `what` names the source in errors.
/// Bad magic, a short body, extra bytes after the declared count and image
/// sides other than 28 each raise their own IngestionError subclass.
Tensor parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& what);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes, const std::string& what);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Reads train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte
/// and t10k-labels-idx1-ubyte from `dir`. Counts must be exactly 60000 / 10000.
Dataset load_mnist(const std::filesystem::path& dir);

/// The first `train_n` training and `test_n` test examples.
Dataset take_prefix(const Dataset& data, std::size_t train_n, std::size_t test_n);

}  // namespace vaelab::inline VAELAB_NS
