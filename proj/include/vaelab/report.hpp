#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vaelab/history.hpp"

namespace vaelab::inline VAELAB_NS {

/// Six significant digits, '.' decimal point, independent of the C locale.
std::string format_number(double v);

inline constexpr const char* kHistoryHeader =
    "step,train_total,train_recon,train_kl,test_total,test_recon,test_kl,gen_total,gen_recon,gen_kl";
inline constexpr const char* kSweepHeader = "beta,train_total,test_total,gen_total,fid";

std::string history_csv(const RunHistory& history);
/// Rows sorted by beta; failed runs are written with nan values.
std::string sweep_csv(std::vector<SweepRow> rows);

void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_history_csv(const RunHistory& history, const std::filesystem::path& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  ///< row-major, maxval 255
};

/// Tiles N 28x28 images into ceil(N / cols) rows; unused cells stay black.
PgmImage tile_images(const Tensor& images, std::size_t cols);
void write_pgm(const PgmImage& image, const std::filesystem::path& path);
PgmImage read_pgm(const std::filesystem::path& path);
void write_sample_grid(const Tensor& images, std::size_t cols, const std::filesystem::path& path);

}  // namespace vaelab::inline VAELAB_NS
