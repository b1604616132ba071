#include "vaelab/report.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "vaelab/error.hpp"
#include "vaelab/mnist.hpp"
#include "vaelab/vae.hpp"

namespace vaelab::inline VAELAB_NS {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
  return {buf, res.ptr};
}

std::string history_csv(const RunHistory& history) {
  std::string out = kHistoryHeader;
  out += '\n';
  for (const auto& r : history.records) {
    out += std::to_string(r.step);
    for (const LossBreakdown* l : {&r.train, &r.test, &r.gen}) {
      for (double v : {l->total, l->recon, l->kl}) {
        out += ',';
        out += format_number(v);
      }
    }
    out += '\n';
  }
  return out;
}

std::string sweep_csv(std::vector<SweepRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.beta < b.beta; });
  std::string out = kSweepHeader;
  out += '\n';
  const double nan = std::nan("");
  for (const auto& r : rows) {
    out += format_number(r.beta);
    for (double v : {r.summary.train.total, r.summary.test.total, r.summary.gen.total, r.fid}) {
      out += ',';
      out += format_number(r.ok ? v : nan);
    }
    out += '\n';
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

void write_history_csv(const RunHistory& history, const std::filesystem::path& path) {
  write_text_file(path, history_csv(history));
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  write_text_file(path, sweep_csv(rows));
}

PgmImage tile_images(const Tensor& images, std::size_t cols) {
  const Tensor flat = flatten_images(images);
  const std::size_t n = flat.dim(0);
  if (cols == 0) throw ContractError("grid needs at least one column");
  const std::size_t rows = (n + cols - 1) / cols;
  PgmImage img{cols * kImageSide, rows * kImageSide, {}};
  img.pixels.assign(img.width * img.height, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t oy = (k / cols) * kImageSide, ox = (k % cols) * kImageSide;
    for (std::size_t y = 0; y < kImageSide; ++y) {
      for (std::size_t x = 0; x < kImageSide; ++x) {
        const double v = std::clamp(static_cast<double>(flat[k * kPixels + y * kImageSide + x]), 0.0, 1.0);
        img.pixels[(oy + y) * img.width + ox + x] = static_cast<std::uint8_t>(std::lround(255 * v));
      }
    }
  }
  return img;
}

void write_pgm(const PgmImage& image, const std::filesystem::path& path) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  write_text_file(path, out);
}

PgmImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P5") throw IngestionError(path.string() + ": not a binary PGM");
  PgmImage img;
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    if (token() != "255") throw IngestionError(path.string() + ": maxval must be 255");
  } catch (const std::logic_error&) {
    throw IngestionError(path.string() + ": malformed PGM header");
  }
  ++pos;  // single whitespace byte before the raster
  if (bytes.size() - std::min(pos, bytes.size()) != img.width * img.height) {
    throw IngestionError(path.string() + ": raster size does not match the header");
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

void write_sample_grid(const Tensor& images, std::size_t cols, const std::filesystem::path& path) {
  write_pgm(tile_images(images, cols), path);
}

}  // namespace vaelab::inline VAELAB_NS
