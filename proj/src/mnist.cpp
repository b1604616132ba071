#include "vaelab/mnist.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include "vaelab/error.hpp"

namespace vaelab::inline VAELAB_NS {

namespace {

constexpr std::size_t kSide = 28;

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

// Validates magic and body length; returns the declared item count.
std::size_t check_header(std::span<const std::uint8_t> bytes, std::uint32_t magic, std::size_t header,
                         const std::string& what) {
  if (bytes.size() < 4) throw IdxTruncatedError(what + ": file too short for an IDX header");
  const std::uint32_t got = be32(bytes, 0);
  if (got != magic) {
    char buf[64];
    std::snprintf(buf, sizeof buf, ": bad magic 0x%08x, expected 0x%08x", got, magic);
    throw IdxBadMagicError(what + buf);
  }
  if (bytes.size() < header) throw IdxTruncatedError(what + ": file too short for an IDX header");
  return be32(bytes, 4);
}

void check_body(std::size_t have, std::size_t count, std::size_t per_item, const std::string& what) {
  const std::size_t need = count * per_item;
  if (have < need) {
    throw IdxTruncatedError(what + ": header declares " + std::to_string(count) + " items but the body holds only " +
                            std::to_string(have / per_item));
  }
  if (have > need) {
    throw IdxCountMismatchError(what + ": header declares " + std::to_string(count) +
                                " items but the body holds " + std::to_string(have - need) + " extra bytes");
  }
}

}  // namespace

Tensor parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& what) {
  const std::size_t count = check_header(bytes, kIdxImagesMagic, 16, what);
  const std::size_t rows = be32(bytes, 8), cols = be32(bytes, 12);
  if (rows != kSide || cols != kSide) {
    throw IdxDimensionError(what + ": images are " + std::to_string(rows) + "x" + std::to_string(cols) +
                            ", expected 28x28");
  }
  check_body(bytes.size() - 16, count, kSide * kSide, what);
  if (count == 0) throw IdxCountMismatchError(what + ": no images");
  Tensor out({count, kSide * kSide});
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(bytes[16 + i] / 255.0);
  return out;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes, const std::string& what) {
  const std::size_t count = check_header(bytes, kIdxLabelsMagic, 8, what);
  check_body(bytes.size() - 8, count, 1, what);
  std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.end());
  for (auto l : labels) {
    if (l > 9) throw IngestionError(what + ": label " + std::to_string(l) + " outside 0..9");
  }
  return labels;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset load_mnist(const std::filesystem::path& dir) {
  auto images = [&](const char* name, std::size_t expect) {
    const auto path = dir / name;
    Tensor t = parse_idx_images(read_file_bytes(path), path.string());
    if (t.dim(0) != expect) {
      throw IdxCountMismatchError(path.string() + ": " + std::to_string(t.dim(0)) + " images, expected " +
                                  std::to_string(expect));
    }
    return t;
  };
  auto labels = [&](const char* name, std::size_t expect) {
    const auto path = dir / name;
    auto l = parse_idx_labels(read_file_bytes(path), path.string());
    if (l.size() != expect) {
      throw IdxCountMismatchError(path.string() + ": " + std::to_string(l.size()) + " labels, expected " +
                                  std::to_string(expect));
    }
    return l;
  };
  Dataset d;
  d.train_images = images("train-images-idx3-ubyte", kMnistTrainCount);
  d.train_labels = labels("train-labels-idx1-ubyte", kMnistTrainCount);
  d.test_images = images("t10k-images-idx3-ubyte", kMnistTestCount);
  d.test_labels = labels("t10k-labels-idx1-ubyte", kMnistTestCount);
  return d;
}

Dataset take_prefix(const Dataset& data, std::size_t train_n, std::size_t test_n) {
  if (train_n == 0 || train_n > data.train_count() || test_n == 0 || test_n > data.test_count()) {
    throw ContractError("prefix " + std::to_string(train_n) + "/" + std::to_string(test_n) +
                        " outside the dataset " + std::to_string(data.train_count()) + "/" +
                        std::to_string(data.test_count()));
  }
  Dataset d;
  d.train_images = data.train_images.rows(0, train_n);
  d.train_labels.assign(data.train_labels.begin(), data.train_labels.begin() + static_cast<std::ptrdiff_t>(train_n));
  d.test_images = data.test_images.rows(0, test_n);
  d.test_labels.assign(data.test_labels.begin(), data.test_labels.begin() + static_cast<std::ptrdiff_t>(test_n));
  return d;
}

}  // namespace vaelab::inline VAELAB_NS
