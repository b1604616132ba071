#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "vaelab/param_set.hpp"
#include "vaelab/vae.hpp"

namespace vaelab::inline VAELAB_NS {

/// Container layout, all integers u32 little-endian:
///   "VAELAB01" | tag length, tag bytes | tensor count |
///   per tensor: name length, name bytes, rank, dims..., f32 data
struct Checkpoint {
  std::string tag;
  ParamSet tensors;
};

inline constexpr char kCheckpointMagic[8] = {'V', 'A', 'E', 'L', 'A', 'B', '0', '1'};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& what);

/// Writes through a temporary file and rename, so readers never see a partial file.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save_model(const VaeModel& model, const std::filesystem::path& path);
/// Parameter names and shapes must match the tagged architecture exactly;
/// `expect` additionally pins the architecture.
VaeModel load_model(const std::filesystem::path& path, std::optional<Architecture> expect = std::nullopt);

/// Bytes written for a given tag and tensor set.
std::size_t checkpoint_size(const std::string& tag, const ArchitectureDescriptor& tensors);

}  // namespace vaelab::inline VAELAB_NS
