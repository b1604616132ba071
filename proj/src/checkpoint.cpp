#include "vaelab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vaelab/error.hpp"
#include "vaelab/mnist.hpp"

namespace vaelab::inline VAELAB_NS {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& what) : bytes_(bytes), what_(what) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(bytes_[pos_ + i])} << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError(what_ + ": truncated at byte " + std::to_string(pos_));
  }

  const std::string& bytes_;
  const std::string& what_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, static_cast<std::uint32_t>(ckpt.tag.size()));
  out += ckpt.tag;
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, value] : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(value.rank()));
    for (auto d : value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (auto v : value.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& what) {
  if (bytes.size() < sizeof kCheckpointMagic ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw CheckpointError(what + ": not a vaelab checkpoint (bad magic)");
  }
  Reader r(bytes, what);
  r.str(sizeof kCheckpointMagic);
  Checkpoint ckpt;
  ckpt.tag = r.str(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = r.str(r.u32());
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u32();
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    if (n == 0) throw CheckpointError(what + ": tensor '" + name + "' has a zero dimension");
    Tensor value(shape);
    for (auto& v : value.data()) v = static_cast<Real>(std::bit_cast<float>(r.u32()));
    try {
      ckpt.tensors.add(std::move(name), std::move(value));
    } catch (const ContractError& e) {
      throw CheckpointError(what + ": " + e.what());
    }
  }
  if (!r.done()) throw CheckpointError(what + ": trailing bytes after " + std::to_string(count) + " tensors");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto raw = read_file_bytes(path);
  return decode_checkpoint(std::string(raw.begin(), raw.end()), path.string());
}

void save_model(const VaeModel& model, const std::filesystem::path& path) {
  save_checkpoint({to_string(model.architecture), model.params}, path);
}

VaeModel load_model(const std::filesystem::path& path, std::optional<Architecture> expect) {
  Checkpoint ckpt = load_checkpoint(path);
  Architecture arch;
  try {
    arch = parse_architecture(ckpt.tag);
  } catch (const ValidationError&) {
    throw CheckpointError(path.string() + ": unknown architecture tag '" + ckpt.tag + "'");
  }
  if (expect && *expect != arch) {
    throw CheckpointError(path.string() + ": checkpoint holds a " + ckpt.tag + " model, expected " +
                          to_string(*expect));
  }
  const auto desc = vae_descriptor(arch);
  if (ckpt.tensors.size() != desc.size()) {
    throw CheckpointError(path.string() + ": " + std::to_string(ckpt.tensors.size()) + " tensors, a " + ckpt.tag +
                          " model has " + std::to_string(desc.size()));
  }
  for (std::size_t i = 0; i < desc.size(); ++i) {
    const auto& e = ckpt.tensors[i];
    if (e.name != desc[i].name || e.value.shape() != desc[i].shape) {
      throw CheckpointError(path.string() + ": tensor " + std::to_string(i) + " is '" + e.name + "' " +
                            shape_str(e.value.shape()) + ", expected '" + desc[i].name + "' " +
                            shape_str(desc[i].shape));
    }
  }
  return {arch, std::move(ckpt.tensors)};
}

std::size_t checkpoint_size(const std::string& tag, const ArchitectureDescriptor& tensors) {
  std::size_t n = sizeof kCheckpointMagic + 4 + tag.size() + 4;
  for (const auto& spec : tensors) n += 4 + spec.name.size() + 4 + 4 * spec.shape.size() + 4 * shape_size(spec.shape);
  return n;
}

}  // namespace vaelab::inline VAELAB_NS
