#include "endo/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "endo/binary_io.hpp"

namespace endo {

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, std::strlen(kCheckpointMagic));
  for (const auto& b : params.blocks()) {
    le::put_u32(os, static_cast<std::uint32_t>(b.name.size()));
    os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    le::put_u32(os, static_cast<std::uint32_t>(b.value.rank()));
    for (auto d : b.value.shape()) le::put_u32(os, static_cast<std::uint32_t>(d));
    for (double v : b.value.data()) le::put_f64(os, v);
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

NamedTensors read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  const std::size_t magic_len = std::strlen(kCheckpointMagic);
  std::string magic(magic_len, '\0');
  if (!is.read(magic.data(), static_cast<std::streamsize>(magic_len)) || magic != kCheckpointMagic) {
    throw std::runtime_error("not a parameter checkpoint: " + path.string());
  }
  NamedTensors out;
  while (is.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t name_len = le::get_u32(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw std::runtime_error("truncated checkpoint name");
    const std::uint32_t rank = le::get_u32(is);
    Shape shape(rank);
    for (auto& d : shape) d = le::get_u32(is);
    Tensor t(shape);
    for (auto& v : t.data()) v = le::get_f64(is);
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

void load_checkpoint(const std::filesystem::path& path, ParamStore& params) {
  NamedTensors loaded = read_checkpoint(path);
  for (auto& block : params.blocks()) {
    bool found = false;
    for (auto& [name, t] : loaded) {
      if (name != block.name) continue;
      if (!t.same_shape(block.value)) {
        throw ShapeError("checkpoint block '" + name + "' has shape " + shape_str(t.shape()) +
                         ", model expects " + shape_str(block.value.shape()));
      }
      block.value = t;
      found = true;
      break;
    }
    if (!found) throw std::runtime_error("checkpoint missing block '" + block.name + "'");
  }
}

}  // namespace endo
