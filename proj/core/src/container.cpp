#include "rohm/container.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace rohm {

namespace {

constexpr char kMagic[4] = {'R', 'O', 'H', 'M'};

template <typename T>
void write_pod(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is, const std::filesystem::path& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("container: truncated file " + path.string());
  return v;
}

}  // namespace

void write_container(const std::filesystem::path& path, const NamedArrays& arrays) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("container: cannot open " + path.string() + " for write");
  os.write(kMagic, 4);
  write_pod<uint32_t>(os, kContainerVersion);
  write_pod<uint32_t>(os, static_cast<uint32_t>(arrays.size()));
  for (const auto& [name, raw] : arrays) {
    Tensor t = raw.detach().cpu().contiguous();
    uint32_t dtype;
    if (t.scalar_type() == torch::kUInt8) {
      dtype = 1;
    } else {
      t = t.to(torch::kFloat32).contiguous();
      dtype = 0;
    }
    write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(os, dtype);
    write_pod<uint32_t>(os, static_cast<uint32_t>(t.dim()));
    for (int64_t d = 0; d < t.dim(); ++d) write_pod<int64_t>(os, t.size(d));
    os.write(reinterpret_cast<const char*>(t.data_ptr()),
             static_cast<std::streamsize>(t.numel() * t.element_size()));
  }
  if (!os) throw IoError("container: write failed for " + path.string());
}

NamedArrays read_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("container: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("container: bad magic in " + path.string());
  const auto version = read_pod<uint32_t>(is, path);
  if (version != kContainerVersion)
    throw IoError("container: unsupported version " + std::to_string(version) + " in " +
                  path.string() + " (expected " + std::to_string(kContainerVersion) + ")");
  const auto count = read_pod<uint32_t>(is, path);
  NamedArrays out;
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<uint32_t>(is, path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw IoError("container: truncated name in " + path.string());
    const auto dtype = read_pod<uint32_t>(is, path);
    if (dtype > 1) throw IoError("container: unknown dtype in " + path.string());
    const auto ndim = read_pod<uint32_t>(is, path);
    std::vector<int64_t> shape(ndim);
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape[d] = read_pod<int64_t>(is, path);
      if (shape[d] < 0) throw IoError("container: negative dim in " + path.string());
      numel *= shape[d];
    }
    auto opts = dtype == 0 ? torch::dtype(torch::kFloat32) : torch::dtype(torch::kUInt8);
    Tensor t = torch::empty(shape, opts);
    is.read(reinterpret_cast<char*>(t.data_ptr()),
            static_cast<std::streamsize>(numel * t.element_size()));
    if (!is) throw IoError("container: truncated payload for '" + name + "' in " + path.string());
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace rohm
