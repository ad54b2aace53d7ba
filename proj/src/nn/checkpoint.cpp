#include "hmgdyn/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hmgdyn/error.hpp"

namespace hmgdyn::nn {

namespace {

constexpr char kMagic[8] = {'H', 'M', 'G', 'D', 'Y', 'N', 'C', 'K'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error(ErrorKind::IoError, "truncated checkpoint");
  return v;
}

std::string get_string(std::istream& is, std::uint64_t n) {
  if (n > (1ULL << 32)) throw Error(ErrorKind::IoError, "corrupt checkpoint string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw Error(ErrorKind::IoError, "truncated checkpoint");
  return s;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::IoError, "cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, ckpt.version);
  put<std::int64_t>(os, ckpt.iteration);
  put<std::uint64_t>(os, ckpt.config_json.size());
  os.write(ckpt.config_json.data(), static_cast<std::streamsize>(ckpt.config_json.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put<std::int32_t>(os, d);
    put<std::uint64_t>(os, t.values.size());
    os.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  }
  if (!os) throw Error(ErrorKind::IoError, "failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::IoError, "cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw Error(ErrorKind::IoError, path.string() + " is not a checkpoint file");
  }
  Checkpoint ckpt;
  ckpt.version = get<std::uint32_t>(is);
  if (ckpt.version != Checkpoint::kVersion) {
    throw Error(ErrorKind::IoError, "unsupported checkpoint version " + std::to_string(ckpt.version));
  }
  ckpt.iteration = get<std::int64_t>(is);
  ckpt.config_json = get_string(is, get<std::uint64_t>(is));
  const auto count = get<std::uint32_t>(is);
  ckpt.tensors.resize(count);
  for (auto& t : ckpt.tensors) {
    t.name = get_string(is, get<std::uint32_t>(is));
    const auto ndim = get<std::uint32_t>(is);
    if (ndim > 8) throw Error(ErrorKind::IoError, "corrupt tensor rank in checkpoint");
    t.dims.resize(ndim);
    std::uint64_t expected = 1;
    for (auto& d : t.dims) {
      d = get<std::int32_t>(is);
      if (d < 0) throw Error(ErrorKind::IoError, "negative tensor dimension in checkpoint");
      expected *= static_cast<std::uint64_t>(d);
    }
    const auto n = get<std::uint64_t>(is);
    if (n != expected) throw Error(ErrorKind::IoError, "tensor " + t.name + " size does not match its dims");
    t.values.resize(n);
    is.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!is) throw Error(ErrorKind::IoError, "truncated checkpoint tensor " + t.name);
  }
  return ckpt;
}

}  // namespace hmgdyn::nn
