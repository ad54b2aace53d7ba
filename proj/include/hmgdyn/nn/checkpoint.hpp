#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hmgdyn::nn {

struct NamedTensor {
  std::string name;
  std::vector<std::int32_t> dims;
  std::vector<float> values;
};

// Versioned binary container; layout documented in docs/checkpoint.md.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  std::int64_t iteration = 0;
  std::string config_json;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace hmgdyn::nn
