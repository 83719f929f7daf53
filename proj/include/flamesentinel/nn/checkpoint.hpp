#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flamesentinel/core/tensor.hpp"

namespace flamesentinel::nn {

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

/// Checkpoint on disk: a JSON manifest
///   {"format": "flamesentinel-checkpoint", "version": 1, "blob": <file name>,
///    "header": {...}, "tensors": [{"name", "shape", "offset"}, ...]}
/// next to a raw little-endian f32 blob (<manifest>.bin). Offsets are in bytes.
struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Tensor<float>* find(std::string_view name) const;
  const Tensor<float>& at(std::string_view name) const;
};

std::filesystem::path blob_path_for(const std::filesystem::path& manifest);

void save_checkpoint(const std::filesystem::path& manifest, const Checkpoint& checkpoint);

/// Throws FormatError on a malformed manifest, a tensor extending past the
/// blob, or non-finite values.
Checkpoint load_checkpoint(const std::filesystem::path& manifest);

}  // namespace flamesentinel::nn
