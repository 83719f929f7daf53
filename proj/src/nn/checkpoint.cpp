#include "flamesentinel/nn/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include "flamesentinel/core/binary_io.hpp"

namespace flamesentinel::nn {

namespace fs = std::filesystem;

namespace {
constexpr const char* kFormat = "flamesentinel-checkpoint";
constexpr int kVersion = 1;
}  // namespace

const Tensor<float>* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.tensor;
  }
  return nullptr;
}

const Tensor<float>& Checkpoint::at(std::string_view name) const {
  if (const auto* t = find(name)) return *t;
  throw FormatError("checkpoint has no tensor named '" + std::string(name) + "'");
}

fs::path blob_path_for(const fs::path& manifest) {
  fs::path blob = manifest;
  blob += ".bin";
  return blob;
}

void save_checkpoint(const fs::path& manifest, const Checkpoint& checkpoint) {
  const fs::path blob = blob_path_for(manifest);
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  {
    std::ofstream out(blob, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + blob.string());
    for (const auto& t : checkpoint.tensors) {
      entries.push_back({{"name", t.name}, {"shape", t.tensor.shape()}, {"offset", offset}});
      binary_io::write_f32s(out, t.tensor.values());
      offset += t.tensor.size() * sizeof(float);
    }
    if (!out) throw Error("failed writing " + blob.string());
  }
  const nlohmann::json doc = {{"format", kFormat},
                              {"version", kVersion},
                              {"blob", blob.filename().string()},
                              {"header", checkpoint.header},
                              {"tensors", entries}};
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw Error("cannot write " + manifest.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error("failed writing " + manifest.string());
}

Checkpoint load_checkpoint(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw FormatError("cannot open checkpoint " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }
  Checkpoint ck;
  std::vector<std::pair<std::string, std::pair<Shape, std::uint64_t>>> layout;
  std::string blob_name;
  try {
    if (doc.at("format").get<std::string>() != kFormat || doc.at("version").get<int>() != kVersion) {
      throw FormatError("unsupported checkpoint format in " + manifest.string());
    }
    blob_name = doc.at("blob").get<std::string>();
    ck.header = doc.at("header");
    for (const auto& e : doc.at("tensors")) {
      layout.push_back({e.at("name").get<std::string>(),
                        {e.at("shape").get<Shape>(), e.at("offset").get<std::uint64_t>()}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed checkpoint manifest: " + std::string(e.what()));
  }

  const fs::path blob = manifest.parent_path() / blob_name;
  std::ifstream bin(blob, std::ios::binary);
  if (!bin) throw FormatError("cannot open checkpoint blob " + blob.string());
  bin.seekg(0, std::ios::end);
  const auto blob_size = static_cast<std::uint64_t>(bin.tellg());
  for (auto& [name, entry] : layout) {
    const auto& [shape, offset] = entry;
    if (shape.empty() || element_count(shape) == 0) throw FormatError("tensor '" + name + "' has an empty shape");
    const std::uint64_t bytes = element_count(shape) * sizeof(float);
    if (offset + bytes > blob_size) {
      throw FormatError("tensor '" + name + "' extends past the end of " + blob.string());
    }
    Tensor<float> t(shape);
    bin.seekg(static_cast<std::streamoff>(offset));
    if (!binary_io::read_f32s(bin, t.values())) throw FormatError("short read for tensor '" + name + "'");
    for (float v : t.values()) {
      if (!std::isfinite(v)) throw FormatError("tensor '" + name + "' holds non-finite values");
    }
    ck.tensors.push_back({name, std::move(t)});
  }
  return ck;
}

}  // namespace flamesentinel::nn
