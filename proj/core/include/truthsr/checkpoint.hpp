#pragma once

#include "truthsr/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace truthsr {

/// A trained model plus the item vocabulary it ranks over.
struct Checkpoint {
  ModelParams<float> params;
  std::vector<std::string> item_names;
};

/// Writes the TSRM1 format: magic "TSRM1\n", one JSON header line (model
/// config, item names, ordered tensor manifest with shapes), then the f32
/// little-endian tensors in manifest order. Round-trips bit-exactly.
void save_checkpoint(const ModelParams<float>& params,
                     const std::vector<std::string>& item_names,
                     const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace truthsr
