#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "feedrec/tensor.hpp"

namespace feedrec::nn {

// Binary named-tensor container (little-endian host layout):
//   "FRCKPT01" | u64 count | per tensor: u32 name length, name bytes,
//   u32 rank, u64 dims[rank], f64 values[prod(dims)]
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);

// Loads into an already-built store. Throws std::runtime_error when a tensor
// is missing, unexpected, or has a different shape.
void load_checkpoint(const std::filesystem::path& path, ParamStore& params);

// Plain key=value manifest written next to checkpoints.
void save_manifest(const std::filesystem::path& path, const std::map<std::string, std::string>& entries);
std::map<std::string, std::string> load_manifest(const std::filesystem::path& path);

}  // namespace feedrec::nn
