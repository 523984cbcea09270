#pragma once

#include <cstdint>
#include <string>

#include "retouch/model.hpp"
#include "retouch/netcore.hpp"

namespace retouch {

/// Binary checkpoint: "IRTC" magic, format version, architecture descriptor,
/// named f32 tensors in canonical order, then optional optimizer state.
/// All multi-byte values little-endian.
struct CheckpointData {
  Model<float> model;
  bool has_adam = false;
  net::Adam<float> adam;
};

void save_checkpoint(const std::string& path, Model<float>& model,
                     const net::Adam<float>* adam = nullptr);

CheckpointData load_checkpoint(const std::string& path);

/// Order-sensitive FNV-1a hash over every parameter tensor's f32 payload;
/// binds reference libraries to the checkpoint that produced their latents.
std::uint64_t model_fingerprint(Model<float>& model);

}  // namespace retouch
