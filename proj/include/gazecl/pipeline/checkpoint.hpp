#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "gazecl/encoder/encoder.hpp"
#include "gazecl/numcore/adam.hpp"
#include "gazecl/pipeline/config.hpp"

namespace gazecl::pipeline {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Complete training state: parameters, optimizer moments, normalization
// buffers, the config snapshot and loop counters. save -> load -> save is
// byte-identical.
struct Checkpoint {
  static constexpr i64 kFormatVersion = 1;

  TrainConfig config;
  i64 epoch = 0;      // epochs completed
  i64 iteration = 0;  // optimizer steps completed
  encoder::EncoderParams<float> params;
  numcore::AdamState<float> adam;
};

// Text header (format version, config snapshot, counters, tensor manifest
// with names/shapes/offsets) followed by raw little-endian float32 data.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gazecl::pipeline
