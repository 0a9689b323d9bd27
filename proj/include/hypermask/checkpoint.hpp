#pragma once

#include <string>

#include "hypermask/trainer.hpp"

namespace hypermask {

// Directory-based checkpoint: manifest.json with config, layout, and per-tensor
// CRCs plus one raw little-endian f64 row-major file per tensor. Round trips
// are bit-exact, including the training RNG stream.
inline constexpr int kCheckpointFormatVersion = 1;

void checkpoint_write(const TrainedState& state, const std::string& dir);

// Throws FormatError on a missing/incompatible manifest and DataError when a
// tensor file fails its CRC or size check.
TrainedState checkpoint_read(const std::string& dir);

}  // namespace hypermask
