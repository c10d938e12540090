#ifndef VMF_CHECKPOINT_HPP
#define VMF_CHECKPOINT_HPP

#include "vmf/tensor.hpp"

#include <json.hpp>

#include <filesystem>

namespace vmf {

struct Checkpoint {
  ParameterStore params;
  nlohmann::json meta = nlohmann::json::object();
};

/// Path of the raw little-endian f64 sidecar for a manifest at `manifest`.
std::filesystem::path checkpointBlobPath(const std::filesystem::path& manifest);

/// Writes the JSON manifest (version, names, shapes, byte offsets, meta) to
/// `manifest` and all slot values, in name order, to the sidecar blob.
void saveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& manifest);

/// Reads a checkpoint, checking every shape and offset against the blob.
/// Throws ParseError on malformed manifests or size mismatches.
Checkpoint loadCheckpoint(const std::filesystem::path& manifest);

}  // namespace vmf

#endif  // VMF_CHECKPOINT_HPP
