#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nctj/model.hpp"

namespace nctj::harness {

// NCTJ checkpoint: magic "NCTJ", u32 LE format version, u64 LE header
// length, JSON header (architecture, layer list, parameter table with byte
// counts, epoch, seed provenance), then raw little-endian f32 parameter
// blobs in header order. Round trips are bit-exact; all header/byte
// accounting is validated before any parameter is loaded.
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  int epoch = 0;
  std::string seeds_json;                  // provenance echo, free-form JSON object
  std::optional<uint64_t> etf_seed;        // present when the head is a frozen ETF
  std::optional<std::string> etf_stream_label;
};

void save_checkpoint(const train::Model& model, const CheckpointMeta& meta,
                     const std::string& path);

struct LoadedCheckpoint {
  train::Model model;
  CheckpointMeta meta;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace nctj::harness
