#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "sketchinpaint/model.hpp"

namespace sketchinpaint {

constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    std::int64_t step = 0;
    std::string rng_state;        // textual std::mt19937_64 state, empty when unknown
    std::string config_snapshot;  // serialized TrainConfig, empty when unknown
};

struct LoadedCheckpoint {
    std::unique_ptr<SketchInpaintModel> model;
    ModelConfig config;
    CheckpointMeta meta;
};

// Binary layout: magic "SKINPCKP", u32 version, u64 header length, JSON header
// (model config + meta), u32 parameter count, then per parameter: u32 name length,
// name, u8 group, 4 x i32 shape, raw little-endian f64 values; a trailing u32 CRC-32
// covers every preceding byte.
void save_checkpoint(const std::string& path, const SketchInpaintModel& model, const CheckpointMeta& meta = {});

// Throws IntegrityError for truncated or corrupt files, VersionError for a format
// version or (when `expected` is given) a model configuration that does not
// match, naming the first mismatched field.
LoadedCheckpoint load_checkpoint(const std::string& path, const std::optional<ModelConfig>& expected = std::nullopt);

std::string model_config_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& json);
// Name of the first differing field, or empty when equal.
std::string first_config_mismatch(const ModelConfig& a, const ModelConfig& b);

}  // namespace sketchinpaint
