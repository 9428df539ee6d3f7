#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drbl/classifier.hpp"
#include "drbl/trainer.hpp"

namespace drbl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  ModelConfig config;
  std::vector<NamedTensor> tensors;
  std::optional<AdamState<float>> adam;
  double best_dev_accuracy = 0.0;
  std::uint64_t seed = 0;
};

Checkpoint make_checkpoint(const ModelParams<float>& params, const AdamState<float>* adam,
                           double best_dev_accuracy, std::uint64_t seed);

/// Rebuilds the model; tensor names and shapes must match the stored config.
ModelParams<float> restore_model(const Checkpoint& checkpoint, const Vocabulary& vocab);

/// Layout (little endian): "DRBL", u32 version, u32 length + config text,
/// f64 best dev accuracy, u64 seed, u32 tensor count, then per tensor u32 name
/// length, name, u32 rank, u64 extents, f32 values; finally u8 optimizer flag
/// followed by the optimizer hyperparameters, step and moment tensors.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

}  // namespace drbl
